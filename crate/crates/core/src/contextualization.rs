//! Placing the predicted count among the other count-modified noun phrases.
//!
//! The representative CNP is the most confident CNP whose count lies within
//! `±alpha` of the prediction. Every other CNP is compared to it:
//!
//! 1. modifier-phrase similarity below the threshold: incomparable
//! 2. count within `±alpha` of the prediction: synonym
//! 3. count below the prediction: subgroup
//! 4. otherwise (count above the band): incomparable

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::SpanRef;
use crate::count::{decimal_ratio, Count, Rational};
use crate::inference::Prediction;
use crate::providers::{clamp_signed, ProviderError, SimilarityProvider};
use crate::quantity::{CountSpan, Quantity};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CnpCategory {
    Representative,
    Synonym,
    Subgroup,
    Incomparable,
}

impl CnpCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            CnpCategory::Representative => "representative",
            CnpCategory::Synonym => "synonym",
            CnpCategory::Subgroup => "subgroup",
            CnpCategory::Incomparable => "incomparable",
        }
    }
}

impl fmt::Display for CnpCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CnpCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [CnpCategory::Representative, CnpCategory::Synonym, CnpCategory::Subgroup, CnpCategory::Incomparable]
            .into_iter()
            .find(|c| c.as_str() == s.trim().to_lowercase())
            .ok_or_else(|| format!("unknown CNP category {s:?}"))
    }
}

/// A count-modified noun phrase such as "17 regional languages".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cnp {
    /// The phrase as it appeared, count included.
    pub text: String,
    pub quantity: Quantity,
    pub modifier_phrase: String,
    pub confidence: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<CnpCategory>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<SpanRef>,
}

impl Cnp {
    /// A CNP from a split answer span; `None` if it has no modifier phrase.
    pub fn from_count_span(span: &CountSpan, confidence: f64) -> Option<Self> {
        if span.modifier_phrase.is_empty() {
            return None;
        }
        Some(Cnp {
            text: span.text.clone(),
            quantity: span.quantity.clone(),
            modifier_phrase: span.modifier_phrase.clone(),
            confidence,
            category: None,
            source: span.source_span.clone(),
        })
    }

    pub fn value(&self) -> Count {
        self.quantity.value
    }

    fn canonical_cmp(&self, other: &Self) -> Ordering {
        self.text
            .cmp(&other.text)
            .then_with(|| self.source.cmp(&other.source))
            .then_with(|| self.confidence.total_cmp(&other.confidence))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContextConfig {
    pub alpha: f64,
    pub similarity_threshold: f64,
}

impl Default for ContextConfig {
    fn default() -> Self {
        ContextConfig { alpha: 0.30, similarity_threshold: 0.0 }
    }
}

impl ContextConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(format!("alpha {} outside [0, 1]", self.alpha));
        }
        if !(-1.0..=1.0).contains(&self.similarity_threshold) {
            return Err(format!("similarity threshold {} outside [-1, 1]", self.similarity_threshold));
        }
        Ok(())
    }

    fn band(&self) -> Rational {
        decimal_ratio(self.alpha).unwrap_or_default()
    }

    /// `|value - prediction| <= alpha * prediction`, exact.
    pub fn in_band(&self, value: &Count, prediction: &Count) -> bool {
        value.within(prediction, self.band())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextualizedAnswer {
    pub prediction: Prediction,
    pub cnp_rep: Option<Cnp>,
    pub synonyms: Vec<Cnp>,
    pub subgroups: Vec<Cnp>,
    pub incomparables: Vec<Cnp>,
    /// CNPs left unclassified because no representative qualified.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub uncategorized: Vec<Cnp>,
    pub alpha: f64,
    pub similarity_threshold: f64,
}

/// Most confident CNP within `±alpha` of the prediction.
/// Ties: count closest to the prediction, then smaller count.
pub fn select_representative<'a>(cnps: &'a [Cnp], prediction: &Prediction, config: &ContextConfig) -> Option<&'a Cnp> {
    let target = prediction.value;
    cnps.iter().filter(|c| config.in_band(&c.value(), &target)).min_by(|a, b| {
        b.confidence
            .total_cmp(&a.confidence)
            .then_with(|| a.value().abs_diff(&target).cmp(&b.value().abs_diff(&target)))
            .then_with(|| a.value().cmp(&b.value()))
            .then_with(|| a.canonical_cmp(b))
    })
}

/// Category for a CNP given its similarity to the representative.
pub fn category_for(similarity: f64, cnp: &Cnp, prediction: &Prediction, config: &ContextConfig) -> CnpCategory {
    if similarity < config.similarity_threshold {
        CnpCategory::Incomparable
    } else if config.in_band(&cnp.value(), &prediction.value) {
        CnpCategory::Synonym
    } else if cnp.value() < prediction.value {
        CnpCategory::Subgroup
    } else {
        CnpCategory::Incomparable
    }
}

/// Classifies one CNP against the representative.
pub fn classify(
    cnp: &Cnp,
    cnp_rep: &Cnp,
    prediction: &Prediction,
    config: &ContextConfig,
    similarity: &dyn SimilarityProvider,
) -> Result<CnpCategory, ProviderError> {
    let s = similarity.similarity(&cnp.modifier_phrase, &cnp_rep.modifier_phrase)?;
    Ok(category_for(clamp_signed("similarity", s), cnp, prediction, config))
}

/// Selects the representative and classifies every other CNP.
///
/// Similarities are requested in one batch. Without a representative all
/// CNPs are returned in `uncategorized`.
pub fn contextualize(
    cnps: &[Cnp],
    prediction: &Prediction,
    config: &ContextConfig,
    similarity: &dyn SimilarityProvider,
) -> Result<ContextualizedAnswer, ProviderError> {
    let mut answer = ContextualizedAnswer {
        prediction: prediction.clone(),
        cnp_rep: None,
        synonyms: Vec::new(),
        subgroups: Vec::new(),
        incomparables: Vec::new(),
        uncategorized: Vec::new(),
        alpha: config.alpha,
        similarity_threshold: config.similarity_threshold,
    };
    let mut ordered: Vec<Cnp> = cnps.to_vec();
    ordered.sort_by(|a, b| b.confidence.total_cmp(&a.confidence).then_with(|| a.canonical_cmp(b)));

    let Some(rep) = select_representative(&ordered, prediction, config).cloned() else {
        answer.uncategorized = ordered;
        return Ok(answer);
    };
    let rep_index = ordered.iter().position(|c| *c == rep).expect("representative comes from the list");
    let others: Vec<Cnp> = ordered.into_iter().enumerate().filter(|&(i, _)| i != rep_index).map(|(_, c)| c).collect();
    let phrases: Vec<&str> = others.iter().map(|c| c.modifier_phrase.as_str()).collect();
    let sims = similarity.similarities(&rep.modifier_phrase, &phrases)?;
    if sims.len() != others.len() {
        return Err(ProviderError::Protocol {
            operation: "similarity".into(),
            message: format!("expected {} scores, got {}", others.len(), sims.len()),
        });
    }
    for (mut cnp, s) in others.into_iter().zip(sims) {
        let category = category_for(clamp_signed("similarity", s), &cnp, prediction, config);
        cnp.category = Some(category);
        match category {
            CnpCategory::Synonym => answer.synonyms.push(cnp),
            CnpCategory::Subgroup => answer.subgroups.push(cnp),
            CnpCategory::Incomparable => answer.incomparables.push(cnp),
            CnpCategory::Representative => unreachable!("category_for never yields representative"),
        }
    }
    let mut rep = rep;
    rep.category = Some(CnpCategory::Representative);
    answer.cnp_rep = Some(rep);
    Ok(answer)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::count::Confidence;
    use crate::inference::{CountCandidate, Strategy};
    use crate::providers::{OfflineSimilarity, TableSimilarity};
    use crate::quantity::split_cnp;
    use std::sync::Arc;

    fn prediction(v: u64) -> Prediction {
        let c = CountCandidate::new(Count::from_integer(v), Confidence::ONE, "p", 1);
        Prediction { value: c.value, strategy: Strategy::WeightedMedian, support: vec![c] }
    }

    fn cnp(text: &str, confidence: f64) -> Cnp {
        Cnp::from_count_span(&split_cnp(text).unwrap(), confidence).unwrap()
    }

    fn stub() -> TableSimilarity {
        TableSimilarity::from_pairs(
            [
                ("languages", "dialects", 0.6),
                ("languages", "major regional languages", 0.6),
                ("languages", "official languages", 0.6),
                ("languages", "ethnic groups", -0.2),
                ("languages", "native speakers", -0.3),
            ],
            Arc::new(OfflineSimilarity),
        )
    }

    #[test]
    fn representative_is_most_confident_in_band() {
        let cnps = [cnp("estimated 700 languages", 0.9), cnp("5 official languages", 0.95)];
        let rep = select_representative(&cnps, &prediction(700), &ContextConfig::default()).unwrap();
        assert_eq!(rep.text, "estimated 700 languages");
    }

    #[test]
    fn no_representative_outside_band() {
        let cnps = [cnp("5 official languages", 0.8), cnp("2000 ethnic groups", 0.8)];
        assert!(select_representative(&cnps, &prediction(700), &ContextConfig::default()).is_none());
        let ctx = contextualize(&cnps, &prediction(700), &ContextConfig::default(), &OfflineSimilarity).unwrap();
        assert!(ctx.cnp_rep.is_none());
        assert_eq!(ctx.uncategorized.len(), 2);
        assert!(ctx.uncategorized.iter().all(|c| c.category.is_none()));
    }

    #[test]
    fn representative_ties_prefer_closer_then_smaller() {
        let cnps = [cnp("750 dialects", 0.5), cnp("690 tongues", 0.5), cnp("710 languages", 0.5)];
        let rep = select_representative(&cnps, &prediction(700), &ContextConfig::default()).unwrap();
        assert_eq!(rep.text, "690 tongues");
    }

    #[test]
    fn band_boundary_is_inclusive() {
        let cfg = ContextConfig::default();
        assert!(cfg.in_band(&Count::from_integer(910), &Count::from_integer(700)));
        assert!(cfg.in_band(&Count::from_integer(490), &Count::from_integer(700)));
        assert!(!cfg.in_band(&Count::from_integer(911), &Count::from_integer(700)));
        assert!(!cfg.in_band(&Count::from_integer(489), &Count::from_integer(700)));
    }

    #[test]
    fn indonesia_classification() {
        let cnps = [
            cnp("estimated 700 languages", 0.9),
            cnp("700 languages", 0.7),
            cnp("750 dialects", 0.6),
            cnp("27 major regional languages", 0.6),
            cnp("5 official languages", 0.8),
            cnp("2000 ethnic groups", 0.5),
            cnp("85 million native speakers", 0.4),
        ];
        let ctx = contextualize(&cnps, &prediction(700), &ContextConfig::default(), &stub()).unwrap();
        let texts = |v: &[Cnp]| {
            let mut t: Vec<String> = v.iter().map(|c| c.text.clone()).collect();
            t.sort();
            t
        };
        assert_eq!(ctx.cnp_rep.as_ref().unwrap().text, "estimated 700 languages");
        assert_eq!(ctx.cnp_rep.as_ref().unwrap().category, Some(CnpCategory::Representative));
        assert_eq!(texts(&ctx.synonyms), vec!["700 languages", "750 dialects"]);
        assert_eq!(texts(&ctx.subgroups), vec!["27 major regional languages", "5 official languages"]);
        assert_eq!(texts(&ctx.incomparables), vec!["2000 ethnic groups", "85 million native speakers"]);
    }

    #[test]
    fn identical_phrase_is_synonym() {
        let rep = cnp("700 languages", 0.9);
        let same = cnp("700 languages", 0.5);
        let cat = classify(&same, &rep, &prediction(700), &ContextConfig::default(), &OfflineSimilarity).unwrap();
        assert_eq!(cat, CnpCategory::Synonym);
    }

    #[test]
    fn above_band_is_never_subgroup() {
        let p = prediction(700);
        let big = cnp("7000 languages", 0.5);
        assert_eq!(category_for(0.9, &big, &p, &ContextConfig::default()), CnpCategory::Incomparable);
    }

    #[test]
    fn empty_and_single() {
        let ctx = contextualize(&[], &prediction(700), &ContextConfig::default(), &OfflineSimilarity).unwrap();
        assert!(ctx.cnp_rep.is_none() && ctx.synonyms.is_empty() && ctx.uncategorized.is_empty());
        let one = [cnp("700 languages", 0.5)];
        let ctx = contextualize(&one, &prediction(700), &ContextConfig::default(), &OfflineSimilarity).unwrap();
        assert_eq!(ctx.cnp_rep.unwrap().text, "700 languages");
        assert!(ctx.synonyms.is_empty() && ctx.subgroups.is_empty() && ctx.incomparables.is_empty());
    }

    #[test]
    fn config_validation() {
        assert!(ContextConfig { alpha: 1.5, similarity_threshold: 0.0 }.validate().is_err());
        assert!(ContextConfig { alpha: 0.3, similarity_threshold: -2.0 }.validate().is_err());
        assert!(ContextConfig::default().validate().is_ok());
    }
}
