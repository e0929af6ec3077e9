//! The wired engine: spans, counts, consolidation, contextualization and
//! instance ranking over one query and its passages.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::contextualization::{contextualize, Cnp, ContextConfig, ContextualizedAnswer};
use crate::corpus::{validate_passages, Passage, QueryRecord, SpanRef};
use crate::count::{Confidence, Count};
use crate::error::Error;
use crate::evalharness::{count_metrics, instance_metrics, cnp_accuracy, match_cnp_labels, MetricsReport};
use crate::explanation::{answer_type, extract_instances, rank, rewrite_query, RankedInstance, RankingStrategy};
use crate::inference::{consolidate, CountCandidate, Prediction, Strategy};
use crate::providers::{AnswerSpan, ProviderConfig, Providers, SpanMode};
use crate::quantity::QuantityParser;
use crate::text;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub strategy: Strategy,
    pub context: ContextConfig,
    pub explanation_strategy: RankingStrategy,
    /// Number of ranked instances kept.
    pub k: usize,
    pub provider: ProviderConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            strategy: Strategy::WeightedMedian,
            context: ContextConfig::default(),
            explanation_strategy: RankingStrategy::ContextFrequency,
            k: 10,
            provider: ProviderConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), Error> {
        self.context.validate().map_err(Error::Input)?;
        if self.k == 0 {
            return Err(Error::Input("k must be positive".into()));
        }
        self.provider.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvidenceStage {
    Count,
    Instance,
}

/// A passage snippet the answer relies on. Offsets are characters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub passage_id: String,
    pub rank: u32,
    pub char_start: usize,
    pub char_end: usize,
    pub text: String,
    pub confidence: f64,
    pub stage: EvidenceStage,
}

impl Evidence {
    fn from_span(span: &AnswerSpan, stage: EvidenceStage) -> Self {
        Evidence {
            passage_id: span.passage_id.clone(),
            rank: span.passage_rank,
            char_start: span.char_start,
            char_end: span.char_end,
            text: span.text.clone(),
            confidence: span.confidence,
            stage,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub rewritten_query: String,
    pub answer_type: String,
    pub strategy: RankingStrategy,
    pub items: Vec<RankedInstance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerPackage {
    pub query: String,
    pub prediction: Option<Prediction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contextualization: Option<ContextualizedAnswer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instances: Option<Explanation>,
    pub evidence: Vec<Evidence>,
}

/// Output of the count stage.
#[derive(Debug, Clone, PartialEq)]
pub struct CountStage {
    pub candidates: Vec<CountCandidate>,
    pub cnps: Vec<Cnp>,
    pub prediction: Option<Prediction>,
    pub evidence: Vec<Evidence>,
}

pub struct Engine {
    config: PipelineConfig,
    providers: Providers,
    parser: QuantityParser,
}

impl Engine {
    /// Builds the providers named by the configuration. Remote providers are
    /// health-checked here.
    pub fn new(config: PipelineConfig) -> Result<Self, Error> {
        config.validate()?;
        let providers = Providers::from_config(&config.provider)?;
        Ok(Self::with_providers(config, providers))
    }

    pub fn with_providers(config: PipelineConfig, providers: Providers) -> Self {
        Engine { config, providers, parser: QuantityParser::default() }
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    /// Count spans, their counts and the consolidated prediction.
    pub fn count_stage(&self, query: &str, passages: &[Passage]) -> Result<CountStage, Error> {
        validate_passages(passages).map_err(Error::Input)?;
        let spans = self.providers.spans.predict_spans(query, passages, SpanMode::Count)?;
        let mut stage = CountStage { candidates: Vec::new(), cnps: Vec::new(), prediction: None, evidence: Vec::new() };
        for span in &spans {
            check_span(span, passages)?;
            let Some(mut cs) = self.parser.split_cnp(&span.text) else {
                continue;
            };
            let source = cnp_source(span, &cs.text);
            cs.source_span = Some(source.clone());
            let confidence = Confidence::clamped(span.confidence);
            stage.candidates.push(
                CountCandidate::new(cs.quantity.value, confidence, span.passage_id.clone(), span.passage_rank)
                    .with_span(source),
            );
            stage.cnps.extend(Cnp::from_count_span(&cs, confidence.get()));
            stage.evidence.push(Evidence::from_span(span, EvidenceStage::Count));
        }
        stage.prediction = consolidate(&stage.candidates, self.config.strategy);
        Ok(stage)
    }

    /// Prediction and count evidence only.
    pub fn answer(&self, query: &str, passages: &[Passage]) -> Result<AnswerPackage, Error> {
        let stage = self.count_stage(query, passages)?;
        Ok(AnswerPackage {
            query: query.to_string(),
            prediction: stage.prediction,
            contextualization: None,
            instances: None,
            evidence: sorted(stage.evidence),
        })
    }

    /// Prediction plus CNP categorization.
    pub fn contextualize(&self, query: &str, passages: &[Passage]) -> Result<AnswerPackage, Error> {
        let stage = self.count_stage(query, passages)?;
        let contextualization = self.contextualize_stage(&stage)?;
        Ok(AnswerPackage {
            query: query.to_string(),
            prediction: stage.prediction,
            contextualization,
            instances: None,
            evidence: sorted(stage.evidence),
        })
    }

    /// Ranked instances only.
    pub fn explain(&self, query: &str, passages: &[Passage]) -> Result<AnswerPackage, Error> {
        validate_passages(passages).map_err(Error::Input)?;
        let (explanation, evidence) = self.explain_stage(query, passages)?;
        Ok(AnswerPackage {
            query: query.to_string(),
            prediction: None,
            contextualization: None,
            instances: Some(explanation),
            evidence: sorted(evidence),
        })
    }

    /// All stages.
    pub fn pipeline(&self, query: &str, passages: &[Passage]) -> Result<AnswerPackage, Error> {
        let stage = self.count_stage(query, passages)?;
        let contextualization = self.contextualize_stage(&stage)?;
        let (explanation, instance_evidence) = self.explain_stage(query, passages)?;
        let mut evidence = stage.evidence;
        evidence.extend(instance_evidence);
        Ok(AnswerPackage {
            query: query.to_string(),
            prediction: stage.prediction,
            contextualization,
            instances: Some(explanation),
            evidence: sorted(evidence),
        })
    }

    fn contextualize_stage(&self, stage: &CountStage) -> Result<Option<ContextualizedAnswer>, Error> {
        let Some(prediction) = &stage.prediction else {
            return Ok(None);
        };
        Ok(Some(contextualize(&stage.cnps, prediction, &self.config.context, self.providers.similarity.as_ref())?))
    }

    fn explain_stage(&self, query: &str, passages: &[Passage]) -> Result<(Explanation, Vec<Evidence>), Error> {
        let rewritten = rewrite_query(query);
        let query_type = answer_type(query);
        let spans = self.providers.spans.predict_spans(&rewritten, passages, SpanMode::Instance)?;
        for span in &spans {
            check_span(span, passages)?;
        }
        let candidates = extract_instances(&spans, self.providers.ner.as_ref())?;
        let mut ranked = rank(&candidates, self.config.explanation_strategy, &query_type, self.providers.nli.as_ref())?;
        ranked.truncate(self.config.k);
        let cited: BTreeSet<&SpanRef> =
            ranked.items.iter().flat_map(|i| i.instance.occurrences.iter().map(|o| &o.span)).collect();
        let evidence = spans
            .iter()
            .filter(|s| cited.contains(&s.reference()))
            .map(|s| Evidence::from_span(s, EvidenceStage::Instance))
            .collect();
        let explanation =
            Explanation { rewritten_query: rewritten, answer_type: query_type, strategy: ranked.strategy, items: ranked.items };
        Ok((explanation, evidence))
    }

    /// Runs the full pipeline over a dataset and scores it.
    ///
    /// Count metrics cover records with a gold count, instance metrics
    /// records with gold instances, CNP accuracy records with CNP labels.
    pub fn evaluate(&self, records: &[QueryRecord], ks: &[usize]) -> Result<MetricsReport, Error> {
        let mut preds: Vec<Option<Count>> = Vec::new();
        let mut golds: Vec<Count> = Vec::new();
        let mut rankings: Vec<(Vec<String>, Vec<String>)> = Vec::new();
        let mut cnp_pairs = Vec::new();
        for record in records {
            let package = self.pipeline(&record.query, &record.passages)?;
            if let Some(gold) = &record.gold_count {
                preds.push(package.prediction.as_ref().map(|p| p.value));
                golds.push(gold.value);
            }
            if let Some(gold) = &record.gold_instances {
                let ranked = package
                    .instances
                    .as_ref()
                    .map(|e| e.items.iter().map(|i| i.instance.surface.clone()).collect())
                    .unwrap_or_default();
                rankings.push((ranked, gold.clone()));
            }
            if let Some(labels) = &record.cnp_labels {
                match &package.contextualization {
                    Some(answer) => cnp_pairs.extend(match_cnp_labels(answer, labels)),
                    None => cnp_pairs.extend(labels.iter().map(|l| (None, l.category))),
                }
            }
        }
        Ok(MetricsReport {
            counts: count_metrics(&preds, &golds),
            instances: instance_metrics(&rankings, ks),
            cnp_accuracy: cnp_accuracy(&cnp_pairs),
        })
    }
}

/// Span reference for the CNP text inside an answer span.
fn cnp_source(span: &AnswerSpan, cnp_text: &str) -> SpanRef {
    match span.text.find(cnp_text) {
        Some(b) => {
            let start = span.char_start + text::byte_to_char(&span.text, b);
            SpanRef { passage_id: span.passage_id.clone(), char_start: start, char_end: start + text::char_len(cnp_text) }
        }
        None => span.reference(),
    }
}

/// Rejects spans that do not point into one of the input passages.
fn check_span(span: &AnswerSpan, passages: &[Passage]) -> Result<(), Error> {
    let passage = passages.iter().find(|p| p.id == span.passage_id).ok_or_else(|| {
        crate::providers::ProviderError::Protocol {
            operation: "spans".into(),
            message: format!("span cites unknown passage {:?}", span.passage_id),
        }
    })?;
    if text::char_slice(&passage.text, span.char_start, span.char_end) != Some(span.text.as_str()) {
        return Err(crate::providers::ProviderError::Protocol {
            operation: "spans".into(),
            message: format!("span {}..{} does not match passage {:?}", span.char_start, span.char_end, span.passage_id),
        }
        .into());
    }
    Ok(())
}

fn sorted(mut evidence: Vec<Evidence>) -> Vec<Evidence> {
    evidence.sort_by(|a, b| {
        (a.stage, a.rank, a.char_start, a.char_end).cmp(&(b.stage, b.rank, b.char_start, b.char_end))
    });
    evidence.dedup();
    evidence
}

#[cfg(test)]
mod tests {
    use super::*;

    fn passages() -> Vec<Passage> {
        vec![
            Passage { id: "p1".into(), rank: 1, url: None, text: "Lennon had five children with two wives.".into() },
            Passage {
                id: "p2".into(),
                rank: 2,
                url: None,
                text: "Over 150 of his tracks were solo recordings by Lennon.".into(),
            },
            Passage {
                id: "p3".into(),
                rank: 3,
                url: None,
                text: "John Lennon co-wrote approximately 180 songs for the Beatles.".into(),
            },
        ]
    }

    const QUERY: &str = "How many songs did John Lennon write for the Beatles?";

    #[test]
    fn lennon_weighted_median_and_median() {
        let engine = Engine::with_providers(PipelineConfig::default(), Providers::offline());
        let package = engine.answer(QUERY, &passages()).unwrap();
        assert_eq!(package.prediction.unwrap().value, Count::from_integer(180));
        let median = Engine::with_providers(
            PipelineConfig { strategy: Strategy::Median, ..PipelineConfig::default() },
            Providers::offline(),
        );
        assert_eq!(median.answer(QUERY, &passages()).unwrap().prediction.unwrap().value, Count::from_integer(150));
    }

    #[test]
    fn empty_passages_give_absent_prediction() {
        let engine = Engine::with_providers(PipelineConfig::default(), Providers::offline());
        let package = engine.pipeline(QUERY, &[]).unwrap();
        assert!(package.prediction.is_none());
        assert!(package.contextualization.is_none());
        assert!(package.evidence.is_empty());
    }

    #[test]
    fn evidence_resolves_to_passages() {
        let engine = Engine::with_providers(PipelineConfig::default(), Providers::offline());
        let ps = passages();
        let package = engine.pipeline(QUERY, &ps).unwrap();
        assert!(!package.evidence.is_empty());
        for e in &package.evidence {
            let p = ps.iter().find(|p| p.id == e.passage_id).unwrap();
            assert_eq!(text::char_slice(&p.text, e.char_start, e.char_end), Some(e.text.as_str()));
        }
        for c in &package.prediction.unwrap().support {
            let span = c.span.as_ref().unwrap();
            let p = ps.iter().find(|p| p.id == span.passage_id).unwrap();
            assert!(text::char_slice(&p.text, span.char_start, span.char_end).is_some());
        }
    }

    #[test]
    fn explain_respects_k() {
        let config = PipelineConfig { k: 1, ..PipelineConfig::default() };
        let engine = Engine::with_providers(config, Providers::offline());
        let package = engine.explain(QUERY, &passages()).unwrap();
        assert_eq!(package.instances.unwrap().items.len(), 1);
    }

    #[test]
    fn duplicate_ranks_are_input_errors() {
        let mut ps = passages();
        ps[1].rank = 1;
        let engine = Engine::with_providers(PipelineConfig::default(), Providers::offline());
        let err = engine.answer(QUERY, &ps).unwrap_err();
        assert_eq!(err.kind(), crate::error::ErrorKind::Input);
    }
}
