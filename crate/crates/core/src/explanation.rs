//! Instance entities that ground a predicted count.
//!
//! Answer spans for the which-form of the query are run through NER, mentions
//! are merged by a normalized key, and the merged candidates are ranked.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::SpanRef;
use crate::providers::{clamp_unit, AnswerSpan, EntailmentProvider, EntityRecognizer, ProviderError};
use crate::text;

#[derive(Debug, thiserror::Error)]
pub enum ExplainError {
    #[error("type compatibility ranking needs an answer type, none found in the query")]
    NoAnswerType,
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankingStrategy {
    NoConsolidation,
    #[default]
    ContextFrequency,
    SummedConfidence,
    TypeCompatibility,
}

impl RankingStrategy {
    pub const ALL: [RankingStrategy; 4] = [
        RankingStrategy::NoConsolidation,
        RankingStrategy::ContextFrequency,
        RankingStrategy::SummedConfidence,
        RankingStrategy::TypeCompatibility,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RankingStrategy::NoConsolidation => "no_consolidation",
            RankingStrategy::ContextFrequency => "context_frequency",
            RankingStrategy::SummedConfidence => "summed_confidence",
            RankingStrategy::TypeCompatibility => "type_compatibility",
        }
    }
}

impl fmt::Display for RankingStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RankingStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_lowercase().replace('-', "_");
        RankingStrategy::ALL
            .into_iter()
            .find(|st| st.as_str() == norm)
            .ok_or_else(|| format!("unknown explanation strategy {s:?}"))
    }
}

/// One sighting of an instance inside an answer span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Occurrence {
    pub span: SpanRef,
    pub passage_rank: u32,
    pub confidence: f64,
    pub parent_sentence: String,
    /// Character offset of the mention in its passage.
    pub position: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceCandidate {
    /// Longest observed mention.
    pub surface: String,
    pub key: String,
    pub occurrences: Vec<Occurrence>,
    pub frequency: usize,
    pub summed_confidence: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub type_score: Option<f64>,
}

impl InstanceCandidate {
    /// A candidate for a single mention; `None` if the mention normalizes to
    /// an empty key.
    pub fn single(surface: &str, occurrence: Occurrence) -> Option<Self> {
        let key = mention_key(surface);
        if key.is_empty() {
            return None;
        }
        Some(InstanceCandidate {
            surface: text::collapse_whitespace(surface),
            key,
            summed_confidence: occurrence.confidence,
            occurrences: vec![occurrence],
            frequency: 1,
            type_score: None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedInstance {
    pub score: f64,
    #[serde(flatten)]
    pub instance: InstanceCandidate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedInstances {
    pub strategy: RankingStrategy,
    pub items: Vec<RankedInstance>,
}

impl RankedInstances {
    pub fn truncate(&mut self, k: usize) {
        self.items.truncate(k);
    }

    pub fn keys(&self) -> Vec<&str> {
        self.items.iter().map(|i| i.instance.key.as_str()).collect()
    }
}

/// Replaces the first "how many" (any case) with "which", or prepends
/// "which". Queries already starting with "which" are left alone.
pub fn rewrite_query(query: &str) -> String {
    let trimmed = query.trim_start();
    if trimmed.len() >= 5 && trimmed[..5].eq_ignore_ascii_case("which") && !trimmed[5..].starts_with(char::is_alphanumeric) {
        return query.to_string();
    }
    if let Some((start, end)) = find_how_many(query) {
        let matched = &query[start..end];
        let mut chars = matched.chars();
        let title_case = chars.next().is_some_and(char::is_uppercase) && chars.next().is_some_and(char::is_lowercase);
        let which = if title_case { "Which" } else { "which" };
        return format!("{}{which}{}", &query[..start], &query[end..]);
    }
    if query.trim().is_empty() {
        return "which".into();
    }
    format!("which {query}")
}

/// Byte range of the first whole-word "how many", case-insensitive.
fn find_how_many(query: &str) -> Option<(usize, usize)> {
    let words = text::words(query);
    words.windows(2).find_map(|w| {
        let gap = &query[w[0].end..w[1].start];
        let is_match = w[0].text.eq_ignore_ascii_case("how")
            && w[1].text.eq_ignore_ascii_case("many")
            && !gap.is_empty()
            && gap.chars().all(char::is_whitespace);
        is_match.then_some((w[0].start, w[1].end))
    })
}

/// Words that end the answer-type phrase.
const TYPE_BREAKS: &[&str] = &["spoken", "written", "wrote", "released", "recorded", "exist", "live", "make"];

/// The noun phrase right after "how many", or empty.
pub fn answer_type(query: &str) -> String {
    let Some((_, end)) = find_how_many(query) else {
        return String::new();
    };
    let rest = &query[end..];
    let mut last_end = None;
    let mut first_start = None;
    for w in text::words(rest) {
        let lower = w.text.to_lowercase();
        let separated = match last_end {
            None => rest[..w.start].chars().all(char::is_whitespace),
            Some(e) => rest[e..w.start].chars().all(char::is_whitespace),
        };
        if !separated || text::is_stopword(&lower) || TYPE_BREAKS.contains(&lower.as_str()) {
            break;
        }
        first_start.get_or_insert(w.start);
        last_end = Some(w.end);
    }
    match (first_start, last_end) {
        (Some(a), Some(b)) => rest[a..b].to_string(),
        _ => String::new(),
    }
}

/// Casefolds, strips leading articles and edge punctuation, collapses
/// whitespace.
pub fn mention_key(mention: &str) -> String {
    let lowered = mention.to_lowercase();
    let trimmed = lowered.trim_matches(|c: char| !c.is_alphanumeric());
    let mut words: Vec<&str> = trimmed.split_whitespace().collect();
    while words.len() > 1 && matches!(words[0], "the" | "a" | "an") {
        words.remove(0);
    }
    let joined = words.join(" ");
    joined.trim_matches(|c: char| !c.is_alphanumeric()).to_string()
}

/// Merges candidates with equal keys, keeping the longest surface (ties:
/// lexicographically smallest). The output is sorted by key and merging it
/// again is a no-op.
pub fn merge_candidates(candidates: Vec<InstanceCandidate>) -> Vec<InstanceCandidate> {
    let mut merged: BTreeMap<String, InstanceCandidate> = BTreeMap::new();
    for cand in candidates {
        match merged.get_mut(&cand.key) {
            None => {
                merged.insert(cand.key.clone(), cand);
            }
            Some(acc) => {
                let longer = cand.surface.chars().count().cmp(&acc.surface.chars().count());
                if longer == Ordering::Greater || (longer == Ordering::Equal && cand.surface < acc.surface) {
                    acc.surface = cand.surface;
                }
                acc.occurrences.extend(cand.occurrences);
                acc.type_score = match (acc.type_score, cand.type_score) {
                    (Some(a), Some(b)) => Some(a + b),
                    (a, b) => a.or(b),
                };
            }
        }
    }
    merged
        .into_values()
        .map(|mut c| {
            c.occurrences.sort_by(|a, b| {
                (a.passage_rank, a.position, &a.span).cmp(&(b.passage_rank, b.position, &b.span))
            });
            c.frequency = c.occurrences.len();
            c.summed_confidence = c.occurrences.iter().map(|o| o.confidence).sum();
            c
        })
        .collect()
}

/// Runs NER over the spans and merges mentions into instance candidates.
pub fn extract_instances(spans: &[AnswerSpan], ner: &dyn EntityRecognizer) -> Result<Vec<InstanceCandidate>, ProviderError> {
    if spans.is_empty() {
        return Ok(Vec::new());
    }
    let texts: Vec<&str> = spans.iter().map(|s| s.text.as_str()).collect();
    let mentions = ner.recognize(&texts)?;
    if mentions.len() != spans.len() {
        return Err(ProviderError::Protocol {
            operation: "ner".into(),
            message: format!("expected {} mention lists, got {}", spans.len(), mentions.len()),
        });
    }
    let mut singles = Vec::new();
    for (span, found) in spans.iter().zip(mentions) {
        for m in found {
            let occurrence = Occurrence {
                span: span.reference(),
                passage_rank: span.passage_rank,
                confidence: clamp_unit("span confidence", span.confidence),
                parent_sentence: span.parent_sentence.clone(),
                position: span.char_start + m.start,
            };
            singles.extend(InstanceCandidate::single(&m.text, occurrence));
        }
    }
    Ok(merge_candidates(singles))
}

fn tie_break(a: &InstanceCandidate, b: &InstanceCandidate) -> Ordering {
    b.summed_confidence.total_cmp(&a.summed_confidence).then_with(|| a.key.cmp(&b.key))
}

/// Ranks merged candidates under a strategy. Scores are descending.
///
/// - `no_consolidation`: only candidates seen in the passage holding the
///   most confident span (ties: lower passage rank), in passage order; the
///   score is the negated character position.
/// - `context_frequency`: number of occurrences.
/// - `summed_confidence`: sum of span confidences.
/// - `type_compatibility`: summed entailment of "<surface> is a <type>" from
///   each occurrence's parent sentence.
///
/// Ties: higher summed confidence, then key.
pub fn rank(
    candidates: &[InstanceCandidate],
    strategy: RankingStrategy,
    query_type: &str,
    nli: &dyn EntailmentProvider,
) -> Result<RankedInstances, ExplainError> {
    let mut items: Vec<RankedInstance> = match strategy {
        RankingStrategy::NoConsolidation => {
            let best = candidates
                .iter()
                .flat_map(|c| &c.occurrences)
                .min_by(|a, b| {
                    b.confidence
                        .total_cmp(&a.confidence)
                        .then_with(|| a.passage_rank.cmp(&b.passage_rank))
                        .then_with(|| a.span.cmp(&b.span))
                })
                .map(|o| o.span.passage_id.clone());
            let Some(passage) = best else {
                return Ok(RankedInstances { strategy, items: Vec::new() });
            };
            candidates
                .iter()
                .filter_map(|c| {
                    let first = c.occurrences.iter().filter(|o| o.span.passage_id == passage).map(|o| o.position).min()?;
                    Some(RankedInstance { score: -(first as f64), instance: c.clone() })
                })
                .collect()
        }
        RankingStrategy::ContextFrequency => candidates
            .iter()
            .map(|c| RankedInstance { score: c.frequency as f64, instance: c.clone() })
            .collect(),
        RankingStrategy::SummedConfidence => candidates
            .iter()
            .map(|c| RankedInstance { score: c.summed_confidence, instance: c.clone() })
            .collect(),
        RankingStrategy::TypeCompatibility => {
            let query_type = query_type.trim();
            if query_type.is_empty() {
                return Err(ExplainError::NoAnswerType);
            }
            let hypotheses: Vec<String> =
                candidates.iter().map(|c| format!("{} is a {query_type}", c.surface)).collect();
            let pairs: Vec<(&str, &str)> = candidates
                .iter()
                .zip(&hypotheses)
                .flat_map(|(c, h)| c.occurrences.iter().map(move |o| (o.parent_sentence.as_str(), h.as_str())))
                .collect();
            let probs = nli.entail(&pairs)?;
            if probs.len() != pairs.len() {
                return Err(ProviderError::Protocol {
                    operation: "entail".into(),
                    message: format!("expected {} probabilities, got {}", pairs.len(), probs.len()),
                }
                .into());
            }
            let mut probs = probs.into_iter();
            candidates
                .iter()
                .map(|c| {
                    let score: f64 = probs.by_ref().take(c.occurrences.len()).map(|p| clamp_unit("entailment", p)).sum();
                    let mut instance = c.clone();
                    instance.type_score = Some(score);
                    RankedInstance { score, instance }
                })
                .collect()
        }
    };
    items.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| tie_break(&a.instance, &b.instance)));
    Ok(RankedInstances { strategy, items })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::{OfflineEntailment, OfflineNer};

    fn occ(passage: &str, rank: u32, conf: f64, position: usize, sentence: &str) -> Occurrence {
        Occurrence {
            span: SpanRef { passage_id: passage.into(), char_start: position, char_end: position + 1 },
            passage_rank: rank,
            confidence: conf,
            parent_sentence: sentence.into(),
            position,
        }
    }

    fn cand_with(key: &str, freq: usize, conf: f64) -> InstanceCandidate {
        let singles: Vec<_> = (0..freq)
            .map(|i| InstanceCandidate::single(key, occ("p", 1, conf, i * 10, "s")).unwrap())
            .collect();
        merge_candidates(singles).remove(0)
    }

    #[test]
    fn rewrite_examples() {
        assert_eq!(
            rewrite_query("How many songs did John Lennon write for the Beatles?"),
            "Which songs did John Lennon write for the Beatles?"
        );
        assert_eq!(rewrite_query("songs by lennon"), "which songs by lennon");
        assert_eq!(rewrite_query("HOW MANY lakes in Finland"), "which lakes in Finland");
        assert_eq!(rewrite_query("showmany things"), "which showmany things");
    }

    #[test]
    fn rewrite_is_idempotent_on_examples() {
        for q in ["How many songs?", "songs by lennon", "HOW MANY lakes", "", "Which ones"] {
            let once = rewrite_query(q);
            assert_eq!(rewrite_query(&once), once);
        }
    }

    #[test]
    fn answer_type_examples() {
        assert_eq!(answer_type("How many languages are spoken in Indonesia"), "languages");
        assert_eq!(answer_type("how many unicorn companies are there"), "unicorn companies");
        assert_eq!(answer_type("songs by lennon"), "");
        assert_eq!(answer_type("How many songs did John Lennon write"), "songs");
    }

    #[test]
    fn keys_normalize() {
        assert_eq!(mention_key("the Beatles"), "beatles");
        assert_eq!(mention_key("Beatles"), "beatles");
        assert_eq!(mention_key("  \"Toba   Batak\", "), "toba batak");
        assert_eq!(mention_key("The"), "the");
        assert_eq!(mention_key("..."), "");
    }

    #[test]
    fn extract_merges_across_spans() {
        let spans = vec![
            AnswerSpan {
                passage_id: "a".into(),
                passage_rank: 1,
                char_start: 0,
                char_end: 28,
                text: "Toba Batak is spoken widely.".into(),
                confidence: 0.5,
                parent_sentence: "Toba Batak is spoken widely.".into(),
                sentence_start: 0,
            },
            AnswerSpan {
                passage_id: "b".into(),
                passage_rank: 2,
                char_start: 10,
                char_end: 37,
                text: "Speakers of Toba Batak live".into(),
                confidence: 0.25,
                parent_sentence: "Many say: Speakers of Toba Batak live".into(),
                sentence_start: 0,
            },
        ];
        let cands = extract_instances(&spans, &OfflineNer).unwrap();
        let toba = cands.iter().find(|c| c.key == "toba batak").unwrap();
        assert_eq!(toba.frequency, 2);
        assert_eq!(toba.summed_confidence, 0.75);
        assert_eq!(toba.occurrences[1].position, 22);
        assert!(extract_instances(&[], &OfflineNer).unwrap().is_empty());
    }

    #[test]
    fn merge_keeps_longest_surface() {
        let a = InstanceCandidate::single("Beatles", occ("p", 1, 0.5, 0, "s")).unwrap();
        let b = InstanceCandidate::single("the Beatles", occ("q", 2, 0.5, 3, "s")).unwrap();
        let merged = merge_candidates(vec![a, b]);
        assert_eq!(merged.len(), 1);
        assert_eq!(merged[0].surface, "the Beatles");
        assert_eq!(merged[0].key, "beatles");
        assert_eq!(merge_candidates(merged.clone()), merged);
    }

    #[test]
    fn context_frequency_order() {
        let cands = vec![cand_with("a", 3, 0.5), cand_with("b", 1, 0.5), cand_with("c", 2, 0.5)];
        let ranked = rank(&cands, RankingStrategy::ContextFrequency, "", &OfflineEntailment).unwrap();
        assert_eq!(ranked.keys(), vec!["a", "c", "b"]);
    }

    #[test]
    fn single_candidate_under_every_strategy() {
        let cands = vec![cand_with("solo", 1, 0.5)];
        for s in RankingStrategy::ALL {
            let ranked = rank(&cands, s, "songs", &OfflineEntailment).unwrap();
            assert_eq!(ranked.keys(), vec!["solo"], "{s}");
        }
    }

    #[test]
    fn no_consolidation_uses_best_passage_in_order() {
        let mk = |name: &str, o: Occurrence| InstanceCandidate::single(name, o).unwrap();
        let cands = merge_candidates(vec![
            mk("Zed", occ("p2", 2, 0.9, 40, "s")),
            mk("Amy", occ("p2", 2, 0.9, 5, "s")),
            mk("Bob", occ("p1", 1, 0.3, 0, "s")),
        ]);
        let ranked = rank(&cands, RankingStrategy::NoConsolidation, "", &OfflineEntailment).unwrap();
        assert_eq!(ranked.keys(), vec!["amy", "zed"]);
        let empty = rank(&[], RankingStrategy::NoConsolidation, "", &OfflineEntailment).unwrap();
        assert!(empty.items.is_empty());
    }

    #[test]
    fn type_compatibility_sums_entailment() {
        let mk = |name: &str, sentence: &str, pos| InstanceCandidate::single(name, occ("p", 1, 0.5, pos, sentence)).unwrap();
        let cands = merge_candidates(vec![
            mk("Imagine", "Imagine is a song by Lennon", 0),
            mk("Imagine", "Imagine topped the songs chart", 50),
            mk("Yoko", "Yoko met Lennon", 100),
        ]);
        let ranked = rank(&cands, RankingStrategy::TypeCompatibility, "song", &OfflineEntailment).unwrap();
        assert_eq!(ranked.keys(), vec!["imagine", "yoko"]);
        // "Imagine is a song": content {imagine, song}; 2/2 + 1/2
        assert_eq!(ranked.items[0].instance.type_score, Some(1.5));
        assert!(matches!(
            rank(&cands, RankingStrategy::TypeCompatibility, " ", &OfflineEntailment),
            Err(ExplainError::NoAnswerType)
        ));
    }

    #[test]
    fn strategy_names() {
        for s in RankingStrategy::ALL {
            assert_eq!(s.as_str().parse::<RankingStrategy>().unwrap(), s);
        }
    }
}
