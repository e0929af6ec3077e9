//! Deterministic, dependency-free stand-ins for the learned providers.
//!
//! These use only token overlap and character trigrams, so they are
//! bit-reproducible across runs and platforms. They are what the test suite
//! and the `offline` provider mode run on.

use std::collections::BTreeMap;

use super::{AnswerSpan, EntailmentProvider, EntityRecognizer, Mention, ProviderError, SimilarityProvider, SpanMode, SpanPredictor};
use crate::corpus::Passage;
use crate::quantity::QuantityParser;
use crate::text;

/// Fraction of the query's distinct content tokens present in `sentence`.
pub fn query_overlap(query: &str, sentence: &str) -> f64 {
    let wanted = text::content_token_set(query);
    if wanted.is_empty() {
        return 0.0;
    }
    let present = text::content_token_set(sentence);
    let hits = wanted.iter().filter(|t| present.contains(*t)).count();
    hits as f64 / wanted.len() as f64
}

/// One span per qualifying sentence, scored by query-token overlap.
///
/// In count mode a sentence qualifies if it contains a parsable count; in
/// instance mode if it has at least one capitalized token. Sentences with
/// zero overlap are dropped.
#[derive(Debug, Clone, Default)]
pub struct OfflineSpanPredictor {
    parser: QuantityParser,
}

impl OfflineSpanPredictor {
    pub fn new(parser: QuantityParser) -> Self {
        OfflineSpanPredictor { parser }
    }
}

impl SpanPredictor for OfflineSpanPredictor {
    fn predict_spans(&self, query: &str, passages: &[Passage], mode: SpanMode) -> Result<Vec<AnswerSpan>, ProviderError> {
        let mut ordered: Vec<&Passage> = passages.iter().collect();
        ordered.sort_by_key(|p| p.rank);
        let mut spans = Vec::new();
        for passage in ordered {
            for (b0, b1) in text::sentences(&passage.text) {
                let sentence = &passage.text[b0..b1];
                let qualifies = match mode {
                    SpanMode::Count => self.parser.find_first(sentence).is_some(),
                    SpanMode::Instance => text::words(sentence).iter().any(|w| text::is_capitalized(w.text)),
                };
                if !qualifies {
                    continue;
                }
                let confidence = query_overlap(query, sentence);
                if confidence == 0.0 {
                    continue;
                }
                let c0 = text::byte_to_char(&passage.text, b0);
                let c1 = c0 + text::char_len(sentence);
                if let Some(span) = AnswerSpan::locate(passage, c0, c1, confidence) {
                    spans.push(span);
                }
            }
        }
        Ok(spans)
    }
}

fn trigrams(s: &str) -> BTreeMap<String, u64> {
    let norm = format!(" {} ", text::collapse_whitespace(&s.to_lowercase()));
    let chars: Vec<char> = norm.chars().collect();
    let mut grams = BTreeMap::new();
    for w in chars.windows(3) {
        *grams.entry(w.iter().collect::<String>()).or_insert(0) += 1;
    }
    grams
}

/// Character-trigram cosine `c` in `[0, 1]`, rescaled to `2c - 1`.
///
/// Texts are lowercased, whitespace-collapsed and padded with one space on
/// each side before counting trigrams.
#[derive(Debug, Clone, Copy, Default)]
pub struct OfflineSimilarity;

impl OfflineSimilarity {
    pub fn cosine(a: &str, b: &str) -> f64 {
        let a = text::collapse_whitespace(a);
        let b = text::collapse_whitespace(b);
        match (a.is_empty(), b.is_empty()) {
            (true, true) => return 1.0,
            (true, false) | (false, true) => return 0.0,
            _ => {}
        }
        let ga = trigrams(&a);
        let gb = trigrams(&b);
        let dot: u64 = ga.iter().map(|(g, n)| n * gb.get(g).copied().unwrap_or(0)).sum();
        let na: u64 = ga.values().map(|n| n * n).sum();
        let nb: u64 = gb.values().map(|n| n * n).sum();
        // sqrt(na * nb) rather than sqrt(na) * sqrt(nb): exact 1.0 for a == b
        (dot as f64 / ((na as f64) * (nb as f64)).sqrt()).clamp(0.0, 1.0)
    }
}

impl SimilarityProvider for OfflineSimilarity {
    fn similarities(&self, anchor: &str, others: &[&str]) -> Result<Vec<f64>, ProviderError> {
        Ok(others.iter().map(|o| 2.0 * Self::cosine(anchor, o) - 1.0).collect())
    }
}

/// Maximal runs of capitalized words separated only by whitespace. A
/// sentence-initial stopword ("The", "In") does not start a mention.
#[derive(Debug, Clone, Copy, Default)]
pub struct OfflineNer;

impl OfflineNer {
    pub fn mentions(text: &str) -> Vec<Mention> {
        let mut out = Vec::new();
        for (s0, s1) in text::sentences(text) {
            let sentence = &text[s0..s1];
            let words = text::words(sentence);
            let mut run: Vec<text::WordSpan<'_>> = Vec::new();
            let flush = |run: &mut Vec<text::WordSpan<'_>>, out: &mut Vec<Mention>| {
                if let (Some(first), Some(last)) = (run.first(), run.last()) {
                    let (b0, b1) = (s0 + first.start, s0 + last.end);
                    out.push(Mention {
                        text: text[b0..b1].to_string(),
                        kind: "ENTITY".into(),
                        start: text::byte_to_char(text, b0),
                        end: text::byte_to_char(text, b1),
                    });
                }
                run.clear();
            };
            for (i, w) in words.iter().enumerate() {
                let initial_stopword = i == 0 && text::is_stopword(w.text);
                if !text::is_capitalized(w.text) || initial_stopword {
                    flush(&mut run, &mut out);
                    continue;
                }
                let contiguous = run.last().is_none_or(|prev| sentence[prev.end..w.start].chars().all(char::is_whitespace));
                if !contiguous {
                    flush(&mut run, &mut out);
                }
                run.push(*w);
            }
            flush(&mut run, &mut out);
        }
        out
    }
}

impl EntityRecognizer for OfflineNer {
    fn recognize(&self, texts: &[&str]) -> Result<Vec<Vec<Mention>>, ProviderError> {
        Ok(texts.iter().map(|t| Self::mentions(t)).collect())
    }
}

/// Fraction of the hypothesis's distinct content tokens found in the
/// premise. Hypotheses made only of stopwords are compared on all tokens.
#[derive(Debug, Clone, Copy, Default)]
pub struct OfflineEntailment;

impl OfflineEntailment {
    pub fn score(premise: &str, hypothesis: &str) -> Result<f64, ProviderError> {
        if hypothesis.trim().is_empty() {
            return Err(ProviderError::InvalidInput("empty hypothesis".into()));
        }
        let mut wanted = text::content_token_set(hypothesis);
        let mut present = text::content_token_set(premise);
        if wanted.is_empty() {
            wanted = text::words(hypothesis).iter().map(|w| w.text.to_lowercase()).collect();
            present = text::words(premise).iter().map(|w| w.text.to_lowercase()).collect();
        }
        if wanted.is_empty() {
            return Err(ProviderError::InvalidInput(format!("hypothesis {hypothesis:?} has no tokens")));
        }
        let hits = wanted.iter().filter(|t| present.contains(*t)).count();
        Ok(hits as f64 / wanted.len() as f64)
    }
}

impl EntailmentProvider for OfflineEntailment {
    fn entail(&self, pairs: &[(&str, &str)]) -> Result<Vec<f64>, ProviderError> {
        pairs.iter().map(|(p, h)| Self::score(p, h)).collect()
    }
}
