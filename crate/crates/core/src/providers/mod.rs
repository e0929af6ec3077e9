//! Learned capabilities behind a pluggable boundary.
//!
//! Four capabilities are used by the pipeline: answer-span prediction, text
//! similarity, named-entity recognition and entailment. Each has a
//! deterministic offline implementation ([`offline`]) and a client for the
//! inference service ([`remote`]). [`Providers`] bundles one implementation of
//! each, built from a [`ProviderConfig`].

pub mod offline;
pub mod remote;
pub mod table;

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::corpus::{Passage, SpanRef};
use crate::text;

pub use offline::{OfflineEntailment, OfflineNer, OfflineSimilarity, OfflineSpanPredictor};
pub use remote::RemoteClient;
pub use table::TableSimilarity;

pub const ENV_ENDPOINT: &str = "COQEX_ENDPOINT";
pub const ENV_TIMEOUT_MS: &str = "COQEX_TIMEOUT_MS";

#[derive(Debug, thiserror::Error)]
pub enum ProviderError {
    #[error("inference service unreachable at {endpoint}: {message}")]
    Transport { endpoint: String, message: String },
    #[error("inference service returned HTTP {status} for {operation}: {body}")]
    Status { operation: String, status: u16, body: String },
    #[error("inference service protocol violation in {operation}: {message}")]
    Protocol { operation: String, message: String },
    #[error("invalid provider input: {0}")]
    InvalidInput(String),
    #[error("provider configuration: {0}")]
    Config(String),
}

/// What the span predictor is asked to find.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpanMode {
    Count,
    Instance,
}

/// A predicted answer span. Offsets are character offsets into the passage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerSpan {
    pub passage_id: String,
    pub passage_rank: u32,
    pub char_start: usize,
    pub char_end: usize,
    pub text: String,
    pub confidence: f64,
    pub parent_sentence: String,
    /// Character offset of `parent_sentence` in the passage.
    pub sentence_start: usize,
}

impl AnswerSpan {
    pub fn reference(&self) -> SpanRef {
        SpanRef { passage_id: self.passage_id.clone(), char_start: self.char_start, char_end: self.char_end }
    }

    /// Builds a span from character offsets, attaching the sentence(s) that
    /// contain it. `None` if the offsets do not fit the passage.
    pub fn locate(passage: &Passage, char_start: usize, char_end: usize, confidence: f64) -> Option<Self> {
        if char_start >= char_end {
            return None;
        }
        let body = &passage.text;
        let b0 = text::char_to_byte(body, char_start)?;
        let b1 = text::char_to_byte(body, char_end)?;
        let mut s0 = b0;
        let mut s1 = b1;
        for (a, b) in text::sentences(body) {
            if a < b1 && b > b0 {
                s0 = s0.min(a);
                s1 = s1.max(b);
            }
        }
        Some(AnswerSpan {
            passage_id: passage.id.clone(),
            passage_rank: passage.rank,
            char_start,
            char_end,
            text: body[b0..b1].to_string(),
            confidence: clamp_unit("span confidence", confidence),
            parent_sentence: body[s0..s1].to_string(),
            sentence_start: text::byte_to_char(body, s0),
        })
    }
}

/// An entity mention; offsets are character offsets into the analysed text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mention {
    pub text: String,
    #[serde(rename = "type")]
    pub kind: String,
    pub start: usize,
    pub end: usize,
}

pub trait SpanPredictor: Send + Sync {
    fn predict_spans(&self, query: &str, passages: &[Passage], mode: SpanMode) -> Result<Vec<AnswerSpan>, ProviderError>;
}

pub trait SimilarityProvider: Send + Sync {
    /// Similarity in `[-1, 1]`.
    fn similarity(&self, a: &str, b: &str) -> Result<f64, ProviderError> {
        Ok(self.similarities(a, &[b])?[0])
    }

    /// Similarity of `anchor` to each of `others`, aligned with `others`.
    fn similarities(&self, anchor: &str, others: &[&str]) -> Result<Vec<f64>, ProviderError>;
}

pub trait EntityRecognizer: Send + Sync {
    /// Mentions per input text, aligned with `texts`.
    fn recognize(&self, texts: &[&str]) -> Result<Vec<Vec<Mention>>, ProviderError>;
}

pub trait EntailmentProvider: Send + Sync {
    /// Probability that each premise entails its hypothesis, aligned with
    /// `pairs`. Empty hypotheses are rejected.
    fn entail(&self, pairs: &[(&str, &str)]) -> Result<Vec<f64>, ProviderError>;
}

/// Clamps to `[0, 1]`, logging values that needed it. NaN becomes 0.
pub fn clamp_unit(what: &str, v: f64) -> f64 {
    clamp_logged(what, v, 0.0, 1.0)
}

/// Clamps to `[-1, 1]`, logging values that needed it. NaN becomes -1.
pub fn clamp_signed(what: &str, v: f64) -> f64 {
    clamp_logged(what, v, -1.0, 1.0)
}

fn clamp_logged(what: &str, v: f64, lo: f64, hi: f64) -> f64 {
    if v.is_nan() {
        log::warn!("{what} is NaN, using {lo}");
        return lo;
    }
    if v < lo || v > hi {
        log::warn!("{what} {v} outside [{lo}, {hi}], clamped");
    }
    v.clamp(lo, hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderMode {
    #[default]
    Offline,
    Remote,
}

impl std::str::FromStr for ProviderMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().as_str() {
            "offline" => Ok(ProviderMode::Offline),
            "remote" => Ok(ProviderMode::Remote),
            _ => Err(format!("unknown provider mode {s:?} (expected offline or remote)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProviderConfig {
    pub mode: ProviderMode,
    pub endpoint: Option<String>,
    pub timeout: Duration,
    pub max_in_flight: usize,
    /// Fall back to the offline providers when the service fails.
    pub allow_degrade: bool,
    pub cache_dir: Option<PathBuf>,
    /// Pairwise similarity fixture consulted before the similarity provider.
    pub similarity_table: Option<PathBuf>,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig {
            mode: ProviderMode::Offline,
            endpoint: None,
            timeout: Duration::from_secs(30),
            max_in_flight: 4,
            allow_degrade: false,
            cache_dir: None,
            similarity_table: None,
        }
    }
}

impl ProviderConfig {
    pub fn validate(&self) -> Result<(), ProviderError> {
        match (self.mode, &self.endpoint) {
            (ProviderMode::Remote, None) => Err(ProviderError::Config("remote mode requires an endpoint".into())),
            (ProviderMode::Offline, Some(_)) => {
                Err(ProviderError::Config("an endpoint is only valid with remote mode".into()))
            }
            _ if self.max_in_flight == 0 => Err(ProviderError::Config("max_in_flight must be positive".into())),
            _ => Ok(()),
        }
    }
}

/// One implementation of each capability.
#[derive(Clone)]
pub struct Providers {
    pub spans: Arc<dyn SpanPredictor>,
    pub similarity: Arc<dyn SimilarityProvider>,
    pub ner: Arc<dyn EntityRecognizer>,
    pub nli: Arc<dyn EntailmentProvider>,
}

impl Providers {
    pub fn offline() -> Self {
        Providers {
            spans: Arc::new(OfflineSpanPredictor::default()),
            similarity: Arc::new(OfflineSimilarity),
            ner: Arc::new(OfflineNer),
            nli: Arc::new(OfflineEntailment),
        }
    }

    /// Builds the providers for a configuration.
    ///
    /// In remote mode the service's health endpoint is checked first; when
    /// it is unreachable this fails unless `allow_degrade` is set, in which
    /// case the offline providers are used. With `allow_degrade`, individual
    /// failed requests also fall back to the offline providers.
    pub fn from_config(config: &ProviderConfig) -> Result<Self, ProviderError> {
        config.validate()?;
        let mut providers = match config.mode {
            ProviderMode::Offline => Providers::offline(),
            ProviderMode::Remote => {
                let client = Arc::new(RemoteClient::new(config)?);
                match client.health() {
                    Ok(_) => {}
                    Err(err) if config.allow_degrade => {
                        log::warn!("{err}; degrading to offline providers");
                        return Ok(Self::with_table(Providers::offline(), config)?);
                    }
                    Err(err) => return Err(err),
                }
                if config.allow_degrade {
                    let offline = Providers::offline();
                    Providers {
                        spans: Arc::new(Degrading::new(client.clone(), offline.spans)),
                        similarity: Arc::new(Degrading::new(client.clone(), offline.similarity)),
                        ner: Arc::new(Degrading::new(client.clone(), offline.ner)),
                        nli: Arc::new(Degrading::new(client, offline.nli)),
                    }
                } else {
                    Providers { spans: client.clone(), similarity: client.clone(), ner: client.clone(), nli: client }
                }
            }
        };
        providers = Self::with_table(providers, config)?;
        Ok(providers)
    }

    fn with_table(mut providers: Providers, config: &ProviderConfig) -> Result<Self, ProviderError> {
        if let Some(path) = &config.similarity_table {
            let table = TableSimilarity::load(path, providers.similarity.clone())?;
            providers.similarity = Arc::new(table);
        }
        Ok(providers)
    }
}

/// Tries the primary provider and falls back on error.
pub struct Degrading<P: ?Sized, F: ?Sized> {
    primary: Arc<P>,
    fallback: Arc<F>,
}

impl<P: ?Sized, F: ?Sized> Degrading<P, F> {
    pub fn new(primary: Arc<P>, fallback: Arc<F>) -> Self {
        Degrading { primary, fallback }
    }
}

fn degrade<T>(what: &str, primary: Result<T, ProviderError>, fallback: impl FnOnce() -> Result<T, ProviderError>) -> Result<T, ProviderError> {
    match primary {
        Ok(v) => Ok(v),
        Err(ProviderError::InvalidInput(msg)) => Err(ProviderError::InvalidInput(msg)),
        Err(err) => {
            log::warn!("{what} failed ({err}); using offline fallback");
            fallback()
        }
    }
}

impl<P: SpanPredictor + ?Sized, F: SpanPredictor + ?Sized> SpanPredictor for Degrading<P, F> {
    fn predict_spans(&self, query: &str, passages: &[Passage], mode: SpanMode) -> Result<Vec<AnswerSpan>, ProviderError> {
        degrade("span prediction", self.primary.predict_spans(query, passages, mode), || {
            self.fallback.predict_spans(query, passages, mode)
        })
    }
}

impl<P: SimilarityProvider + ?Sized, F: SimilarityProvider + ?Sized> SimilarityProvider for Degrading<P, F> {
    fn similarities(&self, anchor: &str, others: &[&str]) -> Result<Vec<f64>, ProviderError> {
        degrade("similarity", self.primary.similarities(anchor, others), || self.fallback.similarities(anchor, others))
    }
}

impl<P: EntityRecognizer + ?Sized, F: EntityRecognizer + ?Sized> EntityRecognizer for Degrading<P, F> {
    fn recognize(&self, texts: &[&str]) -> Result<Vec<Vec<Mention>>, ProviderError> {
        degrade("ner", self.primary.recognize(texts), || self.fallback.recognize(texts))
    }
}

impl<P: EntailmentProvider + ?Sized, F: EntailmentProvider + ?Sized> EntailmentProvider for Degrading<P, F> {
    fn entail(&self, pairs: &[(&str, &str)]) -> Result<Vec<f64>, ProviderError> {
        degrade("entailment", self.primary.entail(pairs), || self.fallback.entail(pairs))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn locate_attaches_parent_sentence() {
        let p = Passage { id: "p".into(), rank: 1, url: None, text: "First one. Lennon wrote 180 songs. Last.".into() };
        let span = AnswerSpan::locate(&p, 24, 33, 0.5).unwrap();
        assert_eq!(span.text, "180 songs");
        assert_eq!(span.parent_sentence, "Lennon wrote 180 songs.");
        assert_eq!(span.sentence_start, 11);
        assert!(AnswerSpan::locate(&p, 5, 5, 0.5).is_none());
        assert!(AnswerSpan::locate(&p, 5, 500, 0.5).is_none());
    }

    #[test]
    fn span_crossing_sentences_gets_both() {
        let p = Passage { id: "p".into(), rank: 1, url: None, text: "Ab cd. Ef gh.".into() };
        let span = AnswerSpan::locate(&p, 3, 9, 1.7).unwrap();
        assert_eq!(span.parent_sentence, "Ab cd. Ef gh.");
        assert_eq!(span.confidence, 1.0);
    }

    #[test]
    fn config_validation() {
        let mut c = ProviderConfig::default();
        assert!(c.validate().is_ok());
        c.mode = ProviderMode::Remote;
        assert!(c.validate().is_err());
        c.endpoint = Some("http://127.0.0.1:9".into());
        assert!(c.validate().is_ok());
        c.max_in_flight = 0;
        assert!(c.validate().is_err());
    }

    struct Failing;

    impl SimilarityProvider for Failing {
        fn similarities(&self, _: &str, _: &[&str]) -> Result<Vec<f64>, ProviderError> {
            Err(ProviderError::Transport { endpoint: "x".into(), message: "down".into() })
        }
    }

    #[test]
    fn degrading_falls_back() {
        let d = Degrading::new(Arc::new(Failing), Arc::new(OfflineSimilarity));
        assert_eq!(d.similarity("abc", "abc").unwrap(), 1.0);
    }
}
