//! HTTP client for the inference service.
//!
//! Wire protocol (JSON over HTTP, UTF-8):
//!
//! ```text
//! POST /v1/spans   {query, passages:[{id,text}], mode:"count"|"instance"}
//!                  -> {spans:[{passage_id,start,end,text,confidence}]}
//! POST /v1/embed   {texts:[...]}                 -> {vectors:[[f64,...],...]}
//! POST /v1/ner     {texts:[...]}                 -> {mentions:[[{text,type,start,end},...],...]}
//! POST /v1/entail  {pairs:[{premise,hypothesis}]} -> {probabilities:[f64,...]}
//! GET  /v1/health                                -> {status:"ok", models:{...}}
//! ```
//!
//! Offsets are character offsets. Responses are validated: batch arrays must
//! align with the request, scores are clamped into range (and logged), and
//! spans or mentions whose offsets do not fit their text are dropped.

use std::collections::HashMap;
use std::sync::{Condvar, Mutex};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{
    clamp_signed, clamp_unit, AnswerSpan, EntailmentProvider, EntityRecognizer, Mention, ProviderConfig, ProviderError,
    SimilarityProvider, SpanMode, SpanPredictor,
};
use crate::corpus::{Passage, ResponseCache};
use crate::text;

/// Counting semaphore bounding concurrent requests.
struct Gate {
    available: Mutex<usize>,
    freed: Condvar,
}

struct Permit<'a>(&'a Gate);

impl Gate {
    fn new(n: usize) -> Self {
        Gate { available: Mutex::new(n), freed: Condvar::new() }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut n = self.available.lock().unwrap_or_else(|e| e.into_inner());
        while *n == 0 {
            n = self.freed.wait(n).unwrap_or_else(|e| e.into_inner());
        }
        *n -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut n = self.0.available.lock().unwrap_or_else(|e| e.into_inner());
        *n += 1;
        self.0.freed.notify_one();
    }
}

pub struct RemoteClient {
    endpoint: String,
    agent: ureq::Agent,
    gate: Gate,
    cache: Option<ResponseCache>,
}

#[derive(Serialize)]
struct WirePassage<'a> {
    id: &'a str,
    text: &'a str,
}

#[derive(Serialize)]
struct SpansRequest<'a> {
    query: &'a str,
    passages: Vec<WirePassage<'a>>,
    mode: SpanMode,
}

#[derive(Deserialize)]
struct WireSpan {
    passage_id: String,
    start: usize,
    end: usize,
    #[serde(default)]
    text: Option<String>,
    confidence: f64,
}

#[derive(Deserialize)]
struct SpansResponse {
    spans: Vec<WireSpan>,
}

#[derive(Serialize)]
struct TextsRequest<'a> {
    texts: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct NerResponse {
    mentions: Vec<Vec<Mention>>,
}

#[derive(Serialize)]
struct WirePair<'a> {
    premise: &'a str,
    hypothesis: &'a str,
}

#[derive(Serialize)]
struct EntailRequest<'a> {
    pairs: Vec<WirePair<'a>>,
}

#[derive(Deserialize)]
struct EntailResponse {
    probabilities: Vec<f64>,
}

impl RemoteClient {
    pub fn new(config: &ProviderConfig) -> Result<Self, ProviderError> {
        let endpoint = config
            .endpoint
            .as_deref()
            .ok_or_else(|| ProviderError::Config("remote mode requires an endpoint".into()))?
            .trim_end_matches('/')
            .to_string();
        let agent = ureq::AgentBuilder::new().timeout(config.timeout).build();
        let cache = match &config.cache_dir {
            Some(dir) => Some(
                ResponseCache::new(dir)
                    .map_err(|e| ProviderError::Config(format!("cache dir {}: {e}", dir.display())))?,
            ),
            None => None,
        };
        Ok(RemoteClient { endpoint, agent, gate: Gate::new(config.max_in_flight.max(1)), cache })
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    fn transport(&self, err: impl std::fmt::Display) -> ProviderError {
        ProviderError::Transport { endpoint: self.endpoint.clone(), message: err.to_string() }
    }

    /// `GET /v1/health`; fails unless the service reports `status: "ok"`.
    pub fn health(&self) -> Result<Value, ProviderError> {
        let _permit = self.gate.acquire();
        let url = format!("{}/v1/health", self.endpoint);
        let body: Value = match self.agent.get(&url).call() {
            Ok(resp) => resp.into_json().map_err(|e| self.transport(e))?,
            Err(ureq::Error::Status(status, resp)) => {
                return Err(ProviderError::Status {
                    operation: "/v1/health".into(),
                    status,
                    body: resp.into_string().unwrap_or_default(),
                })
            }
            Err(err) => return Err(self.transport(err)),
        };
        if body.get("status").and_then(Value::as_str) != Some("ok") {
            return Err(ProviderError::Protocol {
                operation: "/v1/health".into(),
                message: format!("service not ready: {body}"),
            });
        }
        Ok(body)
    }

    fn post<T: serde::de::DeserializeOwned>(&self, operation: &str, request: &impl Serialize) -> Result<T, ProviderError> {
        let request = serde_json::to_value(request).expect("requests serialize");
        let cached = self.cache.as_ref().and_then(|c| c.get(&self.endpoint, operation, &request));
        let response = match cached {
            Some(v) => v,
            None => {
                let v = self.send(operation, &request)?;
                if let Some(cache) = &self.cache {
                    if let Err(e) = cache.put(&self.endpoint, operation, &request, &v) {
                        log::warn!("could not write cache entry: {e}");
                    }
                }
                v
            }
        };
        serde_json::from_value(response).map_err(|e| ProviderError::Protocol {
            operation: operation.into(),
            message: format!("unexpected response shape: {e}"),
        })
    }

    fn send(&self, operation: &str, request: &Value) -> Result<Value, ProviderError> {
        let _permit = self.gate.acquire();
        let url = format!("{}{operation}", self.endpoint);
        match self.agent.post(&url).send_json(request) {
            Ok(resp) => resp.into_json().map_err(|e| ProviderError::Protocol {
                operation: operation.into(),
                message: format!("response is not JSON: {e}"),
            }),
            Err(ureq::Error::Status(status, resp)) => Err(ProviderError::Status {
                operation: operation.into(),
                status,
                body: resp.into_string().unwrap_or_default(),
            }),
            Err(err) => Err(self.transport(err)),
        }
    }

    fn misaligned(operation: &str, expected: usize, got: usize) -> ProviderError {
        ProviderError::Protocol {
            operation: operation.into(),
            message: format!("expected {expected} results, got {got}"),
        }
    }

    /// Raw embeddings, validated for count, equal length and finiteness.
    pub fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, ProviderError> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        let resp: EmbedResponse = self.post("/v1/embed", &TextsRequest { texts })?;
        if resp.vectors.len() != texts.len() {
            return Err(Self::misaligned("/v1/embed", texts.len(), resp.vectors.len()));
        }
        let dim = resp.vectors[0].len();
        if resp.vectors.iter().any(|v| v.len() != dim || v.iter().any(|x| !x.is_finite())) {
            return Err(ProviderError::Protocol {
                operation: "/v1/embed".into(),
                message: "vectors must be finite and of equal length".into(),
            });
        }
        Ok(resp.vectors)
    }
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum();
    let nb: f64 = b.iter().map(|x| x * x).sum();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (na * nb).sqrt()
}

impl SpanPredictor for RemoteClient {
    fn predict_spans(&self, query: &str, passages: &[Passage], mode: SpanMode) -> Result<Vec<AnswerSpan>, ProviderError> {
        let request = SpansRequest {
            query,
            passages: passages.iter().map(|p| WirePassage { id: &p.id, text: &p.text }).collect(),
            mode,
        };
        let resp: SpansResponse = self.post("/v1/spans", &request)?;
        let by_id: HashMap<&str, &Passage> = passages.iter().map(|p| (p.id.as_str(), p)).collect();
        let mut spans = Vec::with_capacity(resp.spans.len());
        for s in resp.spans {
            let Some(passage) = by_id.get(s.passage_id.as_str()) else {
                log::warn!("dropping span for unknown passage {:?}", s.passage_id);
                continue;
            };
            let Some(span) = AnswerSpan::locate(passage, s.start, s.end, s.confidence) else {
                log::warn!("dropping span with invalid offsets {}..{} in passage {:?}", s.start, s.end, s.passage_id);
                continue;
            };
            if let Some(t) = &s.text {
                if *t != span.text {
                    log::warn!("span text {t:?} does not match passage offsets, using {:?}", span.text);
                }
            }
            spans.push(span);
        }
        Ok(spans)
    }
}

impl SimilarityProvider for RemoteClient {
    fn similarities(&self, anchor: &str, others: &[&str]) -> Result<Vec<f64>, ProviderError> {
        if others.is_empty() {
            return Ok(Vec::new());
        }
        let mut texts = Vec::with_capacity(others.len() + 1);
        texts.push(anchor);
        texts.extend_from_slice(others);
        let vectors = self.embed(&texts)?;
        Ok(vectors[1..].iter().map(|v| clamp_signed("embedding cosine", cosine(&vectors[0], v))).collect())
    }
}

impl EntityRecognizer for RemoteClient {
    fn recognize(&self, texts: &[&str]) -> Result<Vec<Vec<Mention>>, ProviderError> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        let resp: NerResponse = self.post("/v1/ner", &TextsRequest { texts })?;
        if resp.mentions.len() != texts.len() {
            return Err(Self::misaligned("/v1/ner", texts.len(), resp.mentions.len()));
        }
        Ok(resp
            .mentions
            .into_iter()
            .zip(texts)
            .map(|(mentions, t)| {
                mentions
                    .into_iter()
                    .filter_map(|mut m| match text::char_slice(t, m.start, m.end) {
                        Some(s) if m.start < m.end => {
                            m.text = s.to_string();
                            Some(m)
                        }
                        _ => {
                            log::warn!("dropping mention {:?} with invalid offsets {}..{}", m.text, m.start, m.end);
                            None
                        }
                    })
                    .collect()
            })
            .collect())
    }
}

impl EntailmentProvider for RemoteClient {
    fn entail(&self, pairs: &[(&str, &str)]) -> Result<Vec<f64>, ProviderError> {
        if pairs.iter().any(|(_, h)| h.trim().is_empty()) {
            return Err(ProviderError::InvalidInput("empty hypothesis".into()));
        }
        if pairs.is_empty() {
            return Ok(Vec::new());
        }
        let request = EntailRequest {
            pairs: pairs.iter().map(|&(premise, hypothesis)| WirePair { premise, hypothesis }).collect(),
        };
        let resp: EntailResponse = self.post("/v1/entail", &request)?;
        if resp.probabilities.len() != pairs.len() {
            return Err(Self::misaligned("/v1/entail", pairs.len(), resp.probabilities.len()));
        }
        Ok(resp.probabilities.into_iter().map(|p| clamp_unit("entailment probability", p)).collect())
    }
}
