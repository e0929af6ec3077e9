//! Remote providers against a scripted stand-in for the inference service.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use coqex_core::corpus::Passage;
use coqex_core::providers::{
    EntailmentProvider, EntityRecognizer, ProviderMode, RemoteClient, SimilarityProvider, SpanMode, SpanPredictor,
};
use coqex_core::{Engine, PipelineConfig, ProviderConfig, ProviderError, Providers};
use serde_json::{json, Value};

type Handler = dyn Fn(&str, &str, &Value) -> (u16, Value) + Send + Sync;

struct Stub {
    url: String,
    requests: Arc<Mutex<Vec<(String, Value)>>>,
    in_flight: Arc<AtomicUsize>,
    peak: Arc<AtomicUsize>,
}

fn read_request(stream: &mut TcpStream) -> Option<(String, String, Value)> {
    let mut reader = BufReader::new(stream.try_clone().ok()?);
    let mut line = String::new();
    reader.read_line(&mut line).ok()?;
    let mut parts = line.split_whitespace();
    let method = parts.next()?.to_string();
    let path = parts.next()?.to_string();
    let mut length = 0;
    loop {
        let mut header = String::new();
        reader.read_line(&mut header).ok()?;
        let header = header.trim_end();
        if header.is_empty() {
            break;
        }
        if let Some((name, value)) = header.split_once(':') {
            if name.eq_ignore_ascii_case("content-length") {
                length = value.trim().parse().ok()?;
            }
        }
    }
    let mut body = vec![0; length];
    reader.read_exact(&mut body).ok()?;
    let body = if body.is_empty() { Value::Null } else { serde_json::from_slice(&body).ok()? };
    Some((method, path, body))
}

fn start(handler: Box<Handler>) -> Stub {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let requests = Arc::new(Mutex::new(Vec::new()));
    let in_flight = Arc::new(AtomicUsize::new(0));
    let peak = Arc::new(AtomicUsize::new(0));
    let handler: Arc<Handler> = Arc::from(handler);
    let (log, inf, pk) = (requests.clone(), in_flight.clone(), peak.clone());
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let (handler, log, inf, pk) = (handler.clone(), log.clone(), inf.clone(), pk.clone());
            thread::spawn(move || {
                let Some((method, path, body)) = read_request(&mut stream) else { return };
                let now = inf.fetch_add(1, Ordering::SeqCst) + 1;
                pk.fetch_max(now, Ordering::SeqCst);
                log.lock().unwrap().push((path.clone(), body.clone()));
                let (status, reply) = handler(&method, &path, &body);
                inf.fetch_sub(1, Ordering::SeqCst);
                let reply = reply.to_string();
                let _ = write!(
                    stream,
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}",
                    reply.len()
                );
            });
        }
    });
    Stub { url, requests, in_flight, peak }
}

fn config(url: &str) -> ProviderConfig {
    ProviderConfig {
        mode: ProviderMode::Remote,
        endpoint: Some(url.to_string()),
        timeout: Duration::from_secs(5),
        ..ProviderConfig::default()
    }
}

fn passage(id: &str, rank: u32, text: &str) -> Passage {
    Passage { id: id.into(), rank, url: None, text: text.into() }
}

/// A service that answers every endpoint sensibly.
fn service(method: &str, path: &str, body: &Value) -> (u16, Value) {
    match (method, path) {
        ("GET", "/v1/health") => (200, json!({"status": "ok", "models": {"spans": "stub"}})),
        ("POST", "/v1/spans") => {
            let mut spans = Vec::new();
            for p in body["passages"].as_array().unwrap() {
                let text = p["text"].as_str().unwrap();
                let n = text.chars().count();
                spans.push(json!({"passage_id": p["id"], "start": 0, "end": n, "text": text, "confidence": 0.9}));
            }
            (200, json!({ "spans": spans }))
        }
        ("POST", "/v1/embed") => {
            let vectors: Vec<Value> = body["texts"]
                .as_array()
                .unwrap()
                .iter()
                .map(|t| {
                    let s = t.as_str().unwrap();
                    json!([s.len() as f64, if s.contains("lang") { 1.0 } else { 0.0 }])
                })
                .collect();
            (200, json!({ "vectors": vectors }))
        }
        ("POST", "/v1/ner") => {
            let mentions: Vec<Value> = body["texts"]
                .as_array()
                .unwrap()
                .iter()
                .map(|t| {
                    let s = t.as_str().unwrap();
                    match s.find("Lennon") {
                        Some(b) => {
                            let start = s[..b].chars().count();
                            json!([{"text": "Lennon", "type": "PERSON", "start": start, "end": start + 6}])
                        }
                        None => json!([]),
                    }
                })
                .collect();
            (200, json!({ "mentions": mentions }))
        }
        ("POST", "/v1/entail") => {
            let n = body["pairs"].as_array().unwrap().len();
            (200, json!({ "probabilities": vec![0.5; n] }))
        }
        _ => (404, json!({"error": "no route"})),
    }
}

#[test]
fn health_check() {
    let stub = start(Box::new(service));
    let client = RemoteClient::new(&config(&stub.url)).unwrap();
    assert_eq!(client.health().unwrap()["status"], "ok");

    let down = start(Box::new(|_: &str, _: &str, _: &Value| (200, json!({"status": "loading"}))));
    let client = RemoteClient::new(&config(&down.url)).unwrap();
    assert!(matches!(client.health(), Err(ProviderError::Protocol { .. })));
}

#[test]
fn spans_request_shape_and_char_offsets() {
    let stub = start(Box::new(|m: &str, p: &str, b: &Value| {
        if p == "/v1/spans" {
            // "Café" is 4 chars, 5 bytes; the span covers "12 songs"
            return (
                200,
                json!({"spans": [
                    {"passage_id": "a", "start": 9, "end": 17, "text": "12 songs", "confidence": 1.7},
                    {"passage_id": "zzz", "start": 0, "end": 1, "confidence": 0.5},
                    {"passage_id": "a", "start": 5, "end": 400, "confidence": 0.5}
                ]}),
            );
        }
        service(m, p, b)
    }));
    let client = RemoteClient::new(&config(&stub.url)).unwrap();
    let passages = [passage("a", 1, "Café has 12 songs. Other text.")];
    let spans = client.predict_spans("how many songs", &passages, SpanMode::Count).unwrap();
    assert_eq!(spans.len(), 1, "unknown passage and bad offsets are dropped");
    assert_eq!(spans[0].text, "12 songs");
    assert_eq!(spans[0].confidence, 1.0, "confidence clamped");
    assert_eq!(spans[0].parent_sentence, "Café has 12 songs.");

    let requests = stub.requests.lock().unwrap();
    let (path, body) = &requests[0];
    assert_eq!(path, "/v1/spans");
    assert_eq!(body["mode"], "count");
    assert_eq!(body["query"], "how many songs");
    assert_eq!(body["passages"], json!([{"id": "a", "text": "Café has 12 songs. Other text."}]));
}

#[test]
fn embed_similarity_and_alignment() {
    let stub = start(Box::new(service));
    let client = RemoteClient::new(&config(&stub.url)).unwrap();
    let sims = client.similarities("languages", &["languages", "dialects"]).unwrap();
    assert!((sims[0] - 1.0).abs() < 1e-12);
    assert!(sims[1] < sims[0]);
    assert!(client.similarities("x", &[]).unwrap().is_empty());

    let short = start(Box::new(|_: &str, _: &str, _: &Value| (200, json!({"vectors": [[1.0, 0.0]]}))));
    let client = RemoteClient::new(&config(&short.url)).unwrap();
    assert!(matches!(client.similarities("a", &["b"]), Err(ProviderError::Protocol { .. })));
}

#[test]
fn ner_offsets_and_alignment() {
    let stub = start(Box::new(service));
    let client = RemoteClient::new(&config(&stub.url)).unwrap();
    let got = client.recognize(&["Über Lennon", "nobody"]).unwrap();
    assert_eq!(got[0][0].text, "Lennon");
    assert_eq!((got[0][0].start, got[0][0].end), (5, 11));
    assert_eq!(got[0][0].kind, "PERSON");
    assert!(got[1].is_empty());

    let bad = start(Box::new(|_: &str, _: &str, _: &Value| {
        (200, json!({"mentions": [[{"text": "x", "type": "T", "start": 3, "end": 99}]]}))
    }));
    let client = RemoteClient::new(&config(&bad.url)).unwrap();
    assert!(client.recognize(&["abc"]).unwrap()[0].is_empty(), "out-of-range mention dropped");
    assert!(matches!(client.recognize(&["a", "b"]), Err(ProviderError::Protocol { .. })));
}

#[test]
fn entailment_clamps_and_rejects_empty_hypothesis() {
    let stub = start(Box::new(|_: &str, _: &str, _: &Value| (200, json!({"probabilities": [1.4, -0.2]}))));
    let client = RemoteClient::new(&config(&stub.url)).unwrap();
    assert_eq!(client.entail(&[("p", "h"), ("p", "h2")]).unwrap(), vec![1.0, 0.0]);
    let before = stub.requests.lock().unwrap().len();
    assert!(matches!(client.entail(&[("p", " ")]), Err(ProviderError::InvalidInput(_))));
    assert_eq!(stub.requests.lock().unwrap().len(), before, "no request for invalid input");
}

#[test]
fn error_status_is_reported() {
    let stub = start(Box::new(|_: &str, _: &str, _: &Value| (503, json!({"error": "capability unavailable"}))));
    let client = RemoteClient::new(&config(&stub.url)).unwrap();
    match client.entail(&[("p", "h")]) {
        Err(ProviderError::Status { status, body, .. }) => {
            assert_eq!(status, 503);
            assert!(body.contains("unavailable"));
        }
        other => panic!("expected status error, got {other:?}"),
    }
}

#[test]
fn cached_responses_skip_the_network() {
    let stub = start(Box::new(service));
    let dir = std::env::temp_dir().join(format!("coqex-cache-test-{}", std::process::id()));
    let mut cfg = config(&stub.url);
    cfg.cache_dir = Some(dir.clone());
    let client = RemoteClient::new(&cfg).unwrap();
    let first = client.entail(&[("p", "h")]).unwrap();
    let second = client.entail(&[("p", "h")]).unwrap();
    assert_eq!(first, second);
    assert_eq!(stub.requests.lock().unwrap().len(), 1);
    let _ = std::fs::remove_dir_all(dir);
}

#[test]
fn in_flight_requests_are_bounded() {
    let stub = start(Box::new(|m: &str, p: &str, b: &Value| {
        thread::sleep(Duration::from_millis(40));
        service(m, p, b)
    }));
    let mut cfg = config(&stub.url);
    cfg.max_in_flight = 2;
    let client = Arc::new(RemoteClient::new(&cfg).unwrap());
    let handles: Vec<_> = (0..6)
        .map(|i| {
            let client = client.clone();
            thread::spawn(move || client.entail(&[("p", &*format!("h{i}"))]).unwrap())
        })
        .collect();
    for h in handles {
        h.join().unwrap();
    }
    assert!(stub.peak.load(Ordering::SeqCst) <= 2);
    assert_eq!(stub.in_flight.load(Ordering::SeqCst), 0);
}

#[test]
fn engine_runs_end_to_end_on_remote_providers() {
    let stub = start(Box::new(service));
    let config = PipelineConfig { provider: config(&stub.url), ..PipelineConfig::default() };
    let engine = Engine::new(config).unwrap();
    let passages = [passage("a", 1, "John Lennon wrote 180 songs."), passage("b", 2, "Lennon had 5 children.")];
    let package = engine.pipeline("How many songs did Lennon write?", &passages).unwrap();
    assert_eq!(package.prediction.unwrap().value.to_string(), "5");
    let instances = package.instances.unwrap();
    assert_eq!(instances.items[0].instance.surface, "Lennon");
    assert_eq!(instances.items[0].instance.frequency, 2);
    let paths: Vec<String> = stub.requests.lock().unwrap().iter().map(|(p, _)| p.clone()).collect();
    for p in ["/v1/health", "/v1/spans", "/v1/embed", "/v1/ner"] {
        assert!(paths.iter().any(|x| x == p), "{p} not called: {paths:?}");
    }
}

#[test]
fn degrade_falls_back_per_request() {
    let stub = start(Box::new(|m: &str, p: &str, b: &Value| {
        if p == "/v1/spans" {
            return (500, json!({"error": "boom"}));
        }
        service(m, p, b)
    }));
    let mut cfg = config(&stub.url);
    cfg.allow_degrade = true;
    let providers = Providers::from_config(&cfg).unwrap();
    let spans = providers
        .spans
        .predict_spans("how many songs", &[passage("a", 1, "Lennon wrote 180 songs.")], SpanMode::Count)
        .unwrap();
    assert_eq!(spans.len(), 1, "offline fallback produced the span");

    cfg.allow_degrade = false;
    let providers = Providers::from_config(&cfg).unwrap();
    assert!(providers.spans.predict_spans("q", &[passage("a", 1, "x 1")], SpanMode::Count).is_err());
}

#[test]
fn unreachable_service_fails_fast_unless_degrading() {
    let mut cfg = config("http://127.0.0.1:1");
    cfg.timeout = Duration::from_millis(500);
    assert!(matches!(Providers::from_config(&cfg), Err(ProviderError::Transport { .. })));
    cfg.allow_degrade = true;
    assert!(Providers::from_config(&cfg).is_ok());
}
