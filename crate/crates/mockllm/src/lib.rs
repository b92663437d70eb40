//! A deterministic stand-in for a chat-completion endpoint.
//!
//! Summaries are built from firmware keywords found in the prompt's code
//! block; category prompts are answered with a ranking scored from the
//! same keywords in the summaries section. Embeddings are hashed
//! bag-of-words vectors. Every HTTP request is counted.

use std::net::SocketAddr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::State;
use axum::http::StatusCode;
use axum::routing::post;
use axum::{Json, Router};
use serde_json::{json, Value};
use tokio::sync::oneshot;

#[derive(Debug, Clone, PartialEq)]
pub enum Reply {
    Text(String),
    Status(u16),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChatMode {
    /// Keyword-driven summaries and rankings.
    Heuristic,
    /// The same text for every request.
    Fixed(String),
    /// Replies in order; the last one repeats.
    Script(Vec<Reply>),
    /// Category prompts first get prose naming no category; the follow-up
    /// gets the heuristic ranking.
    ProseBeforeRanking,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EmbeddingMode {
    Hashed { dim: usize },
    Fixed(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct MockConfig {
    pub chat: ChatMode,
    pub embedding: EmbeddingMode,
    /// Held before answering, to make overlap observable.
    pub delay: Duration,
    /// Chat prompts containing this text get HTTP 400.
    pub reject_containing: Option<String>,
}

impl Default for MockConfig {
    fn default() -> Self {
        MockConfig {
            chat: ChatMode::Heuristic,
            embedding: EmbeddingMode::Hashed { dim: 64 },
            delay: Duration::ZERO,
            reject_containing: None,
        }
    }
}

#[derive(Default)]
struct Counters {
    hits: AtomicUsize,
    chat_hits: AtomicUsize,
    embedding_hits: AtomicUsize,
    in_flight: AtomicUsize,
    max_in_flight: AtomicUsize,
    script_pos: AtomicUsize,
}

struct Shared {
    config: MockConfig,
    counters: Counters,
    bodies: Mutex<Vec<Value>>,
}

/// A running server on an ephemeral localhost port, served from its own
/// thread. Stops when dropped.
pub struct MockServer {
    addr: SocketAddr,
    shared: Arc<Shared>,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl MockServer {
    pub fn spawn(config: MockConfig) -> std::io::Result<Self> {
        let shared = Arc::new(Shared { config, counters: Counters::default(), bodies: Mutex::new(Vec::new()) });
        let listener = std::net::TcpListener::bind("127.0.0.1:0")?;
        listener.set_nonblocking(true)?;
        let addr = listener.local_addr()?;
        let (tx, rx) = oneshot::channel::<()>();
        let state = shared.clone();
        let thread = std::thread::spawn(move || {
            let rt = tokio::runtime::Builder::new_multi_thread()
                .worker_threads(4)
                .enable_all()
                .build()
                .expect("mock runtime");
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::from_std(listener).expect("listener");
                let app = Router::new()
                    .route("/v1/chat/completions", post(chat))
                    .route("/v1/embeddings", post(embeddings))
                    .with_state(state);
                axum::serve(listener, app)
                    .with_graceful_shutdown(async {
                        let _ = rx.await;
                    })
                    .await
                    .expect("mock server");
            });
        });
        Ok(MockServer { addr, shared, shutdown: Some(tx), thread: Some(thread) })
    }

    /// Base URL including the `/v1` prefix.
    pub fn url(&self) -> String {
        format!("http://{}/v1", self.addr)
    }

    pub fn hits(&self) -> usize {
        self.shared.counters.hits.load(Ordering::SeqCst)
    }

    pub fn chat_hits(&self) -> usize {
        self.shared.counters.chat_hits.load(Ordering::SeqCst)
    }

    pub fn embedding_hits(&self) -> usize {
        self.shared.counters.embedding_hits.load(Ordering::SeqCst)
    }

    pub fn max_in_flight(&self) -> usize {
        self.shared.counters.max_in_flight.load(Ordering::SeqCst)
    }

    /// Request bodies in arrival order.
    pub fn bodies(&self) -> Vec<Value> {
        self.shared.bodies.lock().expect("bodies lock").clone()
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

struct InFlight<'a>(&'a Counters);

impl<'a> InFlight<'a> {
    fn enter(c: &'a Counters) -> Self {
        c.hits.fetch_add(1, Ordering::SeqCst);
        let now = c.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        c.max_in_flight.fetch_max(now, Ordering::SeqCst);
        InFlight(c)
    }
}

impl Drop for InFlight<'_> {
    fn drop(&mut self) {
        self.0.in_flight.fetch_sub(1, Ordering::SeqCst);
    }
}

type Answer = (StatusCode, Json<Value>);

fn error(status: u16, msg: &str) -> Answer {
    (
        StatusCode::from_u16(status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR),
        Json(json!({ "error": { "message": msg } })),
    )
}

fn completion(model: &str, text: &str) -> Answer {
    (
        StatusCode::OK,
        Json(json!({
            "object": "chat.completion",
            "model": model,
            "choices": [{ "index": 0, "message": { "role": "assistant", "content": text }, "finish_reason": "stop" }],
        })),
    )
}

async fn chat(State(s): State<Arc<Shared>>, Json(body): Json<Value>) -> Answer {
    let _guard = InFlight::enter(&s.counters);
    s.counters.chat_hits.fetch_add(1, Ordering::SeqCst);
    s.bodies.lock().expect("bodies lock").push(body.clone());
    if !s.config.delay.is_zero() {
        tokio::time::sleep(s.config.delay).await;
    }
    let model = body["model"].as_str().unwrap_or("mock").to_string();
    let messages: Vec<(String, String)> = body["messages"]
        .as_array()
        .map(|ms| {
            ms.iter()
                .map(|m| {
                    (
                        m["role"].as_str().unwrap_or_default().to_string(),
                        m["content"].as_str().unwrap_or_default().to_string(),
                    )
                })
                .collect()
        })
        .unwrap_or_default();
    if messages.is_empty() {
        return error(400, "messages must not be empty");
    }
    if let Some(marker) = &s.config.reject_containing {
        if messages.iter().any(|(_, c)| c.contains(marker.as_str())) {
            return error(400, "rejected by mock configuration");
        }
    }
    match &s.config.chat {
        ChatMode::Fixed(t) => completion(&model, t),
        ChatMode::Script(replies) => {
            let i = s.counters.script_pos.fetch_add(1, Ordering::SeqCst);
            match replies.get(i.min(replies.len().saturating_sub(1))) {
                Some(Reply::Text(t)) => completion(&model, t),
                Some(Reply::Status(code)) => error(*code, "scripted failure"),
                None => error(500, "empty script"),
            }
        }
        ChatMode::Heuristic => completion(&model, &heuristic_answer(&messages, false)),
        ChatMode::ProseBeforeRanking => completion(&model, &heuristic_answer(&messages, true)),
    }
}

async fn embeddings(State(s): State<Arc<Shared>>, Json(body): Json<Value>) -> Answer {
    let _guard = InFlight::enter(&s.counters);
    s.counters.embedding_hits.fetch_add(1, Ordering::SeqCst);
    s.bodies.lock().expect("bodies lock").push(body.clone());
    if !s.config.delay.is_zero() {
        tokio::time::sleep(s.config.delay).await;
    }
    let Some(input) = body["input"].as_str() else {
        return error(400, "input must be a string");
    };
    let values = match &s.config.embedding {
        EmbeddingMode::Fixed(v) => v.clone(),
        EmbeddingMode::Hashed { dim } => hashed_embedding(input, *dim),
    };
    (
        StatusCode::OK,
        Json(json!({
            "object": "list",
            "model": body["model"],
            "data": [{ "object": "embedding", "index": 0, "embedding": values }],
        })),
    )
}

/// Keyword → category title. Checked against lowercase words.
const KEYWORDS: &[(&str, &str)] = &[
    ("uart", "Data Transfer"),
    ("serial", "Data Transfer"),
    ("transmit", "Data Transfer"),
    ("receive", "Data Transfer"),
    ("packet", "Data Transfer"),
    ("message", "Data Transfer"),
    ("telemetry", "Data Transfer"),
    ("mavlink", "Data Transfer"),
    ("gps", "Navigation"),
    ("position", "Navigation"),
    ("waypoint", "Navigation"),
    ("heading", "Navigation"),
    ("latitude", "Navigation"),
    ("longitude", "Navigation"),
    ("motor", "Controller"),
    ("pid", "Controller"),
    ("throttle", "Controller"),
    ("servo", "Controller"),
    ("pwm", "Controller"),
    ("thrust", "Controller"),
    ("failsafe", "Safety Check"),
    ("watchdog", "Safety Check"),
    ("arming", "Safety Check"),
    ("battery", "Safety Check"),
    ("fault", "Safety Check"),
];

const TITLES: [&str; 5] = ["Controller", "Data Transfer", "Navigation", "Safety Check", "Other"];

fn words(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_ascii_alphanumeric()).filter(|w| !w.is_empty()).map(|w| w.to_ascii_lowercase())
}

/// Keywords contained in any word of `text`, in table order.
fn keywords_in(text: &str) -> Vec<&'static str> {
    let ws: Vec<String> = words(text).collect();
    KEYWORDS.iter().map(|(k, _)| *k).filter(|k| ws.iter().any(|w| w.contains(k))).collect()
}

fn between<'a>(text: &'a str, start: &str, end: &str) -> Option<&'a str> {
    let from = text.find(start)? + start.len();
    let to = text[from..].find(end).map_or(text.len(), |i| from + i);
    Some(&text[from..to])
}

fn heuristic_answer(messages: &[(String, String)], prose_first: bool) -> String {
    let first_user = messages.iter().find(|(r, _)| r == "user").map_or("", |(_, c)| c.as_str());
    if let Some(summaries) = between(first_user, "Function summaries:", "Instruction:") {
        let is_follow_up = messages.iter().filter(|(r, _)| r == "user").count() > 1;
        if prose_first && !is_follow_up {
            return "Hard to say from these descriptions alone; it looks like fairly ordinary firmware.".into();
        }
        return ranking_for(summaries);
    }
    let code = between(first_user, "```c", "```").unwrap_or(first_user);
    let found = keywords_in(code);
    if found.is_empty() {
        "This function performs general housekeeping on internal state.".into()
    } else {
        format!("This function works with {} state.", found.join(", "))
    }
}

fn ranking_for(summaries: &str) -> String {
    let ws: Vec<String> = words(summaries).collect();
    let mut scores: Vec<(usize, usize)> = TITLES
        .iter()
        .enumerate()
        .map(|(i, title)| {
            let score = KEYWORDS
                .iter()
                .filter(|(_, t)| t == title)
                .map(|(k, _)| ws.iter().filter(|w| w.contains(k)).count())
                .sum();
            (i, score)
        })
        .collect();
    scores.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    scores
        .iter()
        .enumerate()
        .map(|(rank, (i, _))| format!("{}. {}", rank + 1, TITLES[*i]))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Word counts hashed into `dim` buckets (FNV-1a), never all zero.
pub fn hashed_embedding(text: &str, dim: usize) -> Vec<f64> {
    let dim = dim.max(1);
    let mut v = vec![0.0; dim];
    for w in words(text) {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in w.bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        v[(h % dim as u64) as usize] += 1.0;
    }
    if v.iter().all(|x| *x == 0.0) {
        v[0] = 1.0;
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summaries_follow_keywords() {
        let msgs = vec![("user".to_string(), "Summarize\n```c\nUART_TX = gps_fix;\n```".to_string())];
        assert_eq!(heuristic_answer(&msgs, false), "This function works with uart, gps state.");
    }

    #[test]
    fn ranking_scores_summaries_only() {
        let prompt = "Category definitions:\n- Controller: motor motor motor\n\nFunction summaries:\n1. reads gps position\n\nInstruction:\nrank";
        let msgs = vec![("user".to_string(), prompt.to_string())];
        let answer = heuristic_answer(&msgs, false);
        assert!(answer.starts_with("1. Navigation\n2. Controller"), "{answer}");
        assert_eq!(answer.lines().count(), 5);
    }

    #[test]
    fn embeddings_are_deterministic() {
        assert_eq!(hashed_embedding("a b c", 8), hashed_embedding("a b c", 8));
        assert_eq!(hashed_embedding("", 4), vec![1.0, 0.0, 0.0, 0.0]);
    }
}
