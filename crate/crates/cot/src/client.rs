//! Model client interface, request hashing and the built-in backends.

use std::collections::{BTreeMap, VecDeque};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::CotError;
use crate::mock;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestKind {
    Reflect,
    Generate,
    Summarize,
    Privacy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Part {
    Text {
        text: String,
    },
    /// Image file plus the hash of its bytes; only the hash enters the cache key.
    Image {
        path: String,
        sha256: String,
    },
}

impl Part {
    pub fn text(t: impl Into<String>) -> Part {
        Part::Text { text: t.into() }
    }

    pub fn image(path: &Path) -> Result<Part, CotError> {
        let bytes = fs::read(path).map_err(|e| CotError::io(path, e))?;
        Ok(Part::Image {
            path: path.display().to_string(),
            sha256: sha256_hex(&bytes),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub parts: Vec<Part>,
}

impl Message {
    pub fn new(role: Role, parts: Vec<Part>) -> Self {
        Message { role, parts }
    }

    pub fn text(role: Role, t: impl Into<String>) -> Self {
        Message::new(role, vec![Part::text(t)])
    }

    pub fn joined_text(&self) -> String {
        self.parts
            .iter()
            .filter_map(|p| match p {
                Part::Text { text } => Some(text.as_str()),
                Part::Image { .. } => None,
            })
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// One completion request. `messages[0]` is the system message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelRequest {
    pub kind: RequestKind,
    /// Retry attempt; part of the key so a malformed cached reply is not
    /// replayed on every retry.
    #[serde(default)]
    pub attempt: u32,
    pub messages: Vec<Message>,
}

impl ModelRequest {
    pub fn new(kind: RequestKind, system: impl Into<String>, mut rest: Vec<Message>) -> Self {
        let mut messages = vec![Message::text(Role::System, system)];
        messages.append(&mut rest);
        ModelRequest {
            kind,
            attempt: 0,
            messages,
        }
    }

    pub fn system(&self) -> &str {
        match self.messages.first().and_then(|m| m.parts.first()) {
            Some(Part::Text { text }) => text,
            _ => "",
        }
    }

    pub fn image_count(&self) -> usize {
        self.messages
            .iter()
            .flat_map(|m| &m.parts)
            .filter(|p| matches!(p, Part::Image { .. }))
            .count()
    }

    /// Canonical form: sorted keys, image parts reduced to their content hash.
    pub fn canonical_json(&self) -> Vec<u8> {
        let messages: Vec<Value> = self
            .messages
            .iter()
            .map(|m| {
                let parts: Vec<Value> = m
                    .parts
                    .iter()
                    .map(|p| match p {
                        Part::Text { text } => json!({"type": "text", "text": text}),
                        Part::Image { sha256, .. } => json!({"type": "image", "sha256": sha256}),
                    })
                    .collect();
                json!({"role": m.role, "parts": parts})
            })
            .collect();
        let v = json!({"kind": self.kind, "attempt": self.attempt, "messages": messages});
        serde_json::to_vec(&v).expect("json values serialize")
    }

    pub fn cache_key(&self) -> String {
        sha256_hex(&self.canonical_json())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub trait ModelClient: Send + Sync {
    fn complete(&self, req: &ModelRequest) -> Result<String, CotError>;
}

impl<C: ModelClient + ?Sized> ModelClient for Box<C> {
    fn complete(&self, req: &ModelRequest) -> Result<String, CotError> {
        (**self).complete(req)
    }
}

impl<C: ModelClient + ?Sized> ModelClient for std::sync::Arc<C> {
    fn complete(&self, req: &ModelRequest) -> Result<String, CotError> {
        (**self).complete(req)
    }
}

impl<C: ModelClient + ?Sized> ModelClient for &C {
    fn complete(&self, req: &ModelRequest) -> Result<String, CotError> {
        (**self).complete(req)
    }
}

/// Deterministic offline backend. Replies are a function of the request
/// alone; per-kind fixed replies override the generated ones.
#[derive(Debug, Clone, Default)]
pub struct MockClient {
    fixed: BTreeMap<RequestKind, String>,
}

impl MockClient {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_reply(mut self, kind: RequestKind, reply: impl Into<String>) -> Self {
        self.fixed.insert(kind, reply.into());
        self
    }
}

impl ModelClient for MockClient {
    fn complete(&self, req: &ModelRequest) -> Result<String, CotError> {
        if let Some(r) = self.fixed.get(&req.kind) {
            return Ok(r.clone());
        }
        Ok(mock::reply(req))
    }
}

/// Replays a queue of canned results and records every request it sees.
/// Once the queue is empty it falls back to a [`MockClient`].
#[derive(Default)]
pub struct ScriptedClient {
    replies: Mutex<VecDeque<Result<String, CotError>>>,
    seen: Mutex<Vec<ModelRequest>>,
    fallback: MockClient,
}

impl ScriptedClient {
    pub fn new(replies: impl IntoIterator<Item = Result<String, CotError>>) -> Self {
        ScriptedClient {
            replies: Mutex::new(replies.into_iter().collect()),
            ..Default::default()
        }
    }

    pub fn with_fallback(mut self, fallback: MockClient) -> Self {
        self.fallback = fallback;
        self
    }

    pub fn requests(&self) -> Vec<ModelRequest> {
        self.seen.lock().unwrap().clone()
    }
}

impl ModelClient for ScriptedClient {
    fn complete(&self, req: &ModelRequest) -> Result<String, CotError> {
        self.seen.lock().unwrap().push(req.clone());
        let next = self.replies.lock().unwrap().pop_front();
        match next {
            Some(r) => r,
            None => self.fallback.complete(req),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheEntry {
    key: String,
    kind: RequestKind,
    response: String,
}

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

/// Content-addressed response cache in front of another client. Without an
/// inner client it only replays, and a miss is an error.
pub struct CachedClient {
    dir: PathBuf,
    inner: Option<Box<dyn ModelClient>>,
    hits: AtomicUsize,
    misses: AtomicUsize,
}

impl CachedClient {
    pub fn new(dir: impl Into<PathBuf>, inner: Box<dyn ModelClient>) -> Result<Self, CotError> {
        Self::open(dir.into(), Some(inner))
    }

    pub fn replay(dir: impl Into<PathBuf>) -> Result<Self, CotError> {
        Self::open(dir.into(), None)
    }

    fn open(dir: PathBuf, inner: Option<Box<dyn ModelClient>>) -> Result<Self, CotError> {
        fs::create_dir_all(&dir).map_err(|e| CotError::io(&dir, e))?;
        Ok(CachedClient {
            dir,
            inner,
            hits: AtomicUsize::new(0),
            misses: AtomicUsize::new(0),
        })
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> usize {
        self.misses.load(Ordering::Relaxed)
    }

    pub fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    fn store(&self, entry: &CacheEntry) -> Result<(), CotError> {
        let path = self.path_for(&entry.key);
        let n = TMP_COUNTER.fetch_add(1, Ordering::Relaxed);
        let tmp = self
            .dir
            .join(format!(".{}.{}.{n}.tmp", entry.key, std::process::id()));
        let mut bytes = serde_json::to_vec_pretty(entry).expect("entry serializes");
        bytes.push(b'\n');
        fs::write(&tmp, &bytes).map_err(|e| CotError::io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| CotError::io(&path, e))
    }
}

impl ModelClient for CachedClient {
    fn complete(&self, req: &ModelRequest) -> Result<String, CotError> {
        let key = req.cache_key();
        let path = self.path_for(&key);
        if let Ok(bytes) = fs::read(&path) {
            let entry: CacheEntry =
                serde_json::from_slice(&bytes).map_err(|e| CotError::io(&path, e))?;
            self.hits.fetch_add(1, Ordering::Relaxed);
            return Ok(entry.response);
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        let Some(inner) = &self.inner else {
            return Err(CotError::CacheMiss(key));
        };
        let response = inner.complete(req)?;
        self.store(&CacheEntry {
            key,
            kind: req.kind,
            response: response.clone(),
        })?;
        Ok(response)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Mock,
    Http,
    Replay,
}

/// Backend section of a job config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    /// OpenAI-compatible chat completions URL.
    pub endpoint: String,
    pub model: String,
    /// Environment variable holding the bearer token.
    pub token_env: String,
    pub max_in_flight: usize,
    pub attempts: u32,
    pub backoff_ms: u64,
    pub timeout_secs: u64,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            kind: BackendKind::Mock,
            endpoint: "http://localhost:8000/v1/chat/completions".into(),
            model: "default".into(),
            token_env: "CUAKIT_API_TOKEN".into(),
            max_in_flight: 4,
            attempts: 3,
            backoff_ms: 500,
            timeout_secs: 120,
        }
    }
}

struct Semaphore {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Semaphore {
    fn acquire(&self) {
        let mut free = self.free.lock().unwrap();
        while *free == 0 {
            free = self.cv.wait(free).unwrap();
        }
        *free -= 1;
    }

    fn release(&self) {
        *self.free.lock().unwrap() += 1;
        self.cv.notify_one();
    }
}

/// Chat-completions client with a bound on concurrent requests.
pub struct HttpClient {
    http: reqwest::blocking::Client,
    endpoint: String,
    model: String,
    token: Option<String>,
    slots: Semaphore,
}

impl HttpClient {
    pub fn new(cfg: &BackendConfig) -> Result<Self, CotError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(cfg.timeout_secs))
            .build()
            .map_err(|e| CotError::Backend(e.to_string()))?;
        Ok(HttpClient {
            http,
            endpoint: cfg.endpoint.clone(),
            model: cfg.model.clone(),
            token: std::env::var(&cfg.token_env).ok(),
            slots: Semaphore {
                free: Mutex::new(cfg.max_in_flight.max(1)),
                cv: Condvar::new(),
            },
        })
    }

    fn body(&self, req: &ModelRequest) -> Result<Value, CotError> {
        let mut messages = Vec::with_capacity(req.messages.len());
        for m in &req.messages {
            let mut content = Vec::with_capacity(m.parts.len());
            for p in &m.parts {
                content.push(match p {
                    Part::Text { text } => json!({"type": "text", "text": text}),
                    Part::Image { path, .. } => {
                        let bytes = fs::read(path).map_err(|e| CotError::io(path, e))?;
                        let b64 = base64::engine::general_purpose::STANDARD.encode(bytes);
                        json!({"type": "image_url", "image_url": {"url": format!("data:image/png;base64,{b64}")}})
                    }
                });
            }
            messages.push(json!({"role": m.role.as_str(), "content": content}));
        }
        Ok(json!({"model": self.model, "messages": messages, "temperature": 0}))
    }
}

impl ModelClient for HttpClient {
    fn complete(&self, req: &ModelRequest) -> Result<String, CotError> {
        let body = self.body(req)?;
        self.slots.acquire();
        let result = (|| {
            let mut rb = self.http.post(&self.endpoint).json(&body);
            if let Some(t) = &self.token {
                rb = rb.bearer_auth(t);
            }
            let resp = rb.send().map_err(|e| CotError::Backend(e.to_string()))?;
            let status = resp.status();
            if !status.is_success() {
                return Err(CotError::Backend(format!("HTTP {status}")));
            }
            let v: Value = resp.json().map_err(|e| CotError::Backend(e.to_string()))?;
            v.pointer("/choices/0/message/content")
                .and_then(Value::as_str)
                .map(str::to_string)
                .ok_or_else(|| CotError::Backend("reply has no message content".into()))
        })();
        self.slots.release();
        result
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_ignores_image_path_but_not_content() {
        let mk = |path: &str, sha: &str| {
            ModelRequest::new(
                RequestKind::Reflect,
                "sys",
                vec![Message::new(
                    Role::User,
                    vec![Part::Image {
                        path: path.into(),
                        sha256: sha.into(),
                    }],
                )],
            )
        };
        assert_eq!(mk("a.png", "00").cache_key(), mk("b.png", "00").cache_key());
        assert_ne!(mk("a.png", "00").cache_key(), mk("a.png", "01").cache_key());
        let mut r = mk("a.png", "00");
        r.attempt = 1;
        assert_ne!(r.cache_key(), mk("a.png", "00").cache_key());
    }
}
