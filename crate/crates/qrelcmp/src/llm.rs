//! Zero-shot relevance labelling through an OpenAI-compatible chat
//! completion endpoint.
//!
//! Every (query, document) prompt is sent once: responses are cached on
//! disk under the SHA-256 of the model name and rendered prompt, so an
//! interrupted batch resumes where it stopped.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use log::{info, warn};
use qrelcmp_core::trec::{Qrels, QrelsRole};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::io::write_atomic;

pub const API_KEY_ENV: &str = "QRELCMP_API_KEY";

/// A reconstruction of a zero-shot graded-relevance prompt using the TREC
/// Deep Learning grade definitions. Not the verbatim prompt of any study.
pub const DEFAULT_TEMPLATE: &str = "You are a search quality rater evaluating the relevance of web pages.
Given a query and a passage, assign a relevance grade on this scale:
3 = perfectly relevant: the passage is dedicated to the query and contains the exact answer.
2 = highly relevant: the passage has some answer for the query, but it may be unclear or hidden amongst extraneous information.
1 = related: the passage seems related to the query but does not answer it.
0 = irrelevant: the passage has nothing to do with the query.

Query: {query}
Passage: {document}

Answer with a single integer from 0 to 3 and nothing else.";

#[derive(Debug, thiserror::Error)]
pub enum LlmError {
    #[error("invalid labeller configuration: {0}")]
    Config(String),
    #[error("request failed after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("no grade found in response {raw:?}")]
    Parse { raw: String },
    #[error("cache file {}: {message}", path.display())]
    Cache { path: PathBuf, message: String },
    #[error("no text for topic {topic}, document {doc}")]
    MissingText { topic: String, doc: String },
    #[error("{}", describe_failures(.0))]
    Failed(Vec<PairFailure>),
}

fn describe_failures(failures: &[PairFailure]) -> String {
    let mut msg = format!("{} pair(s) could not be labelled", failures.len());
    for f in failures.iter().take(10) {
        msg.push_str(&format!("\n  {} {}: {}", f.topic, f.doc, f.error));
    }
    if failures.len() > 10 {
        msg.push_str(&format!("\n  ... and {} more", failures.len() - 10));
    }
    msg
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairFailure {
    pub topic: String,
    pub doc: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabellerConfig {
    pub endpoint: String,
    pub model: String,
    /// Must contain `{query}` and `{document}`.
    pub template: String,
    pub max_grade: u32,
    pub timeout: Duration,
    /// Extra attempts after the first failed request.
    pub retries: u32,
    /// Delay before the first retry; doubled for each further retry.
    pub backoff: Duration,
    pub cache_dir: Option<PathBuf>,
    /// Requests per second across all workers.
    pub rate_limit: Option<f64>,
    pub concurrency: usize,
    pub api_key: Option<String>,
}

impl Default for LabellerConfig {
    fn default() -> Self {
        Self {
            endpoint: "http://localhost:8000/v1/chat/completions".into(),
            model: "llama3".into(),
            template: DEFAULT_TEMPLATE.into(),
            max_grade: 3,
            timeout: Duration::from_secs(60),
            retries: 3,
            backoff: Duration::from_millis(500),
            cache_dir: None,
            rate_limit: None,
            concurrency: 4,
            api_key: std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()),
        }
    }
}

impl LabellerConfig {
    pub fn validate(&self) -> Result<(), LlmError> {
        for slot in ["{query}", "{document}"] {
            if !self.template.contains(slot) {
                return Err(LlmError::Config(format!("prompt template lacks the {slot} slot")));
            }
        }
        if self.max_grade < 1 {
            return Err(LlmError::Config("grade scale maximum must be at least 1".into()));
        }
        if self.concurrency == 0 {
            return Err(LlmError::Config("concurrency must be at least 1".into()));
        }
        if let Some(r) = self.rate_limit {
            if !(r > 0.0 && r.is_finite()) {
                return Err(LlmError::Config(format!("rate limit must be positive, got {r}")));
            }
        }
        Ok(())
    }

    pub fn render(&self, query: &str, document: &str) -> String {
        self.template.replace("{query}", query).replace("{document}", document)
    }
}

/// Sends one prompt and returns the completion text.
pub trait ChatClient: Send + Sync {
    fn complete(&self, model: &str, prompt: &str) -> Result<String, ClientError>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClientError {
    pub message: String,
    pub retryable: bool,
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: [ChatMessage<'a>; 1],
    temperature: f64,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ResponseMessage,
}

#[derive(Deserialize)]
struct ResponseMessage {
    content: Option<String>,
}

pub struct HttpChatClient {
    agent: ureq::Agent,
    endpoint: String,
    api_key: Option<String>,
}

impl HttpChatClient {
    pub fn new(cfg: &LabellerConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(cfg.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            agent,
            endpoint: cfg.endpoint.clone(),
            api_key: cfg.api_key.clone(),
        }
    }
}

impl ChatClient for HttpChatClient {
    fn complete(&self, model: &str, prompt: &str) -> Result<String, ClientError> {
        let body = ChatRequest {
            model,
            messages: [ChatMessage {
                role: "user",
                content: prompt,
            }],
            temperature: 0.0,
        };
        let mut req = self.agent.post(&self.endpoint);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        let mut resp = req.send_json(&body).map_err(|e| ClientError {
            message: e.to_string(),
            retryable: true,
        })?;
        let status = resp.status().as_u16();
        if !(200..300).contains(&status) {
            let text = resp.body_mut().read_to_string().unwrap_or_default();
            return Err(ClientError {
                message: format!("HTTP {status}: {}", text.trim()),
                retryable: status == 429 || status >= 500,
            });
        }
        let parsed: ChatResponse = resp.body_mut().read_json().map_err(|e| ClientError {
            message: format!("malformed response body: {e}"),
            retryable: false,
        })?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| ClientError {
                message: "response has no message content".into(),
                retryable: false,
            })
    }
}

/// Spaces request start times at least `1 / rate` seconds apart across all
/// threads.
pub struct RateLimiter {
    interval: Option<Duration>,
    next: Mutex<Option<Instant>>,
}

impl RateLimiter {
    pub fn new(rate: Option<f64>) -> Self {
        Self {
            interval: rate.map(|r| Duration::from_secs_f64(1.0 / r)),
            next: Mutex::new(None),
        }
    }

    pub fn acquire(&self) {
        let Some(interval) = self.interval else { return };
        let slot = {
            let mut next = self.next.lock().expect("rate limiter lock");
            let now = Instant::now();
            let slot = next.map_or(now, |n| n.max(now));
            *next = Some(slot + interval);
            slot
        };
        let now = Instant::now();
        if slot > now {
            std::thread::sleep(slot - now);
        }
    }
}

/// First integer token in `[0, max]`. If the response holds integers but
/// none in range, the first is clamped and the second value is `true`.
pub fn extract_grade(raw: &str, max: u32) -> Result<(u32, bool), LlmError> {
    let bytes = raw.as_bytes();
    let mut tokens: Vec<i64> = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i].is_ascii_digit() {
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let negative = start > 0 && bytes[start - 1] == b'-';
            let value = raw[start..i].parse::<i64>().unwrap_or(i64::MAX);
            tokens.push(if negative { -value } else { value });
        } else {
            i += 1;
        }
    }
    if let Some(&g) = tokens.iter().find(|&&t| (0..=max as i64).contains(&t)) {
        return Ok((g as u32, false));
    }
    match tokens.first() {
        Some(&t) => Ok((t.clamp(0, max as i64) as u32, true)),
        None => Err(LlmError::Parse { raw: raw.to_string() }),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelledPair {
    pub topic: String,
    pub doc: String,
    pub grade: u32,
    pub raw_response: String,
    pub cached: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CacheEntry {
    model: String,
    raw_response: String,
}

pub fn cache_key(model: &str, prompt: &str) -> String {
    let mut h = Sha256::new();
    h.update(model.as_bytes());
    h.update([0u8]);
    h.update(prompt.as_bytes());
    hex::encode(h.finalize())
}

/// Labels pairs against one client, with caching, retries and a shared
/// rate limit.
pub struct Labeller<C: ChatClient> {
    cfg: LabellerConfig,
    client: C,
    limiter: RateLimiter,
    requests: AtomicU64,
}

impl Labeller<HttpChatClient> {
    pub fn http(cfg: LabellerConfig) -> Result<Self, LlmError> {
        let client = HttpChatClient::new(&cfg);
        Labeller::new(cfg, client)
    }
}

impl<C: ChatClient> Labeller<C> {
    pub fn new(cfg: LabellerConfig, client: C) -> Result<Self, LlmError> {
        cfg.validate()?;
        if let Some(dir) = &cfg.cache_dir {
            std::fs::create_dir_all(dir).map_err(|e| LlmError::Cache {
                path: dir.clone(),
                message: e.to_string(),
            })?;
        }
        Ok(Self {
            limiter: RateLimiter::new(cfg.rate_limit),
            cfg,
            client,
            requests: AtomicU64::new(0),
        })
    }

    pub fn config(&self) -> &LabellerConfig {
        &self.cfg
    }

    /// Network requests issued so far, retries included.
    pub fn requests(&self) -> u64 {
        self.requests.load(Ordering::SeqCst)
    }

    fn cache_path(&self, key: &str) -> Option<PathBuf> {
        self.cfg.cache_dir.as_ref().map(|d| d.join(format!("{key}.json")))
    }

    fn read_cache(&self, path: &Path) -> Result<Option<CacheEntry>, LlmError> {
        match std::fs::read(path) {
            Ok(bytes) => serde_json::from_slice(&bytes).map(Some).map_err(|e| LlmError::Cache {
                path: path.to_path_buf(),
                message: e.to_string(),
            }),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(LlmError::Cache {
                path: path.to_path_buf(),
                message: e.to_string(),
            }),
        }
    }

    fn request(&self, prompt: &str) -> Result<String, LlmError> {
        let mut attempt = 0;
        loop {
            self.limiter.acquire();
            self.requests.fetch_add(1, Ordering::SeqCst);
            attempt += 1;
            match self.client.complete(&self.cfg.model, prompt) {
                Ok(text) => return Ok(text),
                Err(e) if e.retryable && attempt <= self.cfg.retries => {
                    let delay = self.cfg.backoff.saturating_mul(1 << (attempt - 1).min(16));
                    warn!("request failed ({}); retrying in {:?}", e.message, delay);
                    std::thread::sleep(delay);
                }
                Err(e) => {
                    return Err(LlmError::Transport {
                        attempts: attempt,
                        message: e.message,
                    })
                }
            }
        }
    }

    pub fn label_pair(&self, topic: &str, doc: &str, query: &str, text: &str) -> Result<LabelledPair, LlmError> {
        let prompt = self.cfg.render(query, text);
        let path = self.cache_path(&cache_key(&self.cfg.model, &prompt));
        let cached = match &path {
            Some(p) => self.read_cache(p)?,
            None => None,
        };
        let (raw, was_cached) = match cached {
            Some(entry) => (entry.raw_response, true),
            None => {
                let raw = self.request(&prompt)?;
                if let Some(p) = &path {
                    let entry = CacheEntry {
                        model: self.cfg.model.clone(),
                        raw_response: raw.clone(),
                    };
                    let bytes = serde_json::to_vec(&entry).expect("cache entry serializes");
                    write_atomic(p, &bytes).map_err(|e| LlmError::Cache {
                        path: p.clone(),
                        message: e.to_string(),
                    })?;
                }
                (raw, false)
            }
        };
        let (grade, clamped) = extract_grade(&raw, self.cfg.max_grade)?;
        if clamped {
            warn!("topic {topic}, document {doc}: grade out of range in {raw:?}; clamped to {grade}");
        }
        Ok(LabelledPair {
            topic: topic.to_string(),
            doc: doc.to_string(),
            grade,
            raw_response: raw,
            cached: was_cached,
        })
    }
}

/// One pair to label, with its texts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairInput {
    pub topic: String,
    pub doc: String,
    pub query: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelOutcome {
    pub qrels: Qrels,
    pub labelled: Vec<LabelledPair>,
    pub failures: Vec<PairFailure>,
}

/// Labels every pair using up to `concurrency` workers. Failed pairs are
/// listed; unless `skip_failures` is set, any failure fails the batch.
pub fn label_qrels<C: ChatClient>(
    labeller: &Labeller<C>,
    pairs: &[PairInput],
    skip_failures: bool,
) -> Result<LabelOutcome, LlmError> {
    let results: Vec<Mutex<Option<Result<LabelledPair, LlmError>>>> = pairs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let done = AtomicUsize::new(0);
    let workers = labeller.cfg.concurrency.min(pairs.len()).max(1);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(p) = pairs.get(i) else { break };
                let r = labeller.label_pair(&p.topic, &p.doc, &p.query, &p.text);
                *results[i].lock().expect("result slot") = Some(r);
                let n = done.fetch_add(1, Ordering::SeqCst) + 1;
                if n.is_multiple_of(100) || n == pairs.len() {
                    info!("labelled {n}/{} pairs", pairs.len());
                }
            });
        }
    });

    let mut qrels = Qrels::new(QrelsRole::Candidate);
    let mut labelled = Vec::new();
    let mut failures = Vec::new();
    for (p, slot) in pairs.iter().zip(results) {
        match slot.into_inner().expect("result slot").expect("every pair processed") {
            Ok(l) => {
                qrels
                    .insert(&l.topic, &l.doc, l.grade)
                    .map_err(|e| LlmError::Config(format!("duplicate input pair: {e}")))?;
                labelled.push(l);
            }
            Err(e) => failures.push(PairFailure {
                topic: p.topic.clone(),
                doc: p.doc.clone(),
                error: e.to_string(),
            }),
        }
    }
    let cached = labelled.iter().filter(|l| l.cached).count();
    info!(
        "{} labelled ({cached} from cache), {} failed, {} request(s)",
        labelled.len(),
        failures.len(),
        labeller.requests()
    );
    if !failures.is_empty() && !skip_failures {
        return Err(LlmError::Failed(failures));
    }
    Ok(LabelOutcome {
        qrels,
        labelled,
        failures,
    })
}

/// Parses `topic<TAB>text` lines.
pub fn parse_queries_tsv(text: &str) -> Result<BTreeMap<String, String>, String> {
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (topic, q) = line
            .split_once('\t')
            .ok_or_else(|| format!("line {}: expected topic<TAB>query", n + 1))?;
        out.insert(topic.trim().to_string(), q.to_string());
    }
    Ok(out)
}

/// Parses `topic<TAB>doc<TAB>text` lines.
pub fn parse_docs_tsv(text: &str) -> Result<BTreeMap<(String, String), String>, String> {
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.splitn(3, '\t');
        match (parts.next(), parts.next(), parts.next()) {
            (Some(t), Some(d), Some(body)) => {
                out.insert((t.trim().to_string(), d.trim().to_string()), body.to_string());
            }
            _ => return Err(format!("line {}: expected topic<TAB>doc<TAB>text", n + 1)),
        }
    }
    Ok(out)
}

/// Pairs for every judged (topic, doc) of `universe`, with their texts.
pub fn pairs_for(
    universe: &Qrels,
    queries: &BTreeMap<String, String>,
    docs: &BTreeMap<(String, String), String>,
) -> Result<Vec<PairInput>, LlmError> {
    universe
        .iter()
        .map(|(topic, doc, _)| {
            let missing = || LlmError::MissingText {
                topic: topic.to_string(),
                doc: doc.to_string(),
            };
            let query = queries.get(topic).ok_or_else(missing)?;
            let text = docs.get(&(topic.to_string(), doc.to_string())).ok_or_else(missing)?;
            Ok(PairInput {
                topic: topic.to_string(),
                doc: doc.to_string(),
                query: query.clone(),
                text: text.clone(),
            })
        })
        .collect()
}
