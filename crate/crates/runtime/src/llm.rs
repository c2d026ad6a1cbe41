//! Chat-completions transport with a record/replay journal.
//!
//! Every request is keyed by the SHA-256 of its canonical JSON body. In
//! `record` mode live replies are appended to a JSONL journal; in `replay`
//! mode the journal is the only source of replies.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[serde(tag = "error", rename_all = "snake_case")]
pub enum OracleError {
    #[error("transport: {message}")]
    Transport { message: String },
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("malformed completion: {message}")]
    Response { message: String },
    #[error("no journal entry for request {key}")]
    ReplayMiss { key: String },
    #[error("journal: {message}")]
    Journal { message: String },
    #[error("reply for `{symbol}` is not 0 or 1: {reply:?}")]
    Unparseable { symbol: String, reply: String },
    #[error("no language model backend configured for `{symbol}`")]
    NoBackend { symbol: String },
    #[error("cannot evaluate `{term}`: {message}")]
    Term { term: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JournalMode {
    /// Call the endpoint, keep nothing.
    #[default]
    Live,
    /// Call the endpoint and append every exchange to the journal.
    Record,
    /// Answer from the journal only.
    Replay,
}

fn default_base_url() -> String {
    "https://api.openai.com/v1".into()
}

fn default_model() -> String {
    "gpt-4".into()
}

fn default_key_env() -> String {
    "OPENAI_API_KEY".into()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendConfig {
    #[serde(default = "default_base_url")]
    pub base_url: String,
    #[serde(default = "default_model")]
    pub model: String,
    #[serde(default)]
    pub seed: u64,
    /// Environment variable holding the API key.
    #[serde(default = "default_key_env")]
    pub api_key_env: String,
    #[serde(default)]
    pub mode: JournalMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub journal: Option<PathBuf>,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            base_url: default_base_url(),
            model: default_model(),
            seed: 0,
            api_key_env: default_key_env(),
            mode: JournalMode::Live,
            journal: None,
        }
    }
}

/// Anything that turns a prompt into a reply.
pub trait ChatBackend: Send {
    fn complete(&mut self, prompt: &str) -> Result<String, OracleError>;
}

impl<F: FnMut(&str) -> Result<String, OracleError> + Send> ChatBackend for F {
    fn complete(&mut self, prompt: &str) -> Result<String, OracleError> {
        self(prompt)
    }
}

/// The request body sent for `prompt`. Temperature is pinned to zero.
pub fn request_body(model: &str, seed: u64, prompt: &str) -> Value {
    json!({
        "model": model,
        "seed": seed,
        "temperature": 0,
        "messages": [{ "role": "user", "content": prompt }],
    })
}

/// Hex SHA-256 of the canonical (key-sorted) serialization.
pub fn request_key(body: &Value) -> String {
    hex::encode(Sha256::digest(body.to_string().as_bytes()))
}

pub struct HttpChat {
    endpoint: String,
    model: String,
    seed: u64,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl HttpChat {
    pub fn new(config: &BackendConfig) -> HttpChat {
        HttpChat {
            endpoint: format!("{}/chat/completions", config.base_url.trim_end_matches('/')),
            model: config.model.clone(),
            seed: config.seed,
            api_key: std::env::var(&config.api_key_env).ok(),
            agent: ureq::AgentBuilder::new().timeout(Duration::from_secs(120)).build(),
        }
    }

    fn post(&self, body: &Value) -> Result<String, OracleError> {
        let mut req = self.agent.post(&self.endpoint).set("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.set("Authorization", &format!("Bearer {key}"));
        }
        let resp = match req.send_string(&body.to_string()) {
            Ok(r) => r,
            Err(ureq::Error::Status(status, r)) => {
                return Err(OracleError::Http { status, body: r.into_string().unwrap_or_default() });
            }
            Err(e) => return Err(OracleError::Transport { message: e.to_string() }),
        };
        let text = resp.into_string().map_err(|e| OracleError::Transport { message: e.to_string() })?;
        let v: Value = serde_json::from_str(&text).map_err(|e| OracleError::Response { message: e.to_string() })?;
        v.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| OracleError::Response { message: "no choices[0].message.content".into() })
    }
}

impl ChatBackend for HttpChat {
    fn complete(&mut self, prompt: &str) -> Result<String, OracleError> {
        self.post(&request_body(&self.model, self.seed, prompt))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JournalRecord {
    pub key: String,
    pub session: String,
    pub request: Value,
    pub response: String,
}

/// Append-only store of exchanges, shared between sessions.
#[derive(Debug, Default)]
pub struct Journal {
    replies: HashMap<String, String>,
    file: Option<File>,
    path: Option<PathBuf>,
}

fn journal_error(e: impl ToString) -> OracleError {
    OracleError::Journal { message: e.to_string() }
}

impl Journal {
    pub fn in_memory() -> Journal {
        Journal::default()
    }

    /// Loads existing records and opens the file for appending.
    pub fn open(path: &Path) -> Result<Journal, OracleError> {
        let mut replies = HashMap::new();
        if path.exists() {
            for line in BufReader::new(File::open(path).map_err(journal_error)?).lines() {
                let line = line.map_err(journal_error)?;
                if line.trim().is_empty() {
                    continue;
                }
                let r: JournalRecord = serde_json::from_str(&line).map_err(journal_error)?;
                replies.entry(r.key).or_insert(r.response);
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path).map_err(journal_error)?;
        Ok(Journal { replies, file: Some(file), path: Some(path.to_path_buf()) })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.replies.get(key).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.replies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.replies.is_empty()
    }

    pub fn append(&mut self, record: JournalRecord) -> Result<(), OracleError> {
        if let Some(f) = &mut self.file {
            let line = serde_json::to_string(&record).map_err(journal_error)?;
            writeln!(f, "{line}").map_err(journal_error)?;
            f.flush().map_err(journal_error)?;
        }
        self.replies.entry(record.key).or_insert(record.response);
        Ok(())
    }
}

/// A backend wrapped by a journal according to `mode`.
pub struct Journaled {
    live: Option<Box<dyn ChatBackend>>,
    journal: Arc<Mutex<Journal>>,
    mode: JournalMode,
    session: String,
    model: String,
    seed: u64,
}

impl Journaled {
    pub fn new(live: Option<Box<dyn ChatBackend>>, journal: Arc<Mutex<Journal>>, config: &BackendConfig, session: impl Into<String>) -> Journaled {
        Journaled { live, journal, mode: config.mode, session: session.into(), model: config.model.clone(), seed: config.seed }
    }
}

impl ChatBackend for Journaled {
    fn complete(&mut self, prompt: &str) -> Result<String, OracleError> {
        let body = request_body(&self.model, self.seed, prompt);
        let key = request_key(&body);
        if self.mode == JournalMode::Replay {
            let journal = self.journal.lock().map_err(journal_error)?;
            return journal.get(&key).map(str::to_string).ok_or(OracleError::ReplayMiss { key });
        }
        let live = self.live.as_mut().ok_or_else(|| OracleError::Transport { message: "no live backend".into() })?;
        let reply = live.complete(prompt)?;
        if self.mode == JournalMode::Record {
            let record = JournalRecord { key, session: self.session.clone(), request: body, response: reply.clone() };
            self.journal.lock().map_err(journal_error)?.append(record)?;
        }
        Ok(reply)
    }
}

/// The backend described by `config`: live HTTP, optionally journaled.
pub fn connect(config: &BackendConfig, journal: Option<Arc<Mutex<Journal>>>, session: &str) -> Result<Box<dyn ChatBackend>, OracleError> {
    let journal = match (journal, &config.journal) {
        (Some(j), _) => Some(j),
        (None, Some(path)) => Some(Arc::new(Mutex::new(Journal::open(path)?))),
        (None, None) => None,
    };
    let live: Option<Box<dyn ChatBackend>> = match config.mode {
        JournalMode::Replay => None,
        _ => Some(Box::new(HttpChat::new(config))),
    };
    match (config.mode, journal) {
        (JournalMode::Live, _) => Ok(live.expect("live mode has a backend")),
        (_, Some(j)) => Ok(Box::new(Journaled::new(live, j, config, session))),
        (_, None) => Err(journal_error("record and replay need a journal path")),
    }
}
