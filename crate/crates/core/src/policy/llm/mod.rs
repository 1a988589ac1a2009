//! Chat-completion client with corrective retries, plus record/replay
//! transports for offline runs.

pub mod mock;

use std::collections::{HashMap, VecDeque};
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::protocol::{parse_choice, Choice, ProtocolError};
use super::PromptBundle;
use crate::memory::MemoryBank;

pub const KEY_ENV: &str = "WAYFINDER_LLM_KEY";
pub const ENDPOINT_ENV: &str = "WAYFINDER_LLM_ENDPOINT";
pub const DEFAULT_MODEL: &str = "gpt-4o";

#[derive(Debug, Clone, Error, PartialEq, Eq, Serialize, Deserialize)]
pub enum TransportError {
    #[error("request timed out")]
    Timeout,
    #[error("http status {0}")]
    Status(u16),
    #[error("transport failure: {0}")]
    Io(String),
    #[error("unexpected response body: {0}")]
    BadBody(String),
    #[error("no recorded response for request {0}")]
    NotRecorded(String),
}

/// One chat turn. `image_png` is attached to user turns as a data URL.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatMessage {
    pub role: &'static str,
    pub text: String,
    pub image_png: Option<Vec<u8>>,
}

impl ChatMessage {
    pub fn system(text: impl Into<String>) -> Self {
        Self { role: "system", text: text.into(), image_png: None }
    }

    pub fn user(text: impl Into<String>) -> Self {
        Self { role: "user", text: text.into(), image_png: None }
    }

    pub fn assistant(text: impl Into<String>) -> Self {
        Self { role: "assistant", text: text.into(), image_png: None }
    }
}

/// Chat-completion request body.
pub fn request_body(model: &str, messages: &[ChatMessage]) -> Value {
    let messages: Vec<Value> = messages
        .iter()
        .map(|m| match &m.image_png {
            None => json!({ "role": m.role, "content": m.text }),
            Some(png) => {
                let url = format!(
                    "data:image/png;base64,{}",
                    base64::engine::general_purpose::STANDARD.encode(png)
                );
                json!({
                    "role": m.role,
                    "content": [
                        { "type": "text", "text": m.text },
                        { "type": "image_url", "image_url": { "url": url } },
                    ],
                })
            }
        })
        .collect();
    json!({ "model": model, "messages": messages })
}

/// Assistant text of a chat-completion response.
pub fn response_text(body: &Value) -> Result<String, TransportError> {
    body.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| TransportError::BadBody(body.to_string()))
}

pub trait Transport: Send + Sync {
    fn complete(&self, body: &Value) -> Result<String, TransportError>;
}

pub struct HttpTransport {
    endpoint: String,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(endpoint: impl Into<String>, api_key: Option<String>, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self { endpoint: endpoint.into(), api_key, agent }
    }

    /// Endpoint and key from `WAYFINDER_LLM_ENDPOINT` / `WAYFINDER_LLM_KEY`.
    pub fn from_env(timeout: Duration) -> Option<Self> {
        let endpoint = std::env::var(ENDPOINT_ENV).ok()?;
        Some(Self::new(endpoint, std::env::var(KEY_ENV).ok(), timeout))
    }
}

impl Transport for HttpTransport {
    fn complete(&self, body: &Value) -> Result<String, TransportError> {
        let mut request = self.agent.post(&self.endpoint);
        if let Some(key) = &self.api_key {
            request = request.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = request.send_json(body).map_err(|e| match e {
            ureq::Error::Timeout(_) => TransportError::Timeout,
            ureq::Error::Io(io) if io.kind() == std::io::ErrorKind::TimedOut => TransportError::Timeout,
            other => TransportError::Io(other.to_string()),
        })?;
        let status = response.status().as_u16();
        if status != 200 {
            return Err(TransportError::Status(status));
        }
        let value: Value = response
            .body_mut()
            .read_json()
            .map_err(|e| TransportError::BadBody(e.to_string()))?;
        response_text(&value)
    }
}

/// Stable key of a request body (SHA-256 of its compact JSON).
pub fn request_key(body: &Value) -> String {
    let digest = Sha256::digest(body.to_string().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayRecord {
    pub key: String,
    pub response: String,
}

/// Wraps another transport and appends every successful exchange to a JSON
/// lines file.
pub struct RecordingTransport<T: Transport> {
    inner: T,
    path: PathBuf,
    lock: Mutex<()>,
}

impl<T: Transport> RecordingTransport<T> {
    pub fn new(inner: T, path: impl Into<PathBuf>) -> Self {
        Self { inner, path: path.into(), lock: Mutex::new(()) }
    }
}

impl<T: Transport> Transport for RecordingTransport<T> {
    fn complete(&self, body: &Value) -> Result<String, TransportError> {
        let response = self.inner.complete(body)?;
        let record = ReplayRecord { key: request_key(body), response: response.clone() };
        let _guard = self.lock.lock().expect("recording lock");
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(|e| TransportError::Io(e.to_string()))?;
        let line = serde_json::to_string(&record).expect("record serializes");
        writeln!(file, "{line}").map_err(|e| TransportError::Io(e.to_string()))?;
        Ok(response)
    }
}

/// Serves recorded responses by request key, in recording order for
/// repeated keys.
pub struct ReplayTransport {
    responses: Mutex<HashMap<String, VecDeque<String>>>,
}

impl ReplayTransport {
    pub fn from_records(records: impl IntoIterator<Item = ReplayRecord>) -> Self {
        let mut responses: HashMap<String, VecDeque<String>> = HashMap::new();
        for record in records {
            responses.entry(record.key).or_default().push_back(record.response);
        }
        Self { responses: Mutex::new(responses) }
    }

    pub fn from_jsonl(text: &str) -> Result<Self, serde_json::Error> {
        let records = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<Result<Vec<ReplayRecord>, _>>()?;
        Ok(Self::from_records(records))
    }

    pub fn open(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_jsonl(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }
}

impl Transport for ReplayTransport {
    fn complete(&self, body: &Value) -> Result<String, TransportError> {
        let key = request_key(body);
        let mut responses = self.responses.lock().expect("replay lock");
        responses
            .get_mut(&key)
            .and_then(VecDeque::pop_front)
            .ok_or(TransportError::NotRecorded(key))
    }
}

pub struct LlmClient {
    transport: Box<dyn Transport>,
    pub model: String,
    pub max_retries: u32,
}

/// What happened on one attempt of [`llm_choose`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum AttemptError {
    Transport(TransportError),
    Parse { reply: String, error: ProtocolError },
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("no usable choice after {} attempts", attempts.len())]
pub struct PolicyFailure {
    pub attempts: Vec<AttemptError>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LlmChoice {
    pub choice: Choice,
    /// Failed attempts before the accepted one.
    pub failed_attempts: Vec<AttemptError>,
    /// Number of requests sent, including the accepted one.
    pub calls: u32,
}

pub fn corrective_message(error: &ProtocolError) -> String {
    format!(
        "Your previous answer could not be used ({error}). Choose an unvisited landmark and end your answer with its index in brackets, e.g. [3]."
    )
}

impl LlmClient {
    pub fn new(transport: impl Transport + 'static, model: impl Into<String>, max_retries: u32) -> Self {
        Self { transport: Box::new(transport), model: model.into(), max_retries }
    }

    pub fn complete(&self, messages: &[ChatMessage]) -> Result<String, TransportError> {
        self.transport.complete(&request_body(&self.model, messages))
    }
}

/// Asks for a landmark choice, retrying up to `max_retries` times on
/// transport or parse errors. Parse errors are fed back as a user turn.
pub fn llm_choose(client: &LlmClient, bundle: &PromptBundle, bank: &MemoryBank) -> Result<LlmChoice, PolicyFailure> {
    let mut messages = vec![
        ChatMessage::system(bundle.system_text.clone()),
        ChatMessage {
            role: "user",
            text: bundle.instruction_text.clone(),
            image_png: bundle.map_image.clone(),
        },
    ];
    let mut failed = Vec::new();
    for attempt in 0..=client.max_retries {
        match client.complete(&messages) {
            Err(e) => failed.push(AttemptError::Transport(e)),
            Ok(reply) => match parse_choice(&reply, bank) {
                Ok(choice) => {
                    return Ok(LlmChoice { choice, failed_attempts: failed, calls: attempt + 1 });
                }
                Err(error) => {
                    messages.push(ChatMessage::assistant(reply.clone()));
                    messages.push(ChatMessage::user(corrective_message(&error)));
                    failed.push(AttemptError::Parse { reply, error });
                }
            },
        }
    }
    Err(PolicyFailure { attempts: failed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Point2;
    use crate::memory::LandmarkCategory;

    struct Scripted(Mutex<VecDeque<Result<String, TransportError>>>);

    impl Transport for Scripted {
        fn complete(&self, _body: &Value) -> Result<String, TransportError> {
            self.0.lock().unwrap().pop_front().unwrap_or(Err(TransportError::Status(500)))
        }
    }

    fn bundle() -> PromptBundle {
        PromptBundle {
            system_text: "sys".into(),
            instruction_text: "pick".into(),
            map_image: Some(vec![1, 2, 3]),
            landmark_json: None,
        }
    }

    fn bank() -> MemoryBank {
        let mut bank = MemoryBank::new();
        bank.insert(LandmarkCategory::Frontier, Point2::new(1.0, 0.0), 0.0);
        bank.insert(LandmarkCategory::Frontier, Point2::new(2.0, 0.0), 0.0);
        bank
    }

    #[test]
    fn body_carries_image_as_data_url() {
        let body = request_body("m", &[ChatMessage::system("s"), ChatMessage { role: "user", text: "t".into(), image_png: Some(vec![0, 1]) }]);
        assert_eq!(body["messages"][0]["content"], "s");
        assert_eq!(body["messages"][1]["content"][1]["image_url"]["url"], "data:image/png;base64,AAE=");
    }

    #[test]
    fn visited_reply_is_corrected() {
        let mut bank = bank();
        bank.mark_visited(0).unwrap();
        let client = LlmClient::new(
            Scripted(Mutex::new(VecDeque::from([Ok("[0]".to_string()), Ok("fine; [1]".to_string())]))),
            "m",
            2,
        );
        let out = llm_choose(&client, &bundle(), &bank).unwrap();
        assert_eq!(out.choice.landmark_index, 1);
        assert_eq!(out.calls, 2);
        assert!(matches!(
            out.failed_attempts[0],
            AttemptError::Parse { error: ProtocolError::AlreadyVisited(0), .. }
        ));
    }

    #[test]
    fn replay_serves_in_order() {
        let body = json!({"a": 1});
        let key = request_key(&body);
        let replay = ReplayTransport::from_records([
            ReplayRecord { key: key.clone(), response: "one".into() },
            ReplayRecord { key, response: "two".into() },
        ]);
        assert_eq!(replay.complete(&body).unwrap(), "one");
        assert_eq!(replay.complete(&body).unwrap(), "two");
        assert!(matches!(replay.complete(&body), Err(TransportError::NotRecorded(_))));
    }

    #[test]
    fn recording_then_replay_roundtrips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.jsonl");
        let recorder = RecordingTransport::new(
            Scripted(Mutex::new(VecDeque::from([Ok("[1]".to_string())]))),
            &path,
        );
        let client = LlmClient::new(recorder, "m", 0);
        let first = llm_choose(&client, &bundle(), &bank()).unwrap();
        let replay = LlmClient::new(ReplayTransport::open(&path).unwrap(), "m", 0);
        let second = llm_choose(&replay, &bundle(), &bank()).unwrap();
        assert_eq!(first.choice, second.choice);
    }
}
