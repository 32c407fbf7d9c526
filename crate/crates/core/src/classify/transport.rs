//! Transports for the LLM classifier: live HTTP, record, replay, and a
//! scripted double for tests. Record/replay files map request hashes to raw
//! response text so classification runs fully offline.

use futures::future::BoxFuture;
use futures::FutureExt;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use thiserror::Error;

/// API credential. Never serialized and redacted from debug output.
#[derive(Clone)]
pub struct Secret(String);

impl Secret {
    pub fn new(value: impl Into<String>) -> Self {
        Secret(value.into())
    }

    pub fn expose(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Secret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Secret(***)")
    }
}

/// One chat-completion style request. The serialized form is hashed to key
/// caches and recordings.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct LlmRequest {
    pub model: String,
    pub system: String,
    pub user: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl LlmRequest {
    /// SHA-256 of the canonical JSON serialization.
    pub fn request_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("request serializes");
        let mut hasher = Sha256::new();
        hasher.update(json.as_bytes());
        format!("{:x}", hasher.finalize())
    }
}

#[derive(Debug, Error)]
pub enum TransportError {
    /// Worth retrying: timeouts, 429, 5xx.
    #[error("transient transport error: {0}")]
    Transient(String),
    /// Not worth retrying: auth failures, missing recordings.
    #[error("fatal transport error: {0}")]
    Fatal(String),
}

/// Completes one request to raw response text.
pub trait Transport: Send + Sync {
    fn complete<'a>(&'a self, request: &'a LlmRequest)
        -> BoxFuture<'a, Result<String, TransportError>>;
}

/// Live transport against a chat-completion HTTP API.
pub struct HttpTransport {
    client: reqwest::Client,
    endpoint: String,
    credential: Secret,
}

impl HttpTransport {
    pub fn new(endpoint: impl Into<String>, credential: Secret) -> Result<Self, TransportError> {
        let client = reqwest::Client::builder()
            .build()
            .map_err(|e| TransportError::Fatal(e.to_string()))?;
        Ok(HttpTransport {
            client,
            endpoint: endpoint.into(),
            credential,
        })
    }
}

impl Transport for HttpTransport {
    fn complete<'a>(
        &'a self,
        request: &'a LlmRequest,
    ) -> BoxFuture<'a, Result<String, TransportError>> {
        async move {
            let body = serde_json::json!({
                "model": request.model,
                "messages": [
                    {"role": "system", "content": request.system},
                    {"role": "user", "content": request.user},
                ],
                "temperature": request.temperature,
                "max_tokens": request.max_tokens,
            });
            let response = self
                .client
                .post(&self.endpoint)
                .bearer_auth(self.credential.expose())
                .json(&body)
                .send()
                .await
                .map_err(|e| TransportError::Transient(e.to_string()))?;
            let status = response.status();
            if status == reqwest::StatusCode::UNAUTHORIZED
                || status == reqwest::StatusCode::FORBIDDEN
            {
                return Err(TransportError::Fatal(format!("auth rejected: {status}")));
            }
            if !status.is_success() {
                return Err(TransportError::Transient(format!("status {status}")));
            }
            let json: serde_json::Value = response
                .json()
                .await
                .map_err(|e| TransportError::Transient(e.to_string()))?;
            json.pointer("/choices/0/message/content")
                .and_then(|v| v.as_str())
                .map(|s| s.to_string())
                .ok_or_else(|| TransportError::Transient("response lacks message content".into()))
        }
        .boxed()
    }
}

/// Serves recorded responses by request hash; never touches the network.
pub struct ReplayTransport {
    recordings: BTreeMap<String, String>,
    reads: AtomicUsize,
}

impl ReplayTransport {
    pub fn new(recordings: BTreeMap<String, String>) -> Self {
        ReplayTransport {
            recordings,
            reads: AtomicUsize::new(0),
        }
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, TransportError> {
        let bytes = std::fs::read(path.as_ref())
            .map_err(|e| TransportError::Fatal(format!("recording file: {e}")))?;
        let recordings = serde_json::from_slice(&bytes)
            .map_err(|e| TransportError::Fatal(format!("recording file: {e}")))?;
        Ok(Self::new(recordings))
    }

    /// Number of recordings served so far.
    pub fn reads(&self) -> usize {
        self.reads.load(Ordering::SeqCst)
    }
}

impl Transport for ReplayTransport {
    fn complete<'a>(
        &'a self,
        request: &'a LlmRequest,
    ) -> BoxFuture<'a, Result<String, TransportError>> {
        async move {
            let hash = request.request_hash();
            match self.recordings.get(&hash) {
                Some(response) => {
                    self.reads.fetch_add(1, Ordering::SeqCst);
                    Ok(response.clone())
                }
                None => Err(TransportError::Fatal(format!(
                    "no recording for request {hash}"
                ))),
            }
        }
        .boxed()
    }
}

/// Wraps another transport and records request hash -> response text.
pub struct RecordingTransport<T> {
    inner: T,
    recordings: Mutex<BTreeMap<String, String>>,
}

impl<T: Transport> RecordingTransport<T> {
    pub fn new(inner: T) -> Self {
        RecordingTransport {
            inner,
            recordings: Mutex::new(BTreeMap::new()),
        }
    }

    pub fn recordings(&self) -> BTreeMap<String, String> {
        self.recordings.lock().unwrap().clone()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        let map = self.recordings.lock().unwrap();
        let mut json = serde_json::to_string_pretty(&*map)?;
        json.push('\n');
        std::fs::write(path, json)
    }
}

impl<T: Transport> Transport for RecordingTransport<T> {
    fn complete<'a>(
        &'a self,
        request: &'a LlmRequest,
    ) -> BoxFuture<'a, Result<String, TransportError>> {
        async move {
            let response = self.inner.complete(request).await?;
            self.recordings
                .lock()
                .unwrap()
                .insert(request.request_hash(), response.clone());
            Ok(response)
        }
        .boxed()
    }
}

/// Test double driven by a response sequence; repeats the last entry once
/// the sequence is exhausted.
pub struct ScriptedTransport {
    responses: Mutex<Vec<String>>,
    cursor: AtomicUsize,
    calls: AtomicUsize,
}

impl ScriptedTransport {
    pub fn always(response: impl Into<String>) -> Self {
        Self::sequence(vec![response.into()])
    }

    pub fn sequence(responses: Vec<String>) -> Self {
        assert!(!responses.is_empty(), "scripted transport needs responses");
        ScriptedTransport {
            responses: Mutex::new(responses),
            cursor: AtomicUsize::new(0),
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl Transport for ScriptedTransport {
    fn complete<'a>(
        &'a self,
        _request: &'a LlmRequest,
    ) -> BoxFuture<'a, Result<String, TransportError>> {
        async move {
            self.calls.fetch_add(1, Ordering::SeqCst);
            let responses = self.responses.lock().unwrap();
            let idx = self.cursor.fetch_add(1, Ordering::SeqCst);
            Ok(responses[idx.min(responses.len() - 1)].clone())
        }
        .boxed()
    }
}
