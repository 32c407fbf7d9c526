//! LLM-backed classification: cache lookup, rate-limited concurrent
//! requests, parse retries, and the content fallback.

use super::cache::{CacheEntry, PredictionCache};
use super::prompt::{build_prompt, template_sha256, truncate_chars, BODY_CHAR_LIMIT};
use super::transport::{HttpTransport, LlmRequest, Secret, Transport, TransportError};
use super::{parse_response, ClassificationOutcome, ClassifierSpec, ClassifyError, InputMode};
use crate::snapshot::{PageType, SiteSnapshot};
use futures::stream::{self, StreamExt};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::time::Duration;

/// Environment variable holding the API credential.
pub const API_KEY_ENV: &str = "CRAWLSCOUT_API_KEY";

/// Classification requests ask for at most this many completion tokens.
pub const RESPONSE_TOKEN_CAP: u32 = 8;

/// Connection parameters for a chat-completion style API. The credential is
/// never serialized; prompts always run at temperature 0.
#[derive(Debug, Clone)]
pub struct ApiConfig {
    pub endpoint: String,
    pub credential: Option<Secret>,
    pub max_concurrent_requests: usize,
    pub requests_per_minute: u32,
    pub max_retries: u32,
    pub temperature: f64,
}

impl ApiConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        ApiConfig {
            endpoint: endpoint.into(),
            credential: None,
            max_concurrent_requests: 4,
            requests_per_minute: 60,
            max_retries: 2,
            temperature: 0.0,
        }
    }

    /// Reads the credential from `CRAWLSCOUT_API_KEY` if present.
    pub fn from_env(endpoint: impl Into<String>) -> Self {
        let mut config = Self::new(endpoint);
        config.credential = std::env::var(API_KEY_ENV).ok().map(Secret::new);
        config
    }
}

/// Builds the live transport, failing before any call when the credential is
/// missing.
pub fn http_transport(api: &ApiConfig) -> Result<HttpTransport, ClassifyError> {
    let credential = api.credential.clone().ok_or_else(|| {
        ClassifyError::AuthConfig(format!("no credential; set {API_KEY_ENV}"))
    })?;
    HttpTransport::new(api.endpoint.clone(), credential)
        .map_err(|e| ClassifyError::Transport(e.to_string()))
}

/// Refill-over-time token bucket enforcing requests_per_minute.
struct TokenBucket {
    state: tokio::sync::Mutex<(f64, tokio::time::Instant)>,
    capacity: f64,
    per_second: f64,
}

impl TokenBucket {
    fn new(requests_per_minute: u32) -> Self {
        let capacity = f64::from(requests_per_minute.max(1));
        TokenBucket {
            state: tokio::sync::Mutex::new((capacity, tokio::time::Instant::now())),
            capacity,
            per_second: capacity / 60.0,
        }
    }

    async fn acquire(&self) {
        loop {
            let wait = {
                let mut state = self.state.lock().await;
                let now = tokio::time::Instant::now();
                let refilled = state.0 + (now - state.1).as_secs_f64() * self.per_second;
                state.0 = refilled.min(self.capacity);
                state.1 = now;
                if state.0 >= 1.0 {
                    state.0 -= 1.0;
                    return;
                }
                Duration::from_secs_f64((1.0 - state.0) / self.per_second)
            };
            tokio::time::sleep(wait).await;
        }
    }
}

fn content_key(page_title: &str, body_used: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(page_title.as_bytes());
    hasher.update([0x1f]);
    hasher.update(body_used.as_bytes());
    format!("{:x}", hasher.finalize())
}

fn cache_key(model: &str, input_mode: InputMode, template_hash: &str, content: &str) -> String {
    let mut hasher = Sha256::new();
    for part in [model, &input_mode.to_string(), template_hash, content] {
        hasher.update(part.as_bytes());
        hasher.update([0x1f]);
    }
    format!("{:x}", hasher.finalize())
}

enum JobResult {
    Parsed(PageType, String),
    Fallback(Option<String>),
    Fatal(String),
}

struct JobOutcome {
    url: String,
    cache_key: String,
    content_key: String,
    result: JobResult,
}

async fn run_job(
    url: String,
    cache_key_value: String,
    content_key_value: String,
    request: LlmRequest,
    transport: &dyn Transport,
    bucket: &TokenBucket,
    max_retries: u32,
) -> JobOutcome {
    let mut last_raw = None;
    let mut result = None;
    for attempt in 0..=max_retries {
        if attempt > 0 {
            tokio::time::sleep(Duration::from_millis(100) * 2u32.pow(attempt - 1)).await;
        }
        bucket.acquire().await;
        match transport.complete(&request).await {
            Ok(raw) => match parse_response(&raw) {
                Ok(label) => {
                    result = Some(JobResult::Parsed(label, raw));
                    break;
                }
                Err(_) => last_raw = Some(raw),
            },
            Err(TransportError::Transient(e)) => last_raw = Some(format!("<error: {e}>")),
            Err(TransportError::Fatal(e)) => {
                result = Some(JobResult::Fatal(e));
                break;
            }
        }
    }
    JobOutcome {
        url,
        cache_key: cache_key_value,
        content_key: content_key_value,
        result: result.unwrap_or(JobResult::Fallback(last_raw)),
    }
}

/// Classifies every page of the snapshot with an LLM behind `transport`.
///
/// Pages whose (model, input mode, content) triple is cached are answered
/// from the cache with no request. Everything else is requested at
/// temperature 0 with parse failures and transient errors retried up to
/// `max_retries`; a page that still has no parseable label falls back to
/// [`PageType::Content`] with a logged warning. Successful predictions are
/// cached before returning; a cache write failure aborts the run.
pub async fn classify_llm(
    snapshot: &SiteSnapshot,
    spec: &ClassifierSpec,
    api: &ApiConfig,
    cache: &PredictionCache,
    transport: &dyn Transport,
) -> Result<BTreeMap<String, ClassificationOutcome>, ClassifyError> {
    let model = spec
        .model_name
        .clone()
        .ok_or_else(|| ClassifyError::InvalidSpec("llm classifier needs a model name".into()))?;
    let template_hash = template_sha256();

    let mut outcomes = BTreeMap::new();
    let mut pending = Vec::new();
    for page in &snapshot.pages {
        let body_used = match spec.input_mode {
            InputMode::TitleOnly => "",
            InputMode::TitleAndBody => truncate_chars(&page.body, BODY_CHAR_LIMIT),
        };
        let content = content_key(&page.title, body_used);
        let key = cache_key(&model, spec.input_mode, &template_hash, &content);
        if let Some(entry) = cache.get(&key) {
            outcomes.insert(
                page.url.clone(),
                ClassificationOutcome {
                    url: page.url.clone(),
                    predicted: entry.predicted,
                    raw_response: Some(entry.raw_response),
                    cached: true,
                },
            );
            continue;
        }
        let (system, user) = build_prompt(page, spec.input_mode);
        let request = LlmRequest {
            model: model.clone(),
            system,
            user,
            temperature: api.temperature,
            max_tokens: RESPONSE_TOKEN_CAP,
        };
        pending.push((page.url.clone(), key, content, request));
    }

    let bucket = TokenBucket::new(api.requests_per_minute);
    let results: Vec<JobOutcome> = stream::iter(pending.into_iter().map(|(url, key, content, request)| {
        run_job(
            url,
            key,
            content,
            request,
            transport,
            &bucket,
            api.max_retries,
        )
    }))
    .buffer_unordered(api.max_concurrent_requests.max(1))
    .collect()
    .await;

    for outcome in results {
        match outcome.result {
            JobResult::Parsed(predicted, raw) => {
                let entry = CacheEntry {
                    model: model.clone(),
                    input_mode: spec.input_mode,
                    content_key: outcome.content_key,
                    template_sha256: template_hash.clone(),
                    raw_response: raw.clone(),
                    predicted,
                };
                cache.put(&outcome.cache_key, &entry)?;
                outcomes.insert(
                    outcome.url.clone(),
                    ClassificationOutcome {
                        url: outcome.url,
                        predicted,
                        raw_response: Some(raw),
                        cached: false,
                    },
                );
            }
            JobResult::Fallback(raw) => {
                log::warn!(
                    "no parseable label for {} after retries, falling back to content",
                    outcome.url
                );
                outcomes.insert(
                    outcome.url.clone(),
                    ClassificationOutcome {
                        url: outcome.url,
                        predicted: PageType::Content,
                        raw_response: raw,
                        cached: false,
                    },
                );
            }
            JobResult::Fatal(e) => return Err(ClassifyError::Transport(e)),
        }
    }
    Ok(outcomes)
}
