//! Breadth-first, internal-only, HTML-only site crawler with politeness
//! controls.
//!
//! The frontier is logically FIFO and fetches run on a bounded worker pool,
//! but results are committed in dequeue order and newly discovered links are
//! enqueued at commit time. The dequeued URL sequence therefore matches a
//! sequential BFS exactly, so a crawl of a deterministic site is itself
//! deterministic at any concurrency level; `max_concurrent_fetches = 1`
//! additionally serializes the requests themselves.

mod frontier;
mod robots;

pub use frontier::Frontier;
pub use robots::RobotsPolicy;

use crate::extract::{self, host_is_internal, normalize_with_base};
use crate::snapshot::{HtmlSink, PageRecord, SiteSnapshot, SnapshotError};
use chrono::{DateTime, SubsecRound, Utc};
use futures::stream::{FuturesUnordered, StreamExt};
use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::{Duration, Instant};
use thiserror::Error;
use url::Url;

/// Crawl parameters. The page cap defaults to 10,000 pages per site.
#[derive(Debug, Clone)]
pub struct CrawlConfig {
    pub home_url: String,
    pub page_cap: u32,
    pub max_concurrent_fetches: usize,
    /// Minimum spacing between request starts against the host.
    pub min_request_interval: Duration,
    pub request_timeout: Duration,
    pub user_agent: String,
    pub respect_robots: bool,
    /// Retries on 5xx and transport errors, with exponential backoff.
    pub max_retries: u32,
    /// Snapshot site id; defaults to the site host.
    pub site_id: Option<String>,
    /// Pins the snapshot's crawl timestamp (deterministic mode); defaults to
    /// now, truncated to whole seconds.
    pub crawl_timestamp: Option<DateTime<Utc>>,
}

impl CrawlConfig {
    pub fn new(home_url: impl Into<String>) -> Self {
        CrawlConfig {
            home_url: home_url.into(),
            page_cap: 10_000,
            max_concurrent_fetches: 4,
            min_request_interval: Duration::from_millis(500),
            request_timeout: Duration::from_secs(15),
            user_agent: "crawlscout/0.1".into(),
            respect_robots: true,
            max_retries: 2,
            site_id: None,
            crawl_timestamp: None,
        }
    }
}

/// Timing and skip accounting for one crawl, for politeness assertions and
/// operator diagnostics. Not part of the snapshot.
#[derive(Debug, Default)]
pub struct CrawlLog {
    /// Start instant of every HTTP request issued, including retries and the
    /// robots.txt probe, in start order.
    pub request_starts: Vec<Instant>,
    pub requests: usize,
    pub skipped_non_html: usize,
    pub skipped_robots: usize,
    pub skipped_redirects: usize,
    pub skipped_http_errors: usize,
    pub failures: usize,
}

#[derive(Debug)]
pub struct CrawlOutcome {
    pub snapshot: SiteSnapshot,
    pub log: CrawlLog,
}

#[derive(Debug, Error)]
pub enum CrawlError {
    #[error("invalid crawl config: {0}")]
    InvalidConfig(String),
    #[error("seed fetch failed: {0}")]
    SeedFetchFailed(String),
    #[error("empty crawl: no storable pages under {0}")]
    EmptyCrawl(String),
    #[error("http client: {0}")]
    Client(String),
    #[error("storage: {0}")]
    Storage(#[from] SnapshotError),
}

/// True iff the URL's host is the site host or a subdomain of it. Malformed
/// URLs are external (skipped, never fatal).
pub fn is_internal(candidate: &str, host: &str) -> bool {
    match Url::parse(candidate) {
        Ok(url) => url
            .host_str()
            .map(|h| host_is_internal(h, host))
            .unwrap_or(false),
        Err(_) => false,
    }
}

/// True iff the response should be stored as a page: an HTML media type and
/// a nonempty body. Unknown or missing content types are excluded.
pub fn should_store(content_type: &str, body_len: usize) -> bool {
    if body_len == 0 {
        return false;
    }
    let media_type = content_type
        .split(';')
        .next()
        .unwrap_or("")
        .trim()
        .to_ascii_lowercase();
    matches!(media_type.as_str(), "text/html" | "application/xhtml+xml")
}

/// Site host used for the internal-link test: the URL host without a
/// leading `www.`, so that `www.`-canonical sites treat their bare domain
/// and sibling subdomains as internal.
pub fn registered_host(url: &Url) -> Option<String> {
    let host = url.host_str()?.to_ascii_lowercase();
    match host.strip_prefix("www.") {
        Some(rest) if rest.contains('.') => Some(rest.to_string()),
        _ => Some(host),
    }
}

/// Serializes request starts so consecutive requests to the host are at
/// least the configured interval apart.
struct Politeness {
    next_free: tokio::sync::Mutex<tokio::time::Instant>,
    interval: Duration,
}

impl Politeness {
    fn new(interval: Duration) -> Self {
        Politeness {
            next_free: tokio::sync::Mutex::new(tokio::time::Instant::now()),
            interval,
        }
    }

    async fn wait_turn(&self) -> Instant {
        let start_at = {
            let mut next_free = self.next_free.lock().await;
            let at = (*next_free).max(tokio::time::Instant::now());
            *next_free = at + self.interval;
            at
        };
        tokio::time::sleep_until(start_at).await;
        Instant::now()
    }
}

enum FetchResult {
    /// 2xx response.
    Page {
        final_url: Url,
        content_type: String,
        bytes: Vec<u8>,
    },
    /// Redirect we refused to follow (cross-host or more than 5 hops).
    RedirectStopped,
    /// Terminal 4xx.
    HttpError(u16),
    /// Transport failure or 5xx after all retries.
    Failed(String),
}

struct FetchReport {
    result: FetchResult,
    starts: Vec<Instant>,
}

async fn fetch_with_retries(
    client: reqwest::Client,
    politeness: Arc<Politeness>,
    url: String,
    max_retries: u32,
) -> FetchReport {
    let mut starts = Vec::new();
    let mut last_error = String::new();
    for attempt in 0..=max_retries {
        if attempt > 0 {
            tokio::time::sleep(Duration::from_millis(100) * 2u32.pow(attempt - 1)).await;
        }
        starts.push(politeness.wait_turn().await);
        match client.get(&url).send().await {
            Ok(response) => {
                let status = response.status();
                if status.is_success() {
                    let final_url = response.url().clone();
                    let content_type = response
                        .headers()
                        .get(reqwest::header::CONTENT_TYPE)
                        .and_then(|v| v.to_str().ok())
                        .unwrap_or("")
                        .to_string();
                    match response.bytes().await {
                        Ok(bytes) => {
                            return FetchReport {
                                result: FetchResult::Page {
                                    final_url,
                                    content_type,
                                    bytes: bytes.to_vec(),
                                },
                                starts,
                            };
                        }
                        Err(e) => last_error = format!("{url}: body read: {e}"),
                    }
                } else if status.is_redirection() {
                    return FetchReport {
                        result: FetchResult::RedirectStopped,
                        starts,
                    };
                } else if status.is_server_error() {
                    last_error = format!("{url}: status {status}");
                } else {
                    return FetchReport {
                        result: FetchResult::HttpError(status.as_u16()),
                        starts,
                    };
                }
            }
            Err(e) => last_error = format!("{url}: {e}"),
        }
    }
    FetchReport {
        result: FetchResult::Failed(last_error),
        starts,
    }
}

/// Crawls breadth-first from the configured home page, storing at most
/// `page_cap` HTML pages and enqueueing only internal links. Raw HTML bytes
/// go to `sink`; extraction runs on every stored page.
pub async fn crawl_site(
    config: &CrawlConfig,
    sink: &mut dyn HtmlSink,
) -> Result<CrawlOutcome, CrawlError> {
    if config.page_cap == 0 {
        return Err(CrawlError::InvalidConfig("page_cap must be >= 1".into()));
    }
    if config.max_concurrent_fetches == 0 {
        return Err(CrawlError::InvalidConfig(
            "max_concurrent_fetches must be >= 1".into(),
        ));
    }
    let home = Url::parse(&config.home_url)
        .map_err(|e| CrawlError::InvalidConfig(format!("home_url: {e}")))?;
    if !matches!(home.scheme(), "http" | "https") {
        return Err(CrawlError::InvalidConfig(format!(
            "home_url scheme {} is not crawlable",
            home.scheme()
        )));
    }
    let host = registered_host(&home)
        .ok_or_else(|| CrawlError::InvalidConfig("home_url has no host".into()))?;
    let home_url = normalize_with_base(home.as_str(), &home)
        .map_err(|e| CrawlError::InvalidConfig(format!("home_url: {e}")))?
        .to_string();

    let redirect_host = host.clone();
    let client = reqwest::Client::builder()
        .user_agent(config.user_agent.clone())
        .timeout(config.request_timeout)
        .redirect(reqwest::redirect::Policy::custom(move |attempt| {
            let internal = attempt
                .url()
                .host_str()
                .map(|h| host_is_internal(h, &redirect_host))
                .unwrap_or(false);
            if attempt.previous().len() > 5 || !internal {
                attempt.stop()
            } else {
                attempt.follow()
            }
        }))
        .build()
        .map_err(|e| CrawlError::Client(e.to_string()))?;

    let politeness = Arc::new(Politeness::new(config.min_request_interval));
    let mut log = CrawlLog::default();

    let robots = if config.respect_robots {
        let robots_url = format!("{}://{}/robots.txt", home.scheme(), home.authority());
        let report = fetch_with_retries(
            client.clone(),
            politeness.clone(),
            robots_url,
            config.max_retries,
        )
        .await;
        log.requests += report.starts.len();
        log.request_starts.extend(report.starts);
        match report.result {
            FetchResult::Page { bytes, .. } => {
                RobotsPolicy::parse(&String::from_utf8_lossy(&bytes), &config.user_agent)
            }
            _ => RobotsPolicy::allow_all(),
        }
    } else {
        RobotsPolicy::allow_all()
    };

    let cap = config.page_cap as usize;
    let mut frontier = Frontier::new();
    frontier.push(home_url.clone(), 0);

    let mut in_flight = FuturesUnordered::new();
    let mut reorder: BTreeMap<u64, (u32, FetchReport)> = BTreeMap::new();
    let mut next_seq = 0u64;
    let mut commit_seq = 0u64;
    let mut pages: Vec<PageRecord> = Vec::new();

    'crawl: loop {
        while in_flight.len() < config.max_concurrent_fetches
            && pages.len() + reorder.len() + in_flight.len() < cap
        {
            let Some((url, depth)) = frontier.pop() else {
                break;
            };
            if let Ok(parsed) = Url::parse(&url) {
                if !robots.is_allowed(parsed.path()) {
                    log.skipped_robots += 1;
                    continue;
                }
            }
            let seq = next_seq;
            next_seq += 1;
            let client = client.clone();
            let politeness = politeness.clone();
            let retries = config.max_retries;
            in_flight.push(async move {
                let report = fetch_with_retries(client, politeness, url, retries).await;
                (seq, depth, report)
            });
        }

        let Some((seq, depth, report)) = in_flight.next().await else {
            break;
        };
        reorder.insert(seq, (depth, report));

        while let Some((depth, report)) = reorder.remove(&commit_seq) {
            let is_seed = commit_seq == 0;
            commit_seq += 1;
            log.requests += report.starts.len();
            log.request_starts.extend(report.starts);
            match report.result {
                FetchResult::Page {
                    final_url,
                    content_type,
                    bytes,
                } => {
                    if !should_store(&content_type, bytes.len()) {
                        log.skipped_non_html += 1;
                        continue;
                    }
                    let page_url = match normalize_with_base(final_url.as_str(), &final_url) {
                        Ok(u) => u.to_string(),
                        Err(_) => {
                            log.skipped_redirects += 1;
                            continue;
                        }
                    };
                    if !is_internal(&page_url, &host) {
                        log.skipped_redirects += 1;
                        continue;
                    }
                    if pages.iter().any(|p| p.url == page_url) {
                        // A redirect landed on an already-stored page.
                        continue;
                    }
                    frontier.mark_seen(page_url.clone());
                    let extracted = extract::extract_all(&bytes, &page_url, &host);
                    let sha = sink.put(&bytes)?;
                    let record = PageRecord {
                        url: page_url,
                        depth,
                        discovery_index: pages.len() as u32,
                        title: extracted.title,
                        body: extracted.body,
                        publish_date: extracted.publish_date,
                        links: extracted.links.clone(),
                        html_sha256: sha,
                        gold_type: None,
                        predictions: BTreeMap::new(),
                    };
                    pages.push(record);
                    if pages.len() >= cap {
                        break 'crawl;
                    }
                    for link in extracted.links {
                        frontier.push(link, depth + 1);
                    }
                }
                FetchResult::RedirectStopped => log.skipped_redirects += 1,
                FetchResult::HttpError(_) => log.skipped_http_errors += 1,
                FetchResult::Failed(reason) => {
                    log.failures += 1;
                    if is_seed {
                        return Err(CrawlError::SeedFetchFailed(reason));
                    }
                }
            }
        }
    }

    if pages.is_empty() {
        return Err(CrawlError::EmptyCrawl(home_url));
    }

    let snapshot = SiteSnapshot {
        site_id: config.site_id.clone().unwrap_or_else(|| host.clone()),
        host,
        crawl_timestamp: config
            .crawl_timestamp
            .unwrap_or_else(|| Utc::now().trunc_subsecs(0)),
        page_cap: config.page_cap,
        review_status: None,
        pages,
    };
    Ok(CrawlOutcome { snapshot, log })
}
