//! Gold labels from content listing pages.
//!
//! Some sites comprehensively list their content pages, either as XML
//! sitemaps or as paginated HTML archives. Pages found there are labeled
//! content, every other snapshot page index. The resulting labeling is a
//! pure function of (snapshot URL set, listed URL set); a human review gate
//! sits on top via [`quality_report`] and the manifest review status.

use crate::extract::{extract_links, normalize_url};
use crate::snapshot::{PageType, SiteSnapshot};
use futures::future::BoxFuture;
use futures::FutureExt;
use quick_xml::events::Event;
use regex::Regex;
use scraper::{Html, Selector};
use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};
use thiserror::Error;

/// The human-review alarm band: index ratios outside it get flagged.
pub const REVIEW_BAND: (f64, f64) = (0.05, 0.70);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ListingKind {
    XmlSitemap,
    HtmlListing,
}

/// One content listing to harvest.
#[derive(Debug, Clone)]
pub struct ListingSource {
    pub url: String,
    pub kind: ListingKind,
    /// Regex applied to extracted URLs; non-matching URLs are dropped.
    pub url_include_pattern: Option<String>,
    /// Cap on fetched documents per source (sitemap recursion, pagination).
    pub max_listing_pages: usize,
}

impl ListingSource {
    pub fn new(url: impl Into<String>, kind: ListingKind) -> Self {
        ListingSource {
            url: url.into(),
            kind,
            url_include_pattern: None,
            max_listing_pages: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CoverageStats {
    /// Listed URLs that are pages of the snapshot.
    pub listed_in_snapshot: usize,
    /// Listed URLs absent from the snapshot.
    pub listed_absent: usize,
    pub index_count: usize,
    pub content_count: usize,
}

/// Gold labeling of one snapshot: content iff listed, index otherwise.
#[derive(Debug, Clone)]
pub struct GoldLabeling {
    pub site_id: String,
    pub listed_urls: BTreeSet<String>,
    pub labels: BTreeMap<String, PageType>,
    pub coverage_stats: CoverageStats,
}

#[derive(Debug, Error)]
pub enum AnnotateError {
    #[error("empty listing: no URLs collected from any source")]
    EmptyListing,
    #[error("invalid url_include_pattern {pattern:?}: {error}")]
    InvalidPattern { pattern: String, error: String },
}

/// Fetches listing documents; implemented over HTTP and by test fixtures.
pub trait Fetcher: Send + Sync {
    fn fetch<'a>(&'a self, url: &'a str) -> BoxFuture<'a, Result<Vec<u8>, String>>;
}

/// Plain HTTP fetcher for listing sources.
pub struct HttpFetcher {
    client: reqwest::Client,
}

impl HttpFetcher {
    pub fn new(user_agent: &str) -> Result<Self, String> {
        let client = reqwest::Client::builder()
            .user_agent(user_agent)
            .timeout(std::time::Duration::from_secs(30))
            .build()
            .map_err(|e| e.to_string())?;
        Ok(HttpFetcher { client })
    }
}

impl Fetcher for HttpFetcher {
    fn fetch<'a>(&'a self, url: &'a str) -> BoxFuture<'a, Result<Vec<u8>, String>> {
        async move {
            let response = self
                .client
                .get(url)
                .send()
                .await
                .map_err(|e| e.to_string())?;
            if !response.status().is_success() {
                return Err(format!("status {}", response.status()));
            }
            response
                .bytes()
                .await
                .map(|b| b.to_vec())
                .map_err(|e| e.to_string())
        }
        .boxed()
    }
}

/// Pulls `<loc>` values out of a sitemap document, separating nested sitemap
/// references from page URLs.
fn parse_sitemap(bytes: &[u8]) -> (Vec<String>, Vec<String>) {
    let mut reader = quick_xml::Reader::from_reader(bytes);
    reader.config_mut().trim_text(true);
    let mut nested = Vec::new();
    let mut urls = Vec::new();
    let mut in_sitemap_entry = false;
    let mut in_loc = false;
    let mut buf = Vec::new();
    loop {
        match reader.read_event_into(&mut buf) {
            Ok(Event::Start(e)) => match e.local_name().as_ref() {
                b"sitemap" => in_sitemap_entry = true,
                b"url" => in_sitemap_entry = false,
                b"loc" => in_loc = true,
                _ => {}
            },
            Ok(Event::End(e)) => match e.local_name().as_ref() {
                b"sitemap" => in_sitemap_entry = false,
                b"loc" => in_loc = false,
                _ => {}
            },
            Ok(Event::Text(t)) if in_loc => {
                if let Ok(decoded) = t.decode() {
                    let text = quick_xml::escape::unescape(&decoded)
                        .map(|c| c.trim().to_string())
                        .unwrap_or_else(|_| decoded.trim().to_string());
                    if !text.is_empty() {
                        if in_sitemap_entry {
                            nested.push(text);
                        } else {
                            urls.push(text);
                        }
                    }
                }
            }
            Ok(Event::Eof) => break,
            Err(_) => break,
            _ => {}
        }
        buf.clear();
    }
    (nested, urls)
}

/// Finds the pagination target of an HTML listing page: a `rel="next"` link,
/// or an anchor whose text is "next" / "next page".
fn next_page_url(html: &str, base: &str) -> Option<String> {
    let doc = Html::parse_document(html);
    let rel_next = Selector::parse(r#"a[rel~="next"], link[rel~="next"]"#).unwrap();
    for el in doc.select(&rel_next) {
        if let Some(href) = el.value().attr("href") {
            if let Ok(url) = normalize_url(href, base) {
                return Some(url);
            }
        }
    }
    let anchors = Selector::parse("a[href]").unwrap();
    for el in doc.select(&anchors) {
        let text = crate::extract::collapse_ws(&el.text().collect::<String>()).to_lowercase();
        if text == "next" || text == "next page" {
            if let Some(href) = el.value().attr("href") {
                if let Ok(url) = normalize_url(href, base) {
                    return Some(url);
                }
            }
        }
    }
    None
}

async fn collect_from_source(
    source: &ListingSource,
    fetch: &dyn Fetcher,
    out: &mut BTreeSet<String>,
) -> Result<(), AnnotateError> {
    let pattern = match &source.url_include_pattern {
        Some(p) => Some(Regex::new(p).map_err(|e| AnnotateError::InvalidPattern {
            pattern: p.clone(),
            error: e.to_string(),
        })?),
        None => None,
    };
    let keep = |url: &str| pattern.as_ref().map_or(true, |re| re.is_match(url));

    let mut queue = VecDeque::from([source.url.clone()]);
    let mut visited: HashSet<String> = HashSet::new();
    let mut fetched = 0usize;
    while let Some(doc_url) = queue.pop_front() {
        if fetched >= source.max_listing_pages || !visited.insert(doc_url.clone()) {
            continue;
        }
        fetched += 1;
        let bytes = match fetch.fetch(&doc_url).await {
            Ok(b) => b,
            Err(e) => {
                log::warn!("listing source {doc_url} unreachable: {e}");
                continue;
            }
        };
        match source.kind {
            ListingKind::XmlSitemap => {
                let (nested, urls) = parse_sitemap(&bytes);
                for n in nested {
                    if let Ok(u) = normalize_url(&n, &doc_url) {
                        queue.push_back(u);
                    }
                }
                for u in urls {
                    if let Ok(u) = normalize_url(&u, &doc_url) {
                        if keep(&u) {
                            out.insert(u);
                        }
                    }
                }
            }
            ListingKind::HtmlListing => {
                let host = match url::Url::parse(&doc_url)
                    .ok()
                    .as_ref()
                    .and_then(crate::crawler::registered_host)
                {
                    Some(h) => h,
                    None => continue,
                };
                let html = String::from_utf8_lossy(&bytes).into_owned();
                for u in extract_links(html.as_bytes(), &doc_url, &host) {
                    if keep(&u) {
                        out.insert(u);
                    }
                }
                if let Some(next) = next_page_url(&html, &doc_url) {
                    queue.push_back(next);
                }
            }
        }
    }
    Ok(())
}

/// Harvests the union of content-page URLs from every source, normalized and
/// optionally pattern-filtered. An unreachable source logs a warning and the
/// run continues; collecting zero URLs overall is an error.
pub async fn collect_listed_urls(
    sources: &[ListingSource],
    fetch: &dyn Fetcher,
) -> Result<BTreeSet<String>, AnnotateError> {
    let mut out = BTreeSet::new();
    for source in sources {
        collect_from_source(source, fetch, &mut out).await?;
    }
    if out.is_empty() {
        return Err(AnnotateError::EmptyListing);
    }
    Ok(out)
}

/// Labels every snapshot page: content iff its URL is listed, index
/// otherwise. Annotation is monotone in `listed`: adding a URL can only turn
/// that one page from index to content.
pub fn annotate_snapshot(snapshot: &SiteSnapshot, listed: &BTreeSet<String>) -> GoldLabeling {
    let mut labels = BTreeMap::new();
    let mut stats = CoverageStats::default();
    let snapshot_urls: HashSet<&str> = snapshot.pages.iter().map(|p| p.url.as_str()).collect();
    for page in &snapshot.pages {
        let label = if listed.contains(&page.url) {
            stats.content_count += 1;
            PageType::Content
        } else {
            stats.index_count += 1;
            PageType::Index
        };
        labels.insert(page.url.clone(), label);
    }
    for url in listed {
        if snapshot_urls.contains(url.as_str()) {
            stats.listed_in_snapshot += 1;
        } else {
            stats.listed_absent += 1;
        }
    }
    GoldLabeling {
        site_id: snapshot.site_id.clone(),
        listed_urls: listed.clone(),
        labels,
        coverage_stats: stats,
    }
}

/// Copies gold labels into the snapshot's page records.
pub fn apply_gold(snapshot: &mut SiteSnapshot, labeling: &GoldLabeling) {
    for page in &mut snapshot.pages {
        if let Some(label) = labeling.labels.get(&page.url) {
            page.gold_type = Some(*label);
        }
    }
}

/// Human-readable evidence for the manual review gate: counts, index ratio,
/// sample URLs per class, and an alarm when the ratio leaves the review
/// band. The alarm never rejects by itself.
pub fn quality_report(labeling: &GoldLabeling) -> String {
    let stats = &labeling.coverage_stats;
    let total = stats.index_count + stats.content_count;
    let ratio = if total > 0 {
        stats.index_count as f64 / total as f64
    } else {
        0.0
    };
    let mut report = String::new();
    report.push_str(&format!("site: {}\n", labeling.site_id));
    report.push_str(&format!(
        "pages: {total} ({} index / {} content, index ratio {ratio:.3})\n",
        stats.index_count, stats.content_count
    ));
    report.push_str(&format!(
        "listed urls: {} in snapshot, {} absent from snapshot\n",
        stats.listed_in_snapshot, stats.listed_absent
    ));
    for (name, wanted) in [("index", PageType::Index), ("content", PageType::Content)] {
        let sample: Vec<&str> = labeling
            .labels
            .iter()
            .filter(|(_, t)| **t == wanted)
            .take(5)
            .map(|(u, _)| u.as_str())
            .collect();
        report.push_str(&format!("sample {name} pages: {}\n", sample.join(" ")));
    }
    if ratio < REVIEW_BAND.0 || ratio > REVIEW_BAND.1 {
        report.push_str(&format!(
            "index ratio {ratio:.3} outside [{}, {}]: review strongly advised\n",
            REVIEW_BAND.0, REVIEW_BAND.1
        ));
    }
    report
}
