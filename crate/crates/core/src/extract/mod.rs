//! Derives structured fields from raw HTML: normalized URLs, internal links,
//! title, main body text, and publish date.
//!
//! Every extractor is a pure function of its inputs and callable concurrently
//! without restriction.

mod body;
mod date;
mod url;

pub use body::{extract_body, score_blocks, BlockScore};
pub use date::extract_publish_date;
pub use url::{host_is_internal, normalize_url, normalize_with_base, UrlError};

use chrono::NaiveDate;
use scraper::{Html, Selector};
use std::collections::HashSet;

/// Derived fields of one page.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ExtractionResult {
    pub title: String,
    pub body: String,
    /// Normalized internal URLs, deduplicated preserving first occurrence.
    pub links: Vec<String>,
    pub publish_date: Option<NaiveDate>,
}

/// Runs all extractors over one document.
pub fn extract_all(html: &[u8], page_url: &str, host: &str) -> ExtractionResult {
    ExtractionResult {
        title: extract_title(html),
        body: extract_body(html),
        links: extract_links(html, page_url, host),
        publish_date: extract_publish_date(html, page_url),
    }
}

/// Collapses every run of whitespace to a single space and trims the ends.
pub(crate) fn collapse_ws(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for word in text.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// Page title: the first non-empty of the `og:title` meta tag, the `title`
/// element, and the first `h1`; empty string when none is present.
pub fn extract_title(html: &[u8]) -> String {
    let doc = Html::parse_document(&String::from_utf8_lossy(html));
    let og = Selector::parse(r#"meta[property="og:title"], meta[name="og:title"]"#).unwrap();
    for el in doc.select(&og) {
        if let Some(content) = el.value().attr("content") {
            let title = collapse_ws(content);
            if !title.is_empty() {
                return title;
            }
        }
    }
    let title_sel = Selector::parse("title").unwrap();
    for el in doc.select(&title_sel) {
        let title = collapse_ws(&el.text().collect::<String>());
        if !title.is_empty() {
            return title;
        }
    }
    let h1 = Selector::parse("h1").unwrap();
    for el in doc.select(&h1) {
        let title = collapse_ws(&el.text().collect::<String>());
        if !title.is_empty() {
            return title;
        }
    }
    String::new()
}

/// All anchor targets of the document, normalized against `page_url`,
/// filtered to the site's host, deduplicated in document order. Anchors are
/// taken from the whole document including navigation, header, and footer.
pub fn extract_links(html: &[u8], page_url: &str, host: &str) -> Vec<String> {
    let base = match ::url::Url::parse(page_url) {
        Ok(u) => u,
        Err(_) => return Vec::new(),
    };
    let doc = Html::parse_document(&String::from_utf8_lossy(html));
    let anchors = Selector::parse("a[href]").unwrap();
    let mut seen = HashSet::new();
    let mut links = Vec::new();
    for el in doc.select(&anchors) {
        let href = match el.value().attr("href") {
            Some(h) => h,
            None => continue,
        };
        let resolved = match normalize_with_base(href, &base) {
            Ok(u) => u,
            Err(_) => continue,
        };
        let candidate_host = match resolved.host_str() {
            Some(h) => h,
            None => continue,
        };
        if !host_is_internal(candidate_host, host) {
            continue;
        }
        let normalized = resolved.to_string();
        if seen.insert(normalized.clone()) {
            links.push(normalized);
        }
    }
    links
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn title_from_title_element() {
        let html = b"<html><head><title>Space launch today</title></head><body></body></html>";
        assert_eq!(extract_title(html), "Space launch today");
    }

    #[test]
    fn og_title_takes_precedence() {
        let html = br#"<html><head>
            <meta property="og:title" content="A">
            <title>A | Site Name</title>
        </head><body><h1>Other</h1></body></html>"#;
        assert_eq!(extract_title(html), "A");
    }

    #[test]
    fn h1_is_last_fallback_and_empty_without_sources() {
        let html = b"<html><body><h1>  Headline   here </h1></body></html>";
        assert_eq!(extract_title(html), "Headline here");
        assert_eq!(extract_title(b"<html><body><p>x</p></body></html>"), "");
    }

    #[test]
    fn links_are_deduplicated_and_internal_only() {
        let html = br#"<html><body>
            <a href="/a">one</a>
            <a href="/a">again</a>
            <a href="https://other.com/b">external</a>
        </body></html>"#;
        let links = extract_links(html, "https://ex.com/", "ex.com");
        assert_eq!(links, vec!["https://ex.com/a"]);
    }

    #[test]
    fn no_anchors_yields_no_links() {
        let links = extract_links(b"<html><body><p>text</p></body></html>", "https://ex.com/", "ex.com");
        assert!(links.is_empty());
    }

    #[test]
    fn nav_header_footer_anchors_are_kept() {
        let html = br#"<html><body>
            <nav><a href="/nav">n</a></nav>
            <header><a href="/head">h</a></header>
            <footer><a href="/foot">f</a></footer>
        </body></html>"#;
        let links = extract_links(html, "https://ex.com/", "ex.com");
        assert_eq!(
            links,
            vec!["https://ex.com/nav", "https://ex.com/head", "https://ex.com/foot"]
        );
    }

    #[test]
    fn subdomain_links_are_internal() {
        let html = br#"<a href="https://news.ex.com/a">n</a><a href="mailto:x@y.z">m</a>"#;
        let links = extract_links(html, "https://ex.com/", "ex.com");
        assert_eq!(links, vec!["https://news.ex.com/a"]);
    }

    #[test]
    fn link_order_is_stable_across_runs() {
        let html = br#"<a href="/c">c</a><a href="/a">a</a><a href="/b">b</a>"#;
        let a = extract_links(html, "https://ex.com/", "ex.com");
        let b = extract_links(html, "https://ex.com/", "ex.com");
        assert_eq!(a, b);
        assert_eq!(a, vec!["https://ex.com/c", "https://ex.com/a", "https://ex.com/b"]);
    }
}
