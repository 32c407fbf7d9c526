//! Page-type classifiers and the surrounding contract.
//!
//! Four implementations share one output shape, a map from page URL to
//! [`PageType`]: the all-pages baseline, the title-word-count rule, the
//! LLM-backed classifier (title only or title + body), and a deterministic
//! mock for tests that flips gold labels at a configured error rate.

mod cache;
mod llm;
mod prompt;
mod transport;

pub use cache::{CacheEntry, PredictionCache};
pub use llm::{classify_llm, http_transport, ApiConfig, API_KEY_ENV};
pub use prompt::{build_prompt, template_sha256, PROMPT_TEMPLATE};
pub use transport::{
    HttpTransport, LlmRequest, RecordingTransport, ReplayTransport, ScriptedTransport, Secret,
    Transport, TransportError,
};

use crate::snapshot::{PageType, SiteSnapshot};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

/// Default word-count boundary for the rule-based classifier: titles of this
/// many words or fewer are index pages.
pub const DEFAULT_MAX_TITLE_WORDS: usize = 9;

/// What a classifier reads from each page.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputMode {
    TitleOnly,
    TitleAndBody,
}

impl fmt::Display for InputMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InputMode::TitleOnly => f.write_str("title"),
            InputMode::TitleAndBody => f.write_str("title-body"),
        }
    }
}

/// Identity and parameters of one classifier. The id uniquely determines
/// behavior given a snapshot, so every parameter that changes predictions is
/// part of it.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierSpec {
    pub classifier_id: String,
    pub input_mode: InputMode,
    pub model_name: Option<String>,
    pub max_title_words: usize,
}

impl ClassifierSpec {
    pub fn all_pages() -> Self {
        ClassifierSpec {
            classifier_id: "all-pages".into(),
            input_mode: InputMode::TitleOnly,
            model_name: None,
            max_title_words: DEFAULT_MAX_TITLE_WORDS,
        }
    }

    pub fn rule_based(max_title_words: usize) -> Self {
        let classifier_id = if max_title_words == DEFAULT_MAX_TITLE_WORDS {
            "rule-title-words".to_string()
        } else {
            format!("rule-title-words:{max_title_words}")
        };
        ClassifierSpec {
            classifier_id,
            input_mode: InputMode::TitleOnly,
            model_name: None,
            max_title_words,
        }
    }

    pub fn llm(model_name: impl Into<String>, input_mode: InputMode) -> Self {
        let model_name = model_name.into();
        ClassifierSpec {
            classifier_id: format!("llm:{model_name}:{input_mode}"),
            input_mode,
            model_name: Some(model_name),
            max_title_words: DEFAULT_MAX_TITLE_WORDS,
        }
    }

    pub fn mock(seed: u64, error_rate: f64) -> Self {
        ClassifierSpec {
            classifier_id: format!("mock:{seed}:{error_rate}"),
            input_mode: InputMode::TitleOnly,
            model_name: None,
            max_title_words: DEFAULT_MAX_TITLE_WORDS,
        }
    }
}

/// One classification result, with provenance for the LLM path.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationOutcome {
    pub url: String,
    pub predicted: PageType,
    pub raw_response: Option<String>,
    pub cached: bool,
}

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("page {0} has no gold label")]
    MissingGold(String),
    #[error("auth config error: {0}")]
    AuthConfig(String),
    #[error("cache error: {0}")]
    Cache(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("invalid classifier spec: {0}")]
    InvalidSpec(String),
}

/// The response could not be mapped to a page type; the caller retries.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unparseable classifier response: {0:?}")]
pub struct ParseFailure(pub String);

/// Baseline that treats every page as an index page.
pub fn classify_all_pages(snapshot: &SiteSnapshot) -> BTreeMap<String, PageType> {
    snapshot
        .pages
        .iter()
        .map(|p| (p.url.clone(), PageType::Index))
        .collect()
}

/// Number of maximal nonempty runs of non-whitespace characters.
pub fn title_word_count(title: &str) -> usize {
    title.split_whitespace().count()
}

/// Rule baseline: pages whose title has `max_title_words` or fewer words are
/// index pages, everything else is content.
pub fn classify_rule_based(
    snapshot: &SiteSnapshot,
    max_title_words: usize,
) -> BTreeMap<String, PageType> {
    snapshot
        .pages
        .iter()
        .map(|p| {
            let label = if title_word_count(&p.title) <= max_title_words {
                PageType::Index
            } else {
                PageType::Content
            };
            (p.url.clone(), label)
        })
        .collect()
}

/// Deterministic test double: returns gold labels, independently flipping
/// each with probability `error_rate` under a PRNG derived from
/// (seed, url). Requires gold labels on every page.
pub fn classify_mock(
    snapshot: &SiteSnapshot,
    seed: u64,
    error_rate: f64,
) -> Result<BTreeMap<String, PageType>, ClassifyError> {
    let mut out = BTreeMap::new();
    for page in &snapshot.pages {
        let gold = page
            .gold_type
            .ok_or_else(|| ClassifyError::MissingGold(page.url.clone()))?;
        let mut hasher = Sha256::new();
        hasher.update(seed.to_le_bytes());
        hasher.update(page.url.as_bytes());
        let digest = hasher.finalize();
        let draw = u64::from_le_bytes(digest[..8].try_into().unwrap()) as f64 / u64::MAX as f64;
        let label = if error_rate >= 1.0 || draw < error_rate {
            gold.flipped()
        } else {
            gold
        };
        out.insert(page.url.clone(), label);
    }
    Ok(out)
}

/// Maps a raw model response to a page type. The label must be unambiguous:
/// exactly one of the substrings "index" / "content" may occur
/// (case-insensitive); a response naming both, or neither, is a parse
/// failure. A bare `Index` or `content.` therefore parses, while
/// "index of content" does not.
pub fn parse_response(raw: &str) -> Result<PageType, ParseFailure> {
    let lower = raw.to_lowercase();
    let has_index = lower.contains("index");
    let has_content = lower.contains("content");
    match (has_index, has_content) {
        (true, false) => Ok(PageType::Index),
        (false, true) => Ok(PageType::Content),
        _ => Err(ParseFailure(raw.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::snapshot::PageRecord;
    use chrono::Utc;

    fn snapshot_of(titles: &[&str]) -> SiteSnapshot {
        let pages = titles
            .iter()
            .enumerate()
            .map(|(i, title)| {
                let mut p = PageRecord::new(
                    format!("https://ex.com/p{i}"),
                    if i == 0 { 0 } else { 1 },
                    i as u32,
                );
                if i == 0 {
                    p.url = "https://ex.com/".into();
                }
                p.title = (*title).to_string();
                p
            })
            .collect();
        SiteSnapshot {
            site_id: "ex".into(),
            host: "ex.com".into(),
            crawl_timestamp: Utc::now(),
            page_cap: 10_000,
            review_status: None,
            pages,
        }
    }

    #[test]
    fn all_pages_labels_everything_index() {
        let snap = snapshot_of(&["a", "b", "c"]);
        let map = classify_all_pages(&snap);
        assert_eq!(map.len(), 3);
        assert!(map.values().all(|t| *t == PageType::Index));

        let empty = snapshot_of(&[]);
        assert!(classify_all_pages(&empty).is_empty());
    }

    #[test]
    fn all_pages_scales_to_the_page_cap() {
        let titles: Vec<String> = (0..10_000).map(|i| format!("t{i}")).collect();
        let refs: Vec<&str> = titles.iter().map(|s| s.as_str()).collect();
        let map = classify_all_pages(&snapshot_of(&refs));
        assert_eq!(map.len(), 10_000);
        assert!(map.values().all(|t| *t == PageType::Index));
    }

    #[test]
    fn rule_boundary_at_nine_words() {
        let snap = snapshot_of(&[
            "World News Politics Business Tech Science Health Sports Opinion",
            "World News Politics Business Tech Science Health Sports Opinion Extra",
            "",
        ]);
        let map = classify_rule_based(&snap, DEFAULT_MAX_TITLE_WORDS);
        assert_eq!(map["https://ex.com/"], PageType::Index, "9 words");
        assert_eq!(map["https://ex.com/p1"], PageType::Content, "10 words");
        assert_eq!(map["https://ex.com/p2"], PageType::Index, "0 words");
    }

    #[test]
    fn rule_ignores_extra_whitespace() {
        let a = snapshot_of(&["one two three"]);
        let b = snapshot_of(&["  one \t two \n three  "]);
        assert_eq!(
            classify_rule_based(&a, 2)["https://ex.com/"],
            classify_rule_based(&b, 2)["https://ex.com/"]
        );
    }

    #[test]
    fn parse_response_cases() {
        assert_eq!(parse_response("Index").unwrap(), PageType::Index);
        assert_eq!(parse_response("\"index\"").unwrap(), PageType::Index);
        assert_eq!(parse_response("This is a content page.").unwrap(), PageType::Content);
        assert!(parse_response("index of content").is_err());
        assert!(parse_response("no label here").is_err());
        assert!(parse_response("").is_err());
    }

    #[test]
    fn mock_with_zero_error_rate_is_gold() {
        let mut snap = snapshot_of(&["a", "b", "c", "d"]);
        for (i, p) in snap.pages.iter_mut().enumerate() {
            p.gold_type = Some(if i % 2 == 0 { PageType::Index } else { PageType::Content });
        }
        let map = classify_mock(&snap, 42, 0.0).unwrap();
        for p in &snap.pages {
            assert_eq!(map[&p.url], p.gold_type.unwrap());
        }
    }

    #[test]
    fn mock_with_error_rate_one_flips_everything() {
        let mut snap = snapshot_of(&["a", "b", "c"]);
        for p in snap.pages.iter_mut() {
            p.gold_type = Some(PageType::Index);
        }
        let map = classify_mock(&snap, 7, 1.0).unwrap();
        assert!(map.values().all(|t| *t == PageType::Content));
    }

    #[test]
    fn mock_is_deterministic_per_seed() {
        let mut snap = snapshot_of(&["a", "b", "c", "d", "e", "f"]);
        for p in snap.pages.iter_mut() {
            p.gold_type = Some(PageType::Content);
        }
        let one = classify_mock(&snap, 3, 0.5).unwrap();
        let two = classify_mock(&snap, 3, 0.5).unwrap();
        assert_eq!(one, two);
    }

    #[test]
    fn mock_requires_gold_labels() {
        let snap = snapshot_of(&["a"]);
        assert!(matches!(
            classify_mock(&snap, 1, 0.0),
            Err(ClassifyError::MissingGold(_))
        ));
    }

    #[test]
    fn classifier_ids_encode_parameters() {
        assert_eq!(ClassifierSpec::all_pages().classifier_id, "all-pages");
        assert_eq!(ClassifierSpec::rule_based(9).classifier_id, "rule-title-words");
        assert_eq!(ClassifierSpec::rule_based(5).classifier_id, "rule-title-words:5");
        assert_eq!(
            ClassifierSpec::llm("gpt-4o", InputMode::TitleAndBody).classifier_id,
            "llm:gpt-4o:title-body"
        );
        assert_eq!(ClassifierSpec::mock(42, 0.25).classifier_id, "mock:42:0.25");
    }
}
