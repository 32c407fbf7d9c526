//! Prompt construction for the LLM classifier.
//!
//! The system text lives in one template file shipped with the repo; its
//! hash goes into the cache key so a wording change invalidates cached
//! predictions.

use super::InputMode;
use crate::snapshot::PageRecord;
use sha2::{Digest, Sha256};

/// System prompt, pinned in `templates/classifier_prompt_v1.txt`.
pub const PROMPT_TEMPLATE: &str = include_str!("../../templates/classifier_prompt_v1.txt");

/// Bodies embedded into prompts are capped at this many characters.
pub const BODY_CHAR_LIMIT: usize = 4_000;

/// SHA-256 of the template file bytes.
pub fn template_sha256() -> String {
    let mut hasher = Sha256::new();
    hasher.update(PROMPT_TEMPLATE.as_bytes());
    format!("{:x}", hasher.finalize())
}

pub(crate) fn truncate_chars(text: &str, limit: usize) -> &str {
    match text.char_indices().nth(limit) {
        Some((byte_idx, _)) => &text[..byte_idx],
        None => text,
    }
}

/// Builds the (system, user) prompt pair for one page. The user text always
/// carries a `Title:` line, even for an empty title, and a `Body:` line only
/// in [`InputMode::TitleAndBody`], truncated to the first 4,000 characters.
/// Deterministic for fixed input.
pub fn build_prompt(page: &PageRecord, input_mode: InputMode) -> (String, String) {
    let system = PROMPT_TEMPLATE.trim_end().to_string();
    let user = match input_mode {
        InputMode::TitleOnly => format!("Title: {}", page.title),
        InputMode::TitleAndBody => format!(
            "Title: {}\nBody: {}",
            page.title,
            truncate_chars(&page.body, BODY_CHAR_LIMIT)
        ),
    };
    (system, user)
}
