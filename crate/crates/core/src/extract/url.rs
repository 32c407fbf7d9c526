//! URL normalization shared by the crawler, extraction, and annotation.

use thiserror::Error;
use url::Url;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum UrlError {
    /// Scheme the toolkit does not crawl (mailto, javascript, data, ...).
    #[error("unsupported scheme: {0}")]
    UnsupportedScheme(String),
    #[error("unresolvable url: {0}")]
    Unresolvable(String),
}

/// Canonicalizes a URL reference against an absolute base.
///
/// Resolves relative references, lowercases scheme and host, strips the
/// fragment and default ports, removes trailing slashes except at the root,
/// and preserves the query string. Only `http` and `https` are accepted.
/// Idempotent: normalizing an already normalized URL is the identity.
pub fn normalize_url(raw: &str, base: &str) -> Result<String, UrlError> {
    let base = Url::parse(base).map_err(|e| UrlError::Unresolvable(format!("{base}: {e}")))?;
    Ok(normalize_with_base(raw, &base)?.to_string())
}

/// [`normalize_url`] against a pre-parsed base, returning the parsed form.
pub fn normalize_with_base(raw: &str, base: &Url) -> Result<Url, UrlError> {
    let mut url = base
        .join(raw.trim())
        .map_err(|e| UrlError::Unresolvable(format!("{raw}: {e}")))?;
    match url.scheme() {
        "http" | "https" => {}
        other => return Err(UrlError::UnsupportedScheme(other.to_string())),
    }
    url.set_fragment(None);
    // The url crate already lowercases scheme/host and drops default ports.
    let path = url.path();
    if path.len() > 1 && path.ends_with('/') {
        let trimmed = path.trim_end_matches('/');
        let trimmed = if trimmed.is_empty() { "/" } else { trimmed };
        let trimmed = trimmed.to_string();
        url.set_path(&trimmed);
    }
    Ok(url)
}

/// True when `candidate_host` is the site host or one of its subdomains.
pub fn host_is_internal(candidate_host: &str, site_host: &str) -> bool {
    candidate_host == site_host
        || (candidate_host.len() > site_host.len() + 1
            && candidate_host.ends_with(site_host)
            && candidate_host.as_bytes()[candidate_host.len() - site_host.len() - 1] == b'.')
}
