//! Publish-date extraction.
//!
//! Sources are tried in order: `article:published_time` meta tag, JSON-LD
//! `datePublished`, a `time[datetime]` attribute, and a `/YYYY/MM/DD/` URL
//! path segment. A source with an unparseable value is skipped in favor of
//! the next one. Results are truncated to day granularity.

use chrono::{DateTime, NaiveDate};
use regex::Regex;
use scraper::{Html, Selector};

fn parse_date_value(raw: &str) -> Option<NaiveDate> {
    let raw = raw.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(raw) {
        return Some(dt.date_naive());
    }
    if raw.len() >= 10 {
        if let Ok(d) = NaiveDate::parse_from_str(&raw[..10], "%Y-%m-%d") {
            return Some(d);
        }
    }
    None
}

fn json_ld_date(value: &serde_json::Value) -> Option<NaiveDate> {
    match value {
        serde_json::Value::Object(map) => {
            if let Some(serde_json::Value::String(s)) = map.get("datePublished") {
                if let Some(d) = parse_date_value(s) {
                    return Some(d);
                }
            }
            map.values().find_map(json_ld_date)
        }
        serde_json::Value::Array(items) => items.iter().find_map(json_ld_date),
        _ => None,
    }
}

pub fn extract_publish_date(html: &[u8], url: &str) -> Option<NaiveDate> {
    let doc = Html::parse_document(&String::from_utf8_lossy(html));

    let meta = Selector::parse(
        r#"meta[property="article:published_time"], meta[name="article:published_time"]"#,
    )
    .unwrap();
    for el in doc.select(&meta) {
        if let Some(d) = el.value().attr("content").and_then(parse_date_value) {
            return Some(d);
        }
    }

    let ld = Selector::parse(r#"script[type="application/ld+json"]"#).unwrap();
    for el in doc.select(&ld) {
        let text: String = el.text().collect();
        if let Ok(value) = serde_json::from_str::<serde_json::Value>(&text) {
            if let Some(d) = json_ld_date(&value) {
                return Some(d);
            }
        }
    }

    let time = Selector::parse("time[datetime]").unwrap();
    for el in doc.select(&time) {
        if let Some(d) = el.value().attr("datetime").and_then(parse_date_value) {
            return Some(d);
        }
    }

    let path_date = Regex::new(r"/(\d{4})/(\d{2})/(\d{2})(/|$)").unwrap();
    if let Some(caps) = path_date.captures(url) {
        let (y, m, d) = (
            caps[1].parse::<i32>().ok()?,
            caps[2].parse::<u32>().ok()?,
            caps[3].parse::<u32>().ok()?,
        );
        if let Some(date) = NaiveDate::from_ymd_opt(y, m, d) {
            return Some(date);
        }
    }
    None
}
