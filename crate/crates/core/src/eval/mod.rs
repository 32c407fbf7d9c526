//! Both evaluations: per-site classification metrics (macro-averaged over
//! sites) and new-page coverage from budgeted, shallow-first seed
//! selections.
//!
//! Coverage counts a new page as collected when it is a seed itself, linked
//! directly from a seed, or reachable from an already-collected new page
//! through new pages only; old intermediate pages do not conduct
//! reachability. All operations are pure over immutable snapshots.

pub mod report;

pub use report::EvalReport;

use crate::snapshot::{build_link_graph, LinkGraph, PageType, SiteSnapshot};
use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};
use thiserror::Error;

/// How many days before the snapshot's latest publish date still count as
/// new.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RecencyWindow {
    pub window_days: u32,
}

impl RecencyWindow {
    pub fn new(window_days: u32) -> Result<Self, EvalError> {
        if window_days < 1 {
            return Err(EvalError::InvalidWindow);
        }
        Ok(RecencyWindow { window_days })
    }
}

/// How a method turns predictions into a seed list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionMethod {
    /// Predicted index pages in shallow order, padded with shallow content
    /// pages when the budget exceeds the predicted index count.
    TypeFiltered,
    /// Ceil(k/2) predicted index pages in shallow order, filled to the
    /// budget with the shallowest pages of any type not already selected.
    Hybrid,
}

/// Ordered seed pages chosen by one method under a budget.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedSelection {
    pub method_id: String,
    pub budget_k: usize,
    pub seeds: Vec<String>,
    /// Seeds added outside the primary index-page selection to fill the
    /// budget.
    pub padded_count: usize,
}

/// Per-site classification quality with index pages as the positive class.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub site_id: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl MetricsRow {
    /// Builds a row from confusion counts; zero denominators yield 0.
    pub fn from_counts(site_id: impl Into<String>, tp: usize, fp: usize, fn_: usize) -> Self {
        let precision = if tp + fp > 0 {
            tp as f64 / (tp + fp) as f64
        } else {
            0.0
        };
        let recall = if tp + fn_ > 0 {
            tp as f64 / (tp + fn_) as f64
        } else {
            0.0
        };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        MetricsRow {
            site_id: site_id.into(),
            precision,
            recall,
            f1,
        }
    }
}

/// Coverage of one (site, method, window, budget) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageRow {
    pub site_id: String,
    pub method_id: String,
    pub window_days: u32,
    pub budget_k: usize,
    pub new_count: usize,
    pub reached_count: usize,
    pub coverage: f64,
}

/// Where a method's per-URL predictions come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PredictionSource {
    /// Stored predictions under this classifier id.
    Classifier(String),
    /// Gold labels used as predictions.
    Gold,
}

/// One evaluated method: a prediction source plus a selection strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalMethod {
    pub method_id: String,
    pub source: PredictionSource,
    pub selection: SelectionMethod,
}

impl EvalMethod {
    /// Parses a method token: `gold`, `hybrid:<source>`, or a classifier id.
    pub fn parse(token: &str) -> Result<Self, EvalError> {
        let token = token.trim();
        if token.is_empty() {
            return Err(EvalError::UnknownMethod(token.into()));
        }
        if token == "gold" {
            return Ok(EvalMethod {
                method_id: token.into(),
                source: PredictionSource::Gold,
                selection: SelectionMethod::TypeFiltered,
            });
        }
        if let Some(rest) = token.strip_prefix("hybrid:") {
            if rest.is_empty() {
                return Err(EvalError::UnknownMethod(token.into()));
            }
            let source = if rest == "gold" {
                PredictionSource::Gold
            } else {
                PredictionSource::Classifier(rest.into())
            };
            return Ok(EvalMethod {
                method_id: token.into(),
                source,
                selection: SelectionMethod::Hybrid,
            });
        }
        Ok(EvalMethod {
            method_id: token.into(),
            source: PredictionSource::Classifier(token.into()),
            selection: SelectionMethod::TypeFiltered,
        })
    }
}

/// A (site, method) pair that could not be evaluated, with the reason.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MissingEntry {
    pub site_id: String,
    pub method_id: String,
    pub reason: String,
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("budget must be >= 1")]
    InvalidBudget,
    #[error("window must be >= 1 day")]
    InvalidWindow,
    #[error("no dated pages: latest date undefined")]
    NoDatedPages,
    #[error("no new pages under this window")]
    NoNewPages,
    #[error("gold and prediction key sets differ: {0}")]
    KeyMismatch(String),
    #[error("page {0} lacks a prediction")]
    MissingPrediction(String),
    #[error("cannot average an empty list")]
    EmptyAverage,
    #[error("unknown method token: {0:?}")]
    UnknownMethod(String),
}

/// URLs of pages published strictly within the window: age in whole days
/// relative to the snapshot's latest publish date is `< window_days`.
/// Undated pages never qualify.
pub fn label_new_pages(
    snapshot: &SiteSnapshot,
    window: RecencyWindow,
) -> Result<BTreeSet<String>, EvalError> {
    let latest = snapshot.latest_date().ok_or(EvalError::NoDatedPages)?;
    Ok(snapshot
        .pages
        .iter()
        .filter(|p| {
            p.publish_date
                .map(|d| (latest - d).num_days() < i64::from(window.window_days))
                .unwrap_or(false)
        })
        .map(|p| p.url.clone())
        .collect())
}

/// Every page URL sorted by (depth ascending, discovery index ascending).
pub fn shallow_order(snapshot: &SiteSnapshot) -> Vec<String> {
    let mut pages: Vec<&crate::snapshot::PageRecord> = snapshot.pages.iter().collect();
    pages.sort_by_key(|p| (p.depth, p.discovery_index));
    pages.into_iter().map(|p| p.url.clone()).collect()
}

/// Selects `min(budget_k, page count)` seed pages under the given strategy.
/// Predictions must cover every page; gold labels are passed as the
/// predictions map to realize the gold-label method.
pub fn select_seeds(
    snapshot: &SiteSnapshot,
    predictions: &BTreeMap<String, PageType>,
    budget_k: usize,
    method: SelectionMethod,
    method_id: &str,
) -> Result<SeedSelection, EvalError> {
    if budget_k < 1 {
        return Err(EvalError::InvalidBudget);
    }
    for page in &snapshot.pages {
        if !predictions.contains_key(&page.url) {
            return Err(EvalError::MissingPrediction(page.url.clone()));
        }
    }
    let order = shallow_order(snapshot);
    let target = budget_k.min(order.len());
    let mut seeds: Vec<String>;
    let padded_count;
    match method {
        SelectionMethod::TypeFiltered => {
            seeds = order
                .iter()
                .filter(|u| predictions[u.as_str()] == PageType::Index)
                .take(target)
                .cloned()
                .collect();
            let mut padded = 0;
            if seeds.len() < target {
                for url in order
                    .iter()
                    .filter(|u| predictions[u.as_str()] == PageType::Content)
                {
                    if seeds.len() >= target {
                        break;
                    }
                    seeds.push(url.clone());
                    padded += 1;
                }
            }
            padded_count = padded;
        }
        SelectionMethod::Hybrid => {
            let index_half = budget_k.div_ceil(2);
            seeds = order
                .iter()
                .filter(|u| predictions[u.as_str()] == PageType::Index)
                .take(index_half)
                .cloned()
                .collect();
            let primary: HashSet<&str> = seeds.iter().map(|s| s.as_str()).collect();
            let primary_len = seeds.len();
            let mut fill = Vec::new();
            for url in &order {
                if primary_len + fill.len() >= target {
                    break;
                }
                if !primary.contains(url.as_str()) {
                    fill.push(url.clone());
                }
            }
            seeds.extend(fill);
            padded_count = seeds.len() - primary_len;
        }
    }
    debug_assert_eq!(seeds.len(), target);
    Ok(SeedSelection {
        method_id: method_id.into(),
        budget_k,
        seeds,
        padded_count,
    })
}

/// Fraction of new pages collectable from the seeds: the BFS closure whose
/// initial frontier is (seeds that are new) plus (new pages linked from any
/// seed), expanding only through edges from collected new pages to new
/// pages.
pub fn compute_coverage(
    snapshot: &SiteSnapshot,
    graph: &LinkGraph,
    seeds: &SeedSelection,
    new_pages: &BTreeSet<String>,
    window_days: u32,
) -> Result<CoverageRow, EvalError> {
    if new_pages.is_empty() {
        return Err(EvalError::NoNewPages);
    }
    let new_ids: HashSet<usize> = new_pages
        .iter()
        .filter_map(|u| graph.node_id(u))
        .collect();
    let mut reached: HashSet<usize> = HashSet::new();
    let mut queue: VecDeque<usize> = VecDeque::new();
    let visit = |id: usize, reached: &mut HashSet<usize>, queue: &mut VecDeque<usize>| {
        if reached.insert(id) {
            queue.push_back(id);
        }
    };
    for seed in &seeds.seeds {
        let Some(seed_id) = graph.node_id(seed) else {
            continue;
        };
        if new_ids.contains(&seed_id) {
            visit(seed_id, &mut reached, &mut queue);
        }
        for &target in graph.out_neighbors(seed_id) {
            if new_ids.contains(&target) {
                visit(target, &mut reached, &mut queue);
            }
        }
    }
    while let Some(id) = queue.pop_front() {
        for &target in graph.out_neighbors(id) {
            if new_ids.contains(&target) {
                visit(target, &mut reached, &mut queue);
            }
        }
    }
    let new_count = new_pages.len();
    let reached_count = reached.len();
    Ok(CoverageRow {
        site_id: snapshot.site_id.clone(),
        method_id: seeds.method_id.clone(),
        window_days,
        budget_k: seeds.budget_k,
        new_count,
        reached_count,
        coverage: reached_count as f64 / new_count as f64,
    })
}

/// Precision, recall, and F1 with index pages as the positive class. Gold
/// and predicted maps must cover the same URL set.
pub fn classification_metrics(
    site_id: &str,
    gold: &BTreeMap<String, PageType>,
    predicted: &BTreeMap<String, PageType>,
) -> Result<MetricsRow, EvalError> {
    if gold.len() != predicted.len() || !gold.keys().all(|k| predicted.contains_key(k)) {
        return Err(EvalError::KeyMismatch(format!(
            "{} gold vs {} predicted urls",
            gold.len(),
            predicted.len()
        )));
    }
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (url, gold_label) in gold {
        match (predicted[url], *gold_label) {
            (PageType::Index, PageType::Index) => tp += 1,
            (PageType::Index, PageType::Content) => fp += 1,
            (PageType::Content, PageType::Index) => fn_ += 1,
            (PageType::Content, PageType::Content) => {}
        }
    }
    Ok(MetricsRow::from_counts(site_id, tp, fp, fn_))
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Unweighted arithmetic mean per field over per-site rows.
pub fn macro_average_metrics(rows: &[MetricsRow]) -> Result<MetricsRow, EvalError> {
    if rows.is_empty() {
        return Err(EvalError::EmptyAverage);
    }
    Ok(MetricsRow {
        site_id: "macro-average".into(),
        precision: mean(&rows.iter().map(|r| r.precision).collect::<Vec<_>>()),
        recall: mean(&rows.iter().map(|r| r.recall).collect::<Vec<_>>()),
        f1: mean(&rows.iter().map(|r| r.f1).collect::<Vec<_>>()),
    })
}

fn prediction_map(
    snapshot: &SiteSnapshot,
    source: &PredictionSource,
) -> Result<BTreeMap<String, PageType>, String> {
    match source {
        PredictionSource::Gold => {
            let mut map = BTreeMap::new();
            for page in &snapshot.pages {
                match page.gold_type {
                    Some(label) => {
                        map.insert(page.url.clone(), label);
                    }
                    None => return Err("no gold labels".into()),
                }
            }
            Ok(map)
        }
        PredictionSource::Classifier(id) => {
            let mut map = BTreeMap::new();
            for page in &snapshot.pages {
                match page.predictions.get(id) {
                    Some(label) => {
                        map.insert(page.url.clone(), *label);
                    }
                    None => return Err(format!("no predictions for {id}")),
                }
            }
            Ok(map)
        }
    }
}

/// Runs the full evaluation grid: per-method classification metrics on
/// labeled sites plus the (site, method, window, budget) coverage
/// cross-product, with macro averages. Sites or methods that cannot be
/// evaluated are reported as missing and the run continues. Output ordering
/// is deterministic.
pub fn run_experiment(
    snapshots: &[SiteSnapshot],
    methods: &[EvalMethod],
    windows: &[RecencyWindow],
    budgets: &[usize],
) -> EvalReport {
    let mut metrics: Vec<(String, MetricsRow)> = Vec::new();
    let mut coverage: Vec<CoverageRow> = Vec::new();
    let mut missing: Vec<MissingEntry> = Vec::new();

    let mut sites: Vec<&SiteSnapshot> = snapshots.iter().collect();
    sites.sort_by(|a, b| a.site_id.cmp(&b.site_id));

    for site in sites {
        let graph = build_link_graph(site);
        let labeled = !site.pages.is_empty() && site.pages.iter().all(|p| p.gold_type.is_some());
        let gold: Option<BTreeMap<String, PageType>> = labeled.then(|| {
            site.pages
                .iter()
                .map(|p| (p.url.clone(), p.gold_type.unwrap()))
                .collect()
        });

        let mut new_sets: Vec<(RecencyWindow, BTreeSet<String>)> = Vec::new();
        for window in windows {
            match label_new_pages(site, *window) {
                Ok(set) => new_sets.push((*window, set)),
                Err(e) => missing.push(MissingEntry {
                    site_id: site.site_id.clone(),
                    method_id: format!("(window {}d)", window.window_days),
                    reason: e.to_string(),
                }),
            }
        }

        for method in methods {
            let predictions = match prediction_map(site, &method.source) {
                Ok(p) => p,
                Err(reason) => {
                    missing.push(MissingEntry {
                        site_id: site.site_id.clone(),
                        method_id: method.method_id.clone(),
                        reason,
                    });
                    continue;
                }
            };
            if let Some(gold_map) = &gold {
                match classification_metrics(&site.site_id, gold_map, &predictions) {
                    Ok(row) => metrics.push((method.method_id.clone(), row)),
                    Err(e) => missing.push(MissingEntry {
                        site_id: site.site_id.clone(),
                        method_id: method.method_id.clone(),
                        reason: e.to_string(),
                    }),
                }
            }
            for (window, new_pages) in &new_sets {
                if new_pages.is_empty() {
                    continue;
                }
                for &budget in budgets {
                    let selection = match select_seeds(
                        site,
                        &predictions,
                        budget,
                        method.selection,
                        &method.method_id,
                    ) {
                        Ok(s) => s,
                        Err(e) => {
                            missing.push(MissingEntry {
                                site_id: site.site_id.clone(),
                                method_id: method.method_id.clone(),
                                reason: e.to_string(),
                            });
                            continue;
                        }
                    };
                    match compute_coverage(site, &graph, &selection, new_pages, window.window_days)
                    {
                        Ok(row) => coverage.push(row),
                        Err(e) => missing.push(MissingEntry {
                            site_id: site.site_id.clone(),
                            method_id: method.method_id.clone(),
                            reason: e.to_string(),
                        }),
                    }
                }
            }
        }
    }

    metrics.sort_by(|a, b| (&a.1.site_id, &a.0).cmp(&(&b.1.site_id, &b.0)));
    coverage.sort_by(|a, b| {
        (&a.site_id, &a.method_id, a.window_days, a.budget_k).cmp(&(
            &b.site_id,
            &b.method_id,
            b.window_days,
            b.budget_k,
        ))
    });

    EvalReport::assemble(
        methods.iter().map(|m| m.method_id.clone()).collect(),
        windows.iter().map(|w| w.window_days).collect(),
        budgets.to_vec(),
        metrics,
        coverage,
        missing,
    )
}

#[cfg(test)]
mod tests;
