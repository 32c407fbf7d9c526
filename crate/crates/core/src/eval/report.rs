//! Report assembly and rendering: per-site CSVs plus markdown tables with
//! methods as rows and window x budget coverage columns.

use super::{macro_average_metrics, mean, CoverageRow, MetricsRow, MissingEntry};
use std::io;
use std::path::Path;

/// Mean coverage of one (method, window, budget) cell over the sites that
/// had new pages under that window.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageCell {
    pub method_id: String,
    pub window_days: u32,
    pub budget_k: usize,
    pub mean_coverage: f64,
    pub site_count: usize,
}

/// Complete evaluation output. Tables report numbers rounded half-up to
/// three decimals; the CSVs and the struct keep full precision.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub methods: Vec<String>,
    pub windows: Vec<u32>,
    pub budgets: Vec<usize>,
    /// (method id, per-site row), sorted by (site, method).
    pub metrics: Vec<(String, MetricsRow)>,
    /// (method id, macro-averaged row), in method order.
    pub metric_averages: Vec<(String, MetricsRow)>,
    /// Sorted by (site, method, window, budget).
    pub coverage: Vec<CoverageRow>,
    pub cells: Vec<CoverageCell>,
    /// Per method: mean of its defined cell means, absent when no cell has
    /// data.
    pub method_averages: Vec<(String, Option<f64>)>,
    pub missing: Vec<MissingEntry>,
}

/// Rounds half-up (half away from zero) to three decimals.
pub fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

pub fn fmt3(x: f64) -> String {
    format!("{:.3}", round3(x))
}

impl EvalReport {
    pub(crate) fn assemble(
        methods: Vec<String>,
        windows: Vec<u32>,
        budgets: Vec<usize>,
        metrics: Vec<(String, MetricsRow)>,
        coverage: Vec<CoverageRow>,
        missing: Vec<MissingEntry>,
    ) -> Self {
        let mut metric_averages = Vec::new();
        for method in &methods {
            let rows: Vec<MetricsRow> = metrics
                .iter()
                .filter(|(id, _)| id == method)
                .map(|(_, row)| row.clone())
                .collect();
            if let Ok(avg) = macro_average_metrics(&rows) {
                metric_averages.push((method.clone(), avg));
            }
        }

        let mut cells = Vec::new();
        let mut method_averages = Vec::new();
        for method in &methods {
            let mut cell_means = Vec::new();
            for window in &windows {
                for budget in &budgets {
                    let values: Vec<f64> = coverage
                        .iter()
                        .filter(|r| {
                            &r.method_id == method
                                && r.window_days == *window
                                && r.budget_k == *budget
                        })
                        .map(|r| r.coverage)
                        .collect();
                    if !values.is_empty() {
                        let mean_coverage = mean(&values);
                        cells.push(CoverageCell {
                            method_id: method.clone(),
                            window_days: *window,
                            budget_k: *budget,
                            mean_coverage,
                            site_count: values.len(),
                        });
                        cell_means.push(mean_coverage);
                    }
                }
            }
            let average = if cell_means.is_empty() {
                None
            } else {
                Some(mean(&cell_means))
            };
            method_averages.push((method.clone(), average));
        }

        EvalReport {
            methods,
            windows,
            budgets,
            metrics,
            metric_averages,
            coverage,
            cells,
            method_averages,
            missing,
        }
    }

    pub fn cell(&self, method_id: &str, window_days: u32, budget_k: usize) -> Option<&CoverageCell> {
        self.cells.iter().find(|c| {
            c.method_id == method_id && c.window_days == window_days && c.budget_k == budget_k
        })
    }

    pub fn metrics_csv(&self) -> String {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer
            .write_record(["site_id", "method_id", "precision", "recall", "f1"])
            .expect("csv write");
        for (method_id, row) in &self.metrics {
            writer
                .write_record([
                    row.site_id.as_str(),
                    method_id.as_str(),
                    &row.precision.to_string(),
                    &row.recall.to_string(),
                    &row.f1.to_string(),
                ])
                .expect("csv write");
        }
        for (method_id, row) in &self.metric_averages {
            writer
                .write_record([
                    "macro-average",
                    method_id.as_str(),
                    &row.precision.to_string(),
                    &row.recall.to_string(),
                    &row.f1.to_string(),
                ])
                .expect("csv write");
        }
        String::from_utf8(writer.into_inner().expect("csv flush")).expect("csv utf8")
    }

    pub fn coverage_csv(&self) -> String {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer
            .write_record([
                "site_id",
                "method_id",
                "window_days",
                "budget_k",
                "new_count",
                "reached_count",
                "coverage",
            ])
            .expect("csv write");
        for row in &self.coverage {
            writer
                .write_record([
                    row.site_id.as_str(),
                    row.method_id.as_str(),
                    &row.window_days.to_string(),
                    &row.budget_k.to_string(),
                    &row.new_count.to_string(),
                    &row.reached_count.to_string(),
                    &row.coverage.to_string(),
                ])
                .expect("csv write");
        }
        String::from_utf8(writer.into_inner().expect("csv flush")).expect("csv utf8")
    }

    pub fn tables_markdown(&self) -> String {
        let mut out = String::new();
        out.push_str("# Classification metrics\n\n");
        out.push_str("Macro-averaged over labeled sites; index pages are the positive class.\n\n");
        out.push_str("| Method | Precision | Recall | F1 |\n");
        out.push_str("|---|---|---|---|\n");
        for (method_id, row) in &self.metric_averages {
            out.push_str(&format!(
                "| {method_id} | {} | {} | {} |\n",
                fmt3(row.precision),
                fmt3(row.recall),
                fmt3(row.f1)
            ));
        }

        out.push_str("\n# New-page coverage\n\n");
        out.push_str(
            "Per-cell values are macro-averages over sites with new pages under the window.\n\n",
        );
        let window_label = |w: u32| {
            if w == 1 {
                "Latest 1 Day".to_string()
            } else {
                format!("Latest {w} Days")
            }
        };
        out.push_str("| Method |");
        for window in &self.windows {
            for budget in &self.budgets {
                out.push_str(&format!(" {}, {budget}P |", window_label(*window)));
            }
        }
        out.push_str(" Average |\n");
        out.push_str("|---|");
        for _ in 0..self.windows.len() * self.budgets.len() + 1 {
            out.push_str("---|");
        }
        out.push('\n');
        for method in &self.methods {
            out.push_str(&format!("| {method} |"));
            for window in &self.windows {
                for budget in &self.budgets {
                    match self.cell(method, *window, *budget) {
                        Some(cell) => out.push_str(&format!(" {} |", fmt3(cell.mean_coverage))),
                        None => out.push_str(" - |"),
                    }
                }
            }
            let average = self
                .method_averages
                .iter()
                .find(|(id, _)| id == method)
                .and_then(|(_, avg)| *avg);
            match average {
                Some(avg) => out.push_str(&format!(" {} |\n", fmt3(avg))),
                None => out.push_str(" - |\n"),
            }
        }

        if !self.missing.is_empty() {
            out.push_str("\n# Missing\n\n");
            for entry in &self.missing {
                out.push_str(&format!(
                    "- {} / {}: {}\n",
                    entry.site_id, entry.method_id, entry.reason
                ));
            }
        }
        out
    }

    /// Writes `metrics.csv`, `coverage.csv`, and `tables.md` into `dir`.
    pub fn write_to_dir(&self, dir: impl AsRef<Path>) -> io::Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("metrics.csv"), self.metrics_csv())?;
        std::fs::write(dir.join("coverage.csv"), self.coverage_csv())?;
        std::fs::write(dir.join("tables.md"), self.tables_markdown())?;
        Ok(())
    }
}

/// Rebuilds `tables.md` from the CSVs in a report directory. Methods appear
/// in first-occurrence order of the CSV rows; windows and budgets sorted
/// ascending.
pub fn tables_from_csv_dir(dir: impl AsRef<Path>) -> io::Result<String> {
    let dir = dir.as_ref();
    let parse = |e: csv::Error| io::Error::new(io::ErrorKind::InvalidData, e);
    let number = |s: &str| {
        s.parse::<f64>()
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
    };

    let mut methods: Vec<String> = Vec::new();
    let remember = |methods: &mut Vec<String>, id: &str| {
        if !methods.iter().any(|m| m == id) {
            methods.push(id.to_string());
        }
    };

    let mut coverage = Vec::new();
    let mut windows = Vec::new();
    let mut budgets = Vec::new();
    let mut reader = csv::Reader::from_path(dir.join("coverage.csv")).map_err(parse)?;
    for record in reader.records() {
        let record = record.map_err(parse)?;
        let window_days: u32 = record[2]
            .parse()
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
        let budget_k: usize = record[3]
            .parse()
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
        remember(&mut methods, &record[1]);
        if !windows.contains(&window_days) {
            windows.push(window_days);
        }
        if !budgets.contains(&budget_k) {
            budgets.push(budget_k);
        }
        coverage.push(CoverageRow {
            site_id: record[0].to_string(),
            method_id: record[1].to_string(),
            window_days,
            budget_k,
            new_count: record[4]
                .parse()
                .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?,
            reached_count: record[5]
                .parse()
                .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?,
            coverage: number(&record[6])?,
        });
    }
    windows.sort_unstable();
    budgets.sort_unstable();

    let mut metrics = Vec::new();
    let mut reader = csv::Reader::from_path(dir.join("metrics.csv")).map_err(parse)?;
    for record in reader.records() {
        let record = record.map_err(parse)?;
        if &record[0] == "macro-average" {
            continue;
        }
        remember(&mut methods, &record[1]);
        metrics.push((
            record[1].to_string(),
            MetricsRow {
                site_id: record[0].to_string(),
                precision: number(&record[2])?,
                recall: number(&record[3])?,
                f1: number(&record[4])?,
            },
        ));
    }

    let report = EvalReport::assemble(methods, windows, budgets, metrics, coverage, Vec::new());
    Ok(report.tables_markdown())
}
