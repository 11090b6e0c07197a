//! Text renderings of metric and validation reports.

use std::fmt::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{MetricKind, MetricReport};
use crate::simbench::ValidationReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Json,
    Csv,
    Table,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            "table" => Ok(Format::Table),
            other => Err(Error::Config(format!("unknown format {other:?}"))),
        }
    }
}

fn json_lines<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("report rows serialize"));
        out.push('\n');
    }
    out
}

/// Parses JSON-lines output back into reports.
pub fn parse_metric_reports(text: &str) -> Result<Vec<MetricReport>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "-".to_string(), T::to_string)
}

fn aligned(header: &[&str], rows: &[Vec<String>]) -> String {
    let widths: Vec<usize> = (0..header.len())
        .map(|c| rows.iter().map(|r| r[c].len()).chain([header[c].len()]).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    let mut line = |cells: &[String]| {
        let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, &w)| format!("{c:<w$}")).collect();
        out.push_str(padded.join("  ").trim_end());
        out.push('\n');
    };
    line(&header.iter().map(|h| h.to_string()).collect::<Vec<_>>());
    for row in rows {
        line(row);
    }
    out
}

pub fn render_metric_reports(reports: &[MetricReport], format: Format) -> String {
    match format {
        Format::Json => json_lines(reports),
        Format::Csv => {
            let mut out = String::from("metric,value,n_a,n_b,adapter,seed\n");
            for r in reports {
                let adapter = r.adapter.clone().unwrap_or_default();
                let seed = r.seed.map(|s| s.to_string()).unwrap_or_default();
                let _ = writeln!(out, "{},{},{},{},{},{}", r.metric, r.value, r.n_a, r.n_b, adapter, seed);
            }
            out
        }
        Format::Table => {
            let rows: Vec<Vec<String>> = reports
                .iter()
                .map(|r| {
                    vec![
                        r.metric.to_string(),
                        format!("{:.4}", r.value),
                        r.n_a.to_string(),
                        r.n_b.to_string(),
                        opt(&r.adapter),
                        opt(&r.seed),
                    ]
                })
                .collect();
            aligned(&["metric", "value", "n_a", "n_b", "adapter", "seed"], &rows)
        }
    }
}

fn column_label(m: MetricKind) -> &'static str {
    match m {
        MetricKind::FAVTD => "FA(VT)D",
        other => other.name(),
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Markdown table with one row per grid cell and one column per metric; with
/// several seeds each entry is `mean ± std`.
fn validation_table(report: &ValidationReport) -> String {
    let mut cells: Vec<(usize, usize)> = Vec::new();
    let mut metrics: Vec<MetricKind> = Vec::new();
    for r in &report.rows {
        if !cells.contains(&(r.true_count, r.false_count)) {
            cells.push((r.true_count, r.false_count));
        }
        if !metrics.contains(&r.metric) {
            metrics.push(r.metric);
        }
    }
    let multi = report.seeds().len() > 1;
    let mut out = String::from("| True Pairs | False Pairs |");
    for &m in &metrics {
        let _ = write!(out, " {} |", column_label(m));
    }
    out.push_str("\n|---:|---:|");
    out.push_str(&"---:|".repeat(metrics.len()));
    out.push('\n');
    for &(t, f) in &cells {
        let _ = write!(out, "| {t} | {f} |");
        for &m in &metrics {
            let values: Vec<f64> = report
                .rows
                .iter()
                .filter(|r| (r.true_count, r.false_count) == (t, f) && r.metric == m)
                .map(|r| r.value)
                .collect();
            if values.is_empty() {
                out.push_str(" - |");
                continue;
            }
            let (mean, std) = mean_std(&values);
            if multi {
                let _ = write!(out, " {mean:.4} ± {std:.4} |");
            } else {
                let _ = write!(out, " {mean:.4} |");
            }
        }
        out.push('\n');
    }
    out
}

pub fn render_validation(report: &ValidationReport, format: Format) -> String {
    match format {
        Format::Json => json_lines(&report.rows),
        Format::Csv => {
            let mut out = String::from("true_count,false_count,metric,value,seed\n");
            for r in &report.rows {
                let _ = writeln!(out, "{},{},{},{},{}", r.true_count, r.false_count, r.metric, r.value, r.seed);
            }
            out
        }
        Format::Table => validation_table(report),
    }
}
