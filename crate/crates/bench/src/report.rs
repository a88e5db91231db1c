//! Per-method summaries of results.csv.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::Serialize;

use crate::error::{BenchError, Result};
use crate::results::ResultRow;

pub const METRICS: [&str; 3] = ["le", "vis", "sr"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricSummary {
    pub mean: f64,
    /// Mean over snr = 0 rows; `None` if there are none.
    pub mean_noiseless: Option<f64>,
    pub mean_noisy: Option<f64>,
    /// `mean_noiseless − mean_noisy`.
    pub delta: Option<f64>,
    /// Largest `score(snr=0) − score(snr>0)` over rows sharing region, kind and seed.
    pub max_degradation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodSummary {
    pub method: String,
    pub rows: usize,
    pub failed: usize,
    pub metrics: BTreeMap<String, MetricSummary>,
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

fn summarize_metric(rows: &[&ResultRow], metric: usize) -> Option<MetricSummary> {
    let score = |r: &ResultRow| r.scores().map(|s| s[metric]);
    let all: Vec<f64> = rows.iter().filter_map(|r| score(r)).collect();
    let clean: Vec<f64> = rows.iter().filter(|r| r.snr == 0.0).filter_map(|r| score(r)).collect();
    let noisy: Vec<f64> = rows.iter().filter(|r| r.snr > 0.0).filter_map(|r| score(r)).collect();
    let (mean_noiseless, mean_noisy) = (mean(&clean), mean(&noisy));

    let mut max_degradation: Option<f64> = None;
    for a in rows.iter().filter(|r| r.snr == 0.0) {
        let Some(sa) = score(a) else { continue };
        for b in rows.iter().filter(|r| r.snr > 0.0 && r.region == a.region && r.kind == a.kind && r.seed == a.seed) {
            if let Some(sb) = score(b) {
                let d = sa - sb;
                max_degradation = Some(max_degradation.map_or(d, |m| m.max(d)));
            }
        }
    }
    Some(MetricSummary {
        mean: mean(&all)?,
        mean_noiseless,
        mean_noisy,
        delta: mean_noiseless.zip(mean_noisy).map(|(c, n)| c - n),
        max_degradation,
    })
}

/// One summary per method, in first-appearance order of the rows.
pub fn summarize(rows: &[ResultRow]) -> Result<Vec<MethodSummary>> {
    if rows.is_empty() {
        return Err(BenchError::Runtime("no results to report".into()));
    }
    let mut order: Vec<&str> = Vec::new();
    for r in rows {
        if !order.contains(&r.method.as_str()) {
            order.push(&r.method);
        }
    }
    Ok(order
        .into_iter()
        .map(|method| {
            let mine: Vec<&ResultRow> = rows.iter().filter(|r| r.method == method).collect();
            let failed = mine.iter().filter(|r| r.scores().is_none()).count();
            let metrics = METRICS
                .iter()
                .enumerate()
                .filter_map(|(i, name)| Some((name.to_string(), summarize_metric(&mine, i)?)))
                .collect();
            MethodSummary { method: method.to_string(), rows: mine.len(), failed, metrics }
        })
        .collect())
}

fn cell(x: Option<f64>) -> String {
    x.map_or_else(|| "–".to_string(), |v| format!("{v:.4}"))
}

pub fn to_markdown(summaries: &[MethodSummary]) -> String {
    let mut s = String::from("# Benchmark summary\n\n");
    for name in METRICS {
        let _ = writeln!(s, "## {name}_score\n");
        s.push_str("| method | rows | failed | mean | snr=0 | snr>0 | delta | max degradation |\n");
        s.push_str("|---|---:|---:|---:|---:|---:|---:|---:|\n");
        for m in summaries {
            let Some(x) = m.metrics.get(name) else {
                let _ = writeln!(s, "| {} | {} | {} | – | – | – | – | – |", m.method, m.rows, m.failed);
                continue;
            };
            let _ = writeln!(
                s,
                "| {} | {} | {} | {:.4} | {} | {} | {} | {} |",
                m.method,
                m.rows,
                m.failed,
                x.mean,
                cell(x.mean_noiseless),
                cell(x.mean_noisy),
                cell(x.delta),
                cell(x.max_degradation)
            );
        }
        s.push('\n');
    }
    s
}
