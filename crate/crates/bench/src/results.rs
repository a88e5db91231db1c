//! Benchmark rows: running them and reading/writing results.csv.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use moeaar::coevolution::RunStats;
use moeaar::metrics::evaluate_all;
use moeaar::simulator::Scenario;
use serde::{Deserialize, Serialize};

use crate::config::Method;
use crate::error::{BenchError, Result};
use crate::methods::{estimate, Trace};
use crate::workbench::Workbench;

/// One line of results.csv. Scores are empty when the row failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub method: String,
    pub region: String,
    pub kind: String,
    pub snr: f64,
    pub seed: u64,
    pub le_score: Option<f64>,
    pub vis_score: Option<f64>,
    pub sr_score: Option<f64>,
    pub runtime_ms: Option<f64>,
}

impl ResultRow {
    pub fn scores(&self) -> Option<[f64; 3]> {
        Some([self.le_score?, self.vis_score?, self.sr_score?])
    }

    fn key(&self) -> (String, String, String, u64, u64) {
        (self.method.clone(), self.region.clone(), self.kind.clone(), self.snr.to_bits(), self.seed)
    }
}

/// Everything known about a finished row; `row` is what lands in the CSV.
#[derive(Debug, Clone, Serialize)]
pub struct RowOutcome {
    #[serde(flatten)]
    pub row: ResultRow,
    pub label: String,
    /// Always measured, whether or not the CSV records it.
    pub elapsed_ms: f64,
    pub error: Option<String>,
    pub moeaar_stats: Option<RunStats>,
}

pub struct Job<'a> {
    pub method: Method,
    pub scenario: &'a Scenario<f64>,
    pub seed: u64,
}

pub fn run_row(bench: &Workbench, job: &Job<'_>) -> RowOutcome {
    let sc = job.scenario;
    let start = Instant::now();
    let result = estimate(bench, job.method, sc.v.values.view(), job.seed)
        .and_then(|est| Ok((evaluate_all(sc.j_true.view(), est.j.view(), &bench.space)?, est)));
    let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
    let mut row = ResultRow {
        method: job.method.to_string(),
        region: sc.region.clone(),
        kind: sc.kind().as_str().to_string(),
        snr: sc.v.snr,
        seed: job.seed,
        le_score: None,
        vis_score: None,
        sr_score: None,
        runtime_ms: bench.config.record_runtime.then_some(elapsed_ms.round()),
    };
    match result {
        Ok((m, est)) => {
            row.le_score = Some(m.localization_score);
            row.vis_score = Some(m.visibility_score);
            row.sr_score = Some(m.spatial_resolution_score);
            let moeaar_stats = match est.trace {
                Trace::Moeaar { stats, .. } => Some(stats),
                Trace::Classic { .. } => None,
            };
            RowOutcome { row, label: sc.label.clone(), elapsed_ms, error: None, moeaar_stats }
        }
        Err(e) => RowOutcome { row, label: sc.label.clone(), elapsed_ms, error: Some(e.to_string()), moeaar_stats: None },
    }
}

/// Runs every job on a small thread pool and returns outcomes in canonical
/// (sorted-key) order, independent of completion order.
pub fn run_rows(bench: &Workbench, jobs: &[Job<'_>], progress: bool) -> Vec<RowOutcome> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(jobs.len().max(1));
    let next = AtomicUsize::new(0);
    let done = Mutex::new(Vec::with_capacity(jobs.len()));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(job) = jobs.get(i) else { break };
                let out = run_row(bench, job);
                let mut done = done.lock().unwrap();
                if progress {
                    let status = out.error.as_deref().unwrap_or("ok");
                    eprintln!("[{}/{}] {} {} seed {}: {status}", done.len() + 1, jobs.len(), out.row.method, out.label, out.row.seed);
                }
                done.push(out);
            });
        }
    });
    let mut rows = done.into_inner().unwrap();
    rows.sort_by(|a, b| a.row.key().cmp(&b.row.key()));
    rows
}

pub fn write_csv(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| BenchError::Runtime(format!("{}: {e}", path.display())))?;
    for r in rows {
        w.serialize(r).map_err(|e| BenchError::Runtime(format!("{}: {e}", path.display())))?;
    }
    w.flush().map_err(|e| BenchError::io(path, e))
}

pub fn read_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| BenchError::Runtime(format!("{}: {e}", path.display())))?;
    r.deserialize()
        .collect::<std::result::Result<Vec<ResultRow>, _>>()
        .map_err(|e| BenchError::Runtime(format!("{}: {e}", path.display())))
}
