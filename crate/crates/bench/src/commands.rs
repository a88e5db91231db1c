//! The four subcommands as library calls; `main` only parses flags.

use std::fs;
use std::path::{Path, PathBuf};

use moeaar::metrics::evaluate_all;
use moeaar::simulator::Scenario;
use serde::Serialize;

use crate::config::{Method, RunConfig};
use crate::error::{BenchError, Result};
use crate::methods::{estimate, Trace};
use crate::plot;
use crate::report::{self, MethodSummary};
use crate::results::{read_csv, run_rows, write_csv, Job, ResultRow, RowOutcome};
use crate::workbench::Workbench;

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| BenchError::io(dir, e))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| BenchError::io(path, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| BenchError::Runtime(e.to_string()))?;
    write(path, &(text + "\n"))
}

fn vector_csv(values: impl Iterator<Item = f64>) -> String {
    let mut s = String::from("index,value\n");
    for (i, v) in values.enumerate() {
        s.push_str(&format!("{i},{v}\n"));
    }
    s
}

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioEntry {
    pub label: String,
    pub region: String,
    pub roi: usize,
    pub kind: String,
    pub center: usize,
    pub amplitude: f64,
    pub spread: f64,
    pub snr: f64,
    pub noise_seed: u64,
    pub j_true_file: String,
    pub v_file: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub seed: u64,
    pub n_sources: usize,
    pub n_sensors: usize,
    pub n_rois: usize,
    pub regions: Vec<usize>,
    pub scenarios: Vec<ScenarioEntry>,
}

/// Writes the suite for `config.seed` under `<out>/scenarios/` plus `manifest.json`.
pub fn simulate(config: &RunConfig) -> Result<Manifest> {
    let bench = Workbench::new(config)?;
    let suite = bench.suite(config.seed)?;
    let dir = config.out.join("scenarios");
    create_dir(&dir)?;
    let mut scenarios = Vec::with_capacity(suite.len());
    for sc in &suite {
        let j_file = format!("{}.j_true.csv", sc.label);
        let v_file = format!("{}.v.csv", sc.label);
        write(&dir.join(&j_file), &vector_csv(sc.j_true.values.iter().copied()))?;
        write(&dir.join(&v_file), &vector_csv(sc.v.values.iter().copied()))?;
        scenarios.push(ScenarioEntry {
            label: sc.label.clone(),
            region: sc.region.clone(),
            roi: sc.spec.roi,
            kind: sc.kind().as_str().into(),
            center: sc.spec.center,
            amplitude: sc.spec.amplitude,
            spread: sc.spec.spread,
            snr: sc.v.snr,
            noise_seed: sc.v.seed,
            j_true_file: format!("scenarios/{j_file}"),
            v_file: format!("scenarios/{v_file}"),
        });
    }
    let manifest = Manifest {
        seed: config.seed,
        n_sources: bench.space.len(),
        n_sensors: bench.leadfield.n_sensors(),
        n_rois: bench.space.n_rois(),
        regions: bench.regions.clone(),
        scenarios,
    };
    write_json(&config.out.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

fn find_scenario<'a>(suite: &'a [Scenario<f64>], label: &str) -> Result<&'a Scenario<f64>> {
    suite.iter().find(|s| s.label == label).ok_or_else(|| {
        let known: Vec<&str> = suite.iter().map(|s| s.label.as_str()).collect();
        BenchError::Usage(format!("unknown scenario {label:?}; known: {}", known.join(", ")))
    })
}

#[derive(Debug, Clone)]
pub struct SolveOutput {
    pub dir: PathBuf,
    pub row: ResultRow,
    pub j_est: Vec<f64>,
}

/// Solves one scenario of the suite for `config.seed`, which is also the
/// solver seed, so any bench row replays with `--seed <row seed>`.
pub fn solve(config: &RunConfig, label: &str, method: Method) -> Result<SolveOutput> {
    let bench = Workbench::new(config)?;
    let suite = bench.suite(config.seed)?;
    let sc = find_scenario(&suite, label)?;
    let est = estimate(&bench, method, sc.v.values.view(), config.seed)?;
    let m = evaluate_all(sc.j_true.view(), est.j.view(), &bench.space)?;
    let row = ResultRow {
        method: method.to_string(),
        region: sc.region.clone(),
        kind: sc.kind().as_str().into(),
        snr: sc.v.snr,
        seed: config.seed,
        le_score: Some(m.localization_score),
        vis_score: Some(m.visibility_score),
        sr_score: Some(m.spatial_resolution_score),
        runtime_ms: None,
    };

    let dir = config.out.join("solve").join(format!("{method}-{label}-seed{}", config.seed));
    create_dir(&dir)?;
    write(&dir.join("j_est.csv"), &vector_csv(est.j.iter().copied()))?;
    #[derive(Serialize)]
    struct MetricsFile<'a> {
        #[serde(flatten)]
        row: &'a ResultRow,
        label: &'a str,
        raw_distance: Option<f64>,
    }
    write_json(&dir.join("metrics.json"), &MetricsFile { row: &row, label, raw_distance: m.raw_distance })?;
    match &est.trace {
        Trace::Classic { lambda, gcv_curve, converged, jittered } => {
            let mut s = String::from("lambda,gcv\n");
            for (l, g) in gcv_curve {
                s.push_str(&format!("{l},{g}\n"));
            }
            write(&dir.join("gcv.csv"), &s)?;
            write_json(
                &dir.join("trace.json"),
                &serde_json::json!({ "lambda": lambda, "converged": converged, "jittered": jittered }),
            )?;
        }
        Trace::Moeaar { decision, telemetry, stats } => {
            let mut s = String::from("cycle,best_f0,front_size,cv_f0\n");
            for c in telemetry {
                s.push_str(&format!("{},{},{},{}\n", c.cycle, c.best_f0, c.front_size, c.cv_f0));
            }
            write(&dir.join("telemetry.csv"), &s)?;
            write_json(&dir.join("decision.json"), decision)?;
            write_json(&dir.join("stats.json"), stats)?;
        }
    }
    Ok(SolveOutput { dir, row, j_est: est.j.to_vec() })
}

#[derive(Debug, Clone, Serialize)]
pub struct Failure {
    pub method: String,
    pub label: String,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone)]
pub struct BenchOutput {
    pub outcomes: Vec<RowOutcome>,
    pub failures: Vec<Failure>,
}

/// The full methods × scenarios × repeats cross. Row failures are recorded
/// and the run continues.
pub fn bench(config: &RunConfig, progress: bool) -> Result<BenchOutput> {
    create_dir(&config.out)?;
    let bench = Workbench::new(config)?;
    let suites: Vec<(u64, Vec<Scenario<f64>>)> = (0..config.repeat)
        .map(|r| {
            let seed = config.repeat_seed(r);
            Ok((seed, bench.suite(seed)?))
        })
        .collect::<Result<_>>()?;
    let mut jobs = Vec::new();
    for (seed, suite) in &suites {
        for &method in &config.methods {
            for scenario in suite {
                jobs.push(Job { method, scenario, seed: *seed });
            }
        }
    }
    let outcomes = run_rows(&bench, &jobs, progress);
    let failures: Vec<Failure> = outcomes
        .iter()
        .filter_map(|o| {
            Some(Failure { method: o.row.method.clone(), label: o.label.clone(), seed: o.row.seed, error: o.error.clone()? })
        })
        .collect();
    let rows: Vec<ResultRow> = outcomes.iter().map(|o| o.row.clone()).collect();
    write_csv(&config.out.join("results.csv"), &rows)?;
    write_json(
        &config.out.join("results.json"),
        &serde_json::json!({ "config": config, "rows": outcomes, "failures": failures }),
    )?;
    for (i, name) in report::METRICS.iter().enumerate() {
        let title = format!("{name}_score by method (mean over seeds)");
        write(&config.out.join(format!("{name}_score.svg")), &plot::render(&rows, i, &title))?;
    }
    Ok(BenchOutput { outcomes, failures })
}

/// Summarizes `<dir>/results.csv` into `report.md` and `report.json` in `dir`.
pub fn report(dir: &Path) -> Result<Vec<MethodSummary>> {
    let path = dir.join("results.csv");
    if !path.exists() {
        return Err(BenchError::Runtime(format!("{} does not exist; run `bench` first", path.display())));
    }
    let rows = read_csv(&path)?;
    let summaries = report::summarize(&rows)?;
    write(&dir.join("report.md"), &report::to_markdown(&summaries))?;
    write_json(&dir.join("report.json"), &summaries)?;
    Ok(summaries)
}
