use std::path::Path;
use std::process::Command;

use moeaar_bench::commands::{bench, report, simulate, solve};
use moeaar_bench::report::summarize;
use moeaar_bench::results::{read_csv, ResultRow};
use moeaar_bench::{Method, RunConfig};

fn small_config(out: &Path) -> RunConfig {
    let mut c = RunConfig::default();
    c.out = out.to_path_buf();
    c.repeat = 1;
    c.head.n_sources = 120;
    c.head.n_sensors = 16;
    c.head.n_rois = 4;
    c.classic.grid_size = 8;
    c.classic.max_iter = 500;
    c.moeaar.iterations = 8;
    c
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_moeaar"))
}

#[test]
fn full_cross_has_one_row_per_method_and_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path());
    let out = bench(&config, false).unwrap();
    assert_eq!(out.outcomes.len(), 96);
    let rows = read_csv(&dir.path().join("results.csv")).unwrap();
    assert_eq!(rows.len(), 96);
    for r in &rows {
        let s = r.scores().unwrap_or_else(|| panic!("row failed: {r:?}"));
        assert!(s.iter().all(|x| (0.0..=1.0).contains(x)), "{r:?}");
        assert_eq!(r.runtime_ms, None);
    }
    // canonical order
    let keys: Vec<_> = rows.iter().map(|r| (r.method.clone(), r.region.clone(), r.kind.clone(), r.snr.to_bits(), r.seed)).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
    for m in Method::ALL {
        assert_eq!(rows.iter().filter(|r| r.method == m.as_str()).count(), 16);
    }

    let header = std::fs::read_to_string(dir.path().join("results.csv")).unwrap();
    assert_eq!(header.lines().next().unwrap(), "method,region,kind,snr,seed,le_score,vis_score,sr_score,runtime_ms");
    for name in ["le", "vis", "sr"] {
        let svg = std::fs::read_to_string(dir.path().join(format!("{name}_score.svg"))).unwrap();
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches(r#"class="panel""#).count(), 2);
        assert!(svg.contains(r#"data-series="frontal*""#));
        assert!(svg.contains(r#"data-series="frontal""#));
    }
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("results.json")).unwrap()).unwrap();
    assert_eq!(json["rows"].as_array().unwrap().len(), 96);
    assert!(json["failures"].as_array().unwrap().is_empty());
}

#[test]
fn bench_is_byte_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let mut c = small_config(dir.path());
        c.methods = vec![Method::Lasso, Method::MoeaarL0];
        c.repeat = 2;
        bench(&c, false).unwrap();
    }
    let x = std::fs::read(a.path().join("results.csv")).unwrap();
    let y = std::fs::read(b.path().join("results.csv")).unwrap();
    assert!(!x.is_empty());
    assert_eq!(x, y);
    let rows = read_csv(&a.path().join("results.csv")).unwrap();
    assert_eq!(rows.len(), 2 * 16 * 2);
    let mut seeds: Vec<u64> = rows.iter().map(|r| r.seed).collect();
    seeds.dedup();
    seeds.sort();
    seeds.dedup();
    assert_eq!(seeds, vec![0, 1]);
}

#[test]
fn a_bench_row_replays_through_solve() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small_config(dir.path());
    c.methods = vec![Method::MoeaarL0];
    c.repeat = 2;
    c.suite.kinds = vec![moeaar::simulator::SourceKind::Punctual];
    bench(&c, false).unwrap();
    let rows = read_csv(&dir.path().join("results.csv")).unwrap();
    let row = rows.iter().find(|r| r.seed == 1 && r.region == "temporal" && r.snr > 0.0).unwrap();
    let mut replay = c.clone();
    replay.seed = row.seed;
    let label = format!("{}-{}-snr{}", row.region, row.kind, row.snr);
    let out = solve(&replay, &label, Method::MoeaarL0).unwrap();
    assert_eq!(out.row.scores(), row.scores());
    let again = solve(&replay, &label, Method::MoeaarL0).unwrap();
    assert_eq!(out.j_est, again.j_est);
    for f in ["j_est.csv", "metrics.json", "telemetry.csv", "decision.json", "stats.json"] {
        assert!(out.dir.join(f).exists(), "{f}");
    }
}

#[test]
fn lasso_smoke_on_noiseless_punctual() {
    let dir = tempfile::tempdir().unwrap();
    let c = small_config(dir.path());
    let out = solve(&c, "frontal-punctual-snr0", Method::Lasso).unwrap();
    assert!(out.j_est.iter().any(|&x| x != 0.0));
    assert!(out.dir.join("gcv.csv").exists());
    assert!(solve(&c, "nowhere-punctual-snr0", Method::Lasso).is_err());
}

#[test]
fn simulate_creates_missing_dirs_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = small_config(&dir.path().join("deep/er/a"));
    let b = small_config(&dir.path().join("b"));
    let ma = simulate(&a).unwrap();
    simulate(&b).unwrap();
    assert_eq!(ma.scenarios.len(), 16);
    let ja = std::fs::read(a.out.join("manifest.json")).unwrap();
    let jb = std::fs::read(b.out.join("manifest.json")).unwrap();
    assert_eq!(ja, jb);
    for s in &ma.scenarios {
        assert!(a.out.join(&s.v_file).exists());
        assert!(a.out.join(&s.j_true_file).exists());
    }
}

fn row(method: &str, region: &str, snr: f64, seed: u64, le: f64, vis: f64, sr: f64) -> ResultRow {
    ResultRow {
        method: method.into(),
        region: region.into(),
        kind: "punctual".into(),
        snr,
        seed,
        le_score: Some(le),
        vis_score: Some(vis),
        sr_score: Some(sr),
        runtime_ms: None,
    }
}

#[test]
fn report_single_row_and_delta_definition() {
    let one = summarize(&[row("lasso", "frontal", 0.0, 0, 0.7, 0.5, 0.25)]).unwrap();
    assert_eq!(one.len(), 1);
    assert_eq!(one[0].metrics["le"].mean, 0.7);
    assert_eq!(one[0].metrics["sr"].mean, 0.25);
    assert_eq!(one[0].metrics["le"].delta, None);

    let two = summarize(&[row("lasso", "frontal", 0.0, 0, 0.9, 1.0, 1.0), row("lasso", "frontal", 3.0, 0, 0.6, 0.0, 0.5)]).unwrap();
    let le = &two[0].metrics["le"];
    assert!((le.delta.unwrap() - 0.3).abs() < 1e-15);
    assert!((le.max_degradation.unwrap() - 0.3).abs() < 1e-15);
    assert!(summarize(&[]).is_err());
}

/// Independent recomputation: a plain pass over the CSV text, no shared code.
#[test]
fn report_matches_spreadsheet_recomputation() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("method,region,kind,snr,seed,le_score,vis_score,sr_score,runtime_ms\n");
    let mut state = 12345u64;
    let mut next = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    for m in ["a", "b"] {
        for region in ["frontal", "temporal"] {
            for seed in 0..3 {
                for snr in ["0.0", "3.0"] {
                    let (x, y, z) = (next(), next(), next());
                    text.push_str(&format!("{m},{region},punctual,{snr},{seed},{x},{y},{z},\n"));
                }
            }
        }
    }
    // one failed row
    text.push_str("b,occipital,punctual,3.0,0,,,,\n");
    std::fs::write(dir.path().join("results.csv"), &text).unwrap();
    let got = report(dir.path()).unwrap();
    assert!(dir.path().join("report.md").exists());
    assert!(dir.path().join("report.json").exists());

    let lines: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    for (mi, m) in ["a", "b"].iter().enumerate() {
        let mine: Vec<&Vec<&str>> = lines.iter().filter(|l| l[0] == *m).collect();
        assert_eq!(got[mi].rows, mine.len());
        assert_eq!(got[mi].failed, if *m == "b" { 1 } else { 0 });
        for (col, name) in [(5, "le"), (6, "vis"), (7, "sr")] {
            let (mut sum, mut n, mut s0, mut n0, mut s1, mut n1) = (0.0, 0, 0.0, 0, 0.0, 0);
            let mut worst = f64::NEG_INFINITY;
            for l in &mine {
                if l[col].is_empty() {
                    continue;
                }
                let v: f64 = l[col].parse().unwrap();
                sum += v;
                n += 1;
                if l[3] == "0.0" {
                    s0 += v;
                    n0 += 1;
                    let partner = mine.iter().find(|p| p[1] == l[1] && p[4] == l[4] && p[3] == "3.0" && !p[col].is_empty());
                    if let Some(p) = partner {
                        worst = worst.max(v - p[col].parse::<f64>().unwrap());
                    }
                } else {
                    s1 += v;
                    n1 += 1;
                }
            }
            let s = &got[mi].metrics[name];
            assert!((s.mean - sum / n as f64).abs() < 1e-12);
            assert!((s.mean_noiseless.unwrap() - s0 / n0 as f64).abs() < 1e-12);
            assert!((s.mean_noisy.unwrap() - s1 / n1 as f64).abs() < 1e-12);
            assert!((s.delta.unwrap() - (s0 / n0 as f64 - s1 / n1 as f64)).abs() < 1e-12);
            assert!((s.max_degradation.unwrap() - worst).abs() < 1e-12);
        }
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let s = bin().args(["solve", "--method", "unknown", "--scenario", "frontal-punctual-snr0", "--out", out]).status().unwrap();
    assert_eq!(s.code(), Some(2));
    let s = bin().args(["bench", "--method", "nope", "--out", out]).status().unwrap();
    assert_eq!(s.code(), Some(2));
    let s = bin().args(["frobnicate"]).status().unwrap();
    assert_eq!(s.code(), Some(2));
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "repeat = 0\n").unwrap();
    let s = bin().args(["simulate", "--config", bad.to_str().unwrap(), "--out", out]).status().unwrap();
    assert_eq!(s.code(), Some(2));
    std::fs::write(&bad, "no_such_key = 1\n").unwrap();
    let s = bin().args(["simulate", "--config", bad.to_str().unwrap()]).status().unwrap();
    assert_eq!(s.code(), Some(2));
    // nothing to report: runtime failure
    let s = bin().args(["report", "--out", out]).status().unwrap();
    assert_eq!(s.code(), Some(1));
    let s = bin().args(["simulate", "--out", dir.path().join("sim").to_str().unwrap()]).status().unwrap();
    assert_eq!(s.code(), Some(0));
}

#[test]
fn print_config_round_trips() {
    let out = bin().args(["bench", "--print-config", "--seed", "7"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let parsed = RunConfig::from_toml(&text).unwrap();
    let mut want = RunConfig::default();
    want.seed = 7;
    assert_eq!(parsed, want);
    assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
}
