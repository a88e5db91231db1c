//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Criteria 1–3 are empirical trends at desk scale and are reported as
//! measured; criteria 4–7 are correctness invariants and fail the target.

use std::io::Write;
use std::time::Instant;

use moeaar::classic::solve_lasso;
use moeaar::decision::knee_select;
use moeaar::headmodel::{
    build_sensor_array, build_source_space, compute_leadfield, graph_laplacian, HeadModel, SourceSpace,
};
use moeaar::local_search::{gradient_fit, prox_threshold, prox_threshold_masked, ProxMode};
use moeaar::metrics::{evaluate_all, half_max_support};
use moeaar::moea::{environmental_selection, non_dominated_sort, Individual};
use moeaar::objectives::{residual_ss, ObjectiveVector};
use moeaar::simulator::{add_noise, Recording, SourceKind};
use moeaar_bench::commands::bench;
use moeaar_bench::methods::{estimate, Trace};
use moeaar_bench::workbench::Workbench;
use moeaar_bench::{Method, RunConfig};
use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{array, Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEEDS: u64 = 10;
const LE_MIN: f64 = 0.9;
const SEEDS_REQUIRED: usize = 8;
const SR_MIN: f64 = 0.5;
const SUPPORT_MAX: f64 = 3.0;
const RUNTIME_MAX_S: f64 = 300.0;

struct Report {
    lines: Vec<(bool, bool, String)>,
}

impl Report {
    fn record(&mut self, invariant: bool, pass: bool, text: String) {
        let line = format!("{} criterion {text}", if pass { "PASS" } else { "FAIL" });
        // bypass the test harness capture so the lines land in the log
        let _ = writeln!(std::io::stdout().lock(), "{line}");
        self.lines.push((invariant, pass, line));
    }
}

/// Per-seed results of MOEAAR-L0 and LASSO-GCV on the punctual suite.
#[derive(Default)]
struct SeedScores {
    // [method][snr index] → region scores
    le: [[Vec<f64>; 2]; 2],
    sr_clean: [Vec<f64>; 2],
    moeaar_support_clean: Vec<f64>,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn desk_trends(report: &mut Report, f_increases: &mut usize, size_violations: &mut usize) {
    let mut config = RunConfig::default();
    config.suite.kinds = vec![SourceKind::Punctual];
    let wb = Workbench::new(&config).expect("desk workbench");
    let methods = [Method::MoeaarL0, Method::Lasso];
    let mut per_seed = Vec::new();
    let mut max_runtime: f64 = 0.0;
    for seed in 0..SEEDS {
        let mut s = SeedScores::default();
        for sc in wb.suite(seed).expect("suite") {
            let snr_idx = usize::from(sc.v.snr > 0.0);
            for (mi, &method) in methods.iter().enumerate() {
                let t = Instant::now();
                let est = estimate(&wb, method, sc.v.values.view(), seed).expect("estimate");
                let elapsed = t.elapsed().as_secs_f64();
                let m = evaluate_all(sc.j_true.view(), est.j.view(), &wb.space).expect("metrics");
                s.le[mi][snr_idx].push(m.localization_score);
                if snr_idx == 0 {
                    s.sr_clean[mi].push(m.spatial_resolution_score);
                }
                if let Trace::Moeaar { stats, .. } = &est.trace {
                    max_runtime = max_runtime.max(elapsed);
                    *f_increases += stats.lsts_f_increases;
                    *size_violations += stats.population_size_violations;
                    if snr_idx == 0 {
                        s.moeaar_support_clean.push(half_max_support(est.j.view()).len() as f64);
                    }
                }
            }
        }
        let _ = writeln!(
            std::io::stdout().lock(),
            "  seed {seed}: moeaar-l0 le {:.3}/{:.3} sr {:.3} support {:.2} | lasso le {:.3}/{:.3} sr {:.3}",
            mean(&s.le[0][0]),
            mean(&s.le[0][1]),
            mean(&s.sr_clean[0]),
            mean(&s.moeaar_support_clean),
            mean(&s.le[1][0]),
            mean(&s.le[1][1]),
            mean(&s.sr_clean[1]),
        );
        per_seed.push(s);
    }

    // 1. localization stability
    let stable = per_seed.iter().filter(|s| mean(&s.le[0][0]) >= LE_MIN && mean(&s.le[0][1]) >= LE_MIN).count();
    report.record(
        false,
        stable >= SEEDS_REQUIRED && max_runtime <= RUNTIME_MAX_S,
        format!(
            "1 (localization stability): MOEAAR-L0 mean LE >= {LE_MIN} at snr 0 and 3 in {stable}/{SEEDS} seeds (need {SEEDS_REQUIRED}); slowest run {max_runtime:.2} s (limit {RUNTIME_MAX_S} s)"
        ),
    );

    // 2. relative stability
    let degradation = |mi: usize| mean(&per_seed.iter().map(|s| mean(&s.le[mi][0]) - mean(&s.le[mi][1])).collect::<Vec<_>>());
    let (d_moea, d_lasso) = (degradation(0), degradation(1));
    report.record(
        false,
        d_moea < d_lasso,
        format!("2 (relative stability): mean LE degradation snr0 - snr3, MOEAAR-L0 {d_moea:.4} vs LASSO-GCV {d_lasso:.4} (need MOEAAR smaller)"),
    );

    // 3. sparsity recovery
    let lasso_ok = per_seed.iter().filter(|s| mean(&s.sr_clean[1]) >= SR_MIN).count();
    let moea_ok = per_seed
        .iter()
        .filter(|s| mean(&s.sr_clean[0]) >= SR_MIN && mean(&s.moeaar_support_clean) <= SUPPORT_MAX)
        .count();
    report.record(
        false,
        lasso_ok >= SEEDS_REQUIRED && moea_ok >= SEEDS_REQUIRED,
        format!(
            "3 (sparsity recovery): noiseless SR >= {SR_MIN} in LASSO {lasso_ok}/{SEEDS}, MOEAAR-L0 {moea_ok}/{SEEDS} seeds with mean half-max support <= {SUPPORT_MAX} (need {SEEDS_REQUIRED} each)"
        ),
    );
}

fn individual(objs: Vec<f64>, tag: usize) -> Individual<f64> {
    Individual::new(array![tag as f64], 0).with_objectives(ObjectiveVector(objs))
}

fn brute_front0(pts: &[Vec<f64>]) -> Vec<usize> {
    let better = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| x <= y) && a.iter().zip(b).any(|(x, y)| x < y);
    (0..pts.len()).filter(|&i| !(0..pts.len()).any(|j| better(&pts[j], &pts[i]))).collect()
}

fn random_points(rng: &mut ChaCha8Rng, count: usize, dims: usize, discrete: bool) -> Vec<Vec<f64>> {
    (0..count)
        .map(|_| (0..dims).map(|_| if discrete { rng.random_range(0..6) as f64 } else { rng.random::<f64>() }).collect())
        .collect()
}

fn grid_argmin(h: impl Fn(f64) -> f64) -> (f64, f64) {
    let count = 100_000;
    let mut best = (0.0, f64::INFINITY);
    for q in 0..=count {
        let x = -10.0 + 20.0 * q as f64 / count as f64;
        let val = h(x);
        if val < best.1 {
            best = (x, val);
        }
    }
    best
}

fn two_node_path() -> SourceSpace<f64> {
    SourceSpace::from_parts(vec![[0.0, 0.0, 0.0], [0.01, 0.0, 0.0]], vec![0, 0], vec![vec![1], vec![0]]).unwrap()
}

fn oracles(report: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let trials = 100;

    let mut nds_ok = 0;
    for t in 0..trials {
        let pts = random_points(&mut rng, 40, 2 + t % 2, t % 3 == 0);
        let mut members: Vec<_> = pts.iter().enumerate().map(|(i, p)| individual(p.clone(), i)).collect();
        let mut f0 = non_dominated_sort(&mut members).unwrap()[0].clone();
        f0.sort_unstable();
        nds_ok += usize::from(f0 == brute_front0(&pts));
    }

    let lap = graph_laplacian(&two_node_path());
    let mut prox_worst: f64 = 0.0;
    for _ in 0..trials {
        let u: f64 = rng.random_range(-5.0..5.0);
        let a: f64 = rng.random_range(0.0..3.0);
        let soft = prox_threshold(array![u].view(), a, ProxMode::L1).unwrap()[0];
        let (x, _) = grid_argmin(|x| 0.5 * (x - u).powi(2) + a * x.abs());
        prox_worst = prox_worst.max((soft - x).abs());

        let hard = prox_threshold(array![u].view(), a, ProxMode::L0).unwrap()[0];
        let obj = |x: f64| 0.5 * (x - u).powi(2) + a * f64::from(u8::from(x != 0.0));
        let (x, best) = grid_argmin(obj);
        let x = if obj(0.0) <= best { 0.0 } else { x };
        // at the threshold both minimizers are optimal
        if (u * u - 2.0 * a).abs() > 1e-2 {
            prox_worst = prox_worst.max((hard - x).abs());
        }

        let x1: f64 = rng.random_range(-3.0..3.0);
        let out = prox_threshold_masked(array![u, x1].view(), a, ProxMode::L2L(&lap), Some(&[true, false])).unwrap();
        let (x, _) = grid_argmin(|x| 0.5 * (x - u).powi(2) + a * 2.0 * (x - x1).powi(2));
        prox_worst = prox_worst.max((out[0] - x).abs());
    }

    let mut grad_worst: f64 = 0.0;
    let h = 1e-6;
    for _ in 0..trials {
        let (m, n) = (rng.random_range(2..10), rng.random_range(2..12));
        let k = Array2::<f64>::from_shape_fn((m, n), |_| rng.random_range(-1.0..1.0));
        let v = Array1::<f64>::from_shape_fn(m, |_| rng.random_range(-2.0..2.0));
        let j = Array1::<f64>::from_shape_fn(n, |_| rng.random_range(-2.0..2.0));
        let g = gradient_fit(k.view(), v.view(), j.view()).unwrap();
        for i in 0..n {
            let (mut up, mut down) = (j.clone(), j.clone());
            up[i] += h;
            down[i] -= h;
            let fd = (residual_ss(k.view(), v.view(), up.view()).unwrap() - residual_ss(k.view(), v.view(), down.view()).unwrap())
                / (2.0 * h);
            grad_worst = grad_worst.max((fd - g[i]).abs() / g[i].abs().max(1.0));
        }
    }

    let mut kkt_worst: f64 = 0.0;
    let normal = rand_distr::StandardNormal;
    for _ in 0..trials {
        let k = Array2::from_shape_fn((8, 20), |_| rng.sample::<f64, _>(normal));
        let v = Array1::from_shape_fn(8, |_| rng.sample::<f64, _>(normal));
        let lmax = 2.0 * k.t().dot(&v).iter().fold(0.0f64, |a, x| a.max(x.abs()));
        let lambda = lmax * rng.random_range(0.05..0.8);
        let sol = solve_lasso(k.view(), v.view(), lambda, 1e-13, 2_000_000).unwrap();
        let g = k.t().dot(&(&v - &k.dot(&sol.j.values))).mapv(|x| 2.0 * x);
        for (i, &ji) in sol.j.values.iter().enumerate() {
            let violation = if ji == 0.0 { (g[i].abs() - lambda).max(0.0) } else { (g[i] - lambda * ji.signum()).abs() };
            kkt_worst = kkt_worst.max(violation);
        }
    }
    report.record(
        true,
        nds_ok == trials && prox_worst < 1e-3 && grad_worst < 1e-4 && kkt_worst <= 1e-6,
        format!(
            "4 (oracle equivalences, {trials} instances each): front 0 exact {nds_ok}/{trials}; prox max error {prox_worst:.2e} (< 1e-3); gradient max rel error {grad_worst:.2e} (< 1e-4); LASSO KKT max violation {kkt_worst:.2e} (<= 1e-6)"
        ),
    );
}

/// Scalp potential of a dipole in a homogeneous unit sphere (closed-form
/// Legendre generating-function sums).
fn homogeneous_sphere_potential(sigma: f64, sensor: [f64; 3], source: [f64; 3], q: [f64; 3]) -> f64 {
    let dot = |a: [f64; 3], b: [f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    let t = dot(source, source).sqrt();
    let rhat = source.map(|v| v / t);
    let x = dot(sensor, rhat);
    let qr = dot(q, rhat);
    let qt = [q[0] - qr * rhat[0], q[1] - qr * rhat[1], q[2] - qr * rhat[2]];
    let tau = dot(sensor, qt);
    let d = (1.0 - 2.0 * x * t + t * t).sqrt();
    let radial = 2.0 * (x - t) / d.powi(3) + (1.0 / d - 1.0) / t;
    let tangential = 2.0 / d.powi(3) + ((t - x) / d + x) / (t * (1.0 - x * x));
    (qr * radial + tau * tangential) / (4.0 * std::f64::consts::PI * sigma)
}

fn conservation(report: &mut Report, bench_scores: &[[f64; 3]]) {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut snr_worst: f64 = 0.0;
    for seed in 0..100u64 {
        let values = Array1::<f64>::from_shape_fn(32, |_| rng.random_range(-3.0..3.0));
        let v = Recording { values, snr: 0.0, seed: 0 };
        let snr: f64 = rng.random_range(0.1..20.0);
        let noisy = add_noise(&v, snr, seed).unwrap();
        let e = &noisy.values - &v.values;
        let ratio = v.values.dot(&v.values).sqrt() / e.dot(&e).sqrt();
        snr_worst = snr_worst.max((ratio - snr).abs() / snr.max(1.0));
    }

    let (mut row_sum_worst, mut min_eig): (f64, f64) = (0.0, f64::INFINITY);
    for (n, seed) in [(50, 1), (120, 2), (200, 3)] {
        let space = build_source_space::<f64>(n, 0.8, 4, seed).unwrap();
        let dense = graph_laplacian(&space).to_dense();
        for row in dense.rows() {
            row_sum_worst = row_sum_worst.max(row.sum().abs());
        }
        let sym = DMatrix::from_fn(n, n, |i, j| dense[[i, j]]);
        min_eig = min_eig.min(SymmetricEigen::new(sym).eigenvalues.min());
    }

    let space = build_source_space::<f64>(60, 0.8, 3, 9).unwrap();
    let sensors = build_sensor_array::<f64>(32).unwrap().with_average_reference(false);
    let orient = space.radial_orientations();
    let k = compute_leadfield(&HeadModel::homogeneous(0.33), &space, &sensors, &orient).unwrap();
    let mut lf_worst: f64 = 0.0;
    for j in 0..space.len() {
        for (i, s) in sensors.positions().iter().enumerate() {
            let expect = homogeneous_sphere_potential(0.33, *s, *space.position(j), orient[j]);
            lf_worst = lf_worst.max((k.matrix()[[i, j]] - expect).abs() / expect.abs().max(1e-3));
        }
    }

    let out_of_range = bench_scores.iter().flatten().filter(|s| !(0.0..=1.0).contains(*s)).count();
    report.record(
        true,
        snr_worst <= 1e-12 && row_sum_worst <= 1e-12 && min_eig >= -1e-9 && lf_worst <= 1e-6 && out_of_range == 0,
        format!(
            "5 (conservation): snr ratio error {snr_worst:.1e} (<= 1e-12); Laplacian |row sum| {row_sum_worst:.1e}, min eigenvalue {min_eig:.2e} (>= -1e-9, n <= 200); homogeneous lead field rel error {lf_worst:.1e} (<= 1e-6); {out_of_range} of {} benchmark scores outside [0,1]",
            bench_scores.len() * 3
        ),
    );
}

fn invariants(report: &mut Report, f_increases: usize, size_violations: usize, csv_identical: bool, bench_rows: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut checked, mut kept_all) = (0, 0);
    for t in 0..200 {
        let n = rng.random_range(4..16);
        let pts = random_points(&mut rng, 2 * n, 2 + t % 2, false);
        let front0 = brute_front0(&pts);
        if front0.len() > n {
            continue;
        }
        let pop: Vec<_> = pts.iter().enumerate().map(|(i, p)| individual(p.clone(), i)).collect();
        let kept: Vec<usize> = environmental_selection(pop, n).unwrap().iter().map(|m| m.coeffs[0] as usize).collect();
        checked += 1;
        kept_all += usize::from(kept.len() == n && front0.iter().all(|i| kept.contains(i)));
    }
    report.record(
        true,
        f_increases == 0 && size_violations == 0 && checked == kept_all && checked > 0 && csv_identical,
        format!(
            "6 (algorithmic invariants): accepted LSTS iterates raising F: {f_increases}; population size violations: {size_violations}; front 0 retained in {kept_all}/{checked} selections with |front 0| <= N; two full runs ({bench_rows} rows) give identical results.csv: {csv_identical}"
        ),
    );
}

fn decision_geometry(report: &mut Report) {
    let l_shape = [(0.0, 10.0), (1.0, 1.0), (10.0, 0.0)];
    let knee = knee_select(&l_shape).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut invariant = 0;
    for _ in 0..100 {
        let count = rng.random_range(3..12);
        let mut xs: Vec<f64> = (0..count).map(|_| rng.random_range(0.0..10.0)).collect();
        xs.sort_by(f64::total_cmp);
        let points: Vec<(f64, f64)> = xs.iter().map(|&x| (x, 1.0 / (1.0 + x) + rng.random_range(0.0..0.01))).collect();
        let base = knee_select(&points).unwrap();
        let (a0, b0) = (rng.random_range(0.01..100.0), rng.random_range(-50.0..50.0));
        let (a1, b1) = (rng.random_range(0.01..100.0), rng.random_range(-50.0..50.0));
        let scaled: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (a0 * x + b0, a1 * y + b1)).collect();
        invariant += usize::from(knee_select(&scaled).unwrap() == base);
    }
    report.record(
        true,
        l_shape[knee] == (1.0, 1.0) && invariant == 100,
        format!("7 (decision geometry): L-shape knee {:?} (want (1, 1)); index unchanged under positive affine rescaling in {invariant}/100 trials", l_shape[knee]),
    );
}

fn main() {
    // `cargo test -- --list` and filters: nothing to enumerate here
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let started = Instant::now();
    let mut report = Report { lines: Vec::new() };
    let (mut f_increases, mut size_violations) = (0, 0);

    let phase = |name: &str, t: Instant| {
        let _ = writeln!(std::io::stdout().lock(), "  [{name}: {:.0} s]", t.elapsed().as_secs_f64());
    };
    let t = Instant::now();
    desk_trends(&mut report, &mut f_increases, &mut size_violations);
    phase("10-seed punctual study", t);
    let t = Instant::now();
    oracles(&mut report);
    phase("oracles", t);

    // two full desk-scale benchmark runs with the same seed
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut csv = Vec::new();
    let mut scores = Vec::new();
    let t = Instant::now();
    for dir in &dirs {
        let mut config = RunConfig::default();
        config.repeat = 1;
        config.out = dir.path().to_path_buf();
        let out = bench(&config, false).expect("bench run");
        scores = out.outcomes.iter().filter_map(|o| o.row.scores()).collect::<Vec<_>>();
        for o in &out.outcomes {
            if let Some(s) = o.moeaar_stats {
                f_increases += s.lsts_f_increases;
                size_violations += s.population_size_violations;
            }
        }
        assert!(out.failures.is_empty(), "benchmark rows failed: {:?}", out.failures);
        csv.push(std::fs::read(dir.path().join("results.csv")).unwrap());
    }
    phase("two full benchmark runs", t);
    conservation(&mut report, &scores);
    invariants(&mut report, f_increases, size_violations, csv[0] == csv[1], scores.len());
    decision_geometry(&mut report);

    let passed = report.lines.iter().filter(|l| l.1).count();
    let invariant_failures = report.lines.iter().filter(|l| l.0 && !l.1).count();
    println!(
        "acceptance: {passed}/{} criteria pass ({:.0} s); trend criteria 1-3 are reported, invariant criteria 4-7 gate the exit status",
        report.lines.len(),
        started.elapsed().as_secs_f64()
    );
    if invariant_failures > 0 {
        std::process::exit(1);
    }
}
