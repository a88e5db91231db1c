use moeaar::coevolution::{
    cc_step, compose, initial_context, initial_population, project_subpopulation, run_moeaar, MoeaarConfig,
    StepContext,
};
use moeaar::headmodel::SourceSpace;
use moeaar::moea::{dominates, Individual};
use moeaar::objectives::{evaluate, residual_ss, PenaltyModel};
use ndarray::{array, Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `n` sources on a line split into `k` contiguous ROIs.
fn line_space(n: usize, k: usize) -> SourceSpace<f64> {
    let positions = (0..n).map(|i| [i as f64 * 0.01, 0.0, 0.5]).collect();
    let labels = (0..n).map(|i| i * k / n).collect();
    let adjacency = (0..n)
        .map(|i: usize| [i.checked_sub(1), (i + 1 < n).then_some(i + 1)].into_iter().flatten().collect())
        .collect();
    SourceSpace::from_parts(positions, labels, adjacency).unwrap()
}

#[test]
fn projection_round_trips_through_compose() {
    let space = line_space(9, 3);
    let ind = Individual::new(Array1::from_shape_fn(9, |i| i as f64 - 4.0), 0);
    for group in space.roi_groups() {
        let subs = project_subpopulation(std::slice::from_ref(&ind), &group).unwrap();
        assert_eq!(subs[0].parent, Some(0));
        assert_eq!(compose(ind.coeffs.view(), &subs[0], &group).unwrap(), ind.coeffs);
    }
    assert!(project_subpopulation(&[ind], &[]).is_err());
}

#[test]
fn compose_overwrites_only_the_group() {
    let cv = Array1::from_shape_fn(6, |i| 10.0 + i as f64);
    let sub = Individual::new(array![-1.0, -2.0], 0);
    let out = compose(cv.view(), &sub, &[1, 4]).unwrap();
    let mut want = cv.clone();
    want[1] = -1.0;
    want[4] = -2.0;
    assert_eq!(out, want);
    // one group spanning everything: the sub-individual itself
    let all = Individual::new(array![1.0, 2.0, 3.0], 0);
    assert_eq!(compose(Array1::zeros(3).view(), &all, &[0, 1, 2]).unwrap(), all.coeffs);
    assert!(compose(cv.view(), &sub, &[1]).is_err());
}

#[test]
fn context_fit_never_worsens_on_identity_toy() {
    let space = line_space(4, 2);
    let k = Array2::<f64>::eye(4);
    let v = array![1.0, -2.0, 0.5, 3.0];
    let config = MoeaarConfig::new(PenaltyModel::l1(), 7);
    let mut pop = initial_population(&space, k.view(), v.view(), &config.penalty).unwrap().members;
    let mut cv = initial_context(&pop).unwrap();
    let groups = space.roi_groups();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut last = cv.f0();
    for t in 0..10 {
        let ctx = StepContext { k: k.view(), v: v.view(), groups: &groups, config: &config, sigma: config.sigma(0.3, t), bound: 30.0 };
        let (next, next_cv, _) = cc_step(pop, cv, &ctx, &mut rng).unwrap();
        assert_eq!(next.len(), 2);
        assert!(next_cv.f0() <= last);
        assert_eq!(next_cv.f0(), residual_ss(k.view(), v.view(), next_cv.values.view()).unwrap());
        last = next_cv.f0();
        pop = next;
        cv = next_cv;
    }
}

fn toy_problem(seed: u64) -> (SourceSpace<f64>, Array2<f64>, Array1<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let space = line_space(24, 4);
    let k = Array2::from_shape_fn((8, 24), |_| rng.random_range(-1.0..1.0));
    let mut j = Array1::zeros(24);
    j[9] = 2.0;
    let v = k.dot(&j);
    (space, k, v)
}

#[test]
fn runs_are_reproducible_and_fronts_are_clean() {
    let (space, k, v) = toy_problem(11);
    let mut config = MoeaarConfig::new(PenaltyModel::l0(), 3);
    config.iterations = 15;
    let a = run_moeaar(k.view(), v.view(), &space, &config).unwrap();
    let b = run_moeaar(k.view(), v.view(), &space, &config).unwrap();
    assert_eq!(a.front.len(), b.front.len());
    for (x, y) in a.front.iter().zip(&b.front) {
        assert_eq!(x.coeffs, y.coeffs);
    }
    assert_eq!(a.solution.coeffs, b.solution.coeffs);

    assert_eq!(a.stats.population_size_violations, 0);
    assert_eq!(a.stats.lsts_f_increases, 0);
    assert_eq!(a.stats.cv_f0_increases, 0);
    assert_eq!(a.telemetry.len(), 15);
    for (i, x) in a.front.iter().enumerate() {
        let ox = x.objectives.as_ref().unwrap();
        assert_eq!(ox, &evaluate(k.view(), v.view(), x.coeffs.view(), &config.penalty).unwrap());
        for y in &a.front[i + 1..] {
            let oy = y.objectives.as_ref().unwrap();
            assert!(!dominates(&ox.0, &oy.0).unwrap() && !dominates(&oy.0, &ox.0).unwrap());
        }
    }
}

#[test]
fn exact_sparse_solution_is_found_and_kept() {
    let (space, k, v) = toy_problem(12);
    let mut config = MoeaarConfig::new(PenaltyModel::l0(), 5);
    config.iterations = 30;
    let run = run_moeaar(k.view(), v.view(), &space, &config).unwrap();
    // the true source lives in ROI 1
    assert_eq!(run.decision.roi, 1);
    let best = run.front.iter().map(|m| m.objectives.as_ref().unwrap().f0()).fold(f64::INFINITY, f64::min);
    assert!(best < 1e-6 * v.dot(&v));
}

#[test]
fn config_validation() {
    let mut c = MoeaarConfig::<f64>::new(PenaltyModel::l1(), 0);
    assert!(c.validate().is_ok());
    c.iterations = 0;
    assert!(c.validate().is_err());
    let mut c = MoeaarConfig::<f64>::new(PenaltyModel::l1(), 0);
    c.crossover_fraction = 1.5;
    assert!(c.validate().is_err());
    let c = MoeaarConfig::<f64>::new(PenaltyModel::l1(), 0);
    assert_eq!(c.sigma(2.0, 0), 2.0);
    assert_eq!(c.sigma(2.0, 50), 1.0);
}
