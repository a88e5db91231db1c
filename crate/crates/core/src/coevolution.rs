//! The MOEAAR driver: cooperative coevolution over ROI variable groups with a
//! context vector, one NSGA-II generation per group per cycle, LSTS
//! refinement, elitist survival and a final a-posteriori decision.

use ndarray::{Array1, ArrayView1, ArrayView2};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::classic::pseudoinverse_solution;
use crate::decision::{decide, Decision};
use crate::error::{Error, Result};
use crate::headmodel::SourceSpace;
use crate::linalg::{gram_lipschitz, max_abs};
use crate::local_search::{local_search_population, LambdaRule, LstsOptions, DEFAULT_MAX_ITER};
use crate::moea::{
    arithmetic_crossover, binary_tournament, clamp_box, environmental_selection, gaussian_step_mutation,
    is_duplicate, rank_and_crowd, truncate_population, Individual, Population,
};
use crate::objectives::{evaluate, residual_ss, ObjectiveVector, PenaltyModel};
use crate::scalar::Real;

#[derive(Debug, Clone)]
pub struct MoeaarConfig<T> {
    pub iterations: usize,
    pub crossover_fraction: f64,
    pub mutation_fraction: f64,
    pub penalty: PenaltyModel<T>,
    pub seed: u64,
    /// `σ_0 = sigma0_factor · max|J_init|`.
    pub sigma0_factor: T,
    /// Children are clamped to `|d_i| ≤ clamp_factor · max|J_init|`.
    pub clamp_factor: T,
    pub local_search: bool,
    pub lsts_max_iter: usize,
    pub lsts_tol: T,
    pub lambda_rule: LambdaRule,
    /// Re-insert the context vector into the population after each pass.
    pub inject_context: bool,
    /// Let LSTS revive any coordinate of the ROIs an individual touches,
    /// instead of only its nonzero support.
    pub lsts_roi_free: bool,
}

impl<T: Real> MoeaarConfig<T> {
    pub fn new(penalty: PenaltyModel<T>, seed: u64) -> Self {
        Self {
            iterations: 100,
            crossover_fraction: 0.8,
            mutation_fraction: 0.5,
            penalty,
            seed,
            sigma0_factor: T::lit(0.1),
            clamp_factor: T::lit(10.0),
            local_search: true,
            lsts_max_iter: DEFAULT_MAX_ITER,
            lsts_tol: T::lit(1e-8),
            lambda_rule: LambdaRule::default(),
            inject_context: false,
            lsts_roi_free: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be at least 1".into()));
        }
        for (name, f) in [("crossover_fraction", self.crossover_fraction), ("mutation_fraction", self.mutation_fraction)] {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::Config(format!("{name} must lie in [0, 1]")));
            }
        }
        if !(self.sigma0_factor >= T::zero()) || !(self.clamp_factor > T::zero()) {
            return Err(Error::Config("sigma0_factor must be ≥ 0 and clamp_factor > 0".into()));
        }
        Ok(())
    }

    /// Mutation scale at cycle `t`: `σ_0 (1 − t/T)`.
    pub fn sigma(&self, sigma0: T, t: usize) -> T {
        sigma0 * (T::one() - T::lit(t as f64) / T::lit(self.iterations as f64))
    }
}

/// Best-known full solution, assembled from per-group bests.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextVector<T> {
    pub values: Array1<T>,
    pub objectives: ObjectiveVector<T>,
}

impl<T: Real> ContextVector<T> {
    pub fn f0(&self) -> T {
        self.objectives.f0()
    }
}

/// One individual per ROI: the pseudoinverse solution restricted to it.
pub fn initial_population<T: Real>(
    space: &SourceSpace<T>,
    k: ArrayView2<T>,
    v: ArrayView1<T>,
    model: &PenaltyModel<T>,
) -> Result<Population<T>> {
    if k.ncols() != space.len() || k.nrows() != v.len() {
        return Err(Error::Shape("lead field, recording and source space disagree".into()));
    }
    let j = pseudoinverse_solution(k, v);
    let mut members = Vec::with_capacity(space.n_rois());
    for (roi, group) in space.roi_groups().into_iter().enumerate() {
        if group.is_empty() {
            return Err(Error::InvalidPartition(format!("ROI {roi} is empty")));
        }
        let mut coeffs = Array1::<T>::zeros(space.len());
        for &i in &group {
            coeffs[i] = j.values[i];
        }
        let obj = evaluate(k, v, coeffs.view(), model)?;
        let mut ind = Individual::new(coeffs, roi).with_objectives(obj);
        ind.parent = Some(roi);
        members.push(ind);
    }
    Ok(Population::new(members))
}

/// Member with the lowest f0 (first on ties).
pub fn initial_context<T: Real>(pop: &[Individual<T>]) -> Result<ContextVector<T>> {
    let mut best: Option<&Individual<T>> = None;
    for m in pop {
        let f = m.objectives()?.f0();
        if best.is_none_or(|b| f < b.objectives.as_ref().unwrap().f0()) {
            best = Some(m);
        }
    }
    let best = best.ok_or_else(|| Error::State("empty population".into()))?;
    Ok(ContextVector { values: best.coeffs.clone(), objectives: best.objectives.clone().unwrap() })
}

/// Group coordinates of every member, each tagged with its parent index.
pub fn project_subpopulation<T: Real>(pop: &[Individual<T>], group: &[usize]) -> Result<Vec<Individual<T>>> {
    if group.is_empty() {
        return Err(Error::Parameter("empty variable group".into()));
    }
    pop.iter()
        .enumerate()
        .map(|(p, ind)| {
            let coeffs = group
                .iter()
                .map(|&g| ind.coeffs.get(g).copied().ok_or_else(|| Error::Index(format!("coordinate {g}"))))
                .collect::<Result<Array1<T>>>()?;
            let mut sub = Individual::new(coeffs, ind.roi);
            sub.parent = Some(p);
            Ok(sub)
        })
        .collect()
}

/// `cv` with the group coordinates replaced by `sub`.
pub fn compose<T: Real>(cv: ArrayView1<T>, sub: &Individual<T>, group: &[usize]) -> Result<Array1<T>> {
    if sub.coeffs.len() != group.len() {
        return Err(Error::Shape(format!("sub-individual has {} values for a group of {}", sub.coeffs.len(), group.len())));
    }
    let mut out = cv.to_owned();
    for (&g, &x) in group.iter().zip(sub.coeffs.iter()) {
        *out.get_mut(g).ok_or_else(|| Error::Index(format!("coordinate {g} outside n = {}", cv.len())))? = x;
    }
    Ok(out)
}

/// Everything the inner loop needs besides the population.
pub struct StepContext<'a, T> {
    pub k: ArrayView2<'a, T>,
    pub v: ArrayView1<'a, T>,
    pub groups: &'a [Vec<usize>],
    pub config: &'a MoeaarConfig<T>,
    pub sigma: T,
    pub bound: T,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CcStats {
    pub cv_updates: usize,
    pub cv_rejections: usize,
    pub injections: usize,
    pub evaluations: usize,
}

fn evaluate_sub<T: Real>(
    ctx: &StepContext<'_, T>,
    cv: ArrayView1<T>,
    sub: &mut Individual<T>,
    group: &[usize],
) -> Result<()> {
    let full = compose(cv, sub, group)?;
    sub.objectives = Some(evaluate(ctx.k, ctx.v, full.view(), &ctx.config.penalty)?);
    Ok(())
}

/// Lowest rank, then highest crowding, then lowest f0.
fn group_best<T: Real>(subs: &[Individual<T>]) -> usize {
    let mut best = 0;
    for (i, s) in subs.iter().enumerate().skip(1) {
        let b = &subs[best];
        let (fs, fb) = (s.objectives.as_ref().unwrap().f0(), b.objectives.as_ref().unwrap().f0());
        let better = s.rank < b.rank
            || (s.rank == b.rank && s.crowding > b.crowding)
            || (s.rank == b.rank && s.crowding == b.crowding && fs < fb);
        if better {
            best = i;
        }
    }
    best
}

/// One pass over all groups in ascending ROI order.
pub fn cc_step<T: Real>(
    pop: Vec<Individual<T>>,
    cv: ContextVector<T>,
    ctx: &StepContext<'_, T>,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<Individual<T>>, ContextVector<T>, CcStats)> {
    let n = pop.len();
    let mut pop = pop;
    let mut cv = cv;
    let mut stats = CcStats::default();
    for group in ctx.groups {
        let mut subs = project_subpopulation(&pop, group)?;
        for s in subs.iter_mut() {
            evaluate_sub(ctx, cv.values.view(), s, group)?;
        }
        stats.evaluations += subs.len();
        rank_and_crowd(&mut subs)?;

        let n_cx = (ctx.config.crossover_fraction * n as f64).ceil() as usize;
        let mut offspring = Vec::with_capacity(2 * n_cx);
        for _ in 0..n_cx {
            let a = binary_tournament(&subs, rng);
            let b = binary_tournament(&subs, rng);
            let mut child = arithmetic_crossover(&subs[a], &subs[b], rng);
            clamp_box(&mut child, ctx.bound);
            offspring.push(child);
        }
        let n_mut = ((ctx.config.mutation_fraction * n_cx as f64).ceil() as usize).min(n_cx);
        for i in sample(rng, n_cx, n_mut).into_iter() {
            let mut m = gaussian_step_mutation(&offspring[i], ctx.sigma, rng);
            clamp_box(&mut m, ctx.bound);
            offspring.push(m);
        }
        for o in offspring.iter_mut() {
            evaluate_sub(ctx, cv.values.view(), o, group)?;
        }
        stats.evaluations += offspring.len();
        subs.extend(offspring);
        let survivors = truncate_population(subs, n)?;

        let best = &survivors[group_best(&survivors)];
        let candidate = compose(cv.values.view(), best, group)?;
        let f0 = residual_ss(ctx.k, ctx.v, candidate.view())?;
        if f0 <= cv.f0() {
            let objectives = evaluate(ctx.k, ctx.v, candidate.view(), &ctx.config.penalty)?;
            cv = ContextVector { values: candidate, objectives };
            stats.cv_updates += 1;
        } else {
            stats.cv_rejections += 1;
        }

        // One child per parent: the best survivor tagged with it, or the
        // parent unchanged when none of its line survived.
        let mut pick: Vec<Option<usize>> = vec![None; n];
        for (i, s) in survivors.iter().enumerate() {
            let p = s.parent.ok_or_else(|| Error::State("sub-individual lost its parent".into()))?;
            let slot = pick.get_mut(p).ok_or_else(|| Error::Index(format!("parent {p} outside N = {n}")))?;
            if slot.is_none_or(|b| group_best(&[survivors[b].clone(), s.clone()]) == 1) {
                *slot = Some(i);
            }
        }
        let mut next = Vec::with_capacity(n);
        for (p, choice) in pick.into_iter().enumerate() {
            let mut coeffs = pop[p].coeffs.clone();
            if let Some(i) = choice {
                for (&g, &x) in group.iter().zip(survivors[i].coeffs.iter()) {
                    coeffs[g] = x;
                }
            }
            let obj = evaluate(ctx.k, ctx.v, coeffs.view(), &ctx.config.penalty)?;
            let mut ind = Individual::new(coeffs, pop[p].roi).with_objectives(obj);
            ind.parent = Some(p);
            next.push(ind);
        }
        stats.evaluations += n;
        pop = next;
    }
    if ctx.config.inject_context && !pop.iter().any(|m| m.coeffs == cv.values) {
        rank_and_crowd(&mut pop)?;
        let worst = (0..pop.len())
            .max_by(|&a, &b| {
                let (x, y) = (&pop[a], &pop[b]);
                x.rank
                    .cmp(&y.rank)
                    .then(y.crowding.partial_cmp(&x.crowding).unwrap_or(std::cmp::Ordering::Equal))
                    .then(x.objectives.as_ref().unwrap().f0().partial_cmp(&y.objectives.as_ref().unwrap().f0()).unwrap_or(std::cmp::Ordering::Equal))
            })
            .unwrap();
        let roi = pop[worst].roi;
        let mut ind = Individual::new(cv.values.clone(), roi).with_objectives(cv.objectives.clone());
        ind.parent = Some(worst);
        pop[worst] = ind;
        stats.injections += 1;
    }
    Ok((pop, cv, stats))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleLog<T> {
    pub cycle: usize,
    pub best_f0: T,
    pub front_size: usize,
    pub cv_f0: T,
}

/// Counters backing the run-level invariants.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct RunStats {
    pub cycles: usize,
    pub population_size_violations: usize,
    pub lsts_descents: usize,
    pub lsts_iterations: usize,
    /// Accepted LSTS iterates that raised the composite objective.
    pub lsts_f_increases: usize,
    pub lsts_skipped_cycles: usize,
    pub cv_f0_increases: usize,
    pub evaluations: usize,
}

#[derive(Debug, Clone)]
pub struct MoeaarRun<T> {
    /// `PF_know` after the last cycle.
    pub front: Vec<Individual<T>>,
    pub archive: Vec<ObjectiveVector<T>>,
    pub decision: Decision<T>,
    pub solution: Individual<T>,
    pub context: ContextVector<T>,
    pub telemetry: Vec<CycleLog<T>>,
    pub stats: RunStats,
}

pub fn run_moeaar<T: Real>(
    k: ArrayView2<T>,
    v: ArrayView1<T>,
    space: &SourceSpace<T>,
    config: &MoeaarConfig<T>,
) -> Result<MoeaarRun<T>> {
    config.validate()?;
    let model = &config.penalty;
    let eps = model.l0_epsilon();
    let mut pop = initial_population(space, k, v, model)?.members;
    let n = pop.len();
    let amp = pop.iter().map(|m| max_abs(m.coeffs.view())).fold(T::zero(), |a, b| a.max(b));
    let amp = if amp > T::zero() { amp } else { T::one() };
    let sigma0 = config.sigma0_factor * amp;
    let bound = config.clamp_factor * amp;
    let mut cv = initial_context(&pop)?;
    let groups = space.roi_groups();
    let lsts = LstsOptions {
        max_iter: config.lsts_max_iter,
        lambda_rule: config.lambda_rule,
        tol: config.lsts_tol,
        lipschitz: gram_lipschitz(k),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut stats = RunStats::default();
    let mut telemetry = Vec::with_capacity(config.iterations);
    let mut front: Vec<Individual<T>> = Vec::new();

    for t in 0..config.iterations {
        let ctx = StepContext { k, v, groups: &groups, config, sigma: config.sigma(sigma0, t), bound };
        let cv_before = cv.f0();
        let (pop_cc, next_cv, cc) = cc_step(pop, cv, &ctx, &mut rng)?;
        cv = next_cv;
        stats.evaluations += cc.evaluations;
        if cv.f0() > cv_before {
            stats.cv_f0_increases += 1;
        }
        if pop_cc.len() != n {
            stats.population_size_violations += 1;
        }
        let pop_ls = if config.local_search {
            let (ls, ls_stats) = local_search_population(&pop_cc, k, v, model, config.lsts_roi_free.then(|| space.roi_labels()), &lsts)?;
            stats.lsts_descents += ls_stats.descents;
            stats.lsts_iterations += ls_stats.iterations;
            stats.lsts_f_increases += ls_stats.f_increases;
            stats.lsts_skipped_cycles += usize::from(ls_stats.skipped);
            ls
        } else {
            pop_cc.clone()
        };
        let mut pop_t = pop_cc;
        pop_t.extend(pop_ls);
        pop = environmental_selection(pop_t, n)?;
        if pop.len() != n {
            stats.population_size_violations += 1;
        }
        if let Some(bad) = pop.iter().position(|m| !m.objectives.as_ref().is_some_and(|o| o.is_finite())) {
            return Err(Error::Numeric(format!("non-finite objectives for member {bad} in cycle {t}")));
        }
        for (i, m) in pop.iter_mut().enumerate() {
            m.parent = Some(i);
        }
        front.clear();
        for m in pop.iter().filter(|m| m.rank == 0) {
            if !front.iter().any(|f| is_duplicate(f, m)) {
                front.push(m.clone());
            }
        }
        let best_f0 = pop
            .iter()
            .map(|m| m.objectives.as_ref().unwrap().f0())
            .fold(T::infinity(), |a, b| a.min(b));
        telemetry.push(CycleLog { cycle: t, best_f0, front_size: front.len(), cv_f0: cv.f0() });
        stats.cycles += 1;
    }

    let decision = decide(&front, space, eps)?;
    let solution = front[decision.index].clone();
    let archive = front.iter().map(|m| m.objectives.clone().unwrap()).collect();
    Ok(MoeaarRun { front, archive, decision, solution, context: cv, telemetry, stats })
}
