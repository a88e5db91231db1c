//! LSTS: proximal descent with Barzilai–Borwein steps and a threshold
//! operator matched to the penalty.

use ndarray::{Array1, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::headmodel::LaplacianOperator;
use crate::linalg::{conjugate_gradient, max_abs_diff};
use crate::moea::Individual;
use crate::objectives::{evaluate, residual_ss, PenaltyModel, Structure, Transform};
use crate::scalar::Real;

pub const BETA_MIN: f64 = 1e-8;
pub const BETA_MAX: f64 = 1e12;
/// How many times the safeguard may double β before giving up on a step.
pub const MAX_BACKTRACKS: usize = 20;
pub const DEFAULT_MAX_ITER: usize = 25;
pub const CG_TOLERANCE: f64 = 1e-10;

/// Threshold operator family.
#[derive(Debug, Clone, Copy)]
pub enum ProxMode<'a, T> {
    /// Hard threshold, the prox of `a · count`.
    L0,
    /// Soft threshold, the prox of `a · ‖x‖₁`.
    L1,
    /// Linear solve `(I + 2a LᵀL) x = v`, the prox of `a · ‖Lx‖²`.
    L2L(&'a LaplacianOperator<T>),
}

impl<'a, T: Real> ProxMode<'a, T> {
    /// Mode matching a penalty model; composite models use their `‖J‖₁` term.
    pub fn for_model(model: &'a PenaltyModel<T>) -> Self {
        let t = &model.terms()[0];
        match (t.transform, &t.structure) {
            (Transform::L0, _) => ProxMode::L0,
            (Transform::Abs, _) => ProxMode::L1,
            (Transform::Square, Structure::Laplacian(l)) => ProxMode::L2L(l),
            (Transform::Square, Structure::Identity) => ProxMode::L1,
        }
    }

    /// The penalty whose prox this mode computes (exact zeros for L0).
    pub fn penalty(&self, j: ArrayView1<T>) -> T {
        match self {
            ProxMode::L0 => T::lit(j.iter().filter(|&&x| x != T::zero()).count() as f64),
            ProxMode::L1 => j.iter().fold(T::zero(), |a, &x| a + x.abs()),
            ProxMode::L2L(l) => {
                let lj = l.apply(j);
                lj.dot(&lj)
            }
        }
    }
}

/// `∇‖V − KJ‖² = 2Kᵀ(KJ − V)`.
pub fn gradient_fit<T: Real>(k: ArrayView2<T>, v: ArrayView1<T>, j: ArrayView1<T>) -> Result<Array1<T>> {
    if k.nrows() != v.len() || k.ncols() != j.len() {
        return Err(Error::Shape(format!("K is {}x{}, V {}, J {}", k.nrows(), k.ncols(), v.len(), j.len())));
    }
    let r = &k.dot(&j) - &v;
    let two = T::lit(2.0);
    Ok(k.t().dot(&r).mapv(|x| two * x))
}

/// BB1 curvature `sᵀy / sᵀs`, clamped; `s = 0` keeps `previous`.
pub fn bb_beta_from<T: Real>(s: ArrayView1<T>, y: ArrayView1<T>, previous: T) -> T {
    let ss = s.dot(&s);
    if ss == T::zero() {
        return previous;
    }
    let beta = s.dot(&y) / ss;
    if beta.is_nan() {
        return previous;
    }
    beta.max(T::lit(BETA_MIN)).min(T::lit(BETA_MAX))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstsState<T> {
    pub j_current: Array1<T>,
    pub j_previous: Option<Array1<T>>,
    pub grad_current: Array1<T>,
    pub grad_previous: Option<Array1<T>>,
    pub beta: T,
    pub lambda_hat: T,
}

impl<T: Real> LstsState<T> {
    /// BB1 estimate from the stored history; without history, the current β
    /// (initialized to the Lipschitz constant of the data-fit gradient).
    pub fn bb_beta(&self) -> T {
        match (&self.j_previous, &self.grad_previous) {
            (Some(jp), Some(gp)) => {
                let s = &self.j_current - jp;
                let y = &self.grad_current - gp;
                bb_beta_from(s.view(), y.view(), self.beta)
            }
            _ => self.beta,
        }
    }
}

/// How λ̂ is derived from the cycle's best-fit member.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum LambdaRule {
    /// `‖V − KJ‖² / ‖J‖₁` for every mode.
    #[default]
    L1Ratio,
    /// `‖V − KJ‖² / p(J)` with the mode's own penalty; equals `L1Ratio` in L1 mode.
    ModeMatched,
}

/// `λ̂ = ‖V − KJ‖² / ‖J‖₁`.
pub fn lambda_hat<T: Real>(k: ArrayView2<T>, v: ArrayView1<T>, j: ArrayView1<T>) -> Result<T> {
    let l1 = j.iter().fold(T::zero(), |a, &x| a + x.abs());
    if l1 == T::zero() {
        return Err(Error::UndefinedLambda("‖J‖₁ = 0".into()));
    }
    Ok(residual_ss(k, v, j)? / l1)
}

/// `λ̂` under `rule` for `mode`.
pub fn lambda_hat_for<T: Real>(
    k: ArrayView2<T>,
    v: ArrayView1<T>,
    j: ArrayView1<T>,
    mode: &ProxMode<'_, T>,
    rule: LambdaRule,
) -> Result<T> {
    match rule {
        LambdaRule::L1Ratio => lambda_hat(k, v, j),
        LambdaRule::ModeMatched => {
            let p = mode.penalty(j);
            if p == T::zero() {
                return Err(Error::UndefinedLambda("p(J) = 0".into()));
            }
            Ok(residual_ss(k, v, j)? / p)
        }
    }
}

#[inline]
fn hard<T: Real>(u: T, a: T) -> T {
    if u * u > T::lit(2.0) * a {
        u
    } else {
        T::zero()
    }
}

/// `argmin_x ½‖x − v‖² + a · p(x)` for the mode's penalty.
pub fn prox_threshold<T: Real>(v: ArrayView1<T>, a: T, mode: ProxMode<'_, T>) -> Result<Array1<T>> {
    prox_threshold_masked(v, a, mode, None)
}

/// Like [`prox_threshold`], but coordinates with `free[i] == false` keep
/// their value from `v`.
pub fn prox_threshold_masked<T: Real>(
    v: ArrayView1<T>,
    a: T,
    mode: ProxMode<'_, T>,
    free: Option<&[bool]>,
) -> Result<Array1<T>> {
    if !(a >= T::zero()) {
        return Err(Error::Parameter("threshold weight must be non-negative".into()));
    }
    let is_free = |i: usize| free.is_none_or(|f| f[i]);
    match mode {
        ProxMode::L1 => Ok(Array1::from_shape_fn(v.len(), |i| {
            if is_free(i) {
                crate::classic::soft(v[i], a)
            } else {
                v[i]
            }
        })),
        ProxMode::L0 => Ok(Array1::from_shape_fn(v.len(), |i| if is_free(i) { hard(v[i], a) } else { v[i] })),
        ProxMode::L2L(lap) => {
            let n = v.len();
            if lap.dim() != n {
                return Err(Error::Shape("Laplacian and vector disagree on n".into()));
            }
            if a == T::zero() {
                return Ok(v.to_owned());
            }
            let two_a = T::lit(2.0) * a;
            let mask = |x: &mut Array1<T>| {
                if let Some(f) = free {
                    for (xi, &fi) in x.iter_mut().zip(f) {
                        if !fi {
                            *xi = T::zero();
                        }
                    }
                }
            };
            // Split x = x_free + x_fixed and solve for x_free only.
            let mut fixed = v.to_owned();
            if let Some(f) = free {
                for (xi, &fi) in fixed.iter_mut().zip(f) {
                    if fi {
                        *xi = T::zero();
                    }
                }
            } else {
                fixed.fill(T::zero());
            }
            let mut rhs = v.to_owned() - &lap.apply_normal(fixed.view()).mapv(|x| two_a * x);
            mask(&mut rhs);
            let apply = |x: ArrayView1<T>| {
                let mut y = &x + &lap.apply_normal(x).mapv(|z| two_a * z);
                mask(&mut y);
                y
            };
            let mut x0 = v.to_owned();
            mask(&mut x0);
            let x = conjugate_gradient(apply, rhs.view(), x0.view(), T::lit(CG_TOLERANCE), 10 * n.max(1))?;
            Ok(&x + &fixed)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LstsOptions<T> {
    pub max_iter: usize,
    pub lambda_rule: LambdaRule,
    pub tol: T,
    /// Lipschitz constant of the data-fit gradient, the first β.
    pub lipschitz: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstsOutcome<T> {
    pub j: Array1<T>,
    pub iterations: usize,
    pub f_start: T,
    pub f_end: T,
    /// Accepted iterates that raised F; zero by construction, kept as a check.
    pub f_increases: usize,
}

/// `F(J) = ‖V − KJ‖² + λ̂ · p(J)`.
pub fn composite<T: Real>(
    k: ArrayView2<T>,
    v: ArrayView1<T>,
    j: ArrayView1<T>,
    mode: &ProxMode<'_, T>,
    lambda_hat: T,
) -> Result<T> {
    Ok(residual_ss(k, v, j)? + lambda_hat * mode.penalty(j))
}

/// Safeguarded proximal descent from `j0`. Coordinates with
/// `free[i] == false` never move.
#[allow(clippy::too_many_arguments)]
pub fn lsts_descend<T: Real>(
    j0: ArrayView1<T>,
    k: ArrayView2<T>,
    v: ArrayView1<T>,
    mode: ProxMode<'_, T>,
    lambda_hat: T,
    free: Option<&[bool]>,
    options: &LstsOptions<T>,
) -> Result<LstsOutcome<T>> {
    let f0 = composite(k, v, j0, &mode, lambda_hat)?;
    let mut state = LstsState {
        j_current: j0.to_owned(),
        j_previous: None,
        grad_current: gradient_fit(k, v, j0)?,
        grad_previous: None,
        beta: options.lipschitz.max(T::lit(BETA_MIN)).min(T::lit(BETA_MAX)),
        lambda_hat,
    };
    let mut f_cur = f0;
    let mut iterations = 0;
    let mut f_increases = 0;
    for _ in 0..options.max_iter {
        let beta = state.bb_beta();
        let mut b = beta;
        let mut accepted = None;
        for _ in 0..=MAX_BACKTRACKS {
            let mut vk = state.j_current.clone();
            let inv = T::one() / b;
            for (i, x) in vk.iter_mut().enumerate() {
                if free.is_none_or(|f| f[i]) {
                    *x -= inv * state.grad_current[i];
                }
            }
            let cand = prox_threshold_masked(vk.view(), lambda_hat * inv, mode, free)?;
            let f_cand = composite(k, v, cand.view(), &mode, lambda_hat)?;
            if f_cand <= f_cur {
                accepted = Some((cand, f_cand, b));
                break;
            }
            b = b * T::lit(2.0);
        }
        let Some((cand, f_cand, b)) = accepted else { break };
        iterations += 1;
        if f_cand > f_cur {
            f_increases += 1;
        }
        let change = max_abs_diff(cand.view(), state.j_current.view());
        let grad = gradient_fit(k, v, cand.view())?;
        state.j_previous = Some(std::mem::replace(&mut state.j_current, cand));
        state.grad_previous = Some(std::mem::replace(&mut state.grad_current, grad));
        state.beta = b;
        f_cur = f_cand;
        if change < options.tol {
            break;
        }
    }
    Ok(LstsOutcome { j: state.j_current, iterations, f_start: f0, f_end: f_cur, f_increases })
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LocalSearchStats {
    pub descents: usize,
    pub iterations: usize,
    pub f_increases: usize,
    /// Set when λ̂ was undefined and the population was passed through.
    pub skipped: bool,
}

/// Coordinates a descent may touch: the nonzero support itself, or, given
/// per-coordinate ROI labels, every coordinate of the ROIs the support hits.
pub fn free_coordinates<T: Real>(coeffs: ArrayView1<T>, roi_labels: Option<&[usize]>) -> Result<Vec<bool>> {
    let active: Vec<bool> = coeffs.iter().map(|&x| x != T::zero()).collect();
    let Some(labels) = roi_labels else { return Ok(active) };
    if labels.len() != coeffs.len() {
        return Err(Error::Shape(format!("{} ROI labels for {} coefficients", labels.len(), coeffs.len())));
    }
    let mut hit = vec![false; labels.iter().max().map_or(0, |&r| r + 1)];
    for (&a, &r) in active.iter().zip(labels) {
        hit[r] |= a;
    }
    Ok(labels.iter().map(|&r| hit[r]).collect())
}

/// One descent per member of `pop_cc`, with λ̂ taken from its best-fit member.
/// Outputs are re-evaluated under `model`.
pub fn local_search_population<T: Real>(
    pop_cc: &[Individual<T>],
    k: ArrayView2<T>,
    v: ArrayView1<T>,
    model: &PenaltyModel<T>,
    roi_labels: Option<&[usize]>,
    options: &LstsOptions<T>,
) -> Result<(Vec<Individual<T>>, LocalSearchStats)> {
    let mut stats = LocalSearchStats::default();
    let best = pop_cc
        .iter()
        .enumerate()
        .map(|(i, m)| m.objectives().map(|o| (i, o.f0())))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal).then(a.0.cmp(&b.0)));
    let Some((best, _)) = best else { return Ok((Vec::new(), stats)) };
    let mode = ProxMode::for_model(model);
    let lam = match lambda_hat_for(k, v, pop_cc[best].coeffs.view(), &mode, options.lambda_rule) {
        Ok(l) => l,
        Err(Error::UndefinedLambda(_)) => {
            stats.skipped = true;
            return Ok((pop_cc.to_vec(), stats));
        }
        Err(e) => return Err(e),
    };
    let mut out = Vec::with_capacity(pop_cc.len());
    for ind in pop_cc {
        let free = free_coordinates(ind.coeffs.view(), roi_labels)?;
        let res = lsts_descend(ind.coeffs.view(), k, v, mode, lam, Some(&free), options)?;
        stats.descents += 1;
        stats.iterations += res.iterations;
        stats.f_increases += res.f_increases;
        let objectives = evaluate(k, v, res.j.view(), model)?;
        let mut child = Individual::new(res.j, ind.roi).with_objectives(objectives);
        child.parent = ind.parent;
        out.push(child);
    }
    Ok((out, stats))
}
