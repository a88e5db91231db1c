//! Regularized baselines: Ridge-L in closed form, LASSO and ENET-L by
//! proximal gradient, λ chosen by generalized cross-validation, and the
//! pseudoinverse estimate used to seed the evolutionary solver.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::headmodel::LaplacianOperator;
use crate::linalg::{cholesky, cholesky_solve, gram, gram_lipschitz, max_abs, max_abs_diff, pinv, power_iteration};
use crate::objectives::residual_ss;
use crate::scalar::Real;
use crate::simulator::CurrentDensity;

/// Relative singular-value cutoff for the pseudoinverse.
pub const PINV_RCOND: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct RegularizedSolution<T> {
    pub j: CurrentDensity<T>,
    pub lambdas: Vec<T>,
    /// `(λ, GCV(λ))` samples; empty unless produced by [`gcv_select`].
    pub gcv_curve: Vec<(T, T)>,
    pub iterations: usize,
    pub converged: bool,
    /// Set when the ridge system needed a diagonal jitter to factor.
    pub jittered: bool,
}

/// `J = K⁺ V` through the SVD.
pub fn pseudoinverse_solution<T: Real>(k: ArrayView2<T>, v: ArrayView1<T>) -> CurrentDensity<T> {
    let kp = pinv(k, T::lit(PINV_RCOND));
    CurrentDensity::new(kp.dot(&v))
}

fn check<T: Real>(k: ArrayView2<T>, v: ArrayView1<T>) -> Result<()> {
    if k.nrows() != v.len() {
        return Err(Error::Shape(format!("K has {} rows, V has {} entries", k.nrows(), v.len())));
    }
    if k.iter().chain(v.iter()).any(|x| !x.is_finite()) {
        return Err(Error::Data("non-finite solver input".into()));
    }
    Ok(())
}

fn check_lambda<T: Real>(lambda: T) -> Result<()> {
    if !(lambda >= T::zero()) {
        return Err(Error::Parameter("regularization weights must be non-negative".into()));
    }
    Ok(())
}

/// Dense `LᵀL` accumulated from the sparse rows.
pub fn laplacian_normal<T: Real>(lap: &LaplacianOperator<T>) -> Array2<T> {
    let n = lap.dim();
    let mut out = Array2::<T>::zeros((n, n));
    for row in lap.rows() {
        for &(a, wa) in row {
            for &(b, wb) in row {
                out[[a, b]] += wa * wb;
            }
        }
    }
    out
}

/// Factored Ridge-L system `KᵀK + λ LᵀL`, with the jitter flag.
struct RidgeSystem<T> {
    chol: Array2<T>,
    jittered: bool,
}

impl<T: Real> RidgeSystem<T> {
    fn new(ktk: &Array2<T>, ltl: &Array2<T>, lambda: T) -> Self {
        let mut a = ktk + &ltl.mapv(|x| x * lambda);
        if let Some(chol) = cholesky(a.view()) {
            return Self { chol, jittered: false };
        }
        let scale = a.diag().iter().fold(T::one(), |m, &v| m.max(v.abs()));
        let mut jitter = T::lit(1e-12) * scale;
        loop {
            for i in 0..a.nrows() {
                a[[i, i]] += jitter;
            }
            if let Some(chol) = cholesky(a.view()) {
                return Self { chol, jittered: true };
            }
            jitter = jitter * T::lit(10.0);
        }
    }

    fn solve(&self, rhs: ArrayView1<T>) -> Array1<T> {
        cholesky_solve(self.chol.view(), rhs)
    }
}

/// Solves `(KᵀK + λ LᵀL) J = KᵀV`.
pub fn solve_ridge_l<T: Real>(
    k: ArrayView2<T>,
    v: ArrayView1<T>,
    lap: &LaplacianOperator<T>,
    lambda: T,
) -> Result<RegularizedSolution<T>> {
    check(k, v)?;
    check_lambda(lambda)?;
    if lap.dim() != k.ncols() {
        return Err(Error::Shape("Laplacian and lead field disagree on n".into()));
    }
    let ktk = gram(k);
    let ltl = laplacian_normal(lap);
    let sys = RidgeSystem::new(&ktk, &ltl, lambda);
    let j = sys.solve(k.t().dot(&v).view());
    Ok(RegularizedSolution {
        j: CurrentDensity::new(j),
        lambdas: vec![lambda],
        gcv_curve: Vec::new(),
        iterations: 1,
        converged: true,
        jittered: sys.jittered,
    })
}

/// Componentwise `sgn(u) · max(|u| − a, 0)`.
#[inline]
pub fn soft<T: Real>(u: T, a: T) -> T {
    let m = u.abs() - a;
    if m > T::zero() {
        u.signum() * m
    } else {
        T::zero()
    }
}

/// Accelerated proximal gradient on `‖V − KJ‖² + λ2‖LJ‖²` with an `λ1‖J‖₁` prox.
fn proximal_gradient<T: Real>(
    k: ArrayView2<T>,
    v: ArrayView1<T>,
    lap: Option<&LaplacianOperator<T>>,
    lambda1: T,
    lambda2: T,
    tol: T,
    max_iter: usize,
) -> RegularizedSolution<T> {
    let n = k.ncols();
    let two = T::lit(2.0);
    let lip = match lap {
        Some(l) if lambda2 > T::zero() => power_iteration(
            n,
            |x| {
                let a = k.t().dot(&k.dot(&x));
                let b = l.apply_normal(x);
                (a + b.mapv(|y| y * lambda2)).mapv(|y| y * two)
            },
            50,
            T::lit(1e-10),
        ),
        _ => gram_lipschitz(k),
    };
    let mut j = Array1::<T>::zeros(n);
    if lip == T::zero() {
        return RegularizedSolution {
            j: CurrentDensity::new(j),
            lambdas: vec![lambda1, lambda2],
            gcv_curve: Vec::new(),
            iterations: 0,
            converged: true,
            jittered: false,
        };
    }
    let step = T::one() / lip;
    let thr = lambda1 * step;
    let ktv = k.t().dot(&v);
    let objective = |j: &Array1<T>| -> T {
        let r = &v - &k.dot(j);
        let mut f = r.dot(&r) + lambda1 * j.iter().fold(T::zero(), |a, &x| a + x.abs());
        if let Some(l) = lap {
            let lj = l.apply(j.view());
            f += lambda2 * lj.dot(&lj);
        }
        f
    };
    let grad_at = |x: &Array1<T>| -> Array1<T> {
        let mut g = (k.t().dot(&k.dot(x)) - &ktv).mapv(|y| y * two);
        if let (Some(l), true) = (lap, lambda2 > T::zero()) {
            g = g + l.apply_normal(x.view()).mapv(|y| y * two * lambda2);
        }
        g
    };
    // FISTA with gradient-based adaptive restart: same step and fixed point
    // as plain ISTA, far fewer iterations on ill-conditioned lead fields.
    let mut best = (objective(&j), j.clone());
    let mut converged = false;
    let mut iterations = 0;
    let mut y = j.clone();
    let mut t = T::one();
    for it in 1..=max_iter {
        iterations = it;
        let grad = grad_at(&y);
        let next = Array1::from_shape_fn(n, |i| soft(y[i] - step * grad[i], thr));
        let change = max_abs_diff(next.view(), j.view());
        // restart when the momentum points uphill: (y − next)·(next − j) > 0
        let uphill = y.iter().zip(&next).zip(&j).fold(T::zero(), |a, ((&yi, &ni), &ji)| a + (yi - ni) * (ni - ji));
        let t_next = (T::one() + (T::one() + T::lit(4.0) * t * t).sqrt()) / two;
        if uphill > T::zero() {
            t = T::one();
            y = next.clone();
        } else {
            let beta = (t - T::one()) / t_next;
            y = Array1::from_shape_fn(n, |i| next[i] + beta * (next[i] - j[i]));
            t = t_next;
        }
        j = next;
        if change < tol {
            converged = true;
            break;
        }
    }
    if !converged {
        let f = objective(&j);
        if f <= best.0 {
            best = (f, j);
        }
        j = best.1;
    }
    RegularizedSolution {
        j: CurrentDensity::new(j),
        lambdas: vec![lambda1, lambda2],
        gcv_curve: Vec::new(),
        iterations,
        converged,
        jittered: false,
    }
}

/// Minimizer of `‖V − KJ‖² + λ‖J‖₁` by iterative soft-thresholding.
pub fn solve_lasso<T: Real>(
    k: ArrayView2<T>,
    v: ArrayView1<T>,
    lambda: T,
    tol: T,
    max_iter: usize,
) -> Result<RegularizedSolution<T>> {
    check(k, v)?;
    check_lambda(lambda)?;
    let mut sol = proximal_gradient(k, v, None, lambda, T::zero(), tol, max_iter);
    sol.lambdas = vec![lambda];
    Ok(sol)
}

/// Minimizer of `‖V − KJ‖² + λ1‖J‖₁ + λ2‖LJ‖₂²`.
#[allow(clippy::too_many_arguments)]
pub fn solve_enet_l<T: Real>(
    k: ArrayView2<T>,
    v: ArrayView1<T>,
    lap: &LaplacianOperator<T>,
    lambda1: T,
    lambda2: T,
    tol: T,
    max_iter: usize,
) -> Result<RegularizedSolution<T>> {
    check(k, v)?;
    check_lambda(lambda1)?;
    check_lambda(lambda2)?;
    if lap.dim() != k.ncols() {
        return Err(Error::Shape("Laplacian and lead field disagree on n".into()));
    }
    Ok(proximal_gradient(k, v, Some(lap), lambda1, lambda2, tol, max_iter))
}

/// Which baseline [`gcv_select`] sweeps.
#[derive(Debug, Clone, Copy)]
pub enum ClassicSolver<'a, T> {
    RidgeL { lap: &'a LaplacianOperator<T> },
    Lasso { tol: T, max_iter: usize },
    /// The grid value is λ1; λ2 = `l2_ratio` · λ1.
    EnetL { lap: &'a LaplacianOperator<T>, l2_ratio: T, tol: T, max_iter: usize },
}

/// `m · RSS / (m − df)²`, or `None` when `df ≥ m`.
pub fn gcv_score<T: Real>(m: usize, rss: T, df: T) -> Option<T> {
    let mf = T::lit(m as f64);
    if df >= mf {
        return None;
    }
    let d = mf - df;
    Some(mf * rss / (d * d))
}

/// `λ` values log-spaced over `[1e-4, 1] · 2‖KᵀV‖∞`.
pub fn default_lambda_grid<T: Real>(k: ArrayView2<T>, v: ArrayView1<T>, count: usize) -> Vec<T> {
    let top = T::lit(2.0) * max_abs(k.t().dot(&v).view());
    if count == 1 {
        return vec![top];
    }
    let (lo, hi) = (T::lit(1e-4).ln(), T::zero());
    (0..count)
        .map(|i| {
            let f = T::lit(i as f64) / T::lit((count - 1) as f64);
            top * (lo + (hi - lo) * f).exp()
        })
        .collect()
}

/// Sweeps `lambda_grid` and returns the solution with the smallest GCV score.
/// Ties go to the larger λ.
pub fn gcv_select<T: Real>(
    solver: ClassicSolver<'_, T>,
    k: ArrayView2<T>,
    v: ArrayView1<T>,
    lambda_grid: &[T],
) -> Result<RegularizedSolution<T>> {
    if lambda_grid.is_empty() {
        return Err(Error::Parameter("empty λ grid".into()));
    }
    for &l in lambda_grid {
        check_lambda(l)?;
    }
    check(k, v)?;
    let m = k.nrows();
    let mut curve = Vec::with_capacity(lambda_grid.len());
    let mut best: Option<(T, T, RegularizedSolution<T>)> = None;

    // Ridge shares the Gram matrices across the sweep.
    let ridge_parts = match solver {
        ClassicSolver::RidgeL { lap } => Some((gram(k), laplacian_normal(lap))),
        _ => None,
    };

    for &lambda in lambda_grid {
        let (sol, df) = match solver {
            ClassicSolver::RidgeL { .. } => {
                let (ktk, ltl) = ridge_parts.as_ref().unwrap();
                let sys = RidgeSystem::new(ktk, ltl, lambda);
                let j = sys.solve(k.t().dot(&v).view());
                // df = trace(K A⁻¹ Kᵀ)
                let mut df = T::zero();
                for i in 0..m {
                    let x = sys.solve(k.row(i));
                    df += k.row(i).dot(&x);
                }
                let sol = RegularizedSolution {
                    j: CurrentDensity::new(j),
                    lambdas: vec![lambda],
                    gcv_curve: Vec::new(),
                    iterations: 1,
                    converged: true,
                    jittered: sys.jittered,
                };
                (sol, df)
            }
            ClassicSolver::Lasso { tol, max_iter } => {
                let sol = solve_lasso(k, v, lambda, tol, max_iter)?;
                let df = T::lit(sol.j.values.iter().filter(|x| **x != T::zero()).count() as f64);
                (sol, df)
            }
            ClassicSolver::EnetL { lap, l2_ratio, tol, max_iter } => {
                let sol = solve_enet_l(k, v, lap, lambda, l2_ratio * lambda, tol, max_iter)?;
                let df = T::lit(sol.j.values.iter().filter(|x| **x != T::zero()).count() as f64);
                (sol, df)
            }
        };
        let rss = residual_ss(k, v, sol.j.view())?;
        let Some(score) = gcv_score(m, rss, df) else {
            continue;
        };
        curve.push((lambda, score));
        let better = match &best {
            None => true,
            Some((bs, bl, _)) => score < *bs || (score == *bs && lambda > *bl),
        };
        if better {
            best = Some((score, lambda, sol));
        }
    }
    let (_, _, mut sol) = best.ok_or(Error::DegenerateGcv)?;
    sol.gcv_curve = curve;
    Ok(sol)
}
