//! Small dense linear-algebra kernels used by the solvers.
//!
//! Everything here is generic over [`Real`] so that the same code paths serve
//! `f32` and `f64` builds.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Largest eigenvalue of a symmetric positive semidefinite operator by power iteration.
///
/// The start vector is deterministic, so repeated calls return identical estimates.
pub fn power_iteration<T: Real>(
    dim: usize,
    apply: impl Fn(ArrayView1<T>) -> Array1<T>,
    steps: usize,
    tol: T,
) -> T {
    if dim == 0 {
        return T::zero();
    }
    let mut x = Array1::from_shape_fn(dim, |i| T::one() + T::lit((i % 7) as f64 / 13.0));
    let norm = x.dot(&x).sqrt();
    x.mapv_inplace(|v| v / norm);
    let mut lambda = T::zero();
    for _ in 0..steps {
        let y = apply(x.view());
        let next = x.dot(&y);
        let ny = y.dot(&y).sqrt();
        if ny == T::zero() {
            return T::zero();
        }
        x = y.mapv(|v| v / ny);
        let done = (next - lambda).abs() <= tol * next.abs().max(T::min_positive_value());
        lambda = next;
        if done {
            break;
        }
    }
    lambda
}

/// Largest eigenvalue of `2 KᵀK` (the Lipschitz constant of the gradient of `‖V − KJ‖²`).
pub fn gram_lipschitz<T: Real>(k: ArrayView2<T>) -> T {
    let two = T::lit(2.0);
    power_iteration(
        k.ncols(),
        |x| k.t().dot(&k.dot(&x)).mapv(|v| v * two),
        50,
        T::lit(1e-10),
    )
}

/// Lower-triangular Cholesky factor of a symmetric matrix.
///
/// Returns `None` when a pivot falls below `n · eps · max_diag`, i.e. the
/// matrix is not numerically positive definite.
pub fn cholesky<T: Real>(a: ArrayView2<T>) -> Option<Array2<T>> {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    let max_diag = a.diag().iter().fold(T::zero(), |m, &v| m.max(v.abs()));
    let floor = T::lit(n.max(1) as f64) * T::epsilon() * max_diag;
    let mut l = Array2::<T>::zeros((n, n));
    for j in 0..n {
        let mut d = a[[j, j]];
        for p in 0..j {
            d -= l[[j, p]] * l[[j, p]];
        }
        if !(d > floor) {
            return None;
        }
        let d = d.sqrt();
        l[[j, j]] = d;
        for i in (j + 1)..n {
            let mut s = a[[i, j]];
            for p in 0..j {
                s -= l[[i, p]] * l[[j, p]];
            }
            l[[i, j]] = s / d;
        }
    }
    Some(l)
}

/// Solves `L Lᵀ x = b` given the Cholesky factor `L`.
pub fn cholesky_solve<T: Real>(l: ArrayView2<T>, b: ArrayView1<T>) -> Array1<T> {
    let n = l.nrows();
    let mut y = b.to_owned();
    for i in 0..n {
        let mut s = y[i];
        for p in 0..i {
            s -= l[[i, p]] * y[p];
        }
        y[i] = s / l[[i, i]];
    }
    for i in (0..n).rev() {
        let mut s = y[i];
        for p in (i + 1)..n {
            s -= l[[p, i]] * y[p];
        }
        y[i] = s / l[[i, i]];
    }
    y
}

/// Thin singular value decomposition `A = U diag(s) Vᵀ`, singular values descending.
#[derive(Debug, Clone)]
pub struct Svd<T> {
    pub u: Array2<T>,
    pub s: Array1<T>,
    pub vt: Array2<T>,
}

/// One-sided (Hestenes) Jacobi SVD.
pub fn svd<T: Real>(a: ArrayView2<T>) -> Svd<T> {
    let (m, n) = a.dim();
    if m < n {
        let t = svd(a.t());
        return Svd {
            u: t.vt.t().to_owned(),
            s: t.s,
            vt: t.u.t().to_owned(),
        };
    }
    // Column-major working copies: cols[j] is column j of A, vcols[j] of V.
    let mut cols: Vec<Vec<T>> = (0..n).map(|j| a.column(j).to_vec()).collect();
    let mut vcols: Vec<Vec<T>> = (0..n)
        .map(|j| (0..n).map(|i| if i == j { T::one() } else { T::zero() }).collect())
        .collect();
    let eps = T::epsilon();
    for _sweep in 0..60 {
        let mut rotated = false;
        for i in 0..n {
            for j in (i + 1)..n {
                let (alpha, beta, gamma) = {
                    let (ci, cj) = (&cols[i], &cols[j]);
                    let mut al = T::zero();
                    let mut be = T::zero();
                    let mut ga = T::zero();
                    for r in 0..m {
                        al += ci[r] * ci[r];
                        be += cj[r] * cj[r];
                        ga += ci[r] * cj[r];
                    }
                    (al, be, ga)
                };
                if gamma == T::zero() || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::lit(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                rotate(&mut cols, i, j, c, s);
                rotate(&mut vcols, i, j, c, s);
            }
        }
        if !rotated {
            break;
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<T> = cols
        .iter()
        .map(|c| c.iter().fold(T::zero(), |acc, &v| acc + v * v).sqrt())
        .collect();
    order.sort_by(|&x, &y| norms[y].partial_cmp(&norms[x]).unwrap_or(std::cmp::Ordering::Equal));
    let mut u = Array2::<T>::zeros((m, n));
    let mut s = Array1::<T>::zeros(n);
    let mut vt = Array2::<T>::zeros((n, n));
    for (k, &j) in order.iter().enumerate() {
        s[k] = norms[j];
        if norms[j] > T::zero() {
            for r in 0..m {
                u[[r, k]] = cols[j][r] / norms[j];
            }
        }
        for r in 0..n {
            vt[[k, r]] = vcols[j][r];
        }
    }
    Svd { u, s, vt }
}

fn rotate<T: Real>(cols: &mut [Vec<T>], i: usize, j: usize, c: T, s: T) {
    let (left, right) = cols.split_at_mut(j);
    let ci = &mut left[i];
    let cj = &mut right[0];
    for (a, b) in ci.iter_mut().zip(cj.iter_mut()) {
        let x = *a;
        let y = *b;
        *a = c * x - s * y;
        *b = s * x + c * y;
    }
}

/// Moore–Penrose pseudoinverse with a relative singular-value cutoff.
pub fn pinv<T: Real>(a: ArrayView2<T>, rcond: T) -> Array2<T> {
    let Svd { u, s, vt } = svd(a);
    let smax = s.iter().fold(T::zero(), |m, &v| m.max(v));
    let cutoff = rcond * smax;
    let (m, n) = a.dim();
    let mut out = Array2::<T>::zeros((n, m));
    for (k, &sk) in s.iter().enumerate() {
        if sk <= cutoff || sk == T::zero() {
            continue;
        }
        let inv = T::one() / sk;
        let vk = vt.row(k);
        let uk = u.column(k);
        for r in 0..n {
            let f = vk[r] * inv;
            if f == T::zero() {
                continue;
            }
            for c in 0..m {
                out[[r, c]] += f * uk[c];
            }
        }
    }
    out
}

/// Conjugate gradient for a symmetric positive definite operator.
///
/// Stops once `‖r‖ ≤ rel_tol · ‖b‖`; errors after `max_iter` iterations.
pub fn conjugate_gradient<T: Real>(
    apply: impl Fn(ArrayView1<T>) -> Array1<T>,
    b: ArrayView1<T>,
    x0: ArrayView1<T>,
    rel_tol: T,
    max_iter: usize,
) -> Result<Array1<T>> {
    let bnorm = b.dot(&b).sqrt();
    let mut x = x0.to_owned();
    if bnorm == T::zero() {
        x.fill(T::zero());
        return Ok(x);
    }
    let mut r = &b - &apply(x.view());
    let mut p = r.clone();
    let mut rs = r.dot(&r);
    let target = rel_tol * bnorm;
    if rs.sqrt() <= target {
        return Ok(x);
    }
    for _ in 0..max_iter {
        let ap = apply(p.view());
        let denom = p.dot(&ap);
        if !(denom > T::zero()) {
            return Err(Error::Numeric("conjugate gradient: operator not positive definite".into()));
        }
        let alpha = rs / denom;
        x.scaled_add(alpha, &p);
        r.scaled_add(-alpha, &ap);
        let rs_new = r.dot(&r);
        if rs_new.sqrt() <= target {
            return Ok(x);
        }
        let beta = rs_new / rs;
        p = &r + &p.mapv(|v| v * beta);
        rs = rs_new;
    }
    Err(Error::Numeric(format!(
        "conjugate gradient did not reach relative residual {} in {} iterations",
        rel_tol.to_f64_lossy(),
        max_iter
    )))
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
pub fn solve_dense<T: Real>(a: ArrayView2<T>, b: ArrayView1<T>) -> Result<Array1<T>> {
    let n = a.nrows();
    if a.ncols() != n || b.len() != n {
        return Err(Error::Shape(format!("cannot solve a {}x{} system with {} right-hand entries", n, a.ncols(), b.len())));
    }
    let mut m = a.to_owned();
    let mut x = b.to_owned();
    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &j| m[[i, c]].abs().partial_cmp(&m[[j, c]].abs()).unwrap_or(std::cmp::Ordering::Equal))
            .unwrap();
        if m[[p, c]] == T::zero() {
            return Err(Error::Numeric("singular system".into()));
        }
        if p != c {
            for j in 0..n {
                m.swap([p, j], [c, j]);
            }
            x.swap(p, c);
        }
        for r in (c + 1)..n {
            let f = m[[r, c]] / m[[c, c]];
            if f == T::zero() {
                continue;
            }
            for j in c..n {
                let d = m[[c, j]];
                m[[r, j]] -= f * d;
            }
            let d = x[c];
            x[r] -= f * d;
        }
    }
    for c in (0..n).rev() {
        let mut acc = x[c];
        for j in (c + 1)..n {
            acc -= m[[c, j]] * x[j];
        }
        x[c] = acc / m[[c, c]];
    }
    Ok(x)
}

#[inline]
pub fn max_abs<T: Real>(x: ArrayView1<T>) -> T {
    x.iter().fold(T::zero(), |m, &v| m.max(v.abs()))
}

#[inline]
pub fn max_abs_diff<T: Real>(a: ArrayView1<T>, b: ArrayView1<T>) -> T {
    a.iter()
        .zip(b.iter())
        .fold(T::zero(), |m, (&x, &y)| m.max((x - y).abs()))
}

#[inline]
pub fn norm2<T: Real>(x: ArrayView1<T>) -> T {
    x.dot(&x).sqrt()
}

/// `Aᵀ A` as a dense symmetric matrix.
pub fn gram<T: Real>(a: ArrayView2<T>) -> Array2<T> {
    a.t().dot(&a)
}

/// Sum of each column.
pub fn column_sums<T: Real>(a: ArrayView2<T>) -> Array1<T> {
    a.sum_axis(Axis(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn cholesky_solves_spd_system() {
        let a = array![[4.0, 1.0, 0.5], [1.0, 3.0, 0.2], [0.5, 0.2, 2.0]];
        let b = array![1.0, 2.0, 3.0];
        let l = cholesky(a.view()).unwrap();
        let x = cholesky_solve(l.view(), b.view());
        let r = a.dot(&x) - &b;
        assert!(max_abs(r.view()) < 1e-12);
    }

    #[test]
    fn cholesky_rejects_singular() {
        let a = array![[1.0, 1.0], [1.0, 1.0]];
        assert!(cholesky(a.view()).is_none());
    }

    #[test]
    fn svd_reconstructs_wide_and_tall() {
        let a = array![[1.0, 2.0, 0.0, -1.0], [0.5, -1.0, 3.0, 2.0], [2.0, 0.0, 1.0, 1.0]];
        for m in [a.clone(), a.t().to_owned()] {
            let d = svd(m.view());
            let rec = d.u.dot(&Array2::from_diag(&d.s)).dot(&d.vt);
            let err = (&rec - &m).iter().fold(0.0f64, |acc, v| acc.max(f64::abs(*v)));
            assert!(err < 1e-12, "err {err}");
            assert!(d.s.windows(2).into_iter().all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn pinv_of_rank_deficient() {
        let a = array![[1.0, 2.0], [2.0, 4.0], [0.0, 0.0]];
        let p = pinv(a.view(), 1e-10);
        let back = a.dot(&p).dot(&a);
        let err = (&back - &a).iter().fold(0.0f64, |acc, v| acc.max(f64::abs(*v)));
        assert!(err < 1e-10);
    }

    #[test]
    fn power_iteration_on_diag() {
        let d = array![1.0f64, 5.0, 2.0];
        let lam = power_iteration(3, |x| &x * &d, 200, 1e-14);
        assert!((lam - 5.0).abs() < 1e-8);
    }

    #[test]
    fn cg_matches_direct() {
        let a = array![[4.0f64, 1.0], [1.0, 3.0]];
        let b = array![1.0f64, 2.0];
        let x = conjugate_gradient(|v| a.dot(&v), b.view(), Array1::zeros(2).view(), 1e-12, 20).unwrap();
        assert!((x[0] - 1.0 / 11.0).abs() < 1e-12);
        assert!((x[1] - 7.0 / 11.0).abs() < 1e-12);
    }

    #[test]
    fn svd_in_single_precision() {
        let a = array![[3.0f32, 0.0], [0.0, -2.0], [0.0, 0.0]];
        let d = svd(a.view());
        assert!((d.s[0] - 3.0).abs() < 1e-5 && (d.s[1] - 2.0).abs() < 1e-5);
    }
}
