//! A-posteriori choice of one solution from the known Pareto front:
//! majority ROI first, then the elbow of a B-spline through what is left.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::headmodel::SourceSpace;
use crate::linalg::solve_dense;
use crate::moea::Individual;
use crate::objectives::{l0_support, ObjectiveVector};
use crate::scalar::Real;

pub const KNEE_SAMPLES: usize = 200;
const SPLINE_DEGREE: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct FrontPoint<T> {
    pub index: usize,
    pub objectives: (T, T),
    pub roi_hits: Vec<usize>,
}

/// Outcome of [`decide`], with enough context to explain the choice.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision<T> {
    /// Index into the input front.
    pub index: usize,
    pub roi: usize,
    /// `cant_rep` for every ROI.
    pub counts: Vec<usize>,
    /// Front members supported in `roi`, ascending f0.
    pub candidates: Vec<usize>,
    /// Bi-objective coordinates of the chosen member.
    pub knee: (T, T),
}

/// ROIs holding at least one active coefficient of `coeffs`, ascending.
pub fn roi_hits<T: Real>(coeffs: &Array1<T>, space: &SourceSpace<T>, eps: T) -> Vec<usize> {
    let mut hits: Vec<usize> = l0_support(coeffs.view(), eps).into_iter().map(|i| space.roi_of(i)).collect();
    hits.sort_unstable();
    hits.dedup();
    hits
}

/// Number of front members with active support inside `roi`.
pub fn cant_rep<T: Real>(front: &[Individual<T>], space: &SourceSpace<T>, roi: usize, eps: T) -> usize {
    front.iter().filter(|m| roi_hits(&m.coeffs, space, eps).contains(&roi)).count()
}

pub fn roi_counts<T: Real>(front: &[Individual<T>], space: &SourceSpace<T>, eps: T) -> Vec<usize> {
    let mut counts = vec![0; space.n_rois()];
    for m in front {
        for r in roi_hits(&m.coeffs, space, eps) {
            counts[r] += 1;
        }
    }
    counts
}

/// `argmax cant_rep`, lowest index on ties.
pub fn select_roi<T: Real>(front: &[Individual<T>], space: &SourceSpace<T>, eps: T) -> Result<usize> {
    if front.is_empty() {
        return Err(Error::NoActiveSolution("empty front".into()));
    }
    argmax_count(&roi_counts(front, space, eps))
}

fn argmax_count(counts: &[usize]) -> Result<usize> {
    let mut best = 0;
    for (r, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = r;
        }
    }
    if counts.get(best).copied().unwrap_or(0) == 0 {
        return Err(Error::NoActiveSolution("no front member has active sources".into()));
    }
    Ok(best)
}

/// Members supported in `roi`, ordered by ascending f0 (stable).
pub fn filter_by_roi<T: Real>(
    front: &[Individual<T>],
    space: &SourceSpace<T>,
    roi: usize,
    eps: T,
) -> Result<Vec<usize>> {
    if roi >= space.n_rois() {
        return Err(Error::Index(format!("ROI {roi} does not exist")));
    }
    let mut keep: Vec<(usize, T)> = Vec::new();
    for (i, m) in front.iter().enumerate() {
        if roi_hits(&m.coeffs, space, eps).contains(&roi) {
            keep.push((i, m.objectives()?.f0()));
        }
    }
    if keep.is_empty() {
        return Err(Error::NoActiveSolution(format!("no front member is active in ROI {roi}")));
    }
    keep.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
    Ok(keep.into_iter().map(|(i, _)| i).collect())
}

/// `(f0, f1)` per objective vector; with several penalties, `f1` is the sum of
/// their min-max normalized values over the given set.
pub fn bi_objective<T: Real>(objs: &[&ObjectiveVector<T>]) -> Vec<(T, T)> {
    let Some(first) = objs.first() else { return Vec::new() };
    let r = first.len() - 1;
    if r <= 1 {
        return objs.iter().map(|o| (o.f0(), o.0.get(1).copied().unwrap_or(T::zero()))).collect();
    }
    let mut lo = vec![T::infinity(); r];
    let mut hi = vec![T::neg_infinity(); r];
    for o in objs {
        for (q, &p) in o.penalties().iter().enumerate() {
            lo[q] = lo[q].min(p);
            hi[q] = hi[q].max(p);
        }
    }
    objs.iter()
        .map(|o| {
            let f1 = o.penalties().iter().enumerate().fold(T::zero(), |acc, (q, &p)| {
                let range = hi[q] - lo[q];
                if range > T::zero() {
                    acc + (p - lo[q]) / range
                } else {
                    acc
                }
            });
            (o.f0(), f1)
        })
        .collect()
}

fn normalize<T: Real>(values: impl Iterator<Item = T> + Clone) -> Vec<T> {
    let lo = values.clone().fold(T::infinity(), |a, b| a.min(b));
    let hi = values.clone().fold(T::neg_infinity(), |a, b| a.max(b));
    let range = hi - lo;
    values
        .map(|v| if range > T::zero() { (v - lo) / range } else { T::zero() })
        .collect()
}

/// Elbow of a bi-objective front.
///
/// Both objectives are min-max normalized, an interpolating cubic B-spline is
/// fitted through the points in f0 order, and the input point nearest the
/// curve sample farthest from the endpoint chord wins. Flat or collinear
/// fronts fall back to the lowest f0.
pub fn knee_select<T: Real>(points: &[(T, T)]) -> Result<usize> {
    match points.len() {
        0 => return Err(Error::Parameter("knee selection needs at least one point".into())),
        1 => return Ok(0),
        2 => return Ok(if points[1].0 < points[0].0 { 1 } else { 0 }),
        _ => {}
    }
    if points.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
        return Err(Error::Data("non-finite objective in knee selection".into()));
    }
    let xs = normalize(points.iter().map(|p| p.0));
    let ys = normalize(points.iter().map(|p| p.1));
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        xs[a].partial_cmp(&xs[b])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(ys[a].partial_cmp(&ys[b]).unwrap_or(std::cmp::Ordering::Equal))
            .then(a.cmp(&b))
    });
    // Interpolation needs distinct consecutive points.
    let mut nodes: Vec<(T, T)> = Vec::new();
    for &i in &order {
        let p = (xs[i], ys[i]);
        if nodes.last() != Some(&p) {
            nodes.push(p);
        }
    }
    if nodes.len() < 3 {
        return Ok(order[0]);
    }
    let curve = BSpline::interpolate(&nodes, SPLINE_DEGREE)?;
    let (a, b) = (nodes[0], nodes[nodes.len() - 1]);
    let (cx, cy) = (b.0 - a.0, b.1 - a.1);
    let chord = (cx * cx + cy * cy).sqrt();
    let mut best = (T::neg_infinity(), (T::zero(), T::zero()));
    for s in 0..KNEE_SAMPLES {
        let u = T::lit(s as f64 / (KNEE_SAMPLES - 1) as f64);
        let p = curve.eval(u);
        let d = ((p.0 - a.0) * cy - (p.1 - a.1) * cx).abs() / chord;
        if d > best.0 {
            best = (d, p);
        }
    }
    if !(best.0 > T::lit(1e-12)) {
        return Ok(order[0]);
    }
    let target = best.1;
    let mut pick = (T::infinity(), order[0]);
    for &i in &order {
        let (dx, dy) = (xs[i] - target.0, ys[i] - target.1);
        let d = dx * dx + dy * dy;
        if d < pick.0 {
            pick = (d, i);
        }
    }
    Ok(pick.1)
}

/// Clamped B-spline curve in the plane.
#[derive(Debug, Clone)]
struct BSpline<T> {
    degree: usize,
    knots: Vec<T>,
    control: Vec<(T, T)>,
}

impl<T: Real> BSpline<T> {
    /// Global interpolation with chord-length parameters and averaged knots.
    fn interpolate(points: &[(T, T)], max_degree: usize) -> Result<Self> {
        let count = points.len();
        let p = max_degree.min(count - 1);
        let mut params = vec![T::zero(); count];
        let mut total = T::zero();
        for k in 1..count {
            let (dx, dy) = (points[k].0 - points[k - 1].0, points[k].1 - points[k - 1].1);
            total += (dx * dx + dy * dy).sqrt();
            params[k] = total;
        }
        for u in params.iter_mut() {
            *u /= total;
        }
        params[count - 1] = T::one();

        let mut knots = vec![T::zero(); count + p + 1];
        for u in knots.iter_mut().rev().take(p + 1) {
            *u = T::one();
        }
        for j in 1..count - p {
            let sum = params[j..j + p].iter().fold(T::zero(), |a, &b| a + b);
            knots[j + p] = sum / T::lit(p as f64);
        }

        let mut a = Array2::<T>::zeros((count, count));
        for (k, &u) in params.iter().enumerate() {
            let span = find_span(u, p, &knots, count);
            for (q, v) in basis(span, u, p, &knots).into_iter().enumerate() {
                a[[k, span - p + q]] = v;
            }
        }
        let bx = solve_dense(a.view(), Array1::from_iter(points.iter().map(|q| q.0)).view())?;
        let by = solve_dense(a.view(), Array1::from_iter(points.iter().map(|q| q.1)).view())?;
        let control = bx.iter().zip(by.iter()).map(|(&x, &y)| (x, y)).collect();
        Ok(Self { degree: p, knots, control })
    }

    fn eval(&self, u: T) -> (T, T) {
        let p = self.degree;
        let span = find_span(u, p, &self.knots, self.control.len());
        basis(span, u, p, &self.knots)
            .into_iter()
            .enumerate()
            .fold((T::zero(), T::zero()), |acc, (q, w)| {
                let c = self.control[span - p + q];
                (acc.0 + w * c.0, acc.1 + w * c.1)
            })
    }
}

fn find_span<T: Real>(u: T, p: usize, knots: &[T], n_ctrl: usize) -> usize {
    if u >= knots[n_ctrl] {
        return n_ctrl - 1;
    }
    let mut span = p;
    while span + 1 < n_ctrl && knots[span + 1] <= u {
        span += 1;
    }
    span
}

/// The `p + 1` non-vanishing basis functions on `span` (Cox–de Boor).
fn basis<T: Real>(span: usize, u: T, p: usize, knots: &[T]) -> Vec<T> {
    let mut n = vec![T::zero(); p + 1];
    let mut left = vec![T::zero(); p + 1];
    let mut right = vec![T::zero(); p + 1];
    n[0] = T::one();
    for j in 1..=p {
        left[j] = u - knots[span + 1 - j];
        right[j] = knots[span + j] - u;
        let mut saved = T::zero();
        for r in 0..j {
            let denom = right[r + 1] + left[j - r];
            let tmp = if denom == T::zero() { T::zero() } else { n[r] / denom };
            n[r] = saved + right[r + 1] * tmp;
            saved = left[j - r] * tmp;
        }
        n[j] = saved;
    }
    n
}

/// Majority ROI, then the knee among the members active there.
pub fn decide<T: Real>(front: &[Individual<T>], space: &SourceSpace<T>, eps: T) -> Result<Decision<T>> {
    if front.is_empty() {
        return Err(Error::NoActiveSolution("empty front".into()));
    }
    let counts = roi_counts(front, space, eps);
    let roi = argmax_count(&counts)?;
    let candidates = filter_by_roi(front, space, roi, eps)?;
    let objs: Vec<&ObjectiveVector<T>> =
        candidates.iter().map(|&i| front[i].objectives()).collect::<Result<_>>()?;
    let points = bi_objective(&objs);
    let k = knee_select(&points)?;
    Ok(Decision { index: candidates[k], roi, counts, candidates, knee: points[k] })
}

/// `FrontPoint` view of a front (bi-objective projection over the whole front).
pub fn front_points<T: Real>(front: &[Individual<T>], space: &SourceSpace<T>, eps: T) -> Result<Vec<FrontPoint<T>>> {
    let objs: Vec<&ObjectiveVector<T>> = front.iter().map(|m| m.objectives()).collect::<Result<_>>()?;
    Ok(bi_objective(&objs)
        .into_iter()
        .enumerate()
        .map(|(index, objectives)| FrontPoint { index, objectives, roi_hits: roi_hits(&front[index].coeffs, space, eps) })
        .collect())
}
