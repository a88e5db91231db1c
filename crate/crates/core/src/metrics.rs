//! Normalized quality scores of an estimate against the ground truth, all in
//! `[0, 1]` with higher meaning better.

use ndarray::ArrayView1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::headmodel::{distance, SourceSpace};
use crate::scalar::Real;

/// Fraction of the peak magnitude that defines a support.
pub const HALF_MAX: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct MetricsReport<T> {
    pub localization_score: T,
    pub visibility_score: T,
    pub spatial_resolution_score: T,
    /// Distance between the true and estimated peaks; `None` for a zero estimate.
    pub raw_distance: Option<T>,
}

/// Index of the largest magnitude (first on ties); `None` for the zero vector.
pub fn peak<T: Real>(j: ArrayView1<T>) -> Option<usize> {
    let mut best: Option<(usize, T)> = None;
    for (i, &x) in j.iter().enumerate() {
        let a = x.abs();
        if a > T::zero() && best.is_none_or(|(_, b)| a > b) {
            best = Some((i, a));
        }
    }
    best.map(|(i, _)| i)
}

fn check<T: Real>(j_true: ArrayView1<T>, j_est: ArrayView1<T>) -> Result<usize> {
    if j_true.len() != j_est.len() {
        return Err(Error::Shape(format!("truth has {} entries, estimate {}", j_true.len(), j_est.len())));
    }
    peak(j_true).ok_or(Error::UndefinedTruth)
}

/// `(d, 1 − d/D)` with `d` the distance between peaks and `D` the grid diameter.
pub fn localization_error<T: Real>(
    j_true: ArrayView1<T>,
    j_est: ArrayView1<T>,
    space: &SourceSpace<T>,
) -> Result<(Option<T>, T)> {
    let t = check(j_true, j_est)?;
    if j_true.len() != space.len() {
        return Err(Error::Shape("vectors and source space disagree on n".into()));
    }
    let Some(e) = peak(j_est) else { return Ok((None, T::zero())) };
    let d = distance(space.position(t), space.position(e));
    let diameter = space.diameter();
    let score = if diameter > T::zero() { T::one() - d / diameter } else { T::one() };
    Ok((Some(d), score.max(T::zero()).min(T::one())))
}

/// `|ĵ at the true peak| / max|ĵ|`.
pub fn visibility<T: Real>(j_true: ArrayView1<T>, j_est: ArrayView1<T>) -> Result<T> {
    let t = check(j_true, j_est)?;
    match peak(j_est) {
        None => Ok(T::zero()),
        Some(e) => Ok(j_est[t].abs() / j_est[e].abs()),
    }
}

/// Indices with `|j_i| ≥ ½ max|j|`.
pub fn half_max_support<T: Real>(j: ArrayView1<T>) -> Vec<usize> {
    let Some(p) = peak(j) else { return Vec::new() };
    let thr = T::lit(HALF_MAX) * j[p].abs();
    j.iter().enumerate().filter(|(_, x)| x.abs() >= thr).map(|(i, _)| i).collect()
}

/// Jaccard index of the half-max supports.
pub fn spatial_resolution<T: Real>(j_true: ArrayView1<T>, j_est: ArrayView1<T>) -> Result<T> {
    check(j_true, j_est)?;
    let st = half_max_support(j_true);
    let se = half_max_support(j_est);
    if se.is_empty() {
        return Ok(T::zero());
    }
    // Both supports are sorted, so a merge counts the overlap.
    let (mut a, mut b, mut inter) = (0, 0, 0usize);
    while a < st.len() && b < se.len() {
        match st[a].cmp(&se[b]) {
            std::cmp::Ordering::Less => a += 1,
            std::cmp::Ordering::Greater => b += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                a += 1;
                b += 1;
            }
        }
    }
    let union = st.len() + se.len() - inter;
    Ok(T::lit(inter as f64) / T::lit(union as f64))
}

pub fn evaluate_all<T: Real>(
    j_true: ArrayView1<T>,
    j_est: ArrayView1<T>,
    space: &SourceSpace<T>,
) -> Result<MetricsReport<T>> {
    let (raw_distance, localization_score) = localization_error(j_true, j_est, space)?;
    Ok(MetricsReport {
        localization_score,
        visibility_score: visibility(j_true, j_est)?,
        spatial_resolution_score: spatial_resolution(j_true, j_est)?,
        raw_distance,
    })
}
