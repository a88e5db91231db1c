//! Ground-truth sources, the forward model `V = KJ + e`, and the scenario suite.

use ndarray::{Array1, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::headmodel::{distance, SourceSpace};
use crate::linalg::norm2;
use crate::scalar::Real;

/// Largest admissible source amplitude (nA/cm²).
pub const MAX_AMPLITUDE: f64 = 5.0;

/// Gaussian activations below this fraction of the peak are set to zero.
const GAUSSIAN_CUTOFF: f64 = 0.01;

/// Names attached to the four simulated regions, in configuration order.
pub const REGION_NAMES: [&str; 4] = ["frontal", "temporal", "occipital", "precentral"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    Punctual,
    Gaussian,
}

impl SourceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SourceKind::Punctual => "punctual",
            SourceKind::Gaussian => "gaussian",
        }
    }
}

impl std::str::FromStr for SourceKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "punctual" => Ok(SourceKind::Punctual),
            "gaussian" => Ok(SourceKind::Gaussian),
            other => Err(Error::Parse(format!("unknown source kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SourceSpec<T> {
    pub roi: usize,
    /// Grid index of the generator; must belong to `roi`.
    pub center: usize,
    pub kind: SourceKind,
    pub amplitude: T,
    /// Spatial standard deviation, used by the gaussian kind only.
    pub spread: T,
}

/// A source vector `J` for one time instant.
#[derive(Debug, Clone, PartialEq)]
pub struct CurrentDensity<T> {
    pub values: Array1<T>,
}

impl<T: Real> CurrentDensity<T> {
    pub fn new(values: Array1<T>) -> Self {
        Self { values }
    }

    pub fn zeros(n: usize) -> Self {
        Self { values: Array1::zeros(n) }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn view(&self) -> ArrayView1<'_, T> {
        self.values.view()
    }
}

/// Scalp potentials for one time instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording<T> {
    pub values: Array1<T>,
    /// 0 means noiseless, otherwise the realized `‖V‖/‖e‖`.
    pub snr: T,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario<T> {
    pub spec: SourceSpec<T>,
    pub j_true: CurrentDensity<T>,
    pub v: Recording<T>,
    pub region: String,
    pub label: String,
}

impl<T: Real> Scenario<T> {
    pub fn kind(&self) -> SourceKind {
        self.spec.kind
    }
}

pub fn synthesize_current<T: Real>(spec: &SourceSpec<T>, space: &SourceSpace<T>) -> Result<CurrentDensity<T>> {
    let n = space.len();
    if spec.center >= n {
        return Err(Error::Index(format!("center {} outside a grid of {n}", spec.center)));
    }
    if space.roi_of(spec.center) != spec.roi {
        return Err(Error::Parameter(format!("center {} does not belong to ROI {}", spec.center, spec.roi)));
    }
    if !(spec.amplitude.abs() <= T::lit(MAX_AMPLITUDE)) {
        return Err(Error::Parameter(format!("amplitude must be bounded by {MAX_AMPLITUDE}")));
    }
    let mut values = Array1::<T>::zeros(n);
    match spec.kind {
        SourceKind::Punctual => values[spec.center] = spec.amplitude,
        SourceKind::Gaussian => {
            if !(spec.spread > T::zero()) {
                return Err(Error::Parameter("gaussian spread must be positive".into()));
            }
            let c = space.position(spec.center);
            let two_s2 = T::lit(2.0) * spec.spread * spec.spread;
            let floor = T::lit(GAUSSIAN_CUTOFF) * spec.amplitude.abs();
            for (i, p) in space.positions().iter().enumerate() {
                let d = distance(p, c);
                let v = spec.amplitude * (-(d * d) / two_s2).exp();
                values[i] = if i == spec.center || v.abs() >= floor { v } else { T::zero() };
            }
            values[spec.center] = spec.amplitude;
        }
    }
    Ok(CurrentDensity { values })
}

/// Noiseless scalp potentials `V = K J`.
pub fn forward<T: Real>(k: ArrayView2<T>, j: &CurrentDensity<T>) -> Result<Recording<T>> {
    if k.ncols() != j.len() {
        return Err(Error::Shape(format!("lead field has {} columns, J has {}", k.ncols(), j.len())));
    }
    Ok(Recording { values: k.dot(&j.values), snr: T::zero(), seed: 0 })
}

/// Adds i.i.d. Gaussian noise rescaled so that `‖V‖/‖e‖` equals `snr`.
/// `snr = 0` leaves the recording untouched.
pub fn add_noise<T: Real>(v: &Recording<T>, snr: T, seed: u64) -> Result<Recording<T>> {
    if !(snr >= T::zero()) {
        return Err(Error::Parameter("snr must be non-negative".into()));
    }
    if snr == T::zero() {
        return Ok(v.clone());
    }
    let e = noise_vector::<T>(v.values.len(), seed);
    let vn = norm2(v.values.view());
    let en = norm2(e.view());
    if vn == T::zero() || en == T::zero() {
        return Err(Error::Data("signal-to-noise ratio undefined for a zero recording".into()));
    }
    let scale = vn / (snr * en);
    let values = &v.values + &e.mapv(|x| x * scale);
    Ok(Recording { values, snr, seed })
}

/// Standard normal draws used by [`add_noise`], exposed so callers can
/// recover the realized noise.
pub fn noise_vector<T: Real>(m: usize, seed: u64) -> Array1<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array1::from_shape_fn(m, |_| T::lit(rng.sample::<f64, _>(StandardNormal)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteOptions<T> {
    /// Gaussian spread; `None` uses twice the median grid spacing.
    pub spread: Option<T>,
    pub snr_levels: Vec<T>,
    pub amplitude_range: (T, T),
    pub kinds: Vec<SourceKind>,
}

impl<T: Real> Default for SuiteOptions<T> {
    fn default() -> Self {
        Self {
            spread: None,
            snr_levels: vec![T::zero(), T::lit(3.0)],
            amplitude_range: (T::one(), T::lit(MAX_AMPLITUDE)),
            kinds: vec![SourceKind::Punctual, SourceKind::Gaussian],
        }
    }
}

/// The four ROIs whose centroids sit highest on the head, i.e. closest to the
/// electrodes, ordered from the top down.
pub fn default_regions<T: Real>(space: &SourceSpace<T>) -> Vec<usize> {
    let mut rois: Vec<usize> = (0..space.n_rois()).collect();
    rois.sort_by(|&a, &b| {
        space.roi_centroid(b)[2]
            .partial_cmp(&space.roi_centroid(a)[2])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    rois.truncate(4);
    rois
}

/// Builds the region × kind × snr suite (16 scenarios with the defaults).
///
/// Per region, one generator and amplitude are drawn from `seed`; the punctual
/// and gaussian variants share that generator, and the snr variants of a pair
/// share `j_true`. Scenario `i` draws its noise from `seed + i`.
pub fn build_test_suite<T: Real>(
    space: &SourceSpace<T>,
    k: ArrayView2<T>,
    regions: &[usize],
    seed: u64,
    options: &SuiteOptions<T>,
) -> Result<Vec<Scenario<T>>> {
    if space.n_rois() < 4 || regions.len() != 4 {
        return Err(Error::Config("the suite needs 4 distinct ROIs".into()));
    }
    for (i, &r) in regions.iter().enumerate() {
        if r >= space.n_rois() {
            return Err(Error::Config(format!("region ROI {r} does not exist")));
        }
        if regions[..i].contains(&r) {
            return Err(Error::Config(format!("region ROI {r} listed twice")));
        }
    }
    let spread = options.spread.unwrap_or_else(|| T::lit(2.0) * space.median_spacing());
    let (lo, hi) = options.amplitude_range;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(regions.len() * options.kinds.len() * options.snr_levels.len());
    for (ri, &roi) in regions.iter().enumerate() {
        let members = space.roi_members(roi);
        let center = members[rng.random_range(0..members.len())];
        let u: f64 = rng.random();
        let amplitude = lo + (hi - lo) * T::lit(u);
        for &kind in &options.kinds {
            let spec = SourceSpec { roi, center, kind, amplitude, spread };
            let j_true = synthesize_current(&spec, space)?;
            let clean = forward(k, &j_true)?;
            for &snr in &options.snr_levels {
                let noise_seed = seed.wrapping_add(out.len() as u64);
                let v = add_noise(&clean, snr, noise_seed)?;
                let label = format!("{}-{}-snr{}", REGION_NAMES[ri], kind.as_str(), snr.to_f64_lossy());
                out.push(Scenario {
                    spec: spec.clone(),
                    j_true: j_true.clone(),
                    v,
                    region: REGION_NAMES[ri].to_string(),
                    label,
                });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::headmodel::{build_source_space, SourceSpace};
    use ndarray::{array, Array2};

    fn space() -> SourceSpace<f64> {
        build_source_space(200, 0.8, 8, 3).unwrap()
    }

    #[test]
    fn punctual_source_has_one_nonzero() {
        let s = space();
        let center = s.roi_members(2)[0];
        let spec = SourceSpec { roi: 2, center, kind: SourceKind::Punctual, amplitude: 5.0, spread: 0.1 };
        let j = synthesize_current(&spec, &s).unwrap();
        assert_eq!(j.values.iter().filter(|v| **v != 0.0).count(), 1);
        assert_eq!(j.values.iter().cloned().fold(f64::MIN, f64::max), 5.0);
    }

    #[test]
    fn gaussian_peaks_at_center_and_decays() {
        let s = space();
        let center = s.roi_members(1)[3];
        let spec = SourceSpec { roi: 1, center, kind: SourceKind::Gaussian, amplitude: 3.0, spread: 0.15 };
        let j = synthesize_current(&spec, &s).unwrap();
        assert_eq!(j.values[center], 3.0);
        // sort by distance and check monotone non-increase
        let c = s.position(center);
        let mut idx: Vec<usize> = (0..s.len()).collect();
        idx.sort_by(|&a, &b| distance(s.position(a), c).total_cmp(&distance(s.position(b), c)));
        for w in idx.windows(2) {
            assert!(j.values[w[0]] >= j.values[w[1]]);
        }
        assert!(j.values.iter().filter(|v| **v != 0.0).count() > 1);
    }

    #[test]
    fn bad_specs_are_rejected() {
        let s = space();
        let spec = SourceSpec { roi: 0, center: 10_000, kind: SourceKind::Punctual, amplitude: 1.0, spread: 0.1 };
        assert!(matches!(synthesize_current(&spec, &s), Err(Error::Index(_))));
        let c = s.roi_members(0)[0];
        let spec = SourceSpec { roi: 0, center: c, kind: SourceKind::Punctual, amplitude: 6.0, spread: 0.1 };
        assert!(matches!(synthesize_current(&spec, &s), Err(Error::Parameter(_))));
    }

    #[test]
    fn forward_identity_and_zero() {
        let k = Array2::<f64>::eye(3);
        let j = CurrentDensity::new(array![1.0, 0.0, 0.0]);
        assert_eq!(forward(k.view(), &j).unwrap().values, array![1.0, 0.0, 0.0]);
        assert_eq!(forward(k.view(), &CurrentDensity::zeros(3)).unwrap().values, array![0.0, 0.0, 0.0]);
        assert!(matches!(forward(k.view(), &CurrentDensity::zeros(4)), Err(Error::Shape(_))));
    }

    #[test]
    fn noise_hits_requested_ratio() {
        let v = Recording { values: array![1.0f64, -2.0, 0.5, 3.0], snr: 0.0, seed: 0 };
        assert_eq!(add_noise(&v, 0.0, 7).unwrap(), v);
        for seed in 0..20 {
            let noisy = add_noise(&v, 3.0, seed).unwrap();
            let e = &noisy.values - &v.values;
            let ratio = norm2(v.values.view()) / norm2(e.view());
            assert!((ratio - 3.0).abs() < 1e-12);
            assert_eq!(noisy, add_noise(&v, 3.0, seed).unwrap());
        }
        assert!(matches!(add_noise(&v, -1.0, 0), Err(Error::Parameter(_))));
    }
}
