//! Head geometry and the forward operator.
//!
//! Sources live on a "cortex" sphere of radius `r_cortex` inside a three-shell
//! conductor (brain, skull, scalp). The lead field maps one scalar amplitude per
//! source (a fixed-orientation current dipole) to the scalp potential at each
//! electrode, using the Legendre-series solution for concentric spheres.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

pub type Point3<T> = [T; 3];

const KNN: usize = 6;

#[inline]
fn dist2<T: Real>(a: &Point3<T>, b: &Point3<T>) -> T {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

#[inline]
fn dot3<T: Real>(a: &Point3<T>, b: &Point3<T>) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
fn norm3<T: Real>(a: &Point3<T>) -> T {
    dot3(a, a).sqrt()
}

/// Euclidean distance between two points.
pub fn distance<T: Real>(a: &Point3<T>, b: &Point3<T>) -> T {
    dist2(a, b).sqrt()
}

/// Candidate generator grid with its ROI partition and mesh adjacency.
///
/// Point index `i` maps to `positions[i]`; that bijection is the index map
/// used by the decision maker and the metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SourceSpace<T> {
    positions: Vec<Point3<T>>,
    roi_labels: Vec<usize>,
    adjacency: Vec<Vec<usize>>,
    n_rois: usize,
}

impl<T: Real> SourceSpace<T> {
    /// Assembles a source space from explicit parts, checking the partition and
    /// adjacency invariants.
    pub fn from_parts(
        positions: Vec<Point3<T>>,
        roi_labels: Vec<usize>,
        adjacency: Vec<Vec<usize>>,
    ) -> Result<Self> {
        let n = positions.len();
        if n == 0 {
            return Err(Error::InvalidPartition("empty source space".into()));
        }
        if roi_labels.len() != n || adjacency.len() != n {
            return Err(Error::Shape(format!(
                "{} positions, {} labels, {} adjacency lists",
                n,
                roi_labels.len(),
                adjacency.len()
            )));
        }
        let n_rois = roi_labels.iter().max().map_or(0, |&m| m + 1);
        let mut sizes = vec![0usize; n_rois];
        for &l in &roi_labels {
            sizes[l] += 1;
        }
        if let Some(r) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::InvalidPartition(format!("ROI {r} is empty")));
        }
        for (i, nb) in adjacency.iter().enumerate() {
            for &j in nb {
                if j >= n {
                    return Err(Error::Index(format!("neighbor {j} of {i} out of range")));
                }
                if j == i {
                    return Err(Error::InvalidPartition(format!("self loop at {i}")));
                }
                if !adjacency[j].contains(&i) {
                    return Err(Error::InvalidPartition(format!("adjacency {i}->{j} is not symmetric")));
                }
            }
        }
        if positions.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite source position".into()));
        }
        Ok(Self { positions, roi_labels, adjacency, n_rois })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn n_rois(&self) -> usize {
        self.n_rois
    }

    pub fn positions(&self) -> &[Point3<T>] {
        &self.positions
    }

    pub fn position(&self, index: usize) -> &Point3<T> {
        &self.positions[index]
    }

    pub fn roi_labels(&self) -> &[usize] {
        &self.roi_labels
    }

    pub fn roi_of(&self, index: usize) -> usize {
        self.roi_labels[index]
    }

    pub fn adjacency(&self) -> &[Vec<usize>] {
        &self.adjacency
    }

    /// Point indices of one ROI, ascending.
    pub fn roi_members(&self, roi: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.roi_labels[i] == roi).collect()
    }

    /// The full partition `{G_1, …, G_k}` in ascending ROI order.
    pub fn roi_groups(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.n_rois];
        for (i, &l) in self.roi_labels.iter().enumerate() {
            groups[l].push(i);
        }
        groups
    }

    /// Centroid of the points of one ROI.
    pub fn roi_centroid(&self, roi: usize) -> Point3<T> {
        let mut c = [T::zero(); 3];
        let mut count = 0usize;
        for (p, &l) in self.positions.iter().zip(&self.roi_labels) {
            if l == roi {
                for d in 0..3 {
                    c[d] += p[d];
                }
                count += 1;
            }
        }
        let inv = T::one() / T::lit(count.max(1) as f64);
        c.map(|v| v * inv)
    }

    /// Largest pairwise distance between grid points.
    pub fn diameter(&self) -> T {
        let mut best = T::zero();
        for i in 0..self.len() {
            for j in (i + 1)..self.len() {
                best = best.max(dist2(&self.positions[i], &self.positions[j]));
            }
        }
        best.sqrt()
    }

    /// Median distance from each point to its nearest neighbor.
    pub fn median_spacing(&self) -> T {
        let n = self.len();
        if n < 2 {
            return T::zero();
        }
        let mut nn: Vec<T> = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| j != i)
                    .map(|j| dist2(&self.positions[i], &self.positions[j]))
                    .fold(T::infinity(), T::min)
                    .sqrt()
            })
            .collect();
        nn.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if n % 2 == 1 {
            nn[n / 2]
        } else {
            (nn[n / 2 - 1] + nn[n / 2]) / T::lit(2.0)
        }
    }

    /// Unit outward normals, i.e. radial dipole orientations.
    pub fn radial_orientations(&self) -> Vec<Point3<T>> {
        self.positions
            .iter()
            .map(|p| {
                let r = norm3(p);
                if r > T::zero() {
                    p.map(|v| v / r)
                } else {
                    [T::zero(), T::zero(), T::one()]
                }
            })
            .collect()
    }
}

/// Points of a Fibonacci lattice on the unit sphere.
fn fibonacci_sphere<T: Real>(n: usize) -> Vec<Point3<T>> {
    let golden = T::PI() * (T::lit(3.0) - T::lit(5.0).sqrt());
    let nf = T::lit(n as f64);
    (0..n)
        .map(|i| {
            let fi = T::lit(i as f64);
            let z = T::one() - (T::lit(2.0) * fi + T::one()) / nf;
            let rho = (T::one() - z * z).max(T::zero()).sqrt();
            let phi = fi * golden;
            [rho * phi.cos(), rho * phi.sin(), z]
        })
        .collect()
}

/// Quasi-uniform source grid on the cortex sphere, partitioned into `k` ROIs by
/// seeded k-means, with 6-nearest-neighbor adjacency.
pub fn build_source_space<T: Real>(n: usize, r_cortex: T, k: usize, seed: u64) -> Result<SourceSpace<T>> {
    if k == 0 || n < k {
        return Err(Error::InvalidPartition(format!("cannot split {n} sources into {k} ROIs")));
    }
    if !(r_cortex > T::zero() && r_cortex < T::one()) {
        return Err(Error::Parameter("cortex radius must lie in (0, 1)".into()));
    }
    let positions: Vec<Point3<T>> = fibonacci_sphere::<T>(n)
        .into_iter()
        .map(|p| p.map(|v| v * r_cortex))
        .collect();
    let labels = kmeans_labels(&positions, k, seed);
    let adjacency = knn_adjacency(&positions, KNN);
    SourceSpace::from_parts(positions, labels, adjacency)
}

fn nearest_center<T: Real>(p: &Point3<T>, centers: &[Point3<T>]) -> (usize, T) {
    let mut best = (0, T::infinity());
    for (c, center) in centers.iter().enumerate() {
        let d = dist2(p, center);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn kmeans_labels<T: Real>(points: &[Point3<T>], k: usize, seed: u64) -> Vec<usize> {
    let n = points.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // k-means++ seeding
    let mut centers: Vec<Point3<T>> = Vec::with_capacity(k);
    centers.push(points[rng.random_range(0..n)]);
    let mut d2: Vec<T> = points.iter().map(|p| dist2(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().map(|v| v.to_f64_lossy()).sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, v) in d2.iter().enumerate() {
                let w = v.to_f64_lossy();
                if w > 0.0 && target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            // a zero-weight point is already a center; walk back to a positive one
            if d2[chosen] == T::zero() {
                chosen = (0..n).rev().find(|&i| d2[i] > T::zero()).unwrap_or(chosen);
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centers.push(points[pick]);
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(dist2(p, &points[pick]));
        }
    }

    let mut labels: Vec<usize> = points.iter().map(|p| nearest_center(p, &centers).0).collect();
    for _ in 0..200 {
        // update
        let mut sums = vec![[T::zero(); 3]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            for d in 0..3 {
                sums[l][d] += p[d];
            }
            counts[l] += 1;
        }
        for c in 0..k {
            if counts[c] > 0 {
                let inv = T::one() / T::lit(counts[c] as f64);
                centers[c] = sums[c].map(|v| v * inv);
            }
        }
        // assign
        let mut next: Vec<usize> = points.iter().map(|p| nearest_center(p, &centers).0).collect();
        repair_empty(points, &centers, &mut next, k);
        if next == labels {
            break;
        }
        labels = next;
    }
    repair_empty(points, &centers, &mut labels, k);
    canonical_relabel(&labels, k)
}

/// Moves the point farthest from its center into any empty cluster.
fn repair_empty<T: Real>(points: &[Point3<T>], centers: &[Point3<T>], labels: &mut [usize], k: usize) {
    loop {
        let mut counts = vec![0usize; k];
        for &l in labels.iter() {
            counts[l] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return;
        };
        let mut best: Option<(usize, T)> = None;
        for (i, p) in points.iter().enumerate() {
            if counts[labels[i]] < 2 {
                continue;
            }
            let d = dist2(p, &centers[labels[i]]);
            if best.is_none_or(|(_, bd)| d > bd) {
                best = Some((i, d));
            }
        }
        match best {
            Some((i, _)) => labels[i] = empty,
            None => return,
        }
    }
}

/// Renumbers clusters by first appearance so labels do not depend on center order.
fn canonical_relabel(labels: &[usize], k: usize) -> Vec<usize> {
    let mut map = vec![usize::MAX; k];
    let mut next = 0;
    labels
        .iter()
        .map(|&l| {
            if map[l] == usize::MAX {
                map[l] = next;
                next += 1;
            }
            map[l]
        })
        .collect()
}

fn knn_adjacency<T: Real>(points: &[Point3<T>], k: usize) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        let mut others: Vec<(T, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| (dist2(&points[i], &points[j]), j))
            .collect();
        others.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        for &(_, j) in others.iter().take(k) {
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    for nb in &mut adj {
        nb.sort_unstable();
        nb.dedup();
    }
    adj
}

/// Scalp electrodes on the unit sphere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SensorArray<T> {
    positions: Vec<Point3<T>>,
    average_reference: bool,
}

impl<T: Real> SensorArray<T> {
    pub fn from_positions(positions: Vec<Point3<T>>, average_reference: bool) -> Result<Self> {
        if positions.len() < 2 {
            return Err(Error::InvalidMontage(format!("need at least 2 sensors, got {}", positions.len())));
        }
        let tol = T::lit(1e-9);
        for p in &positions {
            if (norm3(p) - T::one()).abs() > tol {
                return Err(Error::InvalidMontage("sensor off the unit sphere".into()));
            }
        }
        for i in 0..positions.len() {
            for j in (i + 1)..positions.len() {
                if dist2(&positions[i], &positions[j]) == T::zero() {
                    return Err(Error::InvalidMontage(format!("sensors {i} and {j} coincide")));
                }
            }
        }
        Ok(Self { positions, average_reference })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Point3<T>] {
        &self.positions
    }

    pub fn average_reference(&self) -> bool {
        self.average_reference
    }

    pub fn with_average_reference(mut self, on: bool) -> Self {
        self.average_reference = on;
        self
    }
}

/// `m` electrodes spread quasi-uniformly over the upper hemisphere, average-referenced.
pub fn build_sensor_array<T: Real>(m: usize) -> Result<SensorArray<T>> {
    if m < 2 {
        return Err(Error::InvalidMontage(format!("need at least 2 sensors, got {m}")));
    }
    let golden = T::PI() * (T::lit(3.0) - T::lit(5.0).sqrt());
    let mf = T::lit(m as f64);
    let positions = (0..m)
        .map(|i| {
            let fi = T::lit(i as f64);
            let z = (fi + T::lit(0.5)) / mf;
            let rho = (T::one() - z * z).sqrt();
            let phi = fi * golden;
            let p = [rho * phi.cos(), rho * phi.sin(), z];
            let r = norm3(&p);
            p.map(|v| v / r)
        })
        .collect();
    SensorArray::from_positions(positions, true)
}

/// Three concentric homogeneous isotropic shells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct HeadModel<T> {
    /// Brain, skull-outer and scalp radii; the scalp radius is 1.
    pub radii: [T; 3],
    pub conductivities: [T; 3],
    pub series_terms: usize,
    pub series_tol: T,
}

impl<T: Real> Default for HeadModel<T> {
    fn default() -> Self {
        Self {
            radii: [T::lit(0.87), T::lit(0.92), T::one()],
            conductivities: [T::lit(0.33), T::lit(0.0042), T::lit(0.33)],
            series_terms: 200,
            series_tol: T::lit(1e-10),
        }
    }
}

impl<T: Real> HeadModel<T> {
    /// A single homogeneous sphere expressed as three shells of equal conductivity.
    pub fn homogeneous(sigma: T) -> Self {
        Self { conductivities: [sigma; 3], ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let [r1, r2, r3] = self.radii;
        if !(r1 > T::zero() && r1 < r2 && r2 < r3) {
            return Err(Error::Geometry("radii must satisfy 0 < r1 < r2 < r3".into()));
        }
        if (r3 - T::one()).abs() > T::lit(1e-12) {
            return Err(Error::Geometry("scalp radius must be 1".into()));
        }
        if self.conductivities.iter().any(|&s| !(s > T::zero())) {
            return Err(Error::Geometry("conductivities must be positive".into()));
        }
        if self.series_terms == 0 {
            return Err(Error::Parameter("series_terms must be at least 1".into()));
        }
        Ok(())
    }

    /// Shell transfer factor for Legendre order `n`: the surface potential of
    /// mode `n` divided by the coefficient of the unbounded-medium source term
    /// evaluated at the scalp radius. Equals `(2n+1)/n` for equal conductivities.
    pub fn transfer_factor(&self, n: usize) -> T {
        let [r1, r2, r3] = self.radii;
        let [s1, s2, s3] = self.conductivities;
        let nf = T::lit(n as f64);
        let np1 = nf + T::one();
        let two_n1 = T::lit((2 * n + 1) as f64);
        // Outer shell, scaled so the decaying coefficient is 1 at r3.
        let mut a = np1 / nf;
        let mut b = T::one();
        // Move (a, b) from radius `from` to radius `to` and cross into conductivity `inner`.
        let step = |from: T, to: T, outer: T, inner: T, a: &mut T, b: &mut T| {
            *a = *a * (to / from).powi(n as i32);
            *b = *b * (from / to).powi(n as i32 + 1);
            let v = *a + *b;
            let d = (nf * *a - np1 * *b) * (outer / inner);
            *a = (np1 * v + d) / two_n1;
            *b = (nf * v - d) / two_n1;
        };
        step(r3, r2, s3, s2, &mut a, &mut b);
        step(r2, r1, s2, s1, &mut a, &mut b);
        // b is the decaying coefficient at r1; the source coefficient is b · r1^(n+1).
        two_n1 / (nf * b) * (r3 / r1).powi(n as i32 + 1)
    }
}

/// Where a lead field came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Provenance {
    /// Computed from a head model; `truncated_columns` counts sources whose
    /// series did not reach the tolerance within the term budget.
    Computed { truncated_columns: usize },
    Loaded,
}

/// The `m × n` matrix relating source amplitudes to sensor potentials.
#[derive(Debug, Clone, PartialEq)]
pub struct LeadField<T> {
    matrix: Array2<T>,
    provenance: Provenance,
}

impl<T: Real> LeadField<T> {
    pub fn from_matrix(matrix: Array2<T>) -> Result<Self> {
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite lead-field entry".into()));
        }
        Ok(Self { matrix, provenance: Provenance::Loaded })
    }

    pub fn matrix(&self) -> &Array2<T> {
        &self.matrix
    }

    pub fn into_matrix(self) -> Array2<T> {
        self.matrix
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn n_sensors(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_sources(&self) -> usize {
        self.matrix.ncols()
    }
}

/// Potential on the scalp sphere at unit direction `sensor` from a dipole of
/// moment `q` at `source`, summed until the term envelope drops below the
/// tolerance. Returns the value and whether the series converged.
fn shell_potential<T: Real>(
    head: &HeadModel<T>,
    factors: &[T],
    sensor: &Point3<T>,
    source: &Point3<T>,
    q: &Point3<T>,
) -> (T, bool) {
    let b = norm3(source);
    let r3 = head.radii[2];
    let four_pi_sigma = T::lit(4.0) * T::PI() * head.conductivities[0];
    let (x, qr, tau) = if b > T::zero() {
        let rhat0 = source.map(|v| v / b);
        let qr = dot3(q, &rhat0);
        let qt = [q[0] - qr * rhat0[0], q[1] - qr * rhat0[1], q[2] - qr * rhat0[2]];
        (dot3(sensor, &rhat0).max(-T::one()).min(T::one()), qr, dot3(sensor, &qt))
    } else {
        // At the center only n = 1 survives: V ∝ q · r̂.
        (T::one(), dot3(q, sensor), T::zero())
    };
    let half = T::lit(0.5);
    // Legendre recurrences for P_n(x) and P'_n(x).
    let (mut p_prev, mut p_cur) = (T::one(), x);
    let (mut dp_prev, mut dp_cur) = (T::zero(), T::one());
    let mut sum = T::zero();
    let mut radial_pow = T::one(); // (b / r3)^(n-1)
    let ratio = b / r3;
    let scale = T::one() / (four_pi_sigma * r3 * r3);
    for n in 1..=head.series_terms {
        let nf = T::lit(n as f64);
        let coef = factors[n - 1] * radial_pow * scale;
        let term = coef * (nf * qr * p_cur + tau * dp_cur);
        sum += term;
        let envelope = coef.abs() * (nf * qr.abs() + half * nf * (nf + T::one()) * tau.abs());
        if envelope <= head.series_tol * sum.abs() || envelope == T::zero() {
            return (sum, true);
        }
        // advance to n + 1
        let p_next = ((T::lit((2 * n + 1) as f64)) * x * p_cur - nf * p_prev) / (nf + T::one());
        let dp_next = dp_prev + T::lit((2 * n + 1) as f64) * p_cur;
        p_prev = p_cur;
        p_cur = p_next;
        dp_prev = dp_cur;
        dp_cur = dp_next;
        radial_pow = radial_pow * ratio;
    }
    (sum, false)
}

/// Lead field of the three-shell model for fixed dipole orientations.
///
/// Columns are average-referenced when the sensor array asks for it.
pub fn compute_leadfield<T: Real>(
    head: &HeadModel<T>,
    space: &SourceSpace<T>,
    sensors: &SensorArray<T>,
    orientations: &[Point3<T>],
) -> Result<LeadField<T>> {
    head.validate()?;
    if orientations.len() != space.len() {
        return Err(Error::Shape(format!(
            "{} orientations for {} sources",
            orientations.len(),
            space.len()
        )));
    }
    let r1 = head.radii[0];
    for (i, p) in space.positions().iter().enumerate() {
        if !(norm3(p) < r1) {
            return Err(Error::Geometry(format!("source {i} is not strictly inside the brain shell")));
        }
    }
    let factors: Vec<T> = (1..=head.series_terms).map(|n| head.transfer_factor(n)).collect();
    let (m, n) = (sensors.len(), space.len());
    let mut matrix = Array2::<T>::zeros((m, n));
    let mut truncated_columns = 0;
    for j in 0..n {
        let mut truncated = false;
        for (i, s) in sensors.positions().iter().enumerate() {
            let (v, ok) = shell_potential(head, &factors, s, &space.positions()[j], &orientations[j]);
            truncated |= !ok;
            matrix[[i, j]] = v;
        }
        if truncated {
            truncated_columns += 1;
        }
        if sensors.average_reference() {
            let mean = matrix.column(j).sum() / T::lit(m as f64);
            matrix.column_mut(j).mapv_inplace(|v| v - mean);
        }
    }
    Ok(LeadField { matrix, provenance: Provenance::Computed { truncated_columns } })
}

/// Graph Laplacian `D − A` of the source-space adjacency, stored by rows.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianOperator<T> {
    rows: Vec<Vec<(usize, T)>>,
}

impl<T: Real> LaplacianOperator<T> {
    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<(usize, T)>] {
        &self.rows
    }

    /// `L x` (also `Lᵀ x`, the operator is symmetric).
    pub fn apply(&self, x: ArrayView1<T>) -> Array1<T> {
        Array1::from_iter(self.rows.iter().map(|row| {
            row.iter().fold(T::zero(), |acc, &(j, w)| acc + w * x[j])
        }))
    }

    /// `LᵀL x`.
    pub fn apply_normal(&self, x: ArrayView1<T>) -> Array1<T> {
        let y = self.apply(x);
        self.apply(y.view())
    }

    pub fn to_dense(&self) -> Array2<T> {
        let n = self.dim();
        let mut out = Array2::zeros((n, n));
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, w) in row {
                out[[i, j]] += w;
            }
        }
        out
    }
}

pub fn graph_laplacian<T: Real>(space: &SourceSpace<T>) -> LaplacianOperator<T> {
    let rows = space
        .adjacency()
        .iter()
        .enumerate()
        .map(|(i, nb)| {
            let mut row: Vec<(usize, T)> = Vec::with_capacity(nb.len() + 1);
            let mut placed = false;
            for &j in nb {
                if !placed && j > i {
                    row.push((i, T::lit(nb.len() as f64)));
                    placed = true;
                }
                row.push((j, -T::one()));
            }
            if !placed {
                row.push((i, T::lit(nb.len() as f64)));
            }
            row
        })
        .collect();
    LaplacianOperator { rows }
}

/// Writes the lead field as CSV: a `m,n` header then `m` rows of `n` values
/// with 17 significant digits.
pub fn save_leadfield<T: Real>(k: &LeadField<T>, path: impl AsRef<Path>) -> Result<()> {
    let (m, n) = k.matrix.dim();
    let mut out = String::with_capacity(m * n * 25 + 16);
    let _ = writeln!(out, "{m},{n}");
    for row in k.matrix.rows() {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            let _ = write!(out, "{:.16e}", v.to_f64_lossy());
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn load_leadfield<T: Real>(path: impl AsRef<Path>) -> Result<LeadField<T>> {
    let text = fs::read_to_string(path)?;
    parse_leadfield(&text)
}

pub fn parse_leadfield<T: Real>(text: &str) -> Result<LeadField<T>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::Parse("missing header".into()))?;
    let dims: Vec<&str> = header.split(',').map(str::trim).collect();
    if dims.len() != 2 {
        return Err(Error::Parse(format!("bad header {header:?}")));
    }
    let parse_dim = |s: &str| s.parse::<usize>().map_err(|_| Error::Parse(format!("bad dimension {s:?}")));
    let (m, n) = (parse_dim(dims[0])?, parse_dim(dims[1])?);
    let mut matrix = Array2::<T>::zeros((m, n));
    let mut rows = 0;
    for (i, line) in lines.enumerate() {
        if i >= m {
            return Err(Error::Parse(format!("more than {m} rows")));
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != n {
            return Err(Error::Parse(format!("row {i} has {} values, expected {n}", fields.len())));
        }
        for (j, f) in fields.iter().enumerate() {
            let v: f64 = f
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad value {f:?} at ({i},{j})")))?;
            if !v.is_finite() {
                return Err(Error::Data(format!("non-finite value at ({i},{j})")));
            }
            matrix[[i, j]] = T::lit(v);
        }
        rows += 1;
    }
    if rows != m {
        return Err(Error::Parse(format!("header says {m} rows, found {rows}")));
    }
    Ok(LeadField { matrix, provenance: Provenance::Loaded })
}
