//! The penalty family `Ψ(J) = Σ_r λ_r Σ_i g_r(|θ_r,i|)` with `θ_r = L_r J`, and
//! the multi-objective vector `(‖V − KJ‖², p_1(θ_1), …, p_R(θ_R))`.

use std::sync::Arc;

use ndarray::{Array1, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::headmodel::LaplacianOperator;
use crate::scalar::Real;

/// Default relative threshold below which a coefficient counts as zero.
pub const DEFAULT_L0_EPSILON: f64 = 1e-6;

/// Scalar transform `g` applied to each `|θ_i|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transform {
    Abs,
    Square,
    /// Indicator of `|θ_i| > ε · max|θ|`.
    L0,
}

/// Structural operator `L` producing `θ = L J`.
#[derive(Debug, Clone)]
pub enum Structure<T> {
    Identity,
    Laplacian(Arc<LaplacianOperator<T>>),
}

impl<T: Real> Structure<T> {
    pub fn apply(&self, j: ArrayView1<T>) -> Array1<T> {
        match self {
            Structure::Identity => j.to_owned(),
            Structure::Laplacian(l) => l.apply(j),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PenaltyTerm<T> {
    pub transform: Transform,
    pub structure: Structure<T>,
    /// Weight used only when the model is scalarized.
    pub lambda: Option<T>,
}

impl<T: Real> PenaltyTerm<T> {
    pub fn new(transform: Transform, structure: Structure<T>) -> Self {
        Self { transform, structure, lambda: None }
    }
}

/// Ordered list of penalty terms; `R = terms.len()`.
#[derive(Debug, Clone)]
pub struct PenaltyModel<T> {
    terms: Vec<PenaltyTerm<T>>,
    l0_epsilon: T,
    name: String,
}

impl<T: Real> PenaltyModel<T> {
    pub fn new(name: impl Into<String>, terms: Vec<PenaltyTerm<T>>, l0_epsilon: T) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::Parameter("a penalty model needs at least one term".into()));
        }
        if !(l0_epsilon > T::zero() && l0_epsilon <= T::lit(1e-2)) {
            return Err(Error::Parameter("l0_epsilon must lie in (0, 1e-2]".into()));
        }
        for t in &terms {
            if let Some(l) = t.lambda {
                if !(l >= T::zero()) {
                    return Err(Error::Parameter("penalty weights must be non-negative".into()));
                }
            }
        }
        Ok(Self { terms, l0_epsilon, name: name.into() })
    }

    /// `‖J‖₀` (count of relatively non-negligible coefficients).
    pub fn l0() -> Self {
        Self::single("l0", Transform::L0, Structure::Identity)
    }

    /// `‖J‖₁`.
    pub fn l1() -> Self {
        Self::single("l1", Transform::Abs, Structure::Identity)
    }

    /// `‖LJ‖₂²` (Ridge-L).
    pub fn l2l(lap: Arc<LaplacianOperator<T>>) -> Self {
        Self::single("l2L", Transform::Square, Structure::Laplacian(lap))
    }

    /// `{‖J‖₁, ‖LJ‖₂²}` (ENET-L).
    pub fn enet_l(lap: Arc<LaplacianOperator<T>>) -> Self {
        Self {
            terms: vec![
                PenaltyTerm::new(Transform::Abs, Structure::Identity),
                PenaltyTerm::new(Transform::Square, Structure::Laplacian(lap)),
            ],
            l0_epsilon: T::lit(DEFAULT_L0_EPSILON),
            name: "enetL".into(),
        }
    }

    /// Looks a model up by its configuration name: `l0 | l1 | l2L | enetL`.
    pub fn from_name(name: &str, lap: Arc<LaplacianOperator<T>>) -> Result<Self> {
        match name {
            "l0" => Ok(Self::l0()),
            "l1" => Ok(Self::l1()),
            "l2L" => Ok(Self::l2l(lap)),
            "enetL" => Ok(Self::enet_l(lap)),
            other => Err(Error::Config(format!("unknown penalty model {other:?}"))),
        }
    }

    fn single(name: &str, transform: Transform, structure: Structure<T>) -> Self {
        Self {
            terms: vec![PenaltyTerm::new(transform, structure)],
            l0_epsilon: T::lit(DEFAULT_L0_EPSILON),
            name: name.into(),
        }
    }

    pub fn with_l0_epsilon(mut self, eps: T) -> Result<Self> {
        self.l0_epsilon = eps;
        Self::new(self.name, self.terms, eps)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn terms(&self) -> &[PenaltyTerm<T>] {
        &self.terms
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn l0_epsilon(&self) -> T {
        self.l0_epsilon
    }

    /// Value of term `r` at `J`.
    pub fn penalty(&self, j: ArrayView1<T>, r: usize) -> T {
        penalty(j, &self.terms[r], self.l0_epsilon)
    }

    /// Weighted sum `Σ λ_r p_r` (terms without a weight count with weight 1).
    pub fn scalarized(&self, j: ArrayView1<T>) -> T {
        self.terms
            .iter()
            .map(|t| t.lambda.unwrap_or(T::one()) * penalty(j, t, self.l0_epsilon))
            .fold(T::zero(), |a, b| a + b)
    }
}

/// Objective vector `(f0, f1, …, fR)`; `f0` is the squared residual.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveVector<T>(pub Vec<T>);

impl<T: Real> ObjectiveVector<T> {
    pub fn f0(&self) -> T {
        self.0[0]
    }

    pub fn penalties(&self) -> &[T] {
        &self.0[1..]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

fn check_shapes<T: Real>(k: ArrayView2<T>, v: ArrayView1<T>, j: ArrayView1<T>) -> Result<()> {
    if k.nrows() != v.len() || k.ncols() != j.len() {
        return Err(Error::Shape(format!(
            "K is {}x{}, V has {} entries, J has {}",
            k.nrows(),
            k.ncols(),
            v.len(),
            j.len()
        )));
    }
    Ok(())
}

/// `‖V − KJ‖₂²`.
pub fn residual_ss<T: Real>(k: ArrayView2<T>, v: ArrayView1<T>, j: ArrayView1<T>) -> Result<T> {
    check_shapes(k, v, j)?;
    let r = &v - &k.dot(&j);
    Ok(r.dot(&r))
}

/// `Σ_i g(|θ_i|)` with `θ = L J`.
pub fn penalty<T: Real>(j: ArrayView1<T>, term: &PenaltyTerm<T>, l0_epsilon: T) -> T {
    let theta = term.structure.apply(j);
    match term.transform {
        Transform::Abs => theta.iter().fold(T::zero(), |a, &x| a + x.abs()),
        Transform::Square => theta.dot(&theta),
        Transform::L0 => l0_count(theta.view(), l0_epsilon),
    }
}

/// Number of entries with `|x| > ε · max|x|`; zero for the zero vector.
pub fn l0_count<T: Real>(x: ArrayView1<T>, l0_epsilon: T) -> T {
    T::lit(l0_support(x, l0_epsilon).len() as f64)
}

/// Indices with `|x| > ε · max|x|`.
pub fn l0_support<T: Real>(x: ArrayView1<T>, l0_epsilon: T) -> Vec<usize> {
    let max = x.iter().fold(T::zero(), |m, &v| m.max(v.abs()));
    if max == T::zero() {
        return Vec::new();
    }
    let thr = l0_epsilon * max;
    x.iter().enumerate().filter(|(_, v)| v.abs() > thr).map(|(i, _)| i).collect()
}

/// The multi-objective vector; weights are ignored.
pub fn evaluate<T: Real>(
    k: ArrayView2<T>,
    v: ArrayView1<T>,
    j: ArrayView1<T>,
    model: &PenaltyModel<T>,
) -> Result<ObjectiveVector<T>> {
    let mut out = Vec::with_capacity(model.n_terms() + 1);
    out.push(residual_ss(k, v, j)?);
    for r in 0..model.n_terms() {
        out.push(model.penalty(j, r));
    }
    Ok(ObjectiveVector(out))
}
