//! Pareto dominance, non-dominated sorting, crowding distance and the
//! NSGA-II reproduction and survival operators.

use ndarray::{Array1, ArrayView1};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::objectives::ObjectiveVector;
use crate::scalar::Real;

/// One candidate solution.
///
/// `coeffs` is either a full-length current density or, inside a
/// coevolution step, the projection onto one variable group.
#[derive(Debug, Clone, PartialEq)]
pub struct Individual<T> {
    pub coeffs: Array1<T>,
    /// ROI the individual's lineage started from.
    pub roi: usize,
    /// Cached objectives; `None` after any change to `coeffs`.
    pub objectives: Option<ObjectiveVector<T>>,
    pub rank: usize,
    pub crowding: T,
    /// Index of the population member this one descends from.
    pub parent: Option<usize>,
}

impl<T: Real> Individual<T> {
    pub fn new(coeffs: Array1<T>, roi: usize) -> Self {
        Self { coeffs, roi, objectives: None, rank: usize::MAX, crowding: T::zero(), parent: None }
    }

    pub fn with_objectives(mut self, objectives: ObjectiveVector<T>) -> Self {
        self.objectives = Some(objectives);
        self
    }

    pub fn objectives(&self) -> Result<&ObjectiveVector<T>> {
        self.objectives
            .as_ref()
            .ok_or_else(|| Error::State("individual has not been evaluated".into()))
    }

    pub fn is_evaluated(&self) -> bool {
        self.objectives.is_some()
    }

    pub fn invalidate(&mut self) {
        self.objectives = None;
        self.rank = usize::MAX;
        self.crowding = T::zero();
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Population<T> {
    pub members: Vec<Individual<T>>,
    pub generation: usize,
}

impl<T: Real> Population<T> {
    pub fn new(members: Vec<Individual<T>>) -> Self {
        Self { members, generation: 0 }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// `u ≼ v`: no worse in every component, strictly better in one.
pub fn dominates<T: Real>(u: &[T], v: &[T]) -> Result<bool> {
    if u.len() != v.len() {
        return Err(Error::Shape(format!("objective vectors of length {} and {}", u.len(), v.len())));
    }
    Ok(dominates_unchecked(u, v))
}

#[inline]
fn dominates_unchecked<T: Real>(u: &[T], v: &[T]) -> bool {
    let mut strict = false;
    for (a, b) in u.iter().zip(v) {
        if a > b {
            return false;
        }
        if a < b {
            strict = true;
        }
    }
    strict
}

/// Fast non-dominated sort over raw objective vectors; returns fronts of indices.
pub fn non_dominated_fronts<T: Real>(objs: &[&[T]]) -> Vec<Vec<usize>> {
    let n = objs.len();
    let mut dominated_by_count = vec![0usize; n];
    let mut dominates_list: Vec<Vec<usize>> = vec![Vec::new(); n];
    for p in 0..n {
        for q in (p + 1)..n {
            if dominates_unchecked(objs[p], objs[q]) {
                dominates_list[p].push(q);
                dominated_by_count[q] += 1;
            } else if dominates_unchecked(objs[q], objs[p]) {
                dominates_list[q].push(p);
                dominated_by_count[p] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| dominated_by_count[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &p in &current {
            for &q in &dominates_list[p] {
                dominated_by_count[q] -= 1;
                if dominated_by_count[q] == 0 {
                    next.push(q);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    fronts
}

/// Sorts a population into fronts and writes each member's rank.
pub fn non_dominated_sort<T: Real>(members: &mut [Individual<T>]) -> Result<Vec<Vec<usize>>> {
    let fronts = {
        let objs: Vec<&[T]> = members
            .iter()
            .map(|m| m.objectives().map(|o| o.values()))
            .collect::<Result<_>>()?;
        if let Some(w) = objs.windows(2).find(|w| w[0].len() != w[1].len()) {
            return Err(Error::Shape(format!("mixed objective lengths {} and {}", w[0].len(), w[1].len())));
        }
        non_dominated_fronts(&objs)
    };
    for (rank, front) in fronts.iter().enumerate() {
        for &i in front {
            members[i].rank = rank;
        }
    }
    Ok(fronts)
}

/// Crowding distance of each member of `front`, in the same order.
///
/// Boundary members of every objective get `+∞`; interior members sum the
/// neighbor gaps normalized by the objective range. A zero range adds nothing.
pub fn crowding_distance<T: Real>(front: &[usize], objs: &[&[T]]) -> Vec<T> {
    let len = front.len();
    let mut dist = vec![T::zero(); len];
    if len == 0 {
        return dist;
    }
    if len <= 2 {
        return vec![T::infinity(); len];
    }
    let m = objs[front[0]].len();
    let mut order: Vec<usize> = (0..len).collect();
    for k in 0..m {
        order.sort_by(|&a, &b| {
            objs[front[a]][k]
                .partial_cmp(&objs[front[b]][k])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        let lo = objs[front[order[0]]][k];
        let hi = objs[front[order[len - 1]]][k];
        dist[order[0]] = T::infinity();
        dist[order[len - 1]] = T::infinity();
        let range = hi - lo;
        if !(range > T::zero()) {
            continue;
        }
        for w in 1..(len - 1) {
            let gap = objs[front[order[w + 1]]][k] - objs[front[order[w - 1]]][k];
            dist[order[w]] += gap / range;
        }
    }
    dist
}

/// Ranks the population and fills in crowding distances front by front.
pub fn rank_and_crowd<T: Real>(members: &mut [Individual<T>]) -> Result<Vec<Vec<usize>>> {
    let fronts = non_dominated_sort(members)?;
    let crowd: Vec<(usize, T)> = {
        let objs: Vec<&[T]> = members.iter().map(|m| m.objectives.as_ref().unwrap().values()).collect();
        fronts
            .iter()
            .flat_map(|f| f.iter().copied().zip(crowding_distance(f, &objs)))
            .collect()
    };
    for (i, c) in crowd {
        members[i].crowding = c;
    }
    Ok(fronts)
}

/// Crowded-comparison: lower rank wins, then larger crowding.
#[inline]
pub fn crowded_better<T: Real>(a: &Individual<T>, b: &Individual<T>) -> bool {
    a.rank < b.rank || (a.rank == b.rank && a.crowding > b.crowding)
}

/// Two uniform draws with replacement; returns the index of the winner
/// (the first draw on a full tie).
pub fn binary_tournament<T: Real, R: Rng + ?Sized>(members: &[Individual<T>], rng: &mut R) -> usize {
    let a = rng.random_range(0..members.len());
    let b = rng.random_range(0..members.len());
    if crowded_better(&members[b], &members[a]) {
        b
    } else {
        a
    }
}

/// `d = α p1 + (1 − α) p2` for a given `α`.
pub fn crossover_with_alpha<T: Real>(p1: &Individual<T>, p2: &Individual<T>, alpha: T) -> Individual<T> {
    let beta = T::one() - alpha;
    let coeffs = ndarray::Zip::from(&p1.coeffs)
        .and(&p2.coeffs)
        .map_collect(|&a, &b| alpha * a + beta * b);
    Individual { coeffs, roi: p1.roi, objectives: None, rank: usize::MAX, crowding: T::zero(), parent: p1.parent }
}

/// Arithmetic crossover with `α ~ N(0, 1)` drawn once per child.
pub fn arithmetic_crossover<T: Real, R: Rng + ?Sized>(
    p1: &Individual<T>,
    p2: &Individual<T>,
    rng: &mut R,
) -> Individual<T> {
    let alpha = T::lit(rng.sample::<f64, _>(StandardNormal));
    crossover_with_alpha(p1, p2, alpha)
}

/// `d ← d + σ · N(0, 1)` on every nonzero coordinate.
pub fn gaussian_step_mutation<T: Real, R: Rng + ?Sized>(ind: &Individual<T>, sigma: T, rng: &mut R) -> Individual<T> {
    let mut out = ind.clone();
    out.invalidate();
    for c in out.coeffs.iter_mut() {
        if *c != T::zero() {
            let z = T::lit(rng.sample::<f64, _>(StandardNormal));
            *c += sigma * z;
        }
    }
    out
}

/// Clamps every coefficient into `[-bound, bound]`.
pub fn clamp_box<T: Real>(ind: &mut Individual<T>, bound: T) {
    ind.coeffs.mapv_inplace(|v| v.max(-bound).min(bound));
}

/// Keeps the best `n` members: whole fronts in rank order, the last admitted
/// front cut by descending crowding (stable on input order).
pub fn truncate_population<T: Real>(mut members: Vec<Individual<T>>, n: usize) -> Result<Vec<Individual<T>>> {
    if n > members.len() {
        return Err(Error::Shape(format!("cannot keep {n} of {} members", members.len())));
    }
    let fronts = rank_and_crowd(&mut members)?;
    let mut keep: Vec<usize> = Vec::with_capacity(n);
    for front in fronts {
        if keep.len() + front.len() <= n {
            keep.extend(front);
        } else {
            let mut f = front;
            f.sort_by(|&a, &b| {
                members[b]
                    .crowding
                    .partial_cmp(&members[a].crowding)
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(a.cmp(&b))
            });
            let room = n - keep.len();
            keep.extend(f.into_iter().take(room));
        }
        if keep.len() == n {
            break;
        }
    }
    let mut slots: Vec<Option<Individual<T>>> = members.into_iter().map(Some).collect();
    Ok(keep.into_iter().map(|i| slots[i].take().unwrap()).collect())
}

/// Relative tolerance under which two members count as copies.
pub const DUPLICATE_TOL: f64 = 1e-8;

fn close<T: Real>(x: ArrayView1<T>, y: ArrayView1<T>) -> bool {
    if x.len() != y.len() {
        return false;
    }
    let scale = x.iter().chain(y).fold(T::zero(), |m, v| m.max(v.abs()));
    let tol = T::lit(DUPLICATE_TOL) * scale;
    x.iter().zip(y).all(|(a, b)| (*a - *b).abs() <= tol)
}

/// True for members whose coefficients and objectives agree to
/// [`DUPLICATE_TOL`] relative to their largest magnitude.
pub fn is_duplicate<T: Real>(a: &Individual<T>, b: &Individual<T>) -> bool {
    let objs = match (&a.objectives, &b.objectives) {
        (Some(x), Some(y)) => close(ArrayView1::from(&x.0[..]), ArrayView1::from(&y.0[..])),
        (None, None) => true,
        _ => false,
    };
    objs && close(a.coeffs.view(), b.coeffs.view())
}

/// Reduces `Pop_T` (exactly `2N` members) to `N`. Exact copies of an earlier
/// member only fill slots the distinct members leave open, so a converged
/// individual cannot crowd out the rest of the front.
pub fn environmental_selection<T: Real>(pop_t: Vec<Individual<T>>, n: usize) -> Result<Vec<Individual<T>>> {
    if pop_t.len() != 2 * n {
        return Err(Error::Shape(format!("expected {} members, got {}", 2 * n, pop_t.len())));
    }
    let mut distinct: Vec<Individual<T>> = Vec::with_capacity(pop_t.len());
    let mut copies = Vec::new();
    for m in pop_t {
        if distinct.iter().any(|d| is_duplicate(d, &m)) {
            copies.push(m);
        } else {
            distinct.push(m);
        }
    }
    if distinct.len() >= n {
        return truncate_population(distinct, n);
    }
    let room = n - distinct.len();
    distinct.extend(copies.into_iter().take(room));
    rank_and_crowd(&mut distinct)?;
    Ok(distinct)
}
