//! Finitely supported non-negative measures and Markov kernels.
//!
//! Lattice operations (`meet`, `subtract`), pushforward, and kernel
//! composition on product paths. All operations are pure; supports are kept
//! canonical by dropping weights below [`PRUNE_THRESHOLD`].

use std::collections::HashMap;
use std::hash::Hash;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Weights below this value are removed after every operation.
pub const PRUNE_THRESHOLD: f64 = 1e-15;

/// Mass tolerance for a probability measure.
pub const MASS_TOLERANCE: f64 = 1e-12;

/// Non-negative weighted point set with pairwise distinct support points.
#[derive(Debug, Clone)]
pub struct DiscreteMeasure<P> {
    support: Vec<P>,
    weights: Vec<f64>,
    index: HashMap<P, usize>,
}

impl<P: Clone + Eq + Hash> Default for DiscreteMeasure<P> {
    fn default() -> Self {
        Self::empty()
    }
}

impl<P: Clone + Eq + Hash> DiscreteMeasure<P> {
    pub fn empty() -> Self {
        Self { support: Vec::new(), weights: Vec::new(), index: HashMap::new() }
    }

    pub fn dirac(p: P) -> Self {
        Self::from_pairs([(p, 1.0)])
    }

    /// Builds a measure from `(point, weight)` pairs. Repeated points have
    /// their weights summed; negative or non-finite weights panic.
    pub fn from_pairs<I: IntoIterator<Item = (P, f64)>>(pairs: I) -> Self {
        let mut m = Self::empty();
        for (p, w) in pairs {
            assert!(w.is_finite() && w >= 0.0, "weights must be finite and non-negative");
            m.add_weight(p, w);
        }
        m.prune();
        m
    }

    /// Uniform probability measure on the given distinct points.
    pub fn uniform<I: IntoIterator<Item = P>>(points: I) -> Self {
        let pts: Vec<P> = points.into_iter().collect();
        let w = 1.0 / pts.len() as f64;
        Self::from_pairs(pts.into_iter().map(|p| (p, w)))
    }

    fn add_weight(&mut self, p: P, w: f64) {
        match self.index.get(&p) {
            Some(&i) => self.weights[i] += w,
            None => {
                self.index.insert(p.clone(), self.support.len());
                self.support.push(p);
                self.weights.push(w);
            }
        }
    }

    fn prune(&mut self) {
        if self.weights.iter().all(|&w| w >= PRUNE_THRESHOLD) {
            return;
        }
        let pairs: Vec<(P, f64)> = self
            .support
            .drain(..)
            .zip(self.weights.drain(..))
            .filter(|(_, w)| *w >= PRUNE_THRESHOLD)
            .collect();
        self.index.clear();
        for (p, w) in pairs {
            self.index.insert(p.clone(), self.support.len());
            self.support.push(p);
            self.weights.push(w);
        }
    }

    /// Weight at `p` (zero off the support).
    pub fn weight(&self, p: &P) -> f64 {
        self.index.get(p).map_or(0.0, |&i| self.weights[i])
    }

    pub fn support(&self) -> &[P] {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (&P, f64)> {
        self.support.iter().zip(self.weights.iter().copied())
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn is_probability(&self) -> bool {
        (self.mass() - 1.0).abs() <= MASS_TOLERANCE
    }

    /// Mass of the subset `a` (points outside the support contribute zero).
    pub fn mass_of(&self, a: &[P]) -> f64 {
        a.iter().map(|p| self.weight(p)).sum()
    }

    fn union_points<'a>(&'a self, other: &'a Self) -> impl Iterator<Item = &'a P> {
        self.support.iter().chain(other.support.iter().filter(|p| !self.index.contains_key(*p)))
    }

    /// Pointwise minimum `μ ∧ ν`.
    pub fn meet(&self, other: &Self) -> Self {
        let pairs: Vec<(P, f64)> =
            self.support.iter().map(|p| (p.clone(), self.weight(p).min(other.weight(p)))).collect();
        Self::from_pairs(pairs)
    }

    /// Pointwise clamped difference `μ ∖ ν`.
    pub fn subtract(&self, other: &Self) -> Self {
        let pairs: Vec<(P, f64)> =
            self.support.iter().map(|p| (p.clone(), (self.weight(p) - other.weight(p)).max(0.0))).collect();
        Self::from_pairs(pairs)
    }

    /// Pointwise sum.
    pub fn add(&self, other: &Self) -> Self {
        let pairs: Vec<(P, f64)> =
            self.union_points(other).map(|p| (p.clone(), self.weight(p) + other.weight(p))).collect();
        Self::from_pairs(pairs)
    }

    /// `true` if `self(p) ≤ other(p) + tol` at every point.
    pub fn le_with_tol(&self, other: &Self, tol: f64) -> bool {
        self.union_points(other).all(|p| self.weight(p) <= other.weight(p) + tol)
    }

    /// Pointwise equality within `tol`.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.union_points(other).all(|p| (self.weight(p) - other.weight(p)).abs() <= tol)
    }

    /// Pushforward `f*μ`. Colliding images have their weights summed; a
    /// point without image is an error.
    pub fn pushforward<Q, F>(&self, f: F) -> Result<DiscreteMeasure<Q>>
    where
        Q: Clone + Eq + Hash,
        F: Fn(&P) -> Option<Q>,
    {
        let mut out = DiscreteMeasure::empty();
        for (p, w) in self.iter() {
            let q = f(p).ok_or(Error::PartialMap)?;
            out.add_weight(q, w);
        }
        out.prune();
        Ok(out)
    }

    pub fn to_pairs(&self) -> Vec<(P, f64)> {
        self.iter().map(|(p, w)| (p.clone(), w)).collect()
    }
}

impl<P: Clone + Eq + Hash> PartialEq for DiscreteMeasure<P> {
    /// Exact pointwise equality of weights, ignoring support order.
    fn eq(&self, other: &Self) -> bool {
        self.len() == other.len() && self.iter().all(|(p, w)| other.weight(p) == w)
    }
}

impl<P: Clone + Eq + Hash + Serialize> Serialize for DiscreteMeasure<P> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let pairs: Vec<(&P, f64)> = self.iter().collect();
        pairs.serialize(s)
    }
}

impl<'de, P: Clone + Eq + Hash + DeserializeOwned> Deserialize<'de> for DiscreteMeasure<P> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let pairs: Vec<(P, f64)> = Vec::deserialize(d)?;
        if pairs.iter().any(|(_, w)| !(w.is_finite() && *w >= 0.0)) {
            return Err(serde::de::Error::custom("negative or non-finite weight"));
        }
        Ok(Self::from_pairs(pairs))
    }
}

/// Markov kernel: each source point maps to a probability measure.
#[derive(Debug, Clone)]
pub struct DiscreteKernel<P> {
    rows: HashMap<P, DiscreteMeasure<P>>,
}

impl<P: Clone + Eq + Hash> DiscreteKernel<P> {
    /// Builds a kernel; every row must be a probability measure.
    pub fn new<I: IntoIterator<Item = (P, DiscreteMeasure<P>)>>(rows: I) -> Result<Self> {
        let rows: HashMap<P, DiscreteMeasure<P>> = rows.into_iter().collect();
        if let Some((_, m)) = rows.iter().find(|(_, m)| !m.is_probability()) {
            return Err(Error::KernelDomainMismatch(format!(
                "row is not a probability measure (mass {})",
                m.mass()
            )));
        }
        Ok(Self { rows })
    }

    pub fn row(&self, p: &P) -> Option<&DiscreteMeasure<P>> {
        self.rows.get(p)
    }

    pub fn contains(&self, p: &P) -> bool {
        self.rows.contains_key(p)
    }
}

/// Two-step composition `(RQ)_y` as a measure on pairs `(z, w)`:
/// `(RQ)_y({(z, w)}) = Q_y(z) · R_z(w)`.
pub fn compose<P: Clone + Eq + Hash>(
    r: &DiscreteKernel<P>,
    q: &DiscreteKernel<P>,
    y: &P,
) -> Result<DiscreteMeasure<(P, P)>> {
    let qy = q.row(y).ok_or_else(|| Error::KernelDomainMismatch("start point outside q".into()))?;
    let mut pairs = Vec::new();
    for (z, wz) in qy.iter() {
        let rz = r.row(z).ok_or_else(|| Error::KernelDomainMismatch("q reaches a point outside r".into()))?;
        for (w, ww) in rz.iter() {
            pairs.push(((z.clone(), w.clone()), wz * ww));
        }
    }
    Ok(DiscreteMeasure::from_pairs(pairs))
}

/// Both sides of the overlap lower bound for two equivalent probability
/// measures `μ2 = 𝒟 μ1`: returns `((μ1∧μ2)(A), 1 − ε1 − √ε2)` where
/// `ε1 = 1 − μ1(A)` and `ε2 = ∫_A (1 − 𝒟)² dμ1`.
pub fn overlap_lower_bound<P: Clone + Eq + Hash>(
    mu1: &DiscreteMeasure<P>,
    mu2: &DiscreteMeasure<P>,
    a: &[P],
) -> Result<(f64, f64)> {
    let a = dedup(a);
    let mut eps2 = 0.0;
    for p in &a {
        let (w1, w2) = (mu1.weight(p), mu2.weight(p));
        if w1 == 0.0 {
            if w2 > 0.0 {
                return Err(Error::NotAbsolutelyContinuous("μ2 charges a μ1-null point".into()));
            }
            continue;
        }
        let dens = w2 / w1;
        eps2 += (1.0 - dens).powi(2) * w1;
    }
    let lhs = mu1.meet(mu2).mass_of(&a);
    let eps1 = 1.0 - mu1.mass_of(&a);
    Ok((lhs, 1.0 - eps1 - eps2.sqrt()))
}

/// Quadratic overlap bound: with `c = ∫_A max(1, 𝒟⁻²) dμ1`, returns
/// `((μ1∧μ2)(A), μ1(A)² / (4c), c)`. Requires `μ2 > 0` wherever `μ1 > 0`
/// on `A`.
///
/// The density is clipped at 1 because the bound with the raw `∫_A 𝒟⁻² dμ1`
/// fails where `𝒟 > 1` (one atom of mass `m` with `𝒟 = 3` has overlap `m`
/// but right-hand side `9m/4`). Both constants agree when `𝒟 ≤ 1` on `A`.
pub fn inverse_density_bound<P: Clone + Eq + Hash>(
    mu1: &DiscreteMeasure<P>,
    mu2: &DiscreteMeasure<P>,
    a: &[P],
) -> Result<(f64, f64, f64)> {
    let a = dedup(a);
    let mut c = 0.0;
    for p in &a {
        let (w1, w2) = (mu1.weight(p), mu2.weight(p));
        if w1 == 0.0 {
            continue;
        }
        if w2 == 0.0 {
            return Err(Error::NotAbsolutelyContinuous("density vanishes on a μ1-charged point".into()));
        }
        let dens = (w2 / w1).min(1.0);
        c += w1 / (dens * dens);
    }
    let lhs = mu1.meet(mu2).mass_of(&a);
    let m1 = mu1.mass_of(&a);
    let rhs = if c > 0.0 { m1 * m1 / (4.0 * c) } else { 0.0 };
    Ok((lhs, rhs, c))
}

fn dedup<P: Clone + Eq + Hash>(a: &[P]) -> Vec<P> {
    let mut seen = std::collections::HashSet::new();
    a.iter().filter(|p| seen.insert((*p).clone())).cloned().collect()
}
