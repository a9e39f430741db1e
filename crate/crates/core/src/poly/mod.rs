//! Sparse multivariate polynomials over indexed variable families.
//!
//! Variables are `x[i]` (state) and `rho[i]` (difference). Monomials are kept
//! in graded lexicographic order and zero coefficients are never stored, so
//! structural equality is polynomial equality.

mod format;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use format::parse_polynomial;

/// Variable family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    X,
    Rho,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::X => "x",
            Family::Rho => "rho",
        }
    }
}

/// An indexed variable such as `x[3]` or `rho[0]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Var {
    pub family: Family,
    pub index: u32,
}

impl Var {
    pub fn x(index: u32) -> Self {
        Var { family: Family::X, index }
    }

    pub fn rho(index: u32) -> Self {
        Var { family: Family::Rho, index }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]", self.family.name(), self.index)
    }
}

/// Product of variable powers, sorted by variable with positive exponents.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Monomial(Vec<(Var, u32)>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(Vec::new())
    }

    pub fn var(v: Var) -> Self {
        Monomial(vec![(v, 1)])
    }

    /// Builds a monomial from arbitrary `(var, exponent)` factors.
    pub fn from_factors<I: IntoIterator<Item = (Var, u32)>>(factors: I) -> Self {
        let mut acc: BTreeMap<Var, u32> = BTreeMap::new();
        for (v, e) in factors {
            if e > 0 {
                *acc.entry(v).or_default() += e;
            }
        }
        Monomial(acc.into_iter().collect())
    }

    pub fn factors(&self) -> &[(Var, u32)] {
        &self.0
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|(_, e)| e).sum()
    }

    pub fn exponent(&self, v: Var) -> u32 {
        self.0.binary_search_by(|(w, _)| w.cmp(&v)).map_or(0, |i| self.0[i].1)
    }

    pub fn contains_family(&self, family: Family) -> bool {
        self.0.iter().any(|(v, _)| v.family == family)
    }

    fn mul(&self, other: &Monomial) -> Monomial {
        let mut out = Vec::with_capacity(self.0.len() + other.0.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].0.cmp(&other.0[j].0) {
                Ordering::Less => {
                    out.push(self.0[i]);
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(other.0[j]);
                    j += 1;
                }
                Ordering::Equal => {
                    out.push((self.0[i].0, self.0[i].1 + other.0[j].1));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.0[i..]);
        out.extend_from_slice(&other.0[j..]);
        Monomial(out)
    }

    /// `∂/∂v` as `(multiplier, monomial)`, or `None` if `v` is absent.
    fn derivative(&self, v: Var) -> Option<(u32, Monomial)> {
        let i = self.0.binary_search_by(|(w, _)| w.cmp(&v)).ok()?;
        let e = self.0[i].1;
        let mut factors = self.0.clone();
        if e == 1 {
            factors.remove(i);
        } else {
            factors[i].1 -= 1;
        }
        Some((e, Monomial(factors)))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Monomial {
    /// Graded lexicographic: total degree first, then the factor sequence.
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree().cmp(&other.degree()).then_with(|| self.0.cmp(&other.0))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, (v, e)) in self.0.iter().enumerate() {
            if k > 0 {
                f.write_str("*")?;
            }
            if *e == 1 {
                write!(f, "{v}")?;
            } else {
                write!(f, "{v}^{e}")?;
            }
        }
        Ok(())
    }
}

/// Sparse polynomial with real coefficients over indexed variables.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IndexedPolynomial {
    terms: BTreeMap<Monomial, f64>,
}

impl IndexedPolynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self::from_terms([(Monomial::one(), c)])
    }

    pub fn var(v: Var) -> Self {
        Self::from_terms([(Monomial::var(v), 1.0)])
    }

    pub fn x(index: u32) -> Self {
        Self::var(Var::x(index))
    }

    pub fn rho(index: u32) -> Self {
        Self::var(Var::rho(index))
    }

    pub fn from_terms<I: IntoIterator<Item = (Monomial, f64)>>(terms: I) -> Self {
        let mut p = Self::zero();
        for (m, c) in terms {
            p.add_term(m, c);
        }
        p
    }

    fn add_term(&mut self, m: Monomial, c: f64) {
        if c == 0.0 {
            return;
        }
        let entry = self.terms.entry(m);
        match entry {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let s = *o.get() + c;
                if s == 0.0 {
                    o.remove();
                } else {
                    *o.get_mut() = s;
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Terms in ascending graded-lex order.
    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, f64)> {
        self.terms.iter().map(|(m, c)| (m, *c))
    }

    pub fn coefficient(&self, m: &Monomial) -> f64 {
        self.terms.get(m).copied().unwrap_or(0.0)
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn variables(&self) -> BTreeSet<Var> {
        self.terms.keys().flat_map(|m| m.0.iter().map(|(v, _)| *v)).collect()
    }

    pub fn min_index(&self) -> Option<u32> {
        self.variables().iter().map(|v| v.index).min()
    }

    pub fn max_index(&self) -> Option<u32> {
        self.variables().iter().map(|v| v.index).max()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::from_terms(self.terms.iter().map(|(m, c)| (m.clone(), c * s)))
    }

    /// Exact-arithmetic combination: `add`, `mul`, or `scale`.
    pub fn combine(&self, op: Combine<'_>) -> Self {
        match op {
            Combine::Add(q) => self + q,
            Combine::Mul(q) => self * q,
            Combine::Scale(s) => self.scale(s),
        }
    }

    pub fn pow(&self, n: u32) -> Self {
        let mut out = Self::constant(1.0);
        for _ in 0..n {
            out = &out * self;
        }
        out
    }

    pub fn derivative(&self, v: Var) -> Self {
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            if let Some((e, dm)) = m.derivative(v) {
                out.add_term(dm, c * e as f64);
            }
        }
        out
    }

    /// Lie derivative `Σ_v (∂p/∂v) · f(v)` along a polynomial vector field.
    pub fn lie_derivative(&self, field: &PolyVectorField) -> Result<Self> {
        let mut out = Self::zero();
        for v in self.variables() {
            if v.index >= field.truncation {
                return Err(Error::TruncationOverflow(format!(
                    "{v} outside truncation {}",
                    field.truncation
                )));
            }
            let row =
                field.row(v).ok_or_else(|| Error::UnboundVariable(format!("{v} has no row in the field")))?;
            out = &out + &(&self.derivative(v) * row);
        }
        Ok(out)
    }

    /// Direct sum over monomials; every variable must be bound.
    pub fn evaluate<F: Fn(Var) -> Option<f64>>(&self, assignment: F) -> Result<f64> {
        let mut sum = 0.0;
        for (m, c) in &self.terms {
            let mut t = *c;
            for (v, e) in &m.0 {
                let val = assignment(*v).ok_or_else(|| Error::UnboundVariable(v.to_string()))?;
                t *= val.powi(*e as i32);
            }
            sum += t;
        }
        Ok(sum)
    }

    pub fn evaluate_map(&self, assignment: &HashMap<Var, f64>) -> Result<f64> {
        self.evaluate(|v| assignment.get(&v).copied())
    }

    /// Flattens to a slot-indexed form for repeated evaluation on state
    /// vectors; `slot` maps each variable to an index into the value slice.
    pub fn compile<F: Fn(Var) -> Option<usize>>(&self, slot: F) -> Result<CompiledPolynomial> {
        let mut terms = Vec::with_capacity(self.terms.len());
        let mut max_slot = 0;
        for (m, c) in &self.terms {
            let mut factors = Vec::with_capacity(m.0.len());
            for (v, e) in &m.0 {
                let s = slot(*v).ok_or_else(|| Error::UnboundVariable(v.to_string()))?;
                max_slot = max_slot.max(s + 1);
                factors.push((s, *e as i32));
            }
            terms.push((*c, factors));
        }
        Ok(CompiledPolynomial { terms, min_len: max_slot })
    }

    /// Human-readable dump: one `coef * x[3]*rho[2]^2` term per line.
    pub fn to_text(&self) -> String {
        format::to_text(self)
    }

    /// Every coefficient is an integer over a power of two small enough to
    /// be represented exactly.
    pub fn has_dyadic_coefficients(&self) -> bool {
        self.terms.values().all(|c| is_exact_dyadic(*c))
    }
}

fn is_exact_dyadic(c: f64) -> bool {
    if !c.is_finite() {
        return false;
    }
    // Integer part bounded so further integer arithmetic stays exact, and
    // at most 2^-30 granularity.
    let scaled = c * (1u64 << 30) as f64;
    scaled.fract() == 0.0 && c.abs() < 2f64.powi(40)
}

/// Argument to [`IndexedPolynomial::combine`].
#[derive(Debug, Clone, Copy)]
pub enum Combine<'a> {
    Add(&'a IndexedPolynomial),
    Mul(&'a IndexedPolynomial),
    Scale(f64),
}

impl fmt::Display for IndexedPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

impl Add for &IndexedPolynomial {
    type Output = IndexedPolynomial;
    fn add(self, rhs: &IndexedPolynomial) -> IndexedPolynomial {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), *c);
        }
        out
    }
}

impl Sub for &IndexedPolynomial {
    type Output = IndexedPolynomial;
    fn sub(self, rhs: &IndexedPolynomial) -> IndexedPolynomial {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), -*c);
        }
        out
    }
}

impl Mul for &IndexedPolynomial {
    type Output = IndexedPolynomial;
    fn mul(self, rhs: &IndexedPolynomial) -> IndexedPolynomial {
        let mut out = IndexedPolynomial::zero();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &rhs.terms {
                out.add_term(m1.mul(m2), c1 * c2);
            }
        }
        out
    }
}

impl Neg for &IndexedPolynomial {
    type Output = IndexedPolynomial;
    fn neg(self) -> IndexedPolynomial {
        self.scale(-1.0)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for IndexedPolynomial {
            type Output = IndexedPolynomial;
            fn $m(self, rhs: IndexedPolynomial) -> IndexedPolynomial {
                (&self).$m(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

/// Slot-indexed polynomial for evaluation in the integrator hot loop.
#[derive(Debug, Clone)]
pub struct CompiledPolynomial {
    terms: Vec<(f64, Vec<(usize, i32)>)>,
    min_len: usize,
}

impl CompiledPolynomial {
    /// Smallest value-slice length the polynomial can be evaluated on.
    pub fn min_len(&self) -> usize {
        self.min_len
    }

    pub fn eval(&self, values: &[f64]) -> Result<f64> {
        if values.len() < self.min_len {
            return Err(Error::UnboundVariable(format!(
                "slot {} beyond state of length {}",
                self.min_len - 1,
                values.len()
            )));
        }
        Ok(self.terms.iter().map(|(c, fs)| fs.iter().fold(*c, |acc, &(s, e)| acc * values[s].powi(e))).sum())
    }
}

/// Polynomial vector field `v ↦ dv/dt` on a truncation of dimension `M`.
#[derive(Debug, Clone)]
pub struct PolyVectorField {
    rows: BTreeMap<Var, IndexedPolynomial>,
    truncation: u32,
}

impl PolyVectorField {
    /// Every row key and every variable referenced by a right-hand side must
    /// have index `< truncation`.
    pub fn new<I: IntoIterator<Item = (Var, IndexedPolynomial)>>(rows: I, truncation: u32) -> Result<Self> {
        let rows: BTreeMap<Var, IndexedPolynomial> = rows.into_iter().collect();
        for (v, rhs) in &rows {
            if v.index >= truncation {
                return Err(Error::TruncationOverflow(format!("row {v} ≥ {truncation}")));
            }
            if let Some(w) = rhs.variables().into_iter().find(|w| w.index >= truncation) {
                return Err(Error::TruncationOverflow(format!("row {v} references {w} ≥ {truncation}")));
            }
        }
        Ok(Self { rows, truncation })
    }

    pub fn row(&self, v: Var) -> Option<&IndexedPolynomial> {
        self.rows.get(&v)
    }

    pub fn truncation(&self) -> u32 {
        self.truncation
    }

    pub fn rows(&self) -> impl Iterator<Item = (&Var, &IndexedPolynomial)> {
        self.rows.iter()
    }
}
