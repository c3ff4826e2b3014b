//! Multi-index enumeration and sparse multivariate polynomial arithmetic.
//!
//! Everything downstream (moment matrices, Stokes constraints, SDP assembly)
//! indexes monomials through [`enumerate_multiindices`], so the graded
//! lexicographic order fixed here is the single canonical ordering of the
//! whole crate: multi-indices are sorted by total degree first, and within a
//! degree class by descending exponent vector (`x1 > x2 > ...`), e.g. for
//! `n = 2`: `(0,0), (1,0), (0,1), (2,0), (1,1), (0,2), ...`

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PolyError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("coordinate index {var} out of range for dimension {dim}")]
    VarOutOfRange { var: usize, dim: usize },
    #[error("basis size C({n}+{d},{d}) exceeds the supported size limit")]
    SizeLimit { n: usize, d: u32 },
    #[error("polynomial term list is empty; the ambient dimension cannot be inferred")]
    EmptyTermList,
}

/// Exponent vector `alpha` of a monomial `x^alpha`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        MultiIndex(exponents)
    }

    pub fn zero(n: usize) -> Self {
        MultiIndex(vec![0; n])
    }

    /// The unit index `e_var` (0-based coordinate).
    pub fn unit(n: usize, var: usize) -> Self {
        assert!(var < n, "coordinate out of range");
        let mut e = vec![0; n];
        e[var] = 1;
        MultiIndex(e)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Total degree `|alpha|`.
    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        debug_assert_eq!(self.dim(), other.dim());
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// `x^alpha` evaluated at a point.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(x)
            .map(|(&a, &xi)| xi.powi(a as i32))
            .product()
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            // within a degree class larger exponent vectors come first
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, a) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

/// Number of multi-indices with `|alpha| <= d` in dimension `n`, i.e.
/// `C(n+d, d)`.
pub fn basis_size(n: usize, d: u32) -> Result<usize, PolyError> {
    assert!(n >= 1, "dimension must be at least 1");
    let mut acc: u128 = 1;
    for i in 1..=(d as u128) {
        acc = acc
            .checked_mul(n as u128 + i)
            .ok_or(PolyError::SizeLimit { n, d })?
            / i;
    }
    usize::try_from(acc).map_err(|_| PolyError::SizeLimit { n, d })
}

/// All multi-indices with `|alpha| <= d` in the canonical graded
/// lexicographic order. `enumerate_multiindices(n, d)` is a prefix of
/// `enumerate_multiindices(n, d + 1)`.
pub fn enumerate_multiindices(n: usize, d: u32) -> Vec<MultiIndex> {
    assert!(n >= 1, "dimension must be at least 1");
    let mut out = Vec::with_capacity(basis_size(n, d).unwrap_or(0));
    let mut cur = vec![0u32; n];
    for t in 0..=d {
        push_compositions(t, 0, &mut cur, &mut out);
    }
    out
}

fn push_compositions(rem: u32, pos: usize, cur: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
    if pos + 1 == cur.len() {
        cur[pos] = rem;
        out.push(MultiIndex(cur.clone()));
        return;
    }
    for a in (0..=rem).rev() {
        cur[pos] = a;
        push_compositions(rem - a, pos + 1, cur, out);
    }
}

/// One term of a serialized polynomial: coefficient `c` on monomial
/// `x^alpha`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub alpha: Vec<u32>,
    pub c: f64,
}

/// Sparse multivariate polynomial with `f64` coefficients.
///
/// Exactly-zero coefficients are never stored; pruning is exact-zero only so
/// that no term is silently dropped by an epsilon.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    n: usize,
    terms: BTreeMap<MultiIndex, f64>,
}

impl Poly {
    pub fn zero(n: usize) -> Self {
        Poly {
            n,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(n: usize, c: f64) -> Self {
        let mut p = Poly::zero(n);
        if c != 0.0 {
            p.terms.insert(MultiIndex::zero(n), c);
        }
        p
    }

    pub fn one(n: usize) -> Self {
        Poly::constant(n, 1.0)
    }

    /// The monomial `c * x^alpha`.
    pub fn monomial(alpha: MultiIndex, c: f64) -> Self {
        let mut p = Poly::zero(alpha.dim());
        if c != 0.0 {
            p.terms.insert(alpha, c);
        }
        p
    }

    /// The coordinate polynomial `x_var` (0-based).
    pub fn var(n: usize, var: usize) -> Self {
        Poly::monomial(MultiIndex::unit(n, var), 1.0)
    }

    pub fn from_terms<I>(n: usize, terms: I) -> Result<Self, PolyError>
    where
        I: IntoIterator<Item = (MultiIndex, f64)>,
    {
        let mut p = Poly::zero(n);
        for (alpha, c) in terms {
            if alpha.dim() != n {
                return Err(PolyError::DimensionMismatch {
                    expected: n,
                    actual: alpha.dim(),
                });
            }
            p.add_term(alpha, c);
        }
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Total degree; the zero polynomial has degree 0.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(MultiIndex::degree).max().unwrap_or(0)
    }

    pub fn coeff(&self, alpha: &MultiIndex) -> f64 {
        self.terms.get(alpha).copied().unwrap_or(0.0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, f64)> {
        self.terms.iter().map(|(a, &c)| (a, c))
    }

    fn add_term(&mut self, alpha: MultiIndex, c: f64) {
        if c == 0.0 {
            return;
        }
        let entry = self.terms.entry(alpha);
        match entry {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let s = o.get() + c;
                if s == 0.0 {
                    o.remove();
                } else {
                    *o.get_mut() = s;
                }
            }
        }
    }

    fn check_dim(&self, other: &Poly) -> Result<(), PolyError> {
        if self.n != other.n {
            return Err(PolyError::DimensionMismatch {
                expected: self.n,
                actual: other.n,
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &Poly) -> Result<Poly, PolyError> {
        self.check_dim(other)?;
        let mut out = self.clone();
        for (alpha, &c) in &other.terms {
            out.add_term(alpha.clone(), c);
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Poly) -> Result<Poly, PolyError> {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, c: f64) -> Poly {
        if c == 0.0 {
            return Poly::zero(self.n);
        }
        Poly {
            n: self.n,
            terms: self
                .terms
                .iter()
                .map(|(a, &v)| (a.clone(), v * c))
                .collect(),
        }
    }

    pub fn mul(&self, other: &Poly) -> Result<Poly, PolyError> {
        self.check_dim(other)?;
        let mut out = Poly::zero(self.n);
        for (a, &ca) in &self.terms {
            for (b, &cb) in &other.terms {
                out.add_term(a.add(b), ca * cb);
            }
        }
        Ok(out)
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64, PolyError> {
        if x.len() != self.n {
            return Err(PolyError::DimensionMismatch {
                expected: self.n,
                actual: x.len(),
            });
        }
        Ok(self.terms.iter().map(|(a, &c)| c * a.eval(x)).sum())
    }

    /// Formal partial derivative with respect to `x_var` (0-based).
    pub fn partial(&self, var: usize) -> Result<Poly, PolyError> {
        if var >= self.n {
            return Err(PolyError::VarOutOfRange { var, dim: self.n });
        }
        let mut out = Poly::zero(self.n);
        for (alpha, &c) in &self.terms {
            let a = alpha.exponents()[var];
            if a == 0 {
                continue;
            }
            let mut e = alpha.exponents().to_vec();
            e[var] = a - 1;
            out.add_term(MultiIndex::new(e), c * a as f64);
        }
        Ok(out)
    }

    /// Serialized form: the JSON term list `[{"alpha": [...], "c": ...}, ...]`.
    pub fn to_term_list(&self) -> Vec<Term> {
        self.terms
            .iter()
            .map(|(a, &c)| Term {
                alpha: a.exponents().to_vec(),
                c,
            })
            .collect()
    }

    /// Rebuild from a term list with an explicit ambient dimension (the term
    /// list of the zero polynomial is empty and carries no dimension).
    pub fn from_term_list(n: usize, terms: &[Term]) -> Result<Self, PolyError> {
        Poly::from_terms(
            n,
            terms
                .iter()
                .map(|t| (MultiIndex::new(t.alpha.clone()), t.c)),
        )
    }

    /// As [`Poly::from_term_list`] but inferring the dimension from the first
    /// term.
    pub fn from_term_list_inferred(terms: &[Term]) -> Result<Self, PolyError> {
        let n = terms.first().ok_or(PolyError::EmptyTermList)?.alpha.len();
        Poly::from_term_list(n, terms)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_term_list()).expect("term list serializes")
    }

    pub fn from_json(n: usize, s: &str) -> Result<Self, PolyError> {
        let terms: Vec<Term> =
            serde_json::from_str(s).map_err(|_| PolyError::EmptyTermList)?;
        Poly::from_term_list(n, &terms)
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        for (k, (alpha, c)) in self.terms.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{c}*x^{alpha}")?;
        }
        Ok(())
    }
}
