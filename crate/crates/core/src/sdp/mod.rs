//! Block-diagonal semidefinite programs and their interior-point solver.
//!
//! An [`SdpInstance`] is the problem
//!
//! ```text
//! maximize  c . u
//! s.t.      F0_b + sum_k u_k Fk_b  is PSD   for every block b
//!           A u = b                         (linear equalities)
//! ```
//!
//! Equalities are eliminated by nullspace parameterization before the
//! interior-point iteration, which keeps the cone structure clean. The
//! solver is an infeasible-start primal-dual method with Nesterov-Todd
//! scaling and a Mehrotra predictor-corrector; see [`ipm`].

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::poly::MultiIndex;

mod elim;
mod ipm;
mod sdpa;

pub use sdpa::{export_sdpa, import_solution, parse_sdpa, EqualityEncoding};

/// Indices of a maximal independent subset of rows (kept, dropped); the
/// rank-revealing pass behind equality dedup.
pub fn independent_rows(a: &DMatrix<f64>) -> (Vec<usize>, Vec<usize>) {
    elim::independent_rows(a)
}

#[derive(Debug, Error)]
pub enum SdpError {
    #[error("block {index} is not symmetric")]
    NonSymmetricBlock { index: usize },
    #[error("block {index} references variable {var} but the instance has {num_vars} variables")]
    VarOutOfRange {
        index: usize,
        var: usize,
        num_vars: usize,
    },
    #[error("objective length {got} does not match variable count {expected}")]
    ObjectiveLength { expected: usize, got: usize },
    #[error("equality system has {cols} columns but the instance has {num_vars} variables")]
    EqualityShape { cols: usize, num_vars: usize },
    #[error("equality system is inconsistent (residual {residual:.3e})")]
    InconsistentEqualities { residual: f64 },
    #[error("instance has no blocks")]
    NoBlocks,
    #[error("SDPA parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("linear algebra failure: {0}")]
    Numerical(&'static str),
}

/// Affine symmetric-matrix map `u -> F0 + sum_k u_k Fk`.
///
/// Coefficients are stored as upper-triangle triplets; an off-diagonal
/// triplet `(r, c, v)` stands for the symmetric placement at `(r, c)` and
/// `(c, r)`.
#[derive(Debug, Clone)]
pub struct AffineBlock {
    side: usize,
    f0: DMatrix<f64>,
    /// `(var, row, col, coeff)` with `row <= col`, sorted by `(var, row, col)`.
    terms: Vec<(u32, u32, u32, f64)>,
    /// Diagonal blocks round-trip to the SDPA negative block-size encoding.
    diagonal: bool,
}

impl AffineBlock {
    pub fn new(side: usize) -> Self {
        AffineBlock {
            side,
            f0: DMatrix::zeros(side, side),
            terms: Vec::new(),
            diagonal: false,
        }
    }

    pub fn diagonal(side: usize) -> Self {
        AffineBlock {
            diagonal: true,
            ..AffineBlock::new(side)
        }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn is_diagonal(&self) -> bool {
        self.diagonal
    }

    pub fn f0(&self) -> &DMatrix<f64> {
        &self.f0
    }

    pub fn terms(&self) -> &[(u32, u32, u32, f64)] {
        &self.terms
    }

    /// Set the constant entry at `(row, col)` (and its mirror).
    pub fn set_f0(&mut self, row: usize, col: usize, value: f64) {
        self.f0[(row, col)] = value;
        self.f0[(col, row)] = value;
    }

    /// Accumulate `coeff * u_var` on entry `(row, col)` (and its mirror).
    pub fn push_term(&mut self, var: usize, row: usize, col: usize, coeff: f64) {
        if coeff == 0.0 {
            return;
        }
        let (r, c) = if row <= col { (row, col) } else { (col, row) };
        debug_assert!(!self.diagonal || r == c);
        self.terms.push((var as u32, r as u32, c as u32, coeff));
    }

    /// Sort and merge duplicate triplets; builders call this once at the end.
    pub fn normalize(&mut self) {
        self.terms.sort_by_key(|&(v, r, c, _)| (v, r, c));
        let mut merged: Vec<(u32, u32, u32, f64)> = Vec::with_capacity(self.terms.len());
        for &(v, r, c, x) in &self.terms {
            match merged.last_mut() {
                Some(last) if last.0 == v && last.1 == r && last.2 == c => last.3 += x,
                _ => merged.push((v, r, c, x)),
            }
        }
        merged.retain(|t| t.3 != 0.0);
        self.terms = merged;
    }

    /// Evaluate the affine map at `u`.
    pub fn eval(&self, u: &[f64]) -> DMatrix<f64> {
        let mut m = self.f0.clone();
        for &(v, r, c, x) in &self.terms {
            let (r, c) = (r as usize, c as usize);
            let add = x * u[v as usize];
            m[(r, c)] += add;
            if r != c {
                m[(c, r)] += add;
            }
        }
        m
    }

    /// Rescale every coefficient of variable `k` by `diag[k]` (variable
    /// substitution `u_k = diag[k] * u'_k`).
    pub fn scale_vars(&mut self, diag: &[f64]) {
        for t in &mut self.terms {
            t.3 *= diag[t.0 as usize];
        }
    }

    /// Dense coefficient matrix of variable `var` (test and elimination use).
    pub fn coeff_matrix(&self, var: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.side, self.side);
        for &(v, r, c, x) in &self.terms {
            if v as usize == var {
                let (r, c) = (r as usize, c as usize);
                m[(r, c)] += x;
                if r != c {
                    m[(c, r)] += x;
                }
            }
        }
        m
    }
}

/// Scheme provenance tag carried in instance metadata.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeTag {
    Scheme1,
    Scheme3,
    Adhoc,
}

/// Metadata a built instance carries along: hierarchy level, scheme tag,
/// the multi-index of each decision variable, the preconditioning diagonal
/// (when applied) and the initial-point scale.
#[derive(Debug, Clone)]
pub struct InstanceMeta {
    pub level: u32,
    pub scheme: SchemeTag,
    pub var_indices: Vec<MultiIndex>,
    /// `u_original = precond[k] * u_scaled` when present.
    pub precond: Option<Vec<f64>>,
    pub init_scale: f64,
}

impl Default for InstanceMeta {
    fn default() -> Self {
        InstanceMeta {
            level: 0,
            scheme: SchemeTag::Adhoc,
            var_indices: Vec::new(),
            precond: None,
            init_scale: 1.0,
        }
    }
}

/// Block-diagonal linear matrix inequality in a decision vector `u`, with
/// linear equalities and a linear objective to maximize.
#[derive(Debug, Clone)]
pub struct SdpInstance {
    num_vars: usize,
    objective: Vec<f64>,
    blocks: Vec<AffineBlock>,
    eq_a: DMatrix<f64>,
    eq_b: DVector<f64>,
    pub meta: InstanceMeta,
}

impl SdpInstance {
    pub fn new(objective: Vec<f64>, blocks: Vec<AffineBlock>) -> Result<Self, SdpError> {
        let n = objective.len();
        Self::with_equalities(objective, blocks, DMatrix::zeros(0, n), DVector::zeros(0))
    }

    pub fn with_equalities(
        objective: Vec<f64>,
        blocks: Vec<AffineBlock>,
        eq_a: DMatrix<f64>,
        eq_b: DVector<f64>,
    ) -> Result<Self, SdpError> {
        let num_vars = objective.len();
        if blocks.is_empty() {
            return Err(SdpError::NoBlocks);
        }
        for (index, b) in blocks.iter().enumerate() {
            let asym = (&b.f0 - b.f0.transpose()).amax();
            if asym > 1e-12 * (1.0 + b.f0.amax()) {
                return Err(SdpError::NonSymmetricBlock { index });
            }
            if let Some(&(v, ..)) = b.terms.iter().max_by_key(|t| t.0) {
                if v as usize >= num_vars {
                    return Err(SdpError::VarOutOfRange {
                        index,
                        var: v as usize,
                        num_vars,
                    });
                }
            }
        }
        if eq_a.ncols() != num_vars {
            return Err(SdpError::EqualityShape {
                cols: eq_a.ncols(),
                num_vars,
            });
        }
        Ok(SdpInstance {
            num_vars,
            objective,
            blocks,
            eq_a,
            eq_b,
            meta: InstanceMeta::default(),
        })
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn objective_mut(&mut self) -> &mut [f64] {
        &mut self.objective
    }

    pub fn blocks(&self) -> &[AffineBlock] {
        &self.blocks
    }

    pub fn blocks_mut(&mut self) -> &mut [AffineBlock] {
        &mut self.blocks
    }

    pub fn equalities(&self) -> (&DMatrix<f64>, &DVector<f64>) {
        (&self.eq_a, &self.eq_b)
    }

    pub fn equalities_mut(&mut self) -> (&mut DMatrix<f64>, &mut DVector<f64>) {
        (&mut self.eq_a, &mut self.eq_b)
    }

    pub fn num_equalities(&self) -> usize {
        self.eq_a.nrows()
    }

    /// Objective value `c . u`.
    pub fn objective_value(&self, u: &[f64]) -> f64 {
        self.objective.iter().zip(u).map(|(c, x)| c * x).sum()
    }
}

/// Interior-point solver configuration.
#[derive(Debug, Clone, Copy, Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Relative duality-gap tolerance.
    pub tol_gap: f64,
    /// Primal/dual feasibility tolerance.
    pub tol_feas: f64,
    pub max_iter: usize,
    /// Fraction-to-boundary step damping, in (0, 1).
    pub step_damping: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol_gap: 1e-8,
            tol_feas: 1e-8,
            max_iter: 200,
            step_damping: 0.95,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SdpError> {
        if !(self.tol_gap > 0.0 && self.tol_feas > 0.0) {
            return Err(SdpError::Numerical("tolerances must be positive"));
        }
        if self.max_iter < 1 {
            return Err(SdpError::Numerical("max_iter must be at least 1"));
        }
        if !(self.step_damping > 0.0 && self.step_damping < 1.0) {
            return Err(SdpError::Numerical("step damping must lie in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Inaccurate,
    PrimalInfeasible,
    DualInfeasible,
    IterLimit,
}

impl SolveStatus {
    pub fn is_usable_bound(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::Inaccurate)
    }
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Inaccurate => "inaccurate",
            SolveStatus::PrimalInfeasible => "primal_infeasible",
            SolveStatus::DualInfeasible => "dual_infeasible",
            SolveStatus::IterLimit => "iter_limit",
        };
        f.write_str(s)
    }
}

/// Normalized residuals of the returned iterate.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Residuals {
    /// Feasibility of `u` against the matrix cones.
    pub primal_feas: f64,
    /// Feasibility of the internal dual certificate.
    pub dual_feas: f64,
    /// `|primal - dual| / (1 + |primal|)`.
    pub rel_gap: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.primal_feas.max(self.dual_feas).max(self.rel_gap)
    }
}

/// Solver output, reported in original (unpreconditioned) units.
#[derive(Debug, Clone, Serialize)]
pub struct SdpSolution {
    pub u: Vec<f64>,
    /// Objective value attained by `u` (lower estimate on maximization).
    pub primal_obj: f64,
    /// Dual bound (upper estimate on maximization).
    pub dual_obj: f64,
    pub status: SolveStatus,
    pub residuals: Residuals,
    pub iterations: usize,
}

/// Solve an instance with the interior-point method. Deterministic: equal
/// inputs and configuration give bitwise-identical output.
pub fn solve(instance: &SdpInstance, config: &SolverConfig) -> Result<SdpSolution, SdpError> {
    ipm::solve_impl(instance, config, cfg!(feature = "parallel"))
}

/// As [`solve`] but forcing the sequential Schur-complement assembly; the
/// benchmark suite compares the two.
pub fn solve_sequential(
    instance: &SdpInstance,
    config: &SolverConfig,
) -> Result<SdpSolution, SdpError> {
    ipm::solve_impl(instance, config, false)
}
