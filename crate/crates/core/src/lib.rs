//! Monotone, convergent upper and lower bounds on the Gaussian or
//! exponential measure of a basic semi-algebraic set, computed by assembling
//! and solving a semidefinite hierarchy over truncated moment sequences.
//!
//! Pipeline: [`poly`] supplies multi-index enumeration and sparse
//! polynomial arithmetic; [`moments`] the closed-form moment oracles of the
//! reference measures; [`relax`] assembles moment/localizing matrix blocks,
//! Stokes equality constraints and complement-cell decompositions into
//! [`sdp::SdpInstance`]s; [`sdp`] solves them with a primal-dual
//! interior-point method (and speaks the SDPA sparse format); [`hierarchy`]
//! drives levels `d_min..=d_max` into bracketing bound sequences; and
//! [`oracle`] holds the independent Monte Carlo/quadrature/closed-form
//! ground truths used for validation only.
//!
//! With the default `parallel` feature, Monte Carlo sampling, per-level and
//! per-cell solves, and the Schur-complement assembly fan out over rayon;
//! results are bitwise identical to the sequential fallback.

pub mod hierarchy;
pub mod moments;
pub mod oracle;
pub mod poly;
pub mod relax;
pub mod sdp;

mod par;

pub use hierarchy::{HierarchyConfig, HierarchyResult, LevelResult, Scheme};
pub use moments::{Convention, MeasureKind, MeasureSpec, MomentOracle};
pub use poly::{MultiIndex, Poly};
pub use relax::SemiAlgebraicSet;
pub use sdp::{SdpInstance, SdpSolution, SolveStatus, SolverConfig};
