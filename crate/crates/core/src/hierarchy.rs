//! Hierarchy driver: solves the relaxations over a range of levels `d` and
//! assembles the bracketing sequences of upper and lower bounds together
//! with the truncated moment estimate of the restricted measure.
//!
//! Raw per-level values are reported next to their monotone envelopes
//! (running minimum of the uppers, running maximum of the lowers): exact
//! optimal values are monotone in `d`, floating-point solves can violate
//! that by tiny margins, and the envelopes restore the user-facing
//! guarantee while the raw values keep the diagnostics honest.

use serde::Serialize;
use thiserror::Error;

use crate::moments::MomentOracle;
use crate::par::maybe_par_map;
use crate::poly::Poly;
use crate::relax::{
    build_scheme1, build_scheme3, complement_cells, default_stokes_multiplier, ensure_support,
    precondition, RelaxError, SemiAlgebraicSet,
};
use crate::sdp::{self, SdpError, SdpSolution, SolveStatus, SolverConfig};

#[derive(Debug, Error)]
pub enum HierarchyError {
    #[error("invalid hierarchy configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Relax(#[from] RelaxError),
    #[error(transparent)]
    Sdp(#[from] SdpError),
    #[error(transparent)]
    Poly(#[from] crate::poly::PolyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Scheme1,
    Scheme3,
}

/// Driver configuration for a level range.
#[derive(Debug, Clone)]
pub struct HierarchyConfig {
    pub d_min: u32,
    pub d_max: u32,
    pub scheme: Scheme,
    /// Scheme-1 objective `f` (defaults to the constant 1). Scheme 3 always
    /// maximizes the mass coordinate `u_0`.
    pub objective_f: Option<Poly>,
    /// Stokes multiplier override for the set itself; complement cells
    /// always use their own boundary-vanishing default product.
    pub f_stokes: Option<Poly>,
    pub compute_lower: bool,
    /// Corollary-2.3(b) pathway: bound `int_set f^2 dmu` instead of the
    /// mass. Scheme 1 only, and never conflated with the measure.
    pub lower_uses_f_squared: bool,
    /// Explicit complement cells; defaults to the staircase decomposition.
    /// The caller is responsible for the cover being overlap-free up to
    /// measure zero.
    pub cells: Option<Vec<SemiAlgebraicSet>>,
    pub solver: SolverConfig,
}

impl HierarchyConfig {
    pub fn new(d_min: u32, d_max: u32) -> Self {
        HierarchyConfig {
            d_min,
            d_max,
            scheme: Scheme::Scheme3,
            objective_f: None,
            f_stokes: None,
            compute_lower: true,
            lower_uses_f_squared: false,
            cells: None,
            solver: SolverConfig::default(),
        }
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn without_lower(mut self) -> Self {
        self.compute_lower = false;
        self
    }

    fn validate(&self) -> Result<(), HierarchyError> {
        if self.d_min > self.d_max {
            return Err(HierarchyError::Config(format!(
                "d_min = {} exceeds d_max = {}",
                self.d_min, self.d_max
            )));
        }
        if self.lower_uses_f_squared {
            if self.scheme != Scheme::Scheme1 {
                return Err(HierarchyError::Config(
                    "the f^2 lower-bound pathway pairs with scheme 1".into(),
                ));
            }
            if self.objective_f.is_none() {
                return Err(HierarchyError::Config(
                    "the f^2 pathway needs an explicit objective multiplier".into(),
                ));
            }
        }
        Ok(())
    }
}

/// One hierarchy level: raw and monotone bounds, per-cell uppers, the
/// truncated moment vector of the restricted measure, and solver stats.
#[derive(Debug, Clone, Serialize)]
pub struct LevelResult {
    pub d: u32,
    pub upper_raw: f64,
    pub upper_mono: f64,
    pub lower_raw: Option<f64>,
    pub lower_mono: Option<f64>,
    /// `upper_mono - lower_mono` when both sides exist.
    pub gap: Option<f64>,
    pub cell_uppers: Vec<f64>,
    /// Decision vector of the upper solve: the truncated moments of the
    /// restricted measure, in original units.
    pub u_trunc: Vec<f64>,
    pub status_upper: SolveStatus,
    pub status_lower: Option<SolveStatus>,
    /// Solver-tolerance halo around the upper value; widened 100x on
    /// inaccurate solves.
    pub upper_uncertainty: f64,
    pub iterations_upper: usize,
    pub dual_upper: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct HierarchyResult {
    pub levels: Vec<LevelResult>,
    pub warnings: Vec<String>,
}

impl HierarchyResult {
    /// CSV table, one row per level.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "d,upper_raw,upper_mono,lower_raw,lower_mono,gap,status_upper,status_lower,seconds\n",
        );
        let opt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
        for l in &self.levels {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{:.3}\n",
                l.d,
                l.upper_raw,
                l.upper_mono,
                opt(l.lower_raw),
                opt(l.lower_mono),
                opt(l.gap),
                l.status_upper,
                l.status_lower
                    .map(|s| s.to_string())
                    .unwrap_or_else(|| "none".into()),
                l.seconds,
            ));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result serializes")
    }

    pub fn final_bracket(&self) -> (Option<f64>, Option<f64>) {
        let last = self.levels.last();
        (
            last.and_then(|l| l.lower_mono),
            last.map(|l| l.upper_mono),
        )
    }

    pub fn all_optimal(&self) -> bool {
        self.levels.iter().all(|l| {
            l.status_upper == SolveStatus::Optimal
                && l.status_lower.is_none_or(|s| s == SolveStatus::Optimal)
        })
    }

    pub fn any_inaccurate(&self) -> bool {
        self.levels.iter().any(|l| {
            l.status_upper == SolveStatus::Inaccurate
                || l.status_lower == Some(SolveStatus::Inaccurate)
        })
    }
}

fn solve_one(
    set: &SemiAlgebraicSet,
    oracle: &MomentOracle,
    d: u32,
    config: &HierarchyConfig,
    objective_override: Option<&Poly>,
    stokes_override: Option<&Poly>,
) -> Result<SdpSolution, HierarchyError> {
    let aug = ensure_support(set, oracle.spec())?;
    let n = aug.dim();
    let instance = match config.scheme {
        Scheme::Scheme1 => {
            let one = Poly::one(n);
            let f = objective_override.unwrap_or(&one);
            build_scheme1(&aug, oracle, d, f)?
        }
        Scheme::Scheme3 => {
            let default;
            let f_stokes = match stokes_override {
                Some(f) => f,
                None => {
                    default = default_stokes_multiplier(&aug)?;
                    &default
                }
            };
            build_scheme3(&aug, oracle, d, f_stokes)?
        }
    };
    let pre = precondition(&instance, oracle);
    Ok(sdp::solve(&pre, &config.solver)?)
}

/// Upper bound at level `d`: the primal objective of the scheme instance,
/// together with the full solution (whose decision vector is the truncated
/// moment estimate).
pub fn upper_bound(
    set: &SemiAlgebraicSet,
    oracle: &MomentOracle,
    d: u32,
    config: &HierarchyConfig,
) -> Result<(f64, SdpSolution), HierarchyError> {
    let sol = solve_one(
        set,
        oracle,
        d,
        config,
        config.objective_f.as_ref(),
        config.f_stokes.as_ref(),
    )?;
    Ok((sol.primal_obj, sol))
}

/// Outcome of a complement-decomposition lower bound.
#[derive(Debug, Clone)]
pub struct LowerOutcome {
    pub value: f64,
    pub cell_values: Vec<f64>,
    pub cell_statuses: Vec<SolveStatus>,
    /// Total reference value the cell uppers are subtracted from: the
    /// measure's mass, or `L_y(f^2)` on the f-squared pathway.
    pub total: f64,
}

/// Lower bound at level `d` via upper bounds on the complement cells.
/// Returns `None` when any cell solve fails outright.
pub fn lower_bound(
    set: &SemiAlgebraicSet,
    oracle: &MomentOracle,
    d: u32,
    config: &HierarchyConfig,
) -> Result<Option<LowerOutcome>, HierarchyError> {
    let cells = match &config.cells {
        Some(cells) => cells.clone(),
        None => complement_cells(set, oracle.spec())?,
    };
    let fsq = if config.lower_uses_f_squared {
        let f = config
            .objective_f
            .as_ref()
            .expect("validated: f^2 pathway has an objective");
        Some(f.mul(f)?)
    } else {
        None
    };

    let results = maybe_par_map(cells.len(), cfg!(feature = "parallel"), |i| {
        solve_one(&cells[i], oracle, d, config, fsq.as_ref(), None)
    });
    let mut cell_values = Vec::with_capacity(cells.len());
    let mut cell_statuses = Vec::with_capacity(cells.len());
    for r in results {
        match r {
            Ok(sol) if sol.status.is_usable_bound() => {
                cell_values.push(sol.primal_obj);
                cell_statuses.push(sol.status);
            }
            Ok(sol) => {
                log::warn!("cell solve unusable at d = {d}: {:?}", sol.status);
                return Ok(None);
            }
            Err(e) => {
                log::warn!("cell solve failed at d = {d}: {e}");
                return Ok(None);
            }
        }
    }

    let total = match &fsq {
        Some(f2) => f2
            .terms()
            .map(|(alpha, coeff)| coeff * oracle.moment(alpha))
            .sum(),
        None => oracle.mass(),
    };
    let value = total - cell_values.iter().sum::<f64>();
    Ok(Some(LowerOutcome {
        value,
        cell_values,
        cell_statuses,
        total,
    }))
}

fn worst_status(statuses: &[SolveStatus]) -> SolveStatus {
    let mut worst = SolveStatus::Optimal;
    for &s in statuses {
        if s != SolveStatus::Optimal {
            worst = s;
        }
    }
    worst
}

/// Run the hierarchy over `d = d_min ..= d_max`.
pub fn run(
    set: &SemiAlgebraicSet,
    oracle: &MomentOracle,
    config: &HierarchyConfig,
) -> Result<HierarchyResult, HierarchyError> {
    run_impl(set, oracle, config, cfg!(feature = "parallel"))
}

/// Single-threaded twin of [`run`] for the benchmark comparison.
pub fn run_sequential(
    set: &SemiAlgebraicSet,
    oracle: &MomentOracle,
    config: &HierarchyConfig,
) -> Result<HierarchyResult, HierarchyError> {
    run_impl(set, oracle, config, false)
}

fn run_impl(
    set: &SemiAlgebraicSet,
    oracle: &MomentOracle,
    config: &HierarchyConfig,
    parallel: bool,
) -> Result<HierarchyResult, HierarchyError> {
    config.validate()?;
    let levels: Vec<u32> = (config.d_min..=config.d_max).collect();

    struct RawLevel {
        d: u32,
        upper: f64,
        sol: SdpSolution,
        lower: Option<LowerOutcome>,
        seconds: f64,
    }

    let raw: Vec<Result<RawLevel, HierarchyError>> = maybe_par_map(levels.len(), parallel, |i| {
        let d = levels[i];
        let t0 = std::time::Instant::now();
        let (upper, sol) = upper_bound(set, oracle, d, config)?;
        let lower = if config.compute_lower {
            lower_bound(set, oracle, d, config)?
        } else {
            None
        };
        Ok(RawLevel {
            d,
            upper,
            sol,
            lower,
            seconds: t0.elapsed().as_secs_f64(),
        })
    });

    let mut warnings = Vec::new();
    let mut out = Vec::with_capacity(levels.len());
    let mut mono_upper = f64::INFINITY;
    let mut mono_lower = f64::NEG_INFINITY;
    let mut have_lower = false;
    let mut prev_upper: Option<f64> = None;
    let mut prev_lower: Option<f64> = None;
    let tol = config.solver.tol_gap;

    for level in raw {
        let level = level?;
        let usable_upper = level.sol.status.is_usable_bound();

        if let Some(prev) = prev_upper {
            let slack = 10.0 * tol * (1.0 + prev.abs());
            if usable_upper && level.upper > prev + slack {
                warnings.push(format!(
                    "raw upper bound increased at d = {} ({} -> {}): monomial-basis \
                     conditioning is likely degrading",
                    level.d, prev, level.upper
                ));
            }
        }
        if usable_upper {
            prev_upper = Some(level.upper);
            mono_upper = mono_upper.min(level.upper);
        }

        let (lower_raw, status_lower, cell_uppers) = match &level.lower {
            Some(outcome) => {
                if let Some(prev) = prev_lower {
                    let slack = 10.0 * tol * (1.0 + prev.abs());
                    if outcome.value < prev - slack {
                        warnings.push(format!(
                            "raw lower bound decreased at d = {} ({} -> {}): monomial-basis \
                             conditioning is likely degrading",
                            level.d, prev, outcome.value
                        ));
                    }
                }
                prev_lower = Some(outcome.value);
                mono_lower = mono_lower.max(outcome.value);
                have_lower = true;
                (
                    Some(outcome.value),
                    Some(worst_status(&outcome.cell_statuses)),
                    outcome.cell_values.clone(),
                )
            }
            None => (
                None,
                config.compute_lower.then_some(SolveStatus::IterLimit),
                Vec::new(),
            ),
        };

        let upper_mono = if mono_upper.is_finite() {
            mono_upper
        } else {
            level.upper
        };
        let lower_mono = have_lower.then_some(mono_lower);
        let widen = if level.sol.status == SolveStatus::Optimal {
            1.0
        } else {
            100.0
        };
        for w in level_warnings(&level.sol, level.d, tol) {
            warnings.push(w);
        }
        out.push(LevelResult {
            d: level.d,
            upper_raw: level.upper,
            upper_mono,
            lower_raw,
            lower_mono,
            gap: lower_mono.map(|lo| upper_mono - lo),
            cell_uppers,
            u_trunc: level.sol.u.clone(),
            status_upper: level.sol.status,
            status_lower,
            upper_uncertainty: widen * tol * (1.0 + level.upper.abs()),
            iterations_upper: level.sol.iterations,
            dual_upper: level.sol.dual_obj,
            seconds: level.seconds,
        });
    }

    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(HierarchyResult {
        levels: out,
        warnings,
    })
}

fn level_warnings(sol: &SdpSolution, d: u32, tol: f64) -> Vec<String> {
    let mut out = Vec::new();
    if sol.status == SolveStatus::Inaccurate {
        out.push(format!(
            "upper solve at d = {d} is inaccurate (residuals {:?}); value carries a 100x \
             widened uncertainty of {:.3e}",
            sol.residuals,
            100.0 * tol * (1.0 + sol.primal_obj.abs())
        ));
    }
    out
}
