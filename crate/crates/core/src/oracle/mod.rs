//! Independent ground-truth estimators: closed forms, Monte Carlo and
//! quadrature. Validation-only; the bound-producing path never calls them.

pub mod mc;
pub mod quad;

use thiserror::Error;

use crate::moments::{Convention, MeasureKind, MeasureSpec};

pub use mc::{mc_measure, mc_measure_sequential, sample_point, McEstimate};
pub use quad::{detect_shape, restricted_moments_quadrature, QuadError, QuadShape};

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("closed form not available: {0}")]
    Unsupported(&'static str),
    #[error("case requires a {expected} measure")]
    WrongMeasure { expected: &'static str },
    #[error(transparent)]
    Quad(#[from] QuadError),
}

// W. J. Cody's rational Chebyshev approximations for erf/erfc (SPECFUN
// CALERF), max relative error around 1e-16; cross-checked against
// quadrature in the tests below.
const ERF_A: [f64; 5] = [
    3.16112374387056560e0,
    1.13864154151050156e2,
    3.77485237685302021e2,
    3.20937758913846947e3,
    1.85777706184603153e-1,
];
const ERF_B: [f64; 4] = [
    2.36012909523441209e1,
    2.44024637934444173e2,
    1.28261652607737228e3,
    2.84423683343917062e3,
];
const ERF_C: [f64; 9] = [
    5.64188496988670089e-1,
    8.88314979438837594e0,
    6.61191906371416295e1,
    2.98635138197400131e2,
    8.81952221241769090e2,
    1.71204761263407058e3,
    2.05107837782607147e3,
    1.23033935479799725e3,
    2.15311535474403846e-8,
];
const ERF_D: [f64; 8] = [
    1.57449261107098347e1,
    1.17693950891312499e2,
    5.37181101862009858e2,
    1.62138957456669019e3,
    3.29079923573345963e3,
    4.36261909014324716e3,
    3.43936767414372164e3,
    1.23033935480374942e3,
];
const ERF_P: [f64; 6] = [
    3.05326634961232344e-1,
    3.60344899949804439e-1,
    1.25781726111229246e-1,
    1.60837851487422766e-2,
    6.58749161529837803e-4,
    1.63153871373020978e-2,
];
const ERF_Q: [f64; 5] = [
    2.56852019228982242e0,
    1.87295284992346047e0,
    5.27905102951428412e-1,
    6.05183413124413191e-2,
    2.33520497626869185e-3,
];

const INV_SQRT_PI: f64 = 0.5641895835477562869;

/// `erfc(x)` for `x >= 0.46875` (the two upper branches of CALERF).
fn erfc_upper(x: f64) -> f64 {
    debug_assert!(x >= 0.46875);
    if x <= 4.0 {
        let mut num = ERF_C[8] * x;
        let mut den = x;
        for i in 0..7 {
            num = (num + ERF_C[i]) * x;
            den = (den + ERF_D[i]) * x;
        }
        (-x * x).exp() * (num + ERF_C[7]) / (den + ERF_D[7])
    } else {
        let z = 1.0 / (x * x);
        let mut num = ERF_P[5] * z;
        let mut den = z;
        for i in 0..4 {
            num = (num + ERF_P[i]) * z;
            den = (den + ERF_Q[i]) * z;
        }
        let r = z * (num + ERF_P[4]) / (den + ERF_Q[4]);
        ((-x * x).exp() / x) * (INV_SQRT_PI - r)
    }
}

/// Error function by Cody's rational approximation.
pub fn erf(x: f64) -> f64 {
    let ax = x.abs();
    if ax < 0.46875 {
        let z = x * x;
        let mut num = ERF_A[4] * z;
        let mut den = z;
        for i in 0..3 {
            num = (num + ERF_A[i]) * z;
            den = (den + ERF_B[i]) * z;
        }
        x * (num + ERF_A[3]) / (den + ERF_B[3])
    } else {
        let v = 1.0 - erfc_upper(ax);
        if x < 0.0 {
            -v
        } else {
            v
        }
    }
}

/// Complementary error function, accurate in the far tail.
pub fn erfc(x: f64) -> f64 {
    if x.abs() < 0.46875 {
        1.0 - erf(x)
    } else if x > 0.0 {
        erfc_upper(x)
    } else {
        2.0 - erfc_upper(-x)
    }
}

/// Standard normal CDF `Phi(x)`, evaluated through `erfc` so both tails
/// keep full relative accuracy.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Per-coordinate standard deviation of the probability law proportional to
/// the Gaussian density of `spec`.
pub fn coordinate_std(spec: &MeasureSpec) -> f64 {
    match spec.convention {
        Convention::StandardNormalized => 1.0,
        // exp(-|x|^2/sigma^2) is proportional to N(0, sigma^2/2) coordinates
        Convention::PaperExperimental => spec.param / std::f64::consts::SQRT_2,
    }
}

/// Total mass of the (possibly unnormalized) reference measure.
pub fn total_mass(spec: &MeasureSpec) -> f64 {
    match spec.kind {
        MeasureKind::Gaussian => match spec.convention {
            Convention::StandardNormalized => 1.0,
            Convention::PaperExperimental => {
                (spec.param * std::f64::consts::PI.sqrt()).powi(spec.n as i32)
            }
        },
        MeasureKind::Exponential => spec.param.powi(-(spec.n as i32)),
    }
}

/// Reference sets with a closed-form measure.
#[derive(Debug, Clone, PartialEq)]
pub enum ClosedFormCase {
    /// `{x : a . x >= b}` under a Gaussian measure.
    GaussianHalfplane { a: Vec<f64>, b: f64 },
    /// `{x : |x| <= radius}` centered at the origin, dimension 1 or 2.
    GaussianBall0 { radius: f64 },
    /// `{x >= 0 : 3 x1 + x2 <= 1}` under the exponential measure.
    ExpSimplex,
    /// `{x >= 0 : 3 x1 + x2 >= 1}` under the exponential measure.
    ExpHalfplane,
}

pub fn closed_form(case: &ClosedFormCase, spec: &MeasureSpec) -> Result<f64, OracleError> {
    match case {
        ClosedFormCase::GaussianHalfplane { a, b } => {
            if spec.kind != MeasureKind::Gaussian {
                return Err(OracleError::WrongMeasure {
                    expected: "gaussian",
                });
            }
            if a.len() != spec.n {
                return Err(OracleError::Unsupported(
                    "half-plane normal dimension mismatch",
                ));
            }
            let norm = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Err(OracleError::Unsupported("zero half-plane normal"));
            }
            // a.x is centered normal with std |a| * coordinate_std
            let std = norm * coordinate_std(spec);
            Ok(total_mass(spec) * (1.0 - normal_cdf(b / std)))
        }
        ClosedFormCase::GaussianBall0 { radius } => {
            if spec.kind != MeasureKind::Gaussian {
                return Err(OracleError::WrongMeasure {
                    expected: "gaussian",
                });
            }
            let r = *radius;
            match (spec.n, spec.convention) {
                (1, Convention::StandardNormalized) => Ok(2.0 * normal_cdf(r) - 1.0),
                (1, Convention::PaperExperimental) => {
                    Ok(spec.param * std::f64::consts::PI.sqrt() * erf(r / spec.param))
                }
                (2, Convention::StandardNormalized) => Ok(1.0 - (-0.5 * r * r).exp()),
                (2, Convention::PaperExperimental) => Ok(std::f64::consts::PI
                    * spec.param
                    * spec.param
                    * (1.0 - (-r * r / (spec.param * spec.param)).exp())),
                _ => Err(OracleError::Unsupported("balls are 1D or 2D")),
            }
        }
        ClosedFormCase::ExpSimplex => {
            let lam = exp_rate(spec)?;
            Ok((1.0 + 0.5 * (-lam).exp() - 1.5 * (-lam / 3.0).exp()) / (lam * lam))
        }
        ClosedFormCase::ExpHalfplane => {
            let lam = exp_rate(spec)?;
            Ok((1.5 * (-lam / 3.0).exp() - 0.5 * (-lam).exp()) / (lam * lam))
        }
    }
}

fn exp_rate(spec: &MeasureSpec) -> Result<f64, OracleError> {
    if spec.kind != MeasureKind::Exponential || spec.n != 2 {
        return Err(OracleError::WrongMeasure {
            expected: "2D exponential",
        });
    }
    Ok(spec.param)
}
