//! Closed-form moment oracles for the reference measures.
//!
//! Two Gaussian density conventions coexist deliberately:
//!
//! * [`Convention::StandardNormalized`] — the probability density
//!   `(2*pi)^(-n/2) * exp(-|x|^2/2)`, total mass 1.
//! * [`Convention::PaperExperimental`] — the unnormalized density
//!   `exp(-|x|^2/sigma^2)`, total mass `(sigma*sqrt(pi))^n`, which is the
//!   density the reference half-space tables were produced with.
//!
//! The exponential measure uses the unnormalized density
//! `exp(-lambda * sum_i x_i)` on the nonnegative orthant, total mass
//! `lambda^(-n)`; its odd moments do not vanish.
//!
//! All closed forms are evaluated in log space so that high-order moments
//! (up to `|alpha| = 48`) do not overflow intermediate factorials.

use std::collections::HashMap;
use std::sync::RwLock;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::poly::{enumerate_multiindices, MultiIndex};

#[derive(Debug, Error, PartialEq)]
pub enum MomentError {
    #[error("measure parameter must be positive, got {0}")]
    NonPositiveParam(f64),
    #[error("the standard normalized Gaussian fixes sigma = 1, got {0}")]
    SigmaNotOne(f64),
    #[error("dimension must be at least 1")]
    ZeroDimension,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureKind {
    Gaussian,
    Exponential,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    StandardNormalized,
    PaperExperimental,
}

/// Reference measure: kind, ambient dimension, scale parameter
/// (`sigma` for Gaussian, `lambda` for exponential) and density convention.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureSpec {
    pub kind: MeasureKind,
    pub n: usize,
    pub param: f64,
    pub convention: Convention,
}

impl MeasureSpec {
    pub fn gaussian(n: usize, sigma: f64, convention: Convention) -> Result<Self, MomentError> {
        if n == 0 {
            return Err(MomentError::ZeroDimension);
        }
        if sigma <= 0.0 {
            return Err(MomentError::NonPositiveParam(sigma));
        }
        if convention == Convention::StandardNormalized && sigma != 1.0 {
            return Err(MomentError::SigmaNotOne(sigma));
        }
        Ok(MeasureSpec {
            kind: MeasureKind::Gaussian,
            n,
            param: sigma,
            convention,
        })
    }

    pub fn exponential(n: usize, lambda: f64) -> Result<Self, MomentError> {
        if n == 0 {
            return Err(MomentError::ZeroDimension);
        }
        if lambda <= 0.0 {
            return Err(MomentError::NonPositiveParam(lambda));
        }
        Ok(MeasureSpec {
            kind: MeasureKind::Exponential,
            n,
            param: lambda,
            convention: Convention::StandardNormalized,
        })
    }

    pub fn is_exponential(&self) -> bool {
        self.kind == MeasureKind::Exponential
    }
}

/// `ln((k-1)!!)` for even `k >= 0`, via `(2m-1)!! = (2m)! / (2^m m!)`.
fn ln_odd_double_factorial(k: u32) -> f64 {
    debug_assert!(k % 2 == 0);
    let m = f64::from(k / 2);
    ln_gamma(f64::from(k) + 1.0) - m * std::f64::consts::LN_2 - ln_gamma(m + 1.0)
}

/// Moment of the Gaussian measure: `int x^alpha dmu` over `R^n`.
///
/// Odd-symmetry makes the moment vanish unless every exponent is even;
/// otherwise it is a per-coordinate product of `(alpha_i - 1)!!`
/// (standard normalized) or `sigma^(alpha_i + 1) * Gamma((alpha_i + 1)/2)`
/// (experimental density `exp(-|x|^2/sigma^2)`).
pub fn gaussian_moment(
    alpha: &MultiIndex,
    sigma: f64,
    convention: Convention,
) -> Result<f64, MomentError> {
    if sigma <= 0.0 {
        return Err(MomentError::NonPositiveParam(sigma));
    }
    if alpha.exponents().iter().any(|&a| a % 2 == 1) {
        return Ok(0.0);
    }
    let log = match convention {
        Convention::StandardNormalized => alpha
            .exponents()
            .iter()
            .map(|&a| ln_odd_double_factorial(a))
            .sum::<f64>(),
        Convention::PaperExperimental => alpha
            .exponents()
            .iter()
            .map(|&a| {
                f64::from(a + 1) * sigma.ln() + ln_gamma((f64::from(a) + 1.0) / 2.0)
            })
            .sum::<f64>(),
    };
    Ok(log.exp())
}

/// Moment of the exponential measure `exp(-lambda sum x_i)` on the
/// nonnegative orthant: per-coordinate product of
/// `alpha_i! / lambda^(alpha_i + 1)`.
pub fn exponential_moment(alpha: &MultiIndex, lambda: f64) -> Result<f64, MomentError> {
    if lambda <= 0.0 {
        return Err(MomentError::NonPositiveParam(lambda));
    }
    let log = alpha
        .exponents()
        .iter()
        .map(|&a| ln_gamma(f64::from(a) + 1.0) - f64::from(a + 1) * lambda.ln())
        .sum::<f64>();
    Ok(log.exp())
}

/// Closed-form moment sequence `y_alpha` of a reference measure, with an
/// append-only cache. Concurrent readers are safe: identical values are
/// recomputed and inserted idempotently.
#[derive(Debug)]
pub struct MomentOracle {
    spec: MeasureSpec,
    cache: RwLock<HashMap<MultiIndex, f64>>,
}

impl MomentOracle {
    pub fn new(spec: MeasureSpec) -> Self {
        MomentOracle {
            spec,
            cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn spec(&self) -> &MeasureSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.n
    }

    /// `y_alpha`.
    pub fn moment(&self, alpha: &MultiIndex) -> f64 {
        assert_eq!(alpha.dim(), self.spec.n, "multi-index dimension mismatch");
        if let Some(&v) = self.cache.read().expect("cache lock").get(alpha) {
            return v;
        }
        let v = match self.spec.kind {
            MeasureKind::Gaussian => {
                gaussian_moment(alpha, self.spec.param, self.spec.convention)
                    .expect("spec validated at construction")
            }
            MeasureKind::Exponential => exponential_moment(alpha, self.spec.param)
                .expect("spec validated at construction"),
        };
        self.cache
            .write()
            .expect("cache lock")
            .insert(alpha.clone(), v);
        v
    }

    /// Total mass `y_0` of the measure.
    pub fn mass(&self) -> f64 {
        self.moment(&MultiIndex::zero(self.spec.n))
    }

    /// Moments for every multi-index of degree up to `d` in canonical order.
    pub fn moment_vector(&self, d: u32) -> Vec<f64> {
        enumerate_multiindices(self.spec.n, d)
            .iter()
            .map(|a| self.moment(a))
            .collect()
    }

    /// Growth bound `tau_d = max(y_0, max_i y_{2d e_i})`; every feasible
    /// truncated moment vector is entrywise bounded by it, which makes it a
    /// natural solver scale.
    pub fn growth_bound(&self, d: u32) -> f64 {
        let mut tau = self.mass();
        for i in 0..self.spec.n {
            let mut e = vec![0u32; self.spec.n];
            e[i] = 2 * d;
            tau = tau.max(self.moment(&MultiIndex::new(e)));
        }
        tau
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::quad::integrate_adaptive;
    use approx::assert_relative_eq;

    fn mi(e: &[u32]) -> MultiIndex {
        MultiIndex::new(e.to_vec())
    }

    #[test]
    fn odd_gaussian_moments_vanish() {
        for convention in [Convention::StandardNormalized, Convention::PaperExperimental] {
            for sigma in [0.5, 1.0, 2.0] {
                assert_eq!(gaussian_moment(&mi(&[1]), sigma, convention).unwrap(), 0.0);
                assert_eq!(
                    gaussian_moment(&mi(&[2, 3]), sigma, convention).unwrap(),
                    0.0
                );
            }
        }
    }

    #[test]
    fn gaussian_examples() {
        // x^4 standard normalized: 3 (= 3!!), cross-checked by quadrature below
        assert_relative_eq!(
            gaussian_moment(&mi(&[4]), 1.0, Convention::StandardNormalized).unwrap(),
            3.0,
            max_relative = 1e-14
        );
        // experimental density exp(-|x|^2), total mass over R^2 is pi
        assert_relative_eq!(
            gaussian_moment(&mi(&[0, 0]), 1.0, Convention::PaperExperimental).unwrap(),
            std::f64::consts::PI,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            gaussian_moment(&mi(&[2, 0]), 1.0, Convention::PaperExperimental).unwrap(),
            std::f64::consts::PI / 2.0,
            max_relative = 1e-14
        );
    }

    #[test]
    fn exponential_examples() {
        assert_relative_eq!(
            exponential_moment(&mi(&[0, 0]), 5.0).unwrap(),
            0.04,
            max_relative = 1e-14
        );
        assert_relative_eq!(exponential_moment(&mi(&[2, 1]), 1.0).unwrap(), 2.0);
        assert_relative_eq!(exponential_moment(&mi(&[1]), 2.0).unwrap(), 0.25);
    }

    #[test]
    fn parameter_validation() {
        assert!(gaussian_moment(&mi(&[0]), 0.0, Convention::PaperExperimental).is_err());
        assert!(exponential_moment(&mi(&[0]), -1.0).is_err());
        assert!(MeasureSpec::gaussian(2, 0.5, Convention::StandardNormalized).is_err());
        assert!(MeasureSpec::gaussian(0, 1.0, Convention::StandardNormalized).is_err());
        assert!(MeasureSpec::exponential(2, 0.0).is_err());
    }

    #[test]
    fn moment_vector_examples() {
        let gauss = MomentOracle::new(
            MeasureSpec::gaussian(2, 1.0, Convention::StandardNormalized).unwrap(),
        );
        assert_eq!(gauss.moment_vector(2), vec![1.0, 0.0, 0.0, 1.0, 0.0, 1.0]);

        let exp = MomentOracle::new(MeasureSpec::exponential(1, 1.0).unwrap());
        let v = exp.moment_vector(3);
        assert_eq!(v.len(), 4);
        for (got, want) in v.iter().zip([1.0, 1.0, 2.0, 6.0]) {
            assert_relative_eq!(*got, want, max_relative = 1e-13);
        }
        assert!(exp.mass() > 0.0);
        assert!(gauss.mass() > 0.0);
    }

    #[test]
    fn growth_bound_examples() {
        let gauss = MomentOracle::new(
            MeasureSpec::gaussian(1, 1.0, Convention::StandardNormalized).unwrap(),
        );
        assert_relative_eq!(gauss.growth_bound(2), 3.0, max_relative = 1e-13);
        assert_relative_eq!(gauss.growth_bound(0), 1.0);

        let exp = MomentOracle::new(MeasureSpec::exponential(1, 1.0).unwrap());
        assert_relative_eq!(exp.growth_bound(1), 2.0, max_relative = 1e-13);
    }

    #[test]
    fn permutation_symmetry() {
        for (a, b) in [(mi(&[4, 2]), mi(&[2, 4])), (mi(&[6, 0]), mi(&[0, 6]))] {
            for convention in [Convention::StandardNormalized, Convention::PaperExperimental] {
                assert_eq!(
                    gaussian_moment(&a, 1.0, convention).unwrap(),
                    gaussian_moment(&b, 1.0, convention).unwrap()
                );
            }
            assert_eq!(
                exponential_moment(&a, 3.0).unwrap(),
                exponential_moment(&b, 3.0).unwrap()
            );
        }
    }

    #[test]
    fn no_overflow_at_high_order() {
        let v = gaussian_moment(&mi(&[48]), 1.0, Convention::StandardNormalized).unwrap();
        assert!(v.is_finite() && v > 0.0);
        let v = exponential_moment(&mi(&[48]), 0.5).unwrap();
        assert!(v.is_finite() && v > 0.0);
    }

    /// 1D quadrature oracle for a single coordinate factor of the product
    /// measure.
    fn coord_moment_quad(k: u32, spec: &MeasureSpec) -> f64 {
        match spec.kind {
            MeasureKind::Gaussian => {
                let norm = match spec.convention {
                    Convention::StandardNormalized => {
                        1.0 / (2.0 * std::f64::consts::PI).sqrt()
                    }
                    Convention::PaperExperimental => 1.0,
                };
                let denom = match spec.convention {
                    Convention::StandardNormalized => 2.0,
                    Convention::PaperExperimental => spec.param * spec.param,
                };
                let lim = 15.0 * spec.param.max(1.0);
                integrate_adaptive(
                    |x| norm * x.powi(k as i32) * (-x * x / denom).exp(),
                    -lim,
                    lim,
                    1e-13,
                )
            }
            MeasureKind::Exponential => {
                let lim = (60.0 + 2.0 * f64::from(k)) / spec.param;
                integrate_adaptive(
                    |x| x.powi(k as i32) * (-spec.param * x).exp(),
                    0.0,
                    lim,
                    1e-13,
                )
            }
        }
    }

    #[test]
    fn closed_forms_match_quadrature() {
        let specs = [
            MeasureSpec::gaussian(2, 1.0, Convention::StandardNormalized).unwrap(),
            MeasureSpec::gaussian(2, 0.8, Convention::PaperExperimental).unwrap(),
            MeasureSpec::gaussian(2, 0.5, Convention::PaperExperimental).unwrap(),
            MeasureSpec::exponential(2, 5.0).unwrap(),
            MeasureSpec::exponential(2, 1.0).unwrap(),
        ];
        for spec in specs {
            let oracle = MomentOracle::new(spec);
            for alpha in enumerate_multiindices(2, 10) {
                let closed = oracle.moment(&alpha);
                let quad: f64 = alpha
                    .exponents()
                    .iter()
                    .map(|&k| coord_moment_quad(k, &spec))
                    .product();
                assert!(
                    (closed - quad).abs() <= 1e-9 * (1.0 + quad.abs()),
                    "alpha={alpha} spec={spec:?}: closed={closed} quad={quad}"
                );
            }
        }
    }
}
