//! Adaptive quadrature and quadrature-based restricted moments.
//!
//! These integrators are the independent ground-truth side of the artifact:
//! nothing in the bound-producing path calls them. They back the
//! `stokes-check` command and the validation suites.

use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::moments::{Convention, MeasureKind, MeasureSpec};
use crate::poly::{enumerate_multiindices, MultiIndex, Poly};
use crate::relax::SemiAlgebraicSet;

#[derive(Debug, Error, PartialEq)]
pub enum QuadError {
    #[error("the defining polynomials do not match a supported quadrature shape (disc, half-plane, interval)")]
    UnsupportedShape,
    #[error("shape/measure combination not supported: {0}")]
    UnsupportedMeasure(&'static str),
}

/// Adaptive Simpson integration of `f` on `[a, b]` to absolute tolerance
/// `tol`.
pub fn integrate_adaptive<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    // a coarse initial split guards against the recursion terminating early
    // on integrands whose features cancel at panel midpoints
    const PANELS: usize = 16;
    let h = (b - a) / PANELS as f64;
    let mut total = 0.0;
    for k in 0..PANELS {
        let lo = a + k as f64 * h;
        let hi = lo + h;
        let flo = f(lo);
        let fhi = f(hi);
        let fmid = f(0.5 * (lo + hi));
        let whole = simpson(lo, hi, flo, fmid, fhi);
        total += adaptive_step(
            &f,
            lo,
            hi,
            flo,
            fmid,
            fhi,
            whole,
            tol / PANELS as f64,
            20,
        );
    }
    total
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adaptive_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    // the tolerance never drops below the roundoff floor of the panel values,
    // which would otherwise force runaway recursion
    let floor = 4.0 * f64::EPSILON * (left.abs() + right.abs());
    if depth == 0 || delta.abs() <= (15.0 * tol).max(floor) {
        return left + right + delta / 15.0;
    }
    let half = (0.5 * tol).max(0.25 * floor);
    adaptive_step(f, a, m, fa, flm, fm, left, half, depth - 1)
        + adaptive_step(f, m, b, fm, frm, fb, right, half, depth - 1)
}

/// Shapes with a quadrature reduction for restricted moments.
#[derive(Debug, Clone, PartialEq)]
pub enum QuadShape {
    /// `|x| <= radius` in the plane, centered at the origin.
    Disc { radius: f64 },
    /// `a . x >= b` in the plane.
    HalfPlane { a: [f64; 2], b: f64 },
    /// `[lo, hi]` on the line; `hi` may be infinite for a half-line.
    Interval { lo: f64, hi: f64 },
}

/// Recognize the supported shapes from the defining polynomials.
pub fn detect_shape(set: &SemiAlgebraicSet) -> Result<QuadShape, QuadError> {
    let core: Vec<&Poly> = set.constraints().iter().collect();
    if core.len() != 1 {
        return Err(QuadError::UnsupportedShape);
    }
    let g = core[0];
    match (set.dim(), g.degree()) {
        (2, 2) => {
            // c0 - q x1^2 - q x2^2 with q > 0, c0 > 0
            let c0 = g.coeff(&MultiIndex::new(vec![0, 0]));
            let c20 = g.coeff(&MultiIndex::new(vec![2, 0]));
            let c02 = g.coeff(&MultiIndex::new(vec![0, 2]));
            if g.num_terms() == 3 && c20 == c02 && c20 < 0.0 && c0 > 0.0 {
                Ok(QuadShape::Disc {
                    radius: (c0 / -c20).sqrt(),
                })
            } else {
                Err(QuadError::UnsupportedShape)
            }
        }
        (2, 1) => {
            let a1 = g.coeff(&MultiIndex::new(vec![1, 0]));
            let a2 = g.coeff(&MultiIndex::new(vec![0, 1]));
            let c0 = g.coeff(&MultiIndex::new(vec![0, 0]));
            if a1 == 0.0 && a2 == 0.0 {
                return Err(QuadError::UnsupportedShape);
            }
            Ok(QuadShape::HalfPlane {
                a: [a1, a2],
                b: -c0,
            })
        }
        (1, 2) => {
            let c2 = g.coeff(&MultiIndex::new(vec![2]));
            let c1 = g.coeff(&MultiIndex::new(vec![1]));
            let c0 = g.coeff(&MultiIndex::new(vec![0]));
            if c2 >= 0.0 {
                return Err(QuadError::UnsupportedShape);
            }
            let disc = c1 * c1 - 4.0 * c2 * c0;
            if disc <= 0.0 {
                return Err(QuadError::UnsupportedShape);
            }
            let r1 = (-c1 + disc.sqrt()) / (2.0 * c2);
            let r2 = (-c1 - disc.sqrt()) / (2.0 * c2);
            Ok(QuadShape::Interval {
                lo: r1.min(r2),
                hi: r1.max(r2),
            })
        }
        (1, 1) => {
            let a1 = g.coeff(&MultiIndex::new(vec![1]));
            let c0 = g.coeff(&MultiIndex::new(vec![0]));
            if a1 > 0.0 {
                Ok(QuadShape::Interval {
                    lo: -c0 / a1,
                    hi: f64::INFINITY,
                })
            } else if a1 < 0.0 {
                Ok(QuadShape::Interval {
                    lo: f64::NEG_INFINITY,
                    hi: -c0 / a1,
                })
            } else {
                Err(QuadError::UnsupportedShape)
            }
        }
        _ => Err(QuadError::UnsupportedShape),
    }
}

/// 1D density factor of the product measure, unnormalized or normalized per
/// the convention.
fn density_1d(spec: &MeasureSpec) -> impl Fn(f64) -> f64 + '_ {
    move |t: f64| match spec.kind {
        MeasureKind::Gaussian => match spec.convention {
            Convention::StandardNormalized => {
                (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt()
            }
            Convention::PaperExperimental => (-t * t / (spec.param * spec.param)).exp(),
        },
        MeasureKind::Exponential => {
            if t < 0.0 {
                0.0
            } else {
                (-spec.param * t).exp()
            }
        }
    }
}

/// Effective cutoff beyond which the 1D density tail is below 1e-22 relative
/// for every monomial degree used here.
fn tail_cutoff(spec: &MeasureSpec) -> f64 {
    match spec.kind {
        MeasureKind::Gaussian => match spec.convention {
            Convention::StandardNormalized => 16.0,
            Convention::PaperExperimental => 16.0 * spec.param,
        },
        MeasureKind::Exponential => 120.0 / spec.param,
    }
}

fn moment_1d(spec: &MeasureSpec, k: u32, lo: f64, hi: f64) -> f64 {
    let cut = tail_cutoff(spec);
    let lo = match spec.kind {
        MeasureKind::Exponential => lo.max(0.0),
        MeasureKind::Gaussian => lo.max(-cut),
    };
    let hi = hi.min(cut);
    if lo >= hi {
        return 0.0;
    }
    let dens = density_1d(spec);
    integrate_adaptive(|t| t.powi(k as i32) * dens(t), lo, hi, 1e-12)
}

/// `int_0^{2pi} cos^a sin^b` for even `a`, `b`:
/// `2 pi (a-1)!! (b-1)!! / (a+b)!!`; zero when either exponent is odd.
fn angular_integral(a: u32, b: u32) -> f64 {
    if a % 2 == 1 || b % 2 == 1 {
        return 0.0;
    }
    let ln_dfact = |k: u32| -> f64 {
        // ln k!! for even k, ln of (k!!) with k odd handled via (k)!/(k-1)!!…
        if k == 0 {
            return 0.0;
        }
        if k % 2 == 0 {
            let m = f64::from(k / 2);
            m * std::f64::consts::LN_2 + ln_gamma(m + 1.0)
        } else {
            ln_gamma(f64::from(k) + 1.0) - {
                let m = f64::from((k - 1) / 2);
                m * std::f64::consts::LN_2 + ln_gamma(m + 1.0)
            }
        }
    };
    let odd = |k: u32| if k == 0 { 0.0 } else { ln_dfact(k - 1) };
    2.0 * std::f64::consts::PI * (odd(a) + odd(b) - ln_dfact(a + b)).exp()
}

/// Quadrature moments `int_Omega x^alpha dmu` for all `|alpha| <= 2d`, in
/// canonical order. Supports the shapes of [`QuadShape`]; discs and
/// half-planes require a Gaussian measure.
pub fn restricted_moments_quadrature(
    set: &SemiAlgebraicSet,
    spec: &MeasureSpec,
    d: u32,
) -> Result<Vec<f64>, QuadError> {
    let shape = detect_shape(set)?;
    let alphas = enumerate_multiindices(set.dim(), 2 * d);
    match shape {
        QuadShape::Disc { radius } => {
            if spec.kind != MeasureKind::Gaussian || spec.n != 2 {
                return Err(QuadError::UnsupportedMeasure(
                    "discs require a 2D Gaussian measure",
                ));
            }
            let norm = match spec.convention {
                Convention::StandardNormalized => 1.0 / (2.0 * std::f64::consts::PI),
                Convention::PaperExperimental => 1.0,
            };
            let denom = match spec.convention {
                Convention::StandardNormalized => 2.0,
                Convention::PaperExperimental => spec.param * spec.param,
            };
            // radial integrals per total degree
            let mut radial = vec![0.0; (4 * d + 1) as usize];
            for (k, r) in radial.iter_mut().enumerate() {
                *r = integrate_adaptive(
                    |rho| norm * rho.powi(k as i32 + 1) * (-rho * rho / denom).exp(),
                    0.0,
                    radius,
                    1e-12,
                );
            }
            Ok(alphas
                .iter()
                .map(|alpha| {
                    let e = alpha.exponents();
                    radial[alpha.degree() as usize] * angular_integral(e[0], e[1])
                })
                .collect())
        }
        QuadShape::HalfPlane { a, b } => {
            if spec.kind != MeasureKind::Gaussian || spec.n != 2 {
                return Err(QuadError::UnsupportedMeasure(
                    "half-planes require a 2D Gaussian measure",
                ));
            }
            // rotate so the half-plane is {t >= c}; the radially symmetric
            // density factorizes in the rotated coordinates
            let norm = (a[0] * a[0] + a[1] * a[1]).sqrt();
            let e = [a[0] / norm, a[1] / norm];
            let c = b / norm;
            let perp = [-e[1], e[0]];
            let max_pow = 4 * d;
            let cut = tail_cutoff(spec);
            let half: Vec<f64> = (0..=max_pow).map(|p| moment_1d(spec, p, c, cut)).collect();
            let full: Vec<f64> = (0..=max_pow).map(|q| moment_1d(spec, q, -cut, cut)).collect();
            Ok(alphas
                .iter()
                .map(|alpha| {
                    // x1 = t e1 + s perp1, x2 = t e2 + s perp2
                    let ex = alpha.exponents();
                    let mut total = 0.0;
                    for i in 0..=ex[0] {
                        for j in 0..=ex[1] {
                            let coeff = binom(ex[0], i)
                                * binom(ex[1], j)
                                * e[0].powi(i as i32)
                                * perp[0].powi((ex[0] - i) as i32)
                                * e[1].powi(j as i32)
                                * perp[1].powi((ex[1] - j) as i32);
                            let tp = (i + j) as usize;
                            let sp = (ex[0] - i + ex[1] - j) as usize;
                            total += coeff * half[tp] * full[sp];
                        }
                    }
                    total
                })
                .collect())
        }
        QuadShape::Interval { lo, hi } => {
            if spec.n != 1 {
                return Err(QuadError::UnsupportedMeasure("intervals are 1D"));
            }
            Ok(alphas
                .iter()
                .map(|alpha| moment_1d(spec, alpha.exponents()[0], lo, hi))
                .collect())
        }
    }
}

fn binom(n: u32, k: u32) -> f64 {
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * f64::from(n - i) / f64::from(i + 1);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn simpson_handles_smooth_integrands() {
        let v = integrate_adaptive(|x| x * x, 0.0, 1.0, 1e-12);
        assert_relative_eq!(v, 1.0 / 3.0, max_relative = 1e-12);
        let v = integrate_adaptive(|x| (-x).exp(), 0.0, 30.0, 1e-13);
        assert_relative_eq!(v, 1.0, max_relative = 1e-11);
        let v = integrate_adaptive(f64::sin, 0.0, std::f64::consts::PI, 1e-12);
        assert_relative_eq!(v, 2.0, max_relative = 1e-11);
    }

    #[test]
    fn angular_integrals_match_references() {
        assert_relative_eq!(angular_integral(0, 0), 2.0 * std::f64::consts::PI);
        assert_relative_eq!(
            angular_integral(2, 0),
            std::f64::consts::PI,
            max_relative = 1e-13
        );
        assert_relative_eq!(
            angular_integral(2, 2),
            std::f64::consts::PI / 4.0,
            max_relative = 1e-13
        );
        assert_eq!(angular_integral(1, 2), 0.0);
    }
}
