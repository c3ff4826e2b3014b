//! Stokes equality constraints on the moments of the restricted measure.
//!
//! For a multiplier `f` that vanishes on the boundary of the set,
//! integration by parts of `d/dx_i (x^alpha f theta_mu)` over the set gives
//! the linear identities `L_u(p_{i,alpha}) = 0` where
//!
//! ```text
//! p_{i,alpha} = d(x^alpha f)/dx_i  -  x^alpha f * (-d log theta_mu / dx_i)
//! ```
//!
//! The log-density gradient term depends on the measure: `x_i` for the
//! standard normalized Gaussian, `(2/sigma^2) x_i` for the experimental
//! density `exp(-|x|^2/sigma^2)` and the constant `lambda` for the
//! exponential density. They hold on non-compact sets as well, which is
//! exercised numerically by the validation suite.

use crate::moments::{Convention, MeasureKind, MeasureSpec};
use crate::poly::{enumerate_multiindices, MultiIndex, Poly};

/// One Stokes identity: `L_u(p) = 0`, tagged with the coordinate and the
/// monomial shift that produced it.
#[derive(Debug, Clone)]
pub struct StokesPoly {
    /// 0-based coordinate `i`.
    pub var: usize,
    pub alpha: MultiIndex,
    pub p: Poly,
}

/// All Stokes polynomials that fit the degree budget of level `d`:
/// `deg p_{i,alpha} <= 2d`, i.e. `|alpha| <= 2d - deg f - 1` for Gaussian
/// measures and `|alpha| <= 2d - deg f` for the exponential measure.
///
/// Returns an empty list (with a warning) when even `alpha = 0` does not
/// fit.
pub fn stokes_polys(f: &Poly, spec: &MeasureSpec, d: u32) -> Vec<StokesPoly> {
    let n = f.dim();
    debug_assert_eq!(n, spec.n);
    let budget: i64 = match spec.kind {
        MeasureKind::Gaussian => 2 * i64::from(d) - i64::from(f.degree()) - 1,
        MeasureKind::Exponential => 2 * i64::from(d) - i64::from(f.degree()),
    };
    if budget < 0 {
        log::warn!(
            "stokes budget exhausted: 2d = {} cannot fit multiplier degree {}",
            2 * d,
            f.degree()
        );
        return Vec::new();
    }
    let alphas = enumerate_multiindices(n, budget as u32);
    let mut out = Vec::with_capacity(n * alphas.len());
    for var in 0..n {
        for alpha in &alphas {
            let xaf = Poly::monomial(alpha.clone(), 1.0)
                .mul(f)
                .expect("same dimension");
            let drift = match (spec.kind, spec.convention) {
                (MeasureKind::Gaussian, Convention::StandardNormalized) => {
                    Poly::var(n, var).mul(&xaf).expect("same dimension")
                }
                (MeasureKind::Gaussian, Convention::PaperExperimental) => Poly::var(n, var)
                    .mul(&xaf)
                    .expect("same dimension")
                    .scale(2.0 / (spec.param * spec.param)),
                (MeasureKind::Exponential, _) => xaf.scale(spec.param),
            };
            let p = xaf
                .partial(var)
                .expect("coordinate in range")
                .sub(&drift)
                .expect("same dimension");
            if p.is_zero() {
                continue;
            }
            debug_assert!(p.degree() <= 2 * d);
            out.push(StokesPoly {
                var,
                alpha: alpha.clone(),
                p,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::quad::integrate_adaptive;

    fn mi(e: &[u32]) -> MultiIndex {
        MultiIndex::new(e.to_vec())
    }

    #[test]
    fn gaussian_interval_example() {
        // f = 1 - x^2, alpha = 0, i = 1: p = -2x - x(1 - x^2) = x^3 - 3x
        let f = Poly::from_terms(1, [(mi(&[0]), 1.0), (mi(&[2]), -1.0)]).unwrap();
        let spec = MeasureSpec::gaussian(1, 1.0, Convention::StandardNormalized).unwrap();
        let list = stokes_polys(&f, &spec, 2);
        let p0 = &list[0];
        assert_eq!(p0.alpha, mi(&[0]));
        assert_eq!(p0.p.coeff(&mi(&[3])), 1.0);
        assert_eq!(p0.p.coeff(&mi(&[1])), -3.0);
        assert_eq!(p0.p.num_terms(), 2);

        // the identity holds on the interval: int_{-1}^{1} p e^{-x^2/2} = 0
        let v = integrate_adaptive(
            |x| p0.p.eval(&[x]).unwrap() * (-0.5 * x * x).exp(),
            -1.0,
            1.0,
            1e-12,
        );
        assert!(v.abs() < 1e-12, "odd integrand must vanish, got {v}");
    }

    #[test]
    fn exponential_example() {
        // f = x(1-x), alpha = 0: p = (1 - 2x) - 1 * x(1-x) = x^2 - 3x + 1
        let f = Poly::from_terms(1, [(mi(&[1]), 1.0), (mi(&[2]), -1.0)]).unwrap();
        let spec = MeasureSpec::exponential(1, 1.0).unwrap();
        let list = stokes_polys(&f, &spec, 2);
        let p0 = &list[0];
        assert_eq!(p0.p.coeff(&mi(&[2])), 1.0);
        assert_eq!(p0.p.coeff(&mi(&[1])), -3.0);
        assert_eq!(p0.p.coeff(&mi(&[0])), 1.0);
    }

    #[test]
    fn budget_counts() {
        let f = Poly::from_terms(1, [(mi(&[0]), 1.0), (mi(&[2]), -1.0)]).unwrap();
        let spec = MeasureSpec::gaussian(1, 1.0, Convention::StandardNormalized).unwrap();
        // budget |alpha| <= 2d - deg f - 1 = 2*2 - 2 - 1 = 1 -> alphas {0, 1}
        let list = stokes_polys(&f, &spec, 2);
        assert_eq!(list.len(), 2);
        for sp in &list {
            assert!(sp.p.degree() <= 4);
        }
        // too small a budget yields nothing
        let list = stokes_polys(&f, &spec, 1);
        assert_eq!(list.len(), 1); // |alpha| <= 0 only
        let big = Poly::monomial(mi(&[6]), 1.0);
        assert!(stokes_polys(&big, &spec, 1).is_empty());
    }

    #[test]
    fn experimental_convention_scales_the_drift() {
        let f = Poly::from_terms(1, [(mi(&[0]), 1.0), (mi(&[2]), -1.0)]).unwrap();
        let spec = MeasureSpec::gaussian(1, 0.5, Convention::PaperExperimental).unwrap();
        let list = stokes_polys(&f, &spec, 2);
        // p = -2x - (2/sigma^2) x (1 - x^2) = 8 x^3 - 10 x for sigma = 0.5
        let p0 = &list[0];
        assert_eq!(p0.p.coeff(&mi(&[3])), 8.0);
        assert_eq!(p0.p.coeff(&mi(&[1])), -10.0);
    }
}
