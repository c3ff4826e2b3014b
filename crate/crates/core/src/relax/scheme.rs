//! Builders for the hierarchy's SDP instances.
//!
//! Scheme 1 is the plain relaxation at level `d`: with the complementary
//! sequence `v = y - u` eliminated, the decision vector is `u` over
//! `N^n_{2d}` and the blocks are
//!
//! ```text
//! M_d(u) >= 0,   M_d(y) - M_d(u) >= 0,   M_{d - d_j}(g_j u) >= 0
//! ```
//!
//! with objective `maximize L_u(f)`. Scheme 3 adds the Stokes equality rows
//! `L_u(p_{i,alpha}) = 0` (objective fixed to `u_0`), with linearly
//! dependent rows removed by a rank-revealing pass.

use nalgebra::{DMatrix, DVector};

use crate::moments::MomentOracle;
use crate::poly::{enumerate_multiindices, MultiIndex, Poly};
use crate::sdp::{AffineBlock, InstanceMeta, SchemeTag, SdpInstance};

use super::stokes::stokes_polys;
use super::{
    index_map, localizing_entries, moment_matrix_entries, RelaxError, SemiAlgebraicSet,
};

fn check_compat(
    set: &SemiAlgebraicSet,
    oracle: &MomentOracle,
    d: u32,
) -> Result<(), RelaxError> {
    if oracle.dim() != set.dim() {
        return Err(RelaxError::OracleDimension {
            oracle: oracle.dim(),
            set: set.dim(),
        });
    }
    let d0 = set.min_level();
    if d < d0 {
        return Err(RelaxError::LevelTooSmall { d, d0 });
    }
    Ok(())
}

/// Scheme-1 instance at level `d` with objective `maximize L_u(f)`.
pub fn build_scheme1(
    set: &SemiAlgebraicSet,
    oracle: &MomentOracle,
    d: u32,
    f: &Poly,
) -> Result<SdpInstance, RelaxError> {
    check_compat(set, oracle, d)?;
    let n = set.dim();
    if f.dim() != n {
        return Err(RelaxError::DimensionMismatch {
            index: 0,
            expected: n,
            got: f.dim(),
        });
    }
    if f.degree() > 2 * d {
        return Err(RelaxError::DegreeBudget {
            deg: f.degree(),
            budget: 2 * d,
        });
    }

    let vars = enumerate_multiindices(n, 2 * d);
    let idx = index_map(n, 2 * d);
    let num_vars = vars.len();

    let mut objective = vec![0.0; num_vars];
    for (alpha, coeff) in f.terms() {
        objective[idx[alpha]] = coeff;
    }

    let y = oracle.moment_vector(2 * d);
    let mm = moment_matrix_entries(n, d);
    let mut blocks = Vec::with_capacity(2 + set.constraints().len());

    // M_d(u)
    let mut bu = AffineBlock::new(mm.side);
    for i in 0..mm.side {
        for j in i..mm.side {
            bu.push_term(mm.entry(i, j), i, j, 1.0);
        }
    }
    bu.normalize();
    blocks.push(bu);

    // M_d(y) - M_d(u): the eliminated complementary sequence v = y - u
    let mut bv = AffineBlock::new(mm.side);
    for i in 0..mm.side {
        for j in i..mm.side {
            let var = mm.entry(i, j);
            bv.set_f0(i, j, y[var]);
            bv.push_term(var, i, j, -1.0);
        }
    }
    bv.normalize();
    blocks.push(bv);

    // localizing matrices M_{d - d_j}(g_j u)
    for g in set.constraints() {
        let ls = localizing_entries(g, n, d)?;
        let mut bg = AffineBlock::new(ls.side);
        for i in 0..ls.side {
            for j in i..ls.side {
                for &(var, coeff) in ls.entry(i, j) {
                    bg.push_term(var, i, j, coeff);
                }
            }
        }
        bg.normalize();
        blocks.push(bg);
    }

    let mut instance = SdpInstance::new(objective, blocks)?;
    instance.meta = InstanceMeta {
        level: d,
        scheme: SchemeTag::Scheme1,
        var_indices: vars,
        precond: None,
        init_scale: oracle.growth_bound(d),
    };
    Ok(instance)
}

/// Scheme-3 instance: scheme 1 with `f = 1` plus the Stokes equality rows
/// generated by `f_stokes`.
pub fn build_scheme3(
    set: &SemiAlgebraicSet,
    oracle: &MomentOracle,
    d: u32,
    f_stokes: &Poly,
) -> Result<SdpInstance, RelaxError> {
    let n = set.dim();
    let mut instance = build_scheme1(set, oracle, d, &Poly::one(n))?;

    let idx = index_map(n, 2 * d);
    let list = stokes_polys(f_stokes, oracle.spec(), d);
    let num_vars = instance.num_vars();
    let mut rows = DMatrix::zeros(list.len(), num_vars);
    for (r, sp) in list.iter().enumerate() {
        assert!(
            sp.p.degree() <= 2 * d,
            "stokes polynomial exceeds the level degree budget"
        );
        for (alpha, coeff) in sp.p.terms() {
            rows[(r, idx[alpha])] = coeff;
        }
    }
    let (kept, dropped) = crate::sdp::independent_rows(&rows);
    if !dropped.is_empty() {
        log::debug!(
            "scheme 3 (d = {d}): dropped {} dependent stokes rows of {}",
            dropped.len(),
            list.len()
        );
    }
    let mut eq_a = DMatrix::zeros(kept.len(), num_vars);
    for (t, &r) in kept.iter().enumerate() {
        eq_a.row_mut(t).copy_from(&rows.row(r));
    }
    let eq_b = DVector::zeros(kept.len());
    {
        let (a, b) = instance.equalities_mut();
        *a = eq_a;
        *b = eq_b;
    }
    instance.meta.scheme = SchemeTag::Scheme3;
    Ok(instance)
}

/// Guard floor for the scaling diagonal.
const SCALE_FLOOR: f64 = 1e-300;

/// Per-variable scale `sigma_alpha = sqrt(max(y_{2 alpha}, floor))`; by
/// Cauchy-Schwarz every representable `|u_alpha|` is bounded by
/// `sigma_alpha * sqrt(y_0)`, so the substituted variables are uniformly
/// scaled.
pub fn preconditioning_diagonal(oracle: &MomentOracle, indices: &[MultiIndex]) -> Vec<f64> {
    indices
        .iter()
        .map(|alpha| oracle.moment(&alpha.add(alpha)).max(SCALE_FLOOR).sqrt())
        .collect()
}

/// Rescale the decision variables by the moment-growth diagonal
/// (`u_alpha = sigma_alpha * u'_alpha`). Objective values are invariant;
/// the recorded diagonal lets the solver report `u` in original units.
pub fn precondition(instance: &SdpInstance, oracle: &MomentOracle) -> SdpInstance {
    if instance.meta.precond.is_some() || instance.meta.var_indices.is_empty() {
        return instance.clone();
    }
    let diag = preconditioning_diagonal(oracle, &instance.meta.var_indices);
    let mut out = instance.clone();
    for (c, s) in out.objective_mut().iter_mut().zip(&diag) {
        *c *= s;
    }
    for block in out.blocks_mut() {
        block.scale_vars(&diag);
    }
    {
        let (a, _) = out.equalities_mut();
        for (k, s) in diag.iter().enumerate() {
            a.column_mut(k).scale_mut(*s);
        }
    }
    // growth bound of the rescaled oracle moments
    let n = oracle.dim();
    let d = instance.meta.level;
    let scaled = |alpha: &MultiIndex| {
        oracle.moment(alpha) / oracle.moment(&alpha.add(alpha)).max(SCALE_FLOOR).sqrt()
    };
    let mut tau = scaled(&MultiIndex::zero(n)).abs();
    for i in 0..n {
        let mut e = vec![0u32; n];
        e[i] = 2 * d;
        tau = tau.max(scaled(&MultiIndex::new(e)).abs());
    }
    out.meta.precond = Some(diag);
    out.meta.init_scale = tau;
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::{Convention, MeasureSpec};
    use approx::assert_relative_eq;

    fn mi(e: &[u32]) -> MultiIndex {
        MultiIndex::new(e.to_vec())
    }

    fn interval_set() -> SemiAlgebraicSet {
        let g = Poly::from_terms(1, [(mi(&[0]), 1.0), (mi(&[2]), -1.0)]).unwrap();
        SemiAlgebraicSet::new(1, vec![g]).unwrap()
    }

    fn std_gauss_1d() -> MomentOracle {
        MomentOracle::new(MeasureSpec::gaussian(1, 1.0, Convention::StandardNormalized).unwrap())
    }

    #[test]
    fn scheme1_interval_level1_layout() {
        let set = interval_set();
        let oracle = std_gauss_1d();
        let inst = build_scheme1(&set, &oracle, 1, &Poly::one(1)).unwrap();
        assert_eq!(inst.num_vars(), 3);
        assert_eq!(inst.objective(), &[1.0, 0.0, 0.0]);
        assert_eq!(inst.blocks().len(), 3);
        assert_eq!(inst.num_equalities(), 0);

        let u = [0.25, -0.125, 0.0625];
        let m0 = inst.blocks()[0].eval(&u);
        assert_eq!(
            (m0[(0, 0)], m0[(0, 1)], m0[(1, 1)]),
            (u[0], u[1], u[2])
        );
        // y = (1, 0, 1): second block is [[1-u0, -u1], [-u1, 1-u2]]
        let m1 = inst.blocks()[1].eval(&u);
        assert_relative_eq!(m1[(0, 0)], 1.0 - u[0]);
        assert_relative_eq!(m1[(0, 1)], -u[1]);
        assert_relative_eq!(m1[(1, 1)], 1.0 - u[2]);
        // localizing block [u0 - u2]
        let m2 = inst.blocks()[2].eval(&u);
        assert_eq!(m2.nrows(), 1);
        assert_relative_eq!(m2[(0, 0)], u[0] - u[2]);
    }

    #[test]
    fn scheme1_rejects_low_levels_and_big_objectives() {
        let set = interval_set();
        let oracle = std_gauss_1d();
        assert!(matches!(
            build_scheme1(&set, &oracle, 0, &Poly::one(1)),
            Err(RelaxError::LevelTooSmall { .. })
        ));
        let f = Poly::monomial(mi(&[5]), 1.0);
        assert!(matches!(
            build_scheme1(&set, &oracle, 1, &f),
            Err(RelaxError::DegreeBudget { .. })
        ));
    }

    #[test]
    fn scheme3_contains_the_expected_stokes_row() {
        let set = interval_set();
        let oracle = std_gauss_1d();
        let f = set.constraints()[0].clone();
        let inst = build_scheme3(&set, &oracle, 2, &f).unwrap();
        // vars (u0..u4); row L_u(x^3 - 3x) = u3 - 3 u1 = 0 must be present
        let (eq_a, eq_b) = inst.equalities();
        assert!(eq_b.amax() == 0.0);
        let mut found = false;
        for r in 0..eq_a.nrows() {
            let row: Vec<f64> = eq_a.row(r).iter().copied().collect();
            if row == [0.0, -3.0, 0.0, 1.0, 0.0] {
                found = true;
            }
        }
        assert!(found, "missing the L(x^3 - 3x) row: {eq_a}");
        // same blocks as scheme 1 at equal level: equalities only tighten
        let base = build_scheme1(&set, &oracle, 2, &Poly::one(1)).unwrap();
        assert_eq!(base.blocks().len(), inst.blocks().len());
        for (a, b) in base.blocks().iter().zip(inst.blocks()) {
            assert_eq!(a.terms(), b.terms());
        }
    }

    #[test]
    fn stokes_row_count_is_bounded_by_budget() {
        let set = interval_set();
        let oracle = std_gauss_1d();
        let f = set.constraints()[0].clone();
        let d = 3;
        let list = stokes_polys(&f, oracle.spec(), d);
        // |alpha| <= 2d - deg f - 1 = 3 in 1D: 4 shifts, one coordinate
        assert!(list.len() <= 4);
        let inst = build_scheme3(&set, &oracle, d, &f).unwrap();
        assert!(inst.num_equalities() <= list.len());
        assert!(inst.num_equalities() >= 1);
    }

    /// `M_d(u) = sum_alpha u_alpha B_alpha` where the `B_alpha` come from an
    /// independent symbolic expansion of `v_d(x) v_d(x)^T`.
    #[test]
    fn moment_block_matches_symbolic_expansion() {
        for (n, d) in [(1usize, 2u32), (2, 2), (2, 3)] {
            let gs = vec![Poly::var(n, 0)];
            let set = SemiAlgebraicSet::new(n, gs).unwrap();
            let oracle = MomentOracle::new(
                MeasureSpec::gaussian(n, 1.0, Convention::StandardNormalized).unwrap(),
            );
            let inst = build_scheme1(&set, &oracle, d, &Poly::one(n)).unwrap();
            let vars = enumerate_multiindices(n, 2 * d);
            let u: Vec<f64> = (0..vars.len())
                .map(|k| ((k * 2654435761) % 1000) as f64 / 997.0 - 0.5)
                .collect();

            let basis = enumerate_multiindices(n, d);
            let side = basis.len();
            let mut expected = DMatrix::zeros(side, side);
            for (i, bi) in basis.iter().enumerate() {
                for (j, bj) in basis.iter().enumerate() {
                    // coefficient extraction from the monomial product
                    let prod = Poly::monomial(bi.clone(), 1.0)
                        .mul(&Poly::monomial(bj.clone(), 1.0))
                        .unwrap();
                    for (alpha, coeff) in prod.terms() {
                        let k = vars.iter().position(|a| a == alpha).unwrap();
                        expected[(i, j)] += coeff * u[k];
                    }
                }
            }
            let got = inst.blocks()[0].eval(&u);
            assert!((got - expected).amax() < 1e-12, "n={n} d={d}");
        }
    }

    /// Localizing block against the independent expansion of
    /// `g(x) v(x) v(x)^T` (the C_alpha route).
    #[test]
    fn localizing_block_matches_symbolic_expansion() {
        let n = 2;
        let d = 2;
        let g = Poly::from_terms(
            2,
            [(mi(&[0, 0]), 1.0), (mi(&[2, 0]), -1.0), (mi(&[0, 2]), -1.0)],
        )
        .unwrap();
        let set = SemiAlgebraicSet::new(n, vec![g.clone()]).unwrap();
        let oracle = MomentOracle::new(
            MeasureSpec::gaussian(n, 1.0, Convention::StandardNormalized).unwrap(),
        );
        let inst = build_scheme1(&set, &oracle, d, &Poly::one(n)).unwrap();
        let vars = enumerate_multiindices(n, 2 * d);
        let u: Vec<f64> = (0..vars.len())
            .map(|k| (f64::from(k as u32) * 0.37).sin())
            .collect();

        let dg = g.degree().div_ceil(2);
        let basis = enumerate_multiindices(n, d - dg);
        let side = basis.len();
        let mut expected = DMatrix::zeros(side, side);
        for (i, bi) in basis.iter().enumerate() {
            for (j, bj) in basis.iter().enumerate() {
                let prod = Poly::monomial(bi.add(bj), 1.0).mul(&g).unwrap();
                for (alpha, coeff) in prod.terms() {
                    let k = vars.iter().position(|a| a == alpha).unwrap();
                    expected[(i, j)] += coeff * u[k];
                }
            }
        }
        let got = inst.blocks()[2].eval(&u);
        assert!((got - expected).amax() < 1e-12);
    }

    #[test]
    fn preconditioning_diagonal_values() {
        let oracle = std_gauss_1d();
        let vars = enumerate_multiindices(1, 4);
        let diag = preconditioning_diagonal(&oracle, &vars);
        // sigma_alpha = sqrt(y_{2 alpha}): (1, 1, sqrt(3), sqrt(15), sqrt(105))
        assert_relative_eq!(diag[0], 1.0);
        assert_relative_eq!(diag[1], 1.0);
        assert_relative_eq!(diag[2], 3.0f64.sqrt(), max_relative = 1e-13);
        assert_relative_eq!(diag[3], 15.0f64.sqrt(), max_relative = 1e-13);
        assert_relative_eq!(diag[4], 105.0f64.sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn precondition_is_identity_for_unit_moments() {
        // all y_{2alpha} = 1 (Std Gaussian up to d=0 moments only);
        // emulate with a handcrafted instance whose vars are degree 0
        let set = interval_set();
        let oracle = std_gauss_1d();
        let inst = build_scheme1(&set, &oracle, 1, &Poly::one(1)).unwrap();
        let pre = precondition(&inst, &oracle);
        // sigma = (1, 1, sqrt(3)): first two variables untouched
        let diag = pre.meta.precond.clone().unwrap();
        assert_eq!(diag[0], 1.0);
        assert_eq!(diag[1], 1.0);
        assert_relative_eq!(diag[2], 3.0f64.sqrt(), max_relative = 1e-13);
        // scaled blocks evaluated at u'/sigma reproduce the original blocks
        let u = [0.3, -0.1, 0.05];
        let u_scaled: Vec<f64> = u.iter().zip(&diag).map(|(v, s)| v / s).collect();
        for (b0, b1) in inst.blocks().iter().zip(pre.blocks()) {
            let m0 = b0.eval(&u);
            let m1 = b1.eval(&u_scaled);
            assert!((m0 - m1).amax() < 1e-12);
        }
        // objective value is invariant under the substitution
        assert_relative_eq!(
            inst.objective_value(&u),
            pre.objective_value(&u_scaled),
            max_relative = 1e-12
        );
        // double preconditioning is a no-op
        let again = precondition(&pre, &oracle);
        assert_eq!(again.meta.precond, pre.meta.precond);
    }
}
