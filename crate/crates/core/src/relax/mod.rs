//! Assembly of the hierarchy's SDP instances: moment and localizing matrix
//! structures, support augmentation, complement-cell decomposition, Stokes
//! equality constraints and diagonal preconditioning.

use std::collections::HashMap;

use thiserror::Error;

use crate::moments::MeasureSpec;
use crate::poly::{basis_size, enumerate_multiindices, MultiIndex, Poly, PolyError};

mod scheme;
mod stokes;

pub use scheme::{build_scheme1, build_scheme3, precondition, preconditioning_diagonal};
pub use stokes::{stokes_polys, StokesPoly};

#[derive(Debug, Error)]
pub enum RelaxError {
    #[error("a semi-algebraic set needs at least one defining polynomial")]
    EmptyConstraints,
    #[error("defining polynomial {index} has degree 0; constraints must be non-constant")]
    ConstantConstraint { index: usize },
    #[error("defining polynomial {index} has dimension {got}, expected {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("hierarchy level d = {d} is below the minimum d0 = {d0} of this set")]
    LevelTooSmall { d: u32, d0: u32 },
    #[error("polynomial degree {deg} exceeds the level budget 2d = {budget}")]
    DegreeBudget { deg: u32, budget: u32 },
    #[error("the set is already orthant-augmented")]
    AlreadyAugmented,
    #[error("oracle dimension {oracle} does not match the set dimension {set}")]
    OracleDimension { oracle: usize, set: usize },
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Sdp(#[from] crate::sdp::SdpError),
}

/// Basic semi-algebraic set `{x : g_j(x) >= 0}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SemiAlgebraicSet {
    n: usize,
    gs: Vec<Poly>,
    orthant_augmented: bool,
}

impl SemiAlgebraicSet {
    pub fn new(n: usize, gs: Vec<Poly>) -> Result<Self, RelaxError> {
        if gs.is_empty() {
            return Err(RelaxError::EmptyConstraints);
        }
        for (index, g) in gs.iter().enumerate() {
            if g.dim() != n {
                return Err(RelaxError::DimensionMismatch {
                    index,
                    expected: n,
                    got: g.dim(),
                });
            }
            if g.degree() < 1 {
                return Err(RelaxError::ConstantConstraint { index });
            }
        }
        Ok(SemiAlgebraicSet {
            n,
            gs,
            orthant_augmented: false,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn constraints(&self) -> &[Poly] {
        &self.gs
    }

    pub fn is_orthant_augmented(&self) -> bool {
        self.orthant_augmented
    }

    /// `d0 = max_j ceil(deg(g_j) / 2)`, the smallest admissible level.
    pub fn min_level(&self) -> u32 {
        self.gs.iter().map(|g| g.degree().div_ceil(2)).max().unwrap_or(1)
    }

    /// Membership indicator: all defining inequalities hold at `x`.
    pub fn contains(&self, x: &[f64]) -> bool {
        self.gs
            .iter()
            .all(|g| g.eval(x).map(|v| v >= 0.0).unwrap_or(false))
    }

    /// Append the orthant constraints `x_i >= 0`; used when the measure is
    /// supported on the nonnegative orthant.
    pub fn augment_orthant(&self) -> Result<SemiAlgebraicSet, RelaxError> {
        if self.orthant_augmented {
            return Err(RelaxError::AlreadyAugmented);
        }
        let mut gs = self.gs.clone();
        for i in 0..self.n {
            gs.push(Poly::var(self.n, i));
        }
        Ok(SemiAlgebraicSet {
            n: self.n,
            gs,
            orthant_augmented: true,
        })
    }
}

/// Ensure the set carries the support constraints of the measure: for the
/// exponential measure the orthant constraints are appended once.
pub fn ensure_support(
    set: &SemiAlgebraicSet,
    spec: &MeasureSpec,
) -> Result<SemiAlgebraicSet, RelaxError> {
    if spec.is_exponential() && !set.orthant_augmented {
        set.augment_orthant()
    } else {
        Ok(set.clone())
    }
}

/// Product of the defining polynomials: the canonical multiplier that
/// vanishes on the boundary of the set.
pub fn default_stokes_multiplier(set: &SemiAlgebraicSet) -> Result<Poly, RelaxError> {
    let mut f = Poly::one(set.dim());
    for g in set.constraints() {
        f = f.mul(g)?;
    }
    if set.constraints().is_empty() {
        return Err(RelaxError::EmptyConstraints);
    }
    Ok(f)
}

/// Staircase decomposition of the complement `supp mu \ set` into basic
/// semi-algebraic cells with measure-zero overlaps: cell `l` keeps
/// `g_1, ..., g_{l-1}` and flips `g_l`. For the exponential measure every
/// cell is intersected with the nonnegative orthant.
///
/// Expects the pre-augmentation constraint list.
pub fn complement_cells(
    set: &SemiAlgebraicSet,
    spec: &MeasureSpec,
) -> Result<Vec<SemiAlgebraicSet>, RelaxError> {
    debug_assert!(
        !set.orthant_augmented,
        "complement cells are built from the pre-augmentation constraints"
    );
    let mut cells = Vec::with_capacity(set.gs.len());
    for l in 0..set.gs.len() {
        let mut gs: Vec<Poly> = set.gs[..l].to_vec();
        gs.push(set.gs[l].scale(-1.0));
        let cell = SemiAlgebraicSet::new(set.n, gs)?;
        cells.push(if spec.is_exponential() {
            cell.augment_orthant()?
        } else {
            cell
        });
    }
    Ok(cells)
}

/// Index layout of the moment matrix `M_d(u)`: entry `(i, j)` addresses the
/// decision variable `u_{beta_i + beta_j}` in the canonical ordering of
/// `N^n_{2d}`.
#[derive(Debug, Clone)]
pub struct MomentMatrixStructure {
    pub d: u32,
    pub side: usize,
    /// Row-major `side x side` variable positions.
    entries: Vec<usize>,
}

impl MomentMatrixStructure {
    pub fn entry(&self, row: usize, col: usize) -> usize {
        self.entries[row * self.side + col]
    }
}

/// Variable index lookup for the canonical ordering of `N^n_{bound}`.
pub(crate) fn index_map(n: usize, bound: u32) -> HashMap<MultiIndex, usize> {
    enumerate_multiindices(n, bound)
        .into_iter()
        .enumerate()
        .map(|(i, a)| (a, i))
        .collect()
}

pub fn moment_matrix_entries(n: usize, d: u32) -> MomentMatrixStructure {
    let basis = enumerate_multiindices(n, d);
    let idx = index_map(n, 2 * d);
    let side = basis.len();
    let mut entries = vec![0usize; side * side];
    for (i, bi) in basis.iter().enumerate() {
        for (j, bj) in basis.iter().enumerate() {
            entries[i * side + j] = *idx
                .get(&bi.add(bj))
                .expect("moment-matrix entry stays within degree 2d");
        }
    }
    MomentMatrixStructure { d, side, entries }
}

/// Entry-wise linear forms of the localizing matrix `M_{d - d_g}(g u)`:
/// entry `(i, j)` is `sum_gamma g_gamma u_{beta_i + beta_j + gamma}`, with
/// variables indexed in `N^n_{2d}`.
#[derive(Debug, Clone)]
pub struct LocalizingStructure {
    pub side: usize,
    /// Row-major; each entry is a sparse linear form over the variables.
    entries: Vec<Vec<(usize, f64)>>,
}

impl LocalizingStructure {
    pub fn entry(&self, row: usize, col: usize) -> &[(usize, f64)] {
        &self.entries[row * self.side + col]
    }
}

pub fn localizing_entries(g: &Poly, n: usize, d: u32) -> Result<LocalizingStructure, RelaxError> {
    let dg = g.degree().div_ceil(2);
    if d < dg {
        return Err(RelaxError::LevelTooSmall { d, d0: dg });
    }
    let basis = enumerate_multiindices(n, d - dg);
    let idx = index_map(n, 2 * d);
    let side = basis.len();
    let mut entries = vec![Vec::new(); side * side];
    for (i, bi) in basis.iter().enumerate() {
        for (j, bj) in basis.iter().enumerate() {
            let mut form: Vec<(usize, f64)> = Vec::with_capacity(g.num_terms());
            for (gamma, coeff) in g.terms() {
                let var = *idx
                    .get(&bi.add(bj).add(gamma))
                    .expect("localizing entry stays within degree 2d");
                form.push((var, coeff));
            }
            entries[i * side + j] = form;
        }
    }
    debug_assert_eq!(side, basis_size(n, d - dg).unwrap());
    Ok(LocalizingStructure { side, entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::{Convention, MeasureSpec, MomentOracle};

    fn mi(e: &[u32]) -> MultiIndex {
        MultiIndex::new(e.to_vec())
    }

    fn poly(n: usize, terms: &[(&[u32], f64)]) -> Poly {
        Poly::from_terms(n, terms.iter().map(|(a, c)| (mi(a), *c))).unwrap()
    }

    #[test]
    fn set_validation() {
        assert!(matches!(
            SemiAlgebraicSet::new(1, vec![]),
            Err(RelaxError::EmptyConstraints)
        ));
        assert!(matches!(
            SemiAlgebraicSet::new(1, vec![Poly::one(1)]),
            Err(RelaxError::ConstantConstraint { index: 0 })
        ));
        assert!(matches!(
            SemiAlgebraicSet::new(2, vec![Poly::var(1, 0)]),
            Err(RelaxError::DimensionMismatch { .. })
        ));
        let disc = SemiAlgebraicSet::new(
            2,
            vec![poly(2, &[(&[0, 0], 1.0), (&[2, 0], -1.0), (&[0, 2], -1.0)])],
        )
        .unwrap();
        assert_eq!(disc.min_level(), 1);
        assert!(disc.contains(&[0.5, 0.5]));
        assert!(!disc.contains(&[1.0, 1.0]));
    }

    #[test]
    fn augmentation_appends_coordinates() {
        let g = poly(2, &[(&[0, 0], 1.0), (&[1, 0], -3.0), (&[0, 1], -1.0)]);
        let set = SemiAlgebraicSet::new(2, vec![g.clone()]).unwrap();
        let aug = set.augment_orthant().unwrap();
        assert_eq!(aug.constraints().len(), 3);
        assert_eq!(aug.constraints()[1], Poly::var(2, 0));
        assert_eq!(aug.constraints()[2], Poly::var(2, 1));
        assert!(aug.is_orthant_augmented());
        assert!(matches!(
            aug.augment_orthant(),
            Err(RelaxError::AlreadyAugmented)
        ));

        let set1 = SemiAlgebraicSet::new(1, vec![poly(1, &[(&[1], 1.0), (&[0], 1.0)])]).unwrap();
        let aug1 = set1.augment_orthant().unwrap();
        assert_eq!(aug1.constraints().len(), 2);
        assert_eq!(aug1.constraints()[1], Poly::var(1, 0));
    }

    #[test]
    fn default_multiplier_is_constraint_product() {
        let g = poly(2, &[(&[0, 0], 1.0), (&[1, 0], -3.0), (&[0, 1], -1.0)]);
        let set = SemiAlgebraicSet::new(2, vec![g.clone()])
            .unwrap()
            .augment_orthant()
            .unwrap();
        let f = default_stokes_multiplier(&set).unwrap();
        let expect = g
            .mul(&Poly::var(2, 0))
            .unwrap()
            .mul(&Poly::var(2, 1))
            .unwrap();
        assert_eq!(f, expect);

        let ball = poly(1, &[(&[0], 1.0), (&[2], -1.0)]);
        let single = SemiAlgebraicSet::new(1, vec![ball.clone()]).unwrap();
        assert_eq!(default_stokes_multiplier(&single).unwrap(), ball);
    }

    #[test]
    fn staircase_cells_match_the_reference_decomposition() {
        let g1 = poly(2, &[(&[1, 0], 1.0)]);
        let g2 = poly(2, &[(&[0, 1], 1.0), (&[0, 0], -0.5)]);
        let gauss = MeasureSpec::gaussian(2, 1.0, Convention::StandardNormalized).unwrap();
        let set = SemiAlgebraicSet::new(2, vec![g1.clone(), g2.clone()]).unwrap();
        let cells = complement_cells(&set, &gauss).unwrap();
        assert_eq!(cells.len(), 2);
        assert_eq!(cells[0].constraints(), &[g1.scale(-1.0)]);
        assert_eq!(cells[1].constraints(), &[g1.clone(), g2.scale(-1.0)]);

        let expo = MeasureSpec::exponential(2, 5.0).unwrap();
        let single = SemiAlgebraicSet::new(2, vec![g2.clone()]).unwrap();
        let cells = complement_cells(&single, &expo).unwrap();
        assert_eq!(cells.len(), 1);
        assert_eq!(
            cells[0].constraints(),
            &[g2.scale(-1.0), Poly::var(2, 0), Poly::var(2, 1)]
        );
        assert!(cells[0].is_orthant_augmented());
    }

    #[test]
    fn moment_matrix_structure_examples() {
        // n=1, d=1: [[u0, u1], [u1, u2]]
        let mm = moment_matrix_entries(1, 1);
        assert_eq!(mm.side, 2);
        assert_eq!(mm.entry(0, 0), 0);
        assert_eq!(mm.entry(0, 1), 1);
        assert_eq!(mm.entry(1, 0), 1);
        assert_eq!(mm.entry(1, 1), 2);

        // n=2, d=1: entry((1,0),(0,1)) addresses u_{(1,1)}
        let mm = moment_matrix_entries(2, 1);
        let vars = enumerate_multiindices(2, 2);
        assert_eq!(vars[mm.entry(1, 2)], mi(&[1, 1]));

        // oracle moments fill to the identity for the standard Gaussian
        let oracle = MomentOracle::new(
            MeasureSpec::gaussian(1, 1.0, Convention::StandardNormalized).unwrap(),
        );
        let y = oracle.moment_vector(2);
        let m00 = y[mm_entry_1d(&mm_1d(), 0, 0)];
        let m01 = y[mm_entry_1d(&mm_1d(), 0, 1)];
        let m11 = y[mm_entry_1d(&mm_1d(), 1, 1)];
        assert_eq!((m00, m01, m11), (1.0, 0.0, 1.0));
    }

    fn mm_1d() -> MomentMatrixStructure {
        moment_matrix_entries(1, 1)
    }

    fn mm_entry_1d(mm: &MomentMatrixStructure, i: usize, j: usize) -> usize {
        mm.entry(i, j)
    }

    #[test]
    fn localizing_structure_examples() {
        // g = 1 - x^2, n=1, d=1: single entry u0 - u2
        let g = poly(1, &[(&[0], 1.0), (&[2], -1.0)]);
        let ls = localizing_entries(&g, 1, 1).unwrap();
        assert_eq!(ls.side, 1);
        assert_eq!(ls.entry(0, 0), &[(0, 1.0), (2, -1.0)]);

        // g = x1, n=2, d=1: entry (0,0) = u_{(1,0)}
        let ls = localizing_entries(&Poly::var(2, 0), 2, 1).unwrap();
        let vars = enumerate_multiindices(2, 2);
        assert_eq!(ls.entry(0, 0).len(), 1);
        assert_eq!(vars[ls.entry(0, 0)[0].0], mi(&[1, 0]));

        // g = 1 - x^2, n=1, d=2: 2x2 with entry(1,1) = u2 - u4
        let ls = localizing_entries(&g, 1, 2).unwrap();
        assert_eq!(ls.side, 2);
        assert_eq!(ls.entry(1, 1), &[(2, 1.0), (4, -1.0)]);

        // d below ceil(deg g / 2) is rejected
        assert!(matches!(
            localizing_entries(&g, 1, 0),
            Err(RelaxError::LevelTooSmall { .. })
        ));
    }
}
