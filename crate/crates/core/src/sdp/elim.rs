//! Equality dedup and nullspace elimination.
//!
//! `A u = b` is removed by the substitution `u = u0 + N w` with `A u0 = b`
//! and `A N = 0`, leaving an inequality-only instance in `w`.

use nalgebra::{DMatrix, DVector};

use super::{SdpError, SdpInstance};

/// Relative tolerance of the rank-revealing pass: a row whose residual after
/// projection onto the kept rows is below `tol * |row|` is dropped.
pub(crate) const DEDUP_TOL: f64 = 1e-10;

/// Indices of a maximal independent subset of rows, in order of appearance,
/// plus the dropped indices. Uses modified Gram-Schmidt with
/// re-orthogonalization.
pub(crate) fn independent_rows(a: &DMatrix<f64>) -> (Vec<usize>, Vec<usize>) {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for i in 0..a.nrows() {
        let row: DVector<f64> = a.row(i).transpose();
        let norm = row.norm();
        if norm == 0.0 {
            dropped.push(i);
            continue;
        }
        let mut v = row;
        for _ in 0..2 {
            for q in &basis {
                let d = q.dot(&v);
                v.axpy(-d, q, 1.0);
            }
        }
        let res = v.norm();
        if res > DEDUP_TOL * norm {
            v /= res;
            basis.push(v);
            kept.push(i);
        } else {
            dropped.push(i);
        }
    }
    (kept, dropped)
}

/// The instance after equality elimination, densified per reduced variable.
pub(crate) struct Reduced {
    /// Constant block parts `F0 + sum_k u0_k Fk`.
    pub c_blocks: Vec<DMatrix<f64>>,
    /// Per block, per reduced variable: dense coefficient matrix.
    pub a_blocks: Vec<Vec<DMatrix<f64>>>,
    /// Reduced objective `N^T c`.
    pub obj: DVector<f64>,
    /// Constant objective contribution `c . u0`.
    pub offset: f64,
    pub u0: DVector<f64>,
    /// Nullspace basis; `u = u0 + N w`.
    pub null: DMatrix<f64>,
}

pub(crate) fn reduce(instance: &SdpInstance) -> Result<Reduced, SdpError> {
    let n = instance.num_vars();
    let (eq_a, eq_b) = instance.equalities();

    let (u0, null) = if eq_a.nrows() == 0 {
        (DVector::zeros(n), DMatrix::identity(n, n))
    } else {
        let (kept, dropped) = independent_rows(eq_a);
        if !dropped.is_empty() {
            log::debug!(
                "equality elimination: dropped {} dependent rows: {:?}",
                dropped.len(),
                dropped
            );
        }
        let r = kept.len();
        let mut a_kept = DMatrix::zeros(r, n);
        let mut b_kept = DVector::zeros(r);
        for (t, &i) in kept.iter().enumerate() {
            a_kept.row_mut(t).copy_from(&eq_a.row(i));
            b_kept[t] = eq_b[i];
        }

        // minimal-norm particular solution u0 = A^T (A A^T)^{-1} b
        let gram = &a_kept * a_kept.transpose();
        let chol = gram
            .cholesky()
            .ok_or(SdpError::Numerical("equality Gram matrix not PD after dedup"))?;
        let z = chol.solve(&b_kept);
        let u0 = a_kept.transpose() * z;

        // consistency of the full (pre-dedup) system
        let resid = (eq_a * &u0 - eq_b).amax();
        if resid > 1e-8 * (1.0 + eq_b.amax()) {
            return Err(SdpError::InconsistentEqualities { residual: resid });
        }

        // orthonormal basis of the nullspace from the projector I - Q^T Q
        let mut q = DMatrix::zeros(r, n);
        for (t, &i) in kept.iter().enumerate() {
            q.row_mut(t).copy_from(&eq_a.row(i));
        }
        orthonormalize_rows(&mut q);
        let projector = DMatrix::identity(n, n) - q.transpose() * &q;
        let eig = projector.symmetric_eigen();
        let mut cols: Vec<DVector<f64>> = Vec::new();
        for (j, &lam) in eig.eigenvalues.iter().enumerate() {
            if lam > 0.5 {
                cols.push(eig.eigenvectors.column(j).into_owned());
            }
        }
        debug_assert_eq!(cols.len(), n - r);
        let mut null = DMatrix::zeros(n, cols.len());
        for (j, c) in cols.iter().enumerate() {
            null.column_mut(j).copy_from(c);
        }
        (u0, null)
    };

    let k = null.ncols();
    let u0_slice: Vec<f64> = u0.iter().copied().collect();

    let mut c_blocks = Vec::with_capacity(instance.blocks().len());
    let mut a_blocks = Vec::with_capacity(instance.blocks().len());
    for block in instance.blocks() {
        c_blocks.push(block.eval(&u0_slice));
        let mut per_var: Vec<DMatrix<f64>> =
            (0..k).map(|_| DMatrix::zeros(block.side(), block.side())).collect();
        for &(v, r, c, x) in block.terms() {
            let (r, c) = (r as usize, c as usize);
            for (j, m) in per_var.iter_mut().enumerate() {
                let add = x * null[(v as usize, j)];
                if add != 0.0 {
                    m[(r, c)] += add;
                    if r != c {
                        m[(c, r)] += add;
                    }
                }
            }
        }
        a_blocks.push(per_var);
    }

    let c_vec = DVector::from_column_slice(instance.objective());
    let obj = null.transpose() * &c_vec;
    let offset = c_vec.dot(&u0);

    Ok(Reduced {
        c_blocks,
        a_blocks,
        obj,
        offset,
        u0,
        null,
    })
}

fn orthonormalize_rows(a: &mut DMatrix<f64>) {
    let rows = a.nrows();
    for i in 0..rows {
        let mut v: DVector<f64> = a.row(i).transpose();
        for _ in 0..2 {
            for j in 0..i {
                let q: DVector<f64> = a.row(j).transpose();
                let d = q.dot(&v);
                v.axpy(-d, &q, 1.0);
            }
        }
        let norm = v.norm();
        debug_assert!(norm > 0.0, "dependent row survived dedup");
        v /= norm;
        a.row_mut(i).copy_from(&v.transpose());
    }
}
