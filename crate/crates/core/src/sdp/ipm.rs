//! Infeasible-start primal-dual interior-point method with Nesterov-Todd
//! scaling and Mehrotra predictor-corrector steps.
//!
//! After equality elimination the instance is the inequality-form problem
//! `max b.w s.t. S(w) = C + sum_j w_j F_j >= 0` (here `C` is the reduced
//! constant block and `F_j` the reduced coefficient blocks). Internally this
//! is treated as the dual of the standard pair
//!
//! ```text
//! (P) min <C, X>   s.t. <-F_j, X> = b_j,  X >= 0
//! (D) max b.w      s.t. sum_j w_j (-F_j) + S = C,  S >= 0
//! ```
//!
//! so weak duality gives `<C, X> >= b.w`: the `X` side certifies an upper
//! estimate of the maximum, the `w` side a lower one.
//!
//! Each iteration forms the NT scaling point `W` per block (via a Cholesky
//! factor of `X` and an eigendecomposition of `L^T S L`), assembles the
//! Schur complement `M_ij = sum_b <F_i, W F_j W>`, and solves it by dense
//! Cholesky for the predictor and corrector directions.

use nalgebra::{DMatrix, DVector};

use super::elim::{reduce, Reduced};
use super::{Residuals, SdpError, SdpInstance, SdpSolution, SolveStatus, SolverConfig};
use crate::par::maybe_par_map;

/// Per-block NT scaling data.
struct Scaling {
    /// `W = G G^T` with `W S W = X`.
    w: DMatrix<f64>,
    g: DMatrix<f64>,
    g_inv: DMatrix<f64>,
    /// Eigenvalues of the scaled-space iterate `V = diag(lambda)`.
    lambda: DVector<f64>,
    /// Cholesky factor of `X` (lower).
    l_x: DMatrix<f64>,
    /// Cholesky factor of `S` (lower).
    l_s: DMatrix<f64>,
}

fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn chol_lower(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    m.clone().cholesky().map(|c| c.l())
}

/// Largest step `a` with `P + a*D` still PSD, given the Cholesky factor of
/// `P`; capped at 1.
fn step_to_boundary(l: &DMatrix<f64>, delta: &DMatrix<f64>) -> f64 {
    let z = l
        .solve_lower_triangular(delta)
        .expect("triangular solve on Cholesky factor");
    let y = l
        .solve_lower_triangular(&z.transpose())
        .expect("triangular solve on Cholesky factor")
        .transpose();
    let lam_min = sym(&y)
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if lam_min >= -1e-300 {
        1.0
    } else {
        (-1.0 / lam_min).min(1.0)
    }
}

fn nt_scaling(x: &DMatrix<f64>, s: &DMatrix<f64>) -> Option<Scaling> {
    let l_x = chol_lower(x)?;
    let l_s = chol_lower(s)?;
    let lsl = sym(&(l_x.transpose() * s * &l_x));
    let eig = lsl.symmetric_eigen();
    let side = x.nrows();
    let mut d = eig.eigenvalues.clone();
    for v in d.iter_mut() {
        if *v < 1e-250 {
            *v = 1e-250;
        }
    }
    // G = L U D^{-1/4},  G^{-1} = D^{1/4} U^T L^{-1},  W = G G^T
    let mut g = &l_x * &eig.eigenvectors;
    for j in 0..side {
        let sc = d[j].powf(-0.25);
        g.column_mut(j).scale_mut(sc);
    }
    let l_inv = l_x
        .solve_lower_triangular(&DMatrix::identity(side, side))
        .expect("Cholesky factor is invertible");
    let mut g_inv = eig.eigenvectors.transpose() * l_inv;
    for i in 0..side {
        let sc = d[i].powf(0.25);
        g_inv.row_mut(i).scale_mut(sc);
    }
    let w = &g * g.transpose();
    let lambda = d.map(f64::sqrt);
    Some(Scaling {
        w,
        g,
        g_inv,
        lambda,
        l_x,
        l_s,
    })
}

struct Iterate {
    w: DVector<f64>,
    xs: Vec<DMatrix<f64>>,
    ss: Vec<DMatrix<f64>>,
}

struct Metrics {
    pobj: f64,
    dobj: f64,
    rel_gap: f64,
    pfeas: f64,
    dfeas: f64,
}

impl Metrics {
    fn score(&self, cfg: &SolverConfig) -> f64 {
        (self.pfeas / cfg.tol_feas)
            .max(self.dfeas / cfg.tol_feas)
            .max(self.rel_gap / cfg.tol_gap)
    }

    fn optimal(&self, cfg: &SolverConfig) -> bool {
        self.score(cfg) <= 1.0
    }

    fn within(&self, cfg: &SolverConfig, slack: f64) -> bool {
        self.score(cfg) <= slack
    }
}

pub(crate) fn solve_impl(
    instance: &SdpInstance,
    config: &SolverConfig,
    parallel: bool,
) -> Result<SdpSolution, SdpError> {
    config.validate()?;
    let red = reduce(instance)?;
    let k = red.obj.len();

    // objective normalization keeps the argmax scale-invariant
    let s_obj = red.obj.amax().max(1.0);
    let b: DVector<f64> = &red.obj / s_obj;

    if k == 0 {
        return Ok(finish_fixed(instance, &red, config));
    }

    let nu: f64 = red.c_blocks.iter().map(|c| c.nrows() as f64).sum();
    let c_norm: f64 = red
        .c_blocks
        .iter()
        .map(|c| c.norm_squared())
        .sum::<f64>()
        .sqrt();
    let b_norm = b.norm();

    let tau = instance.meta.init_scale.max(1.0);
    let mut it = Iterate {
        w: DVector::zeros(k),
        xs: red
            .c_blocks
            .iter()
            .map(|c| DMatrix::identity(c.nrows(), c.nrows()) * tau)
            .collect(),
        ss: red
            .c_blocks
            .iter()
            .map(|c| DMatrix::identity(c.nrows(), c.nrows()) * tau)
            .collect(),
    };

    let mut best: Option<(f64, Iterate, Metrics, usize)> = None;
    let mut iterations = 0usize;
    let mut stop = SolveStatus::IterLimit;

    for iter in 0..config.max_iter {
        iterations = iter;
        let (metrics, r_p, r_d) = residuals(&red, &b, &it, nu, c_norm, b_norm);
        log::debug!(
            "ipm iter {:3}  pobj {:+.9e}  dobj {:+.9e}  gap {:.2e}  pfeas {:.2e}  dfeas {:.2e}",
            iter,
            metrics.pobj,
            metrics.dobj,
            metrics.rel_gap,
            metrics.pfeas,
            metrics.dfeas
        );

        let score = metrics.score(config);
        let improved = best.as_ref().map_or(true, |(s, ..)| score < *s);
        if improved {
            best = Some((
                score,
                Iterate {
                    w: it.w.clone(),
                    xs: it.xs.clone(),
                    ss: it.ss.clone(),
                },
                Metrics { ..metrics },
                iter,
            ));
        }
        if metrics.optimal(config) {
            stop = SolveStatus::Optimal;
            break;
        }
        if let Some(status) = detect_infeasibility(&red, &b, &it, tau, nu) {
            stop = status;
            break;
        }
        if let Some((_, _, _, best_iter)) = &best {
            if iter - best_iter > 20 {
                // stalled
                break;
            }
        }

        let mu = it
            .xs
            .iter()
            .zip(&it.ss)
            .map(|(x, s)| x.dot(s))
            .sum::<f64>()
            / nu;
        if mu.abs() < 1e-300 {
            break;
        }

        let scalings: Option<Vec<Scaling>> = it
            .xs
            .iter()
            .zip(&it.ss)
            .map(|(x, s)| nt_scaling(x, s))
            .collect();
        let Some(scalings) = scalings else { break };

        // Schur complement M_ij = sum_b <F_i, W F_j W>
        let t_mats: Vec<Vec<DMatrix<f64>>> = scalings
            .iter()
            .zip(&red.a_blocks)
            .map(|(sc, fs)| {
                maybe_par_map(k, parallel, |j| (&sc.w * &fs[j]) * &sc.w)
            })
            .collect();
        let m_cols = maybe_par_map(k, parallel, |j| {
            let mut col = vec![0.0; j + 1];
            for (fs, ts) in red.a_blocks.iter().zip(&t_mats) {
                let tj = &ts[j];
                for (i, ci) in col.iter_mut().enumerate() {
                    *ci += fs[i].dot(tj);
                }
            }
            col
        });
        let mut m = DMatrix::zeros(k, k);
        for (j, col) in m_cols.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        let Some(m_chol) = chol_with_ridge(m) else {
            break;
        };

        // predictor: target complementarity 0, H = -X
        let h_aff: Vec<DMatrix<f64>> = it.xs.iter().map(|x| -x.clone()).collect();
        let dw_aff = solve_direction(&red, &scalings, &m_chol, &r_p, &r_d, &h_aff);
        let (dx_aff, ds_aff) = recover_matrices(&red, &scalings, &r_d, &h_aff, &dw_aff);
        let ap_aff = min_step(&scalings, &it.xs, &dx_aff, true);
        let ad_aff = min_step(&scalings, &it.ss, &ds_aff, false);

        let mut mu_aff = 0.0;
        for bi in 0..it.xs.len() {
            mu_aff += (it.xs[bi].dot(&it.ss[bi])
                + ap_aff * dx_aff[bi].dot(&it.ss[bi])
                + ad_aff * it.xs[bi].dot(&ds_aff[bi])
                + ap_aff * ad_aff * dx_aff[bi].dot(&ds_aff[bi]))
                / nu;
        }
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        // corrector with Mehrotra second-order term, formed in scaled space
        // where the NT iterate V = diag(lambda) is diagonal
        let h_corr: Vec<DMatrix<f64>> = scalings
            .iter()
            .enumerate()
            .map(|(bi, sc)| {
                let dxh = &sc.g_inv * &dx_aff[bi] * sc.g_inv.transpose();
                let dsh = sc.g.transpose() * &ds_aff[bi] * &sc.g;
                let second = sym(&(&dxh * &dsh));
                let side = sc.lambda.len();
                let mut kmat = DMatrix::zeros(side, side);
                for i in 0..side {
                    for j in 0..side {
                        let mut r = -second[(i, j)];
                        if i == j {
                            r += sigma * mu - sc.lambda[i] * sc.lambda[i];
                        }
                        kmat[(i, j)] = 2.0 * r / (sc.lambda[i] + sc.lambda[j]);
                    }
                }
                &sc.g * kmat * sc.g.transpose()
            })
            .collect();
        let dw = solve_direction(&red, &scalings, &m_chol, &r_p, &r_d, &h_corr);
        let (dx, ds) = recover_matrices(&red, &scalings, &r_d, &h_corr, &dw);
        let ap = config.step_damping * min_step(&scalings, &it.xs, &dx, true);
        let ad = config.step_damping * min_step(&scalings, &it.ss, &ds, false);

        for bi in 0..it.xs.len() {
            it.xs[bi] += &dx[bi] * ap;
            it.xs[bi] = sym(&it.xs[bi]);
            it.ss[bi] += &ds[bi] * ad;
            it.ss[bi] = sym(&it.ss[bi]);
        }
        it.w.axpy(ad, &dw, 1.0);
        iterations = iter + 1;
    }

    let (best_score, best_it, best_metrics, _) = best.unwrap_or_else(|| {
        let (metrics, _, _) = residuals(&red, &b, &it, nu, c_norm, b_norm);
        let score = metrics.score(config);
        (score, it, metrics, 0)
    });
    let status = match stop {
        SolveStatus::Optimal => SolveStatus::Optimal,
        SolveStatus::PrimalInfeasible | SolveStatus::DualInfeasible => stop,
        _ => {
            if best_score <= 1.0 {
                SolveStatus::Optimal
            } else if best_metrics.within(config, 100.0) {
                SolveStatus::Inaccurate
            } else {
                SolveStatus::IterLimit
            }
        }
    };

    Ok(assemble_solution(
        instance,
        &red,
        best_it,
        best_metrics,
        status,
        iterations,
        s_obj,
    ))
}

/// All variables fixed by the equalities; just evaluate.
fn finish_fixed(instance: &SdpInstance, red: &Reduced, config: &SolverConfig) -> SdpSolution {
    let feas = red
        .c_blocks
        .iter()
        .map(|c| {
            -c.clone()
                .symmetric_eigen()
                .eigenvalues
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0f64, f64::max)
        .max(0.0);
    let status = if feas <= config.tol_feas {
        SolveStatus::Optimal
    } else {
        SolveStatus::PrimalInfeasible
    };
    let mut u: Vec<f64> = red.u0.iter().copied().collect();
    unprecondition(instance, &mut u);
    SdpSolution {
        u,
        primal_obj: red.offset,
        dual_obj: red.offset,
        status,
        residuals: Residuals {
            primal_feas: feas,
            dual_feas: 0.0,
            rel_gap: 0.0,
        },
        iterations: 0,
    }
}

/// Residual vector `r_p`, residual matrices `R_d` and the derived metrics.
fn residuals(
    red: &Reduced,
    b: &DVector<f64>,
    it: &Iterate,
    nu: f64,
    c_norm: f64,
    b_norm: f64,
) -> (Metrics, DVector<f64>, Vec<DMatrix<f64>>) {
    let _ = nu;
    let k = b.len();
    let mut r_p = DVector::zeros(k);
    for j in 0..k {
        let mut dot = 0.0;
        for (fs, x) in red.a_blocks.iter().zip(&it.xs) {
            dot += fs[j].dot(x);
        }
        r_p[j] = b[j] + dot;
    }
    let r_d: Vec<DMatrix<f64>> = red
        .c_blocks
        .iter()
        .enumerate()
        .map(|(bi, c)| {
            let mut m = c.clone() - &it.ss[bi];
            for j in 0..k {
                m += &red.a_blocks[bi][j] * it.w[j];
            }
            m
        })
        .collect();
    let pobj: f64 = red
        .c_blocks
        .iter()
        .zip(&it.xs)
        .map(|(c, x)| c.dot(x))
        .sum();
    let dobj = b.dot(&it.w);
    let dfeas = r_p.norm() / (1.0 + b_norm);
    let pfeas = r_d
        .iter()
        .map(|m| m.norm_squared())
        .sum::<f64>()
        .sqrt()
        / (1.0 + c_norm);
    let rel_gap = (pobj - dobj).abs() / (1.0 + dobj.abs());
    (
        Metrics {
            pobj,
            dobj,
            rel_gap,
            pfeas,
            dfeas,
        },
        r_p,
        r_d,
    )
}

fn chol_with_ridge(mut m: DMatrix<f64>) -> Option<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let k = m.nrows();
    let scale = (0..k).map(|i| m[(i, i)].abs()).fold(0.0f64, f64::max).max(1e-300);
    let mut ridge = 0.0;
    for attempt in 0..6 {
        if attempt > 0 {
            let bump = scale * 1e-14 * 100f64.powi(attempt - 1);
            for i in 0..k {
                m[(i, i)] += bump - ridge;
            }
            ridge = bump;
        }
        if let Some(c) = m.clone().cholesky() {
            return Some(c);
        }
    }
    None
}

/// Solve `M dw = r_p + A(H) - A(W R_d W)` where `A(M)_i = <F_i, M>`.
fn solve_direction(
    red: &Reduced,
    scalings: &[Scaling],
    m_chol: &nalgebra::Cholesky<f64, nalgebra::Dyn>,
    r_p: &DVector<f64>,
    r_d: &[DMatrix<f64>],
    h: &[DMatrix<f64>],
) -> DVector<f64> {
    let k = r_p.len();
    let mut rhs = r_p.clone();
    for (bi, sc) in scalings.iter().enumerate() {
        let wrw = (&sc.w * &r_d[bi]) * &sc.w;
        for j in 0..k {
            rhs[j] += red.a_blocks[bi][j].dot(&h[bi]) - red.a_blocks[bi][j].dot(&wrw);
        }
    }
    m_chol.solve(&rhs)
}

/// `dS = R_d + sum_j dw_j F_j`, `dX = H - W dS W`.
fn recover_matrices(
    red: &Reduced,
    scalings: &[Scaling],
    r_d: &[DMatrix<f64>],
    h: &[DMatrix<f64>],
    dw: &DVector<f64>,
) -> (Vec<DMatrix<f64>>, Vec<DMatrix<f64>>) {
    let mut dx = Vec::with_capacity(scalings.len());
    let mut ds = Vec::with_capacity(scalings.len());
    for (bi, sc) in scalings.iter().enumerate() {
        let mut dsb = r_d[bi].clone();
        for (j, &dwj) in dw.iter().enumerate() {
            dsb += &red.a_blocks[bi][j] * dwj;
        }
        let dxb = &h[bi] - (&sc.w * &dsb) * &sc.w;
        dx.push(sym(&dxb));
        ds.push(sym(&dsb));
    }
    (dx, ds)
}

fn min_step(
    scalings: &[Scaling],
    mats: &[DMatrix<f64>],
    deltas: &[DMatrix<f64>],
    primal: bool,
) -> f64 {
    let _ = mats;
    let mut a = 1.0f64;
    for (bi, sc) in scalings.iter().enumerate() {
        let l = if primal { &sc.l_x } else { &sc.l_s };
        a = a.min(step_to_boundary(l, &deltas[bi]));
    }
    a
}

/// Divergence-based infeasibility certificates.
fn detect_infeasibility(
    red: &Reduced,
    b: &DVector<f64>,
    it: &Iterate,
    tau: f64,
    nu: f64,
) -> Option<SolveStatus> {
    let x_norm: f64 = it.xs.iter().map(|x| x.norm_squared()).sum::<f64>().sqrt();
    if x_norm > 1e8 * tau * nu {
        // X/|X| approximates a certificate that no u satisfies the LMI:
        // <F_j, X> = 0 for all j and <F0, X> < 0
        let mut max_img: f64 = 0.0;
        for j in 0..b.len() {
            let mut dot = 0.0;
            for (fs, x) in red.a_blocks.iter().zip(&it.xs) {
                dot += fs[j].dot(x);
            }
            max_img = max_img.max(dot.abs());
        }
        let cx: f64 = red
            .c_blocks
            .iter()
            .zip(&it.xs)
            .map(|(c, x)| c.dot(x))
            .sum();
        if max_img / x_norm < 1e-9 && cx / x_norm < -1e-9 {
            return Some(SolveStatus::PrimalInfeasible);
        }
    }
    let w_norm = it.w.amax();
    if w_norm > 1e8 * tau * (1.0 + nu) {
        // w/|w| approximates an unbounded improving ray:
        // sum_j w_j F_j >= 0 and b.w > 0
        let mut min_eig = f64::INFINITY;
        for fs in &red.a_blocks {
            let side = fs.first().map_or(0, |m| m.nrows());
            let mut z = DMatrix::zeros(side, side);
            for (j, f) in fs.iter().enumerate() {
                z += f * (it.w[j] / w_norm);
            }
            min_eig = min_eig.min(
                z.symmetric_eigen()
                    .eigenvalues
                    .iter()
                    .copied()
                    .fold(f64::INFINITY, f64::min),
            );
        }
        if min_eig > -1e-9 && b.dot(&it.w) / w_norm > 1e-9 {
            return Some(SolveStatus::DualInfeasible);
        }
    }
    None
}

fn assemble_solution(
    instance: &SdpInstance,
    red: &Reduced,
    it: Iterate,
    metrics: Metrics,
    status: SolveStatus,
    iterations: usize,
    s_obj: f64,
) -> SdpSolution {
    let full = &red.u0 + &red.null * &it.w;
    let mut u: Vec<f64> = full.iter().copied().collect();
    unprecondition(instance, &mut u);
    SdpSolution {
        u,
        primal_obj: metrics.dobj * s_obj + red.offset,
        dual_obj: metrics.pobj * s_obj + red.offset,
        status,
        residuals: Residuals {
            primal_feas: metrics.pfeas,
            dual_feas: metrics.dfeas,
            rel_gap: metrics.rel_gap,
        },
        iterations,
    }
}

/// Map a decision vector of a preconditioned instance back to original units.
fn unprecondition(instance: &SdpInstance, u: &mut [f64]) {
    if let Some(diag) = &instance.meta.precond {
        for (x, s) in u.iter_mut().zip(diag) {
            *x *= s;
        }
    }
}
