//! Low-rank factorizations with short rows.
//!
//! A rank-`r` matrix `M` with `c = max |M(i,j)|` is factored as `X Y^T` in
//! exactly `r` dimensions with every row of `X` and `Y` of norm at most
//! `(cr)^{1/4}`. The pipeline is:
//!
//! 1. minimize the largest squared row norm `eta` over all factorizations
//!    `M = U V^T` of any dimension, written as a semidefinite program over the
//!    Gram matrix `Z = [U; V][U; V]^T`;
//! 2. project the rows of `V` onto the row space of `U`;
//! 3. pick an orthonormal basis `B` of the projected rows and return
//!    `X = U B^T` together with the coordinates `Y` of the projected rows.
//!
//! Steps 2 and 3 never lengthen a row, so the bound achieved by the SDP carries
//! over to the `r`-dimensional output.
//!
//! The SDP is solved by ADMM, alternating between the affine set (off-diagonal
//! block pinned to `M`, diagonal capped at `eta`) and the PSD cone. The final
//! iterate from the affine side is shifted by `t I` to make it PSD, which keeps
//! the constraint `U V^T = M` exact up to rounding.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::matrix::{numerical_rank, DenseMatrix, Factorization, DEFAULT_RANK_TOL};

pub const DEFAULT_SDP_MAX_ITER: usize = 20_000;

/// Row-norm bound `(cr)^{1/4}` for a rank-`r` matrix with max entry `c`.
pub fn row_norm_bound(c: f64, r: usize) -> f64 {
    libm::pow(c * r as f64, 0.25)
}

/// Output of the row-norm minimizing SDP.
#[derive(Debug, Clone)]
pub struct SdpFactorSolution {
    /// Largest squared row norm over `u` and `v`.
    pub eta: f64,
    /// One row per row of the input matrix.
    pub u: DMatrix<f64>,
    /// One row per column of the input matrix.
    pub v: DMatrix<f64>,
    pub dim: usize,
    /// `max |u_i . v_j - M(i,j)|`.
    pub constraint_residual: f64,
    /// `sqrt(c r)`: the value of `eta` guaranteed to be feasible.
    pub certificate: f64,
    pub iterations: usize,
}

impl SdpFactorSolution {
    pub fn meets_certificate(&self, tol: f64) -> bool {
        self.eta <= self.certificate + tol
    }
}

/// Minimizes `eta` subject to `u_i . v_j = M(i,j)`, `|u_i|^2, |v_j|^2 <= eta`.
///
/// Iteration stops as soon as a feasible point with `eta` within `tol` of the
/// certificate `sqrt(c r)` is found, or when ADMM has converged (which is what
/// happens when the certificate is not attainable).
pub fn sdp_min_rownorm_factor(
    m: &DenseMatrix,
    tol: f64,
    max_iter: usize,
) -> Result<SdpFactorSolution> {
    if !(tol > 0.0) {
        return Err(Error::Invalid("tolerance must be positive".into()));
    }
    let target = m.as_matrix();
    let (rows, cols) = target.shape();
    let c = m.max_abs();
    let rank = numerical_rank(m, DEFAULT_RANK_TOL);
    let certificate = libm::sqrt(c * rank as f64);

    let warm = balanced_svd_gram_factor(target);
    let warm_eta = linalg::sq(linalg::max_row_norm(&warm));
    if rank == 0 || warm_eta <= certificate + tol {
        return Ok(solution_from_factor(target, warm, certificate, 0));
    }

    let size = rows + cols;
    let mut s = &warm * warm.transpose();
    let mut dual = DMatrix::<f64>::zeros(size, size);
    let mut rho = 1.0;
    let scale = c.max(1.0);
    // Diagonal shift applied on recovery; keeps the recovered U well conditioned.
    let margin = 1e-9 * scale;
    let mut best: Option<(f64, DMatrix<f64>)> = None;
    let mut last_primal = f64::INFINITY;

    for iter in 1..=max_iter {
        let z = affine_step(&(&s - &dual), target, rho);
        let s_prev = core::mem::replace(&mut s, psd_projection(&(&z + &dual)));
        dual += &z - &s;

        let primal = (&z - &s).norm();
        let dual_res = rho * (&s - &s_prev).norm();
        last_primal = primal;

        let converged = primal <= tol * scale && dual_res <= tol * scale;
        if iter % 10 == 0 || converged {
            let (eta, z_feas) = recover_feasible(&z, margin);
            if best.as_ref().is_none_or(|(b, _)| eta < *b) {
                best = Some((eta, z_feas));
            }
            let best_eta = best.as_ref().map_or(f64::INFINITY, |(b, _)| *b);
            if best_eta <= certificate + tol || converged {
                let (_, z_feas) = best.expect("best recorded above");
                let factor = gram_factor(&z_feas);
                let mut sol = solution_from_factor(target, factor, certificate, iter);
                if warm_eta < sol.eta {
                    sol = solution_from_factor(target, warm, certificate, iter);
                }
                return Ok(sol);
            }
        }

        if iter % 10 == 0 {
            if primal > 10.0 * dual_res {
                rho *= 2.0;
                dual /= 2.0;
            } else if dual_res > 10.0 * primal {
                rho /= 2.0;
                dual *= 2.0;
            }
        }
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        residual: last_primal,
        eta: best.map_or(warm_eta, |(b, _)| b.min(warm_eta)),
    })
}

/// Gram factor `[X sqrt(S); Y sqrt(S)]` from the thin SVD of `M`, restricted to
/// the numerically nonzero singular values.
fn balanced_svd_gram_factor(target: &DMatrix<f64>) -> DMatrix<f64> {
    let (rows, cols) = target.shape();
    let svd = linalg::svd(target);
    let top = svd.values.max();
    let kept: Vec<usize> = (0..svd.values.len())
        .filter(|&k| top > 0.0 && svd.values[k] > DEFAULT_RANK_TOL * top)
        .collect();
    let dim = kept.len().max(1);
    let mut w = DMatrix::zeros(rows + cols, dim);
    for (col, &k) in kept.iter().enumerate() {
        let root = libm::sqrt(svd.values[k]);
        for i in 0..rows {
            w[(i, col)] = svd.u[(i, k)] * root;
        }
        for j in 0..cols {
            w[(rows + j, col)] = svd.v[(j, k)] * root;
        }
    }
    w
}

/// Minimizes `eta + rho/2 ||Z - W||^2` over symmetric `Z` whose off-diagonal
/// block equals the target and whose diagonal is capped by `eta`.
fn affine_step(w: &DMatrix<f64>, target: &DMatrix<f64>, rho: f64) -> DMatrix<f64> {
    let (rows, cols) = target.shape();
    let mut z = w.clone();
    for i in 0..rows {
        for j in 0..cols {
            z[(i, rows + j)] = target[(i, j)];
            z[(rows + j, i)] = target[(i, j)];
        }
    }
    let diag: Vec<f64> = (0..rows + cols).map(|k| w[(k, k)]).collect();
    let eta = water_level(&diag, 1.0 / rho);
    for (k, a) in diag.into_iter().enumerate() {
        z[(k, k)] = a.min(eta);
    }
    z
}

/// Level `eta` with `sum_k (a_k - eta)_+ = budget`.
fn water_level(values: &[f64], budget: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut prefix = 0.0;
    for k in 0..sorted.len() {
        prefix += sorted[k];
        let level = (prefix - budget) / (k + 1) as f64;
        if k + 1 == sorted.len() || level >= sorted[k + 1] {
            return level;
        }
    }
    unreachable!("loop returns on the last element")
}

fn psd_projection(a: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (a + a.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let clipped = eig.eigenvalues.map(|l| l.max(0.0));
    &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose()
}

/// Shifts `z` by a multiple of the identity so it becomes PSD. Only the
/// diagonal moves, so the pinned off-diagonal block is untouched.
fn recover_feasible(z: &DMatrix<f64>, margin: f64) -> (f64, DMatrix<f64>) {
    let sym = (z + z.transpose()) * 0.5;
    let lambda_min = sym.clone().symmetric_eigenvalues().min();
    let shift = (-lambda_min).max(0.0) + margin;
    let n = sym.nrows();
    let shifted = sym + DMatrix::<f64>::identity(n, n) * shift;
    let eta = (0..n)
        .map(|k| shifted[(k, k)])
        .fold(f64::NEG_INFINITY, f64::max);
    (eta, shifted)
}

/// `W` with `W W^T = z` for PSD `z`.
fn gram_factor(z: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = z.clone().symmetric_eigen();
    let roots = DVector::from_iterator(
        z.nrows(),
        eig.eigenvalues.iter().map(|l| libm::sqrt(l.max(0.0))),
    );
    &eig.eigenvectors * DMatrix::from_diagonal(&roots)
}

fn solution_from_factor(
    target: &DMatrix<f64>,
    w: DMatrix<f64>,
    certificate: f64,
    iterations: usize,
) -> SdpFactorSolution {
    let rows = target.nrows();
    let u = w.rows(0, rows).into_owned();
    let v = w.rows(rows, target.ncols()).into_owned();
    let constraint_residual = linalg::max_abs(&(&u * v.transpose() - target));
    let eta = linalg::sq(linalg::max_row_norm(&w));
    SdpFactorSolution {
        eta,
        dim: w.ncols(),
        u,
        v,
        constraint_residual,
        certificate,
        iterations,
    }
}

/// Projects each row of `v` onto the span of the rows of `u_basis`.
pub fn project_rows_to_rowspace(
    u_basis: &DMatrix<f64>,
    v: &DMatrix<f64>,
    tol: f64,
) -> DMatrix<f64> {
    let basis = linalg::orthonormal_row_basis(u_basis, tol);
    linalg::project_rows(&basis, v)
}

/// Result of re-expressing a factorization in an orthonormal basis of the
/// projected `V` rows.
#[derive(Debug, Clone)]
pub struct Rebased {
    pub factorization: Factorization,
    pub detected_rank: usize,
    /// The projected rows spanned fewer than the requested `r` dimensions.
    pub rank_deficient: bool,
}

/// Factors `v_proj = Y B` with `B` an orthonormal basis of its row space and
/// returns `X = U B^T`, `Y`.
pub fn rebase_factorization(
    u: &DMatrix<f64>,
    v_proj: &DMatrix<f64>,
    r: usize,
    tol: f64,
) -> Result<Rebased> {
    if u.ncols() != v_proj.ncols() {
        return Err(Error::DimensionMismatch {
            expected: alloc::format!("{} columns", u.ncols()),
            found: alloc::format!("{}", v_proj.ncols()),
        });
    }
    let basis = linalg::orthonormal_row_basis(v_proj, tol);
    let detected_rank = basis.nrows();
    let keep = detected_rank.min(r);
    let basis = basis.rows(0, keep).into_owned();
    let x = u * basis.transpose();
    let y = v_proj * basis.transpose();
    Ok(Rebased {
        factorization: Factorization::new(x, y)?,
        detected_rank,
        rank_deficient: detected_rank < r,
    })
}

/// Factorization produced by [`bounded_factorize`] with its diagnostics.
#[derive(Debug, Clone)]
pub struct BoundedFactorization {
    pub factorization: Factorization,
    pub rank: usize,
    pub coeff_bound: f64,
    /// `(cr)^{1/4}`.
    pub norm_bound: f64,
    pub max_row_norm: f64,
    pub reconstruction_error: f64,
    pub sdp_eta: f64,
    pub sdp_dim: usize,
    pub sdp_iterations: usize,
    pub rank_deficient: bool,
}

impl BoundedFactorization {
    pub fn within_bound(&self, rel_tol: f64) -> bool {
        self.max_row_norm <= self.norm_bound * (1.0 + rel_tol)
    }
}

/// Runs the SDP, projection and re-basing steps on a nonzero matrix.
pub fn bounded_factorize(m: &DenseMatrix, tol: f64) -> Result<BoundedFactorization> {
    let c = m.max_abs();
    if c == 0.0 {
        return Err(Error::ZeroMatrix);
    }
    let rank = numerical_rank(m, DEFAULT_RANK_TOL);
    let sdp = sdp_min_rownorm_factor(m, tol, DEFAULT_SDP_MAX_ITER)?;
    let v_proj = project_rows_to_rowspace(&sdp.u, &sdp.v, DEFAULT_RANK_TOL);
    let rebased = rebase_factorization(&sdp.u, &v_proj, rank, DEFAULT_RANK_TOL)?;
    let f = rebased.factorization;
    let reconstruction_error = linalg::max_abs(&(f.reconstruct().into_inner() - m.as_matrix()));
    Ok(BoundedFactorization {
        rank: f.dim(),
        coeff_bound: c,
        norm_bound: row_norm_bound(c, rank),
        max_row_norm: f.max_row_norm(),
        reconstruction_error,
        sdp_eta: sdp.eta,
        sdp_dim: sdp.dim,
        sdp_iterations: sdp.iterations,
        rank_deficient: rebased.rank_deficient,
        factorization: f,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(rows: usize, cols: usize, v: &[f64]) -> DenseMatrix {
        DenseMatrix::from_row_slice(rows, cols, v).unwrap()
    }

    #[test]
    fn water_level_solves_budget() {
        let a = [3.0, 1.0, 2.0];
        let level = water_level(&a, 1.5);
        let spent: f64 = a.iter().map(|x| (x - level).max(0.0)).sum();
        assert!((spent - 1.5).abs() < 1e-12);
        assert!((level - 1.75).abs() < 1e-12);
    }

    #[test]
    fn identity_is_feasible_with_unit_eta() {
        let sol = sdp_min_rownorm_factor(&DenseMatrix::identity(2), 1e-8, 1000).unwrap();
        assert!(sol.eta <= libm::sqrt(2.0) + 1e-8);
        assert!((sol.eta - 1.0).abs() < 1e-9);
        assert!(sol.constraint_residual < 1e-12);
    }

    #[test]
    fn all_ones_reaches_unit_eta() {
        let sol = sdp_min_rownorm_factor(&DenseMatrix::ones(3), 1e-8, 1000).unwrap();
        assert!((sol.eta - 1.0).abs() < 1e-8);
    }

    #[test]
    fn unbalanced_rank_one_needs_the_solver() {
        // First column of ones: the balanced SVD split gives eta = 2, the
        // optimum is 1.
        let mut v = [0.0; 16];
        for i in 0..4 {
            v[i * 4] = 1.0;
        }
        let m = dense(4, 4, &v);
        let sol = sdp_min_rownorm_factor(&m, 1e-7, DEFAULT_SDP_MAX_ITER).unwrap();
        assert!(sol.iterations > 0);
        assert!(sol.eta <= 1.0 + 1e-6, "eta = {}", sol.eta);
        assert!(sol.constraint_residual < 1e-10);
        assert!(sol.dim <= 9);
    }

    #[test]
    fn projection_examples() {
        let basis = dense(1, 2, &[1.0, 0.0]).into_inner();
        let p = project_rows_to_rowspace(&basis, &dense(1, 2, &[1.0, 1.0]).into_inner(), 1e-9);
        assert!((p[(0, 0)] - 1.0).abs() < 1e-15 && p[(0, 1)].abs() < 1e-15);
        let inside = dense(1, 2, &[3.0, 0.0]).into_inner();
        assert_eq!(project_rows_to_rowspace(&basis, &inside, 1e-9), inside);
    }

    #[test]
    fn rebase_keeps_orthonormal_coordinates() {
        let u = dense(2, 2, &[1.0, 0.0, 0.0, 2.0]).into_inner();
        let v = dense(2, 2, &[0.5, 0.0, 0.0, 1.0]).into_inner();
        let out = rebase_factorization(&u, &v, 2, 1e-9).unwrap();
        assert!(!out.rank_deficient);
        let f = out.factorization;
        let back = f.reconstruct().into_inner();
        assert!((back - &u * v.transpose()).abs().max() < 1e-12);
        let norms: Vec<f64> = linalg::row_norms(f.u()).collect();
        assert!((norms[0] - 1.0).abs() < 1e-12 && (norms[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rebase_flags_rank_deficiency() {
        let u = DMatrix::identity(3, 3);
        let v = dense(3, 3, &[1.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0]).into_inner();
        let out = rebase_factorization(&u, &v, 2, 1e-9).unwrap();
        assert!(out.rank_deficient);
        assert_eq!(out.factorization.dim(), 1);
    }

    #[test]
    fn bounded_factorize_small_examples() {
        let i2 = bounded_factorize(&DenseMatrix::identity(2), 1e-7).unwrap();
        assert_eq!(i2.rank, 2);
        assert!(i2.max_row_norm <= libm::pow(2.0, 0.25) + 1e-9);

        let j5 = bounded_factorize(&DenseMatrix::ones(5), 1e-7).unwrap();
        assert_eq!(j5.rank, 1);
        assert!(j5.max_row_norm <= 1.0 + 1e-7);
        assert!(j5.reconstruction_error < 1e-12);

        assert_eq!(
            bounded_factorize(&DenseMatrix::zeros(2, 2), 1e-7).unwrap_err(),
            Error::ZeroMatrix
        );
    }

    #[test]
    fn rank_one_with_large_entries_reaches_true_optimum() {
        // Any factorization of 2 J needs |u_i||v_j| >= 2, so eta >= 2 > sqrt(2).
        let m = DenseMatrix::new(DMatrix::from_element(3, 3, 2.0)).unwrap();
        let out = bounded_factorize(&m, 1e-7).unwrap();
        assert!((out.max_row_norm - libm::sqrt(2.0)).abs() < 1e-6);
        assert!(!out.within_bound(1e-3));
    }
}
