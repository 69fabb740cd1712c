//! Best-effort local search: rank-constrained completion by alternating least
//! squares and Gram-vector search by gradient descent. Neither comes with a
//! guarantee; both restart from seeded random points and keep the best run.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gadgets::{GramConstraintSystem, VectorAssignment};
use crate::linalg::sq;
use crate::matrix::{DenseMatrix, Factorization, PartialMatrix};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub rank: usize,
    pub coeff_bound: f64,
    pub max_iter: usize,
    /// Target objective: the run stops once it is reached.
    pub tol: f64,
    /// Restart `t` is seeded with `seed + t`.
    pub seed: u64,
    pub restarts: usize,
}

impl SolverConfig {
    pub fn new(rank: usize, coeff_bound: f64) -> Self {
        Self {
            rank,
            coeff_bound,
            max_iter: 2000,
            tol: 1e-12,
            seed: 0,
            restarts: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rank == 0 {
            return Err(Error::Invalid("rank budget must be at least 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Invalid(format!(
                "tolerance must be positive, got {}",
                self.tol
            )));
        }
        if !(self.coeff_bound > 0.0) {
            return Err(Error::Invalid(format!(
                "coefficient bound must be positive, got {}",
                self.coeff_bound
            )));
        }
        if self.restarts == 0 {
            return Err(Error::Invalid("need at least one restart".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct CompletionResult {
    /// `U V^T` clipped entrywise to `[-c, c]`.
    pub matrix: DenseMatrix,
    /// Unclipped factors of the best run. Clipping can raise the rank of
    /// `matrix` above the factor dimension.
    pub factors: Factorization,
    /// Sum of squared errors of `matrix` over the revealed entries.
    pub rmse_sum: f64,
    pub clipped_entries: usize,
    /// The best run reached `tol`.
    pub converged: bool,
    pub best_restart: usize,
    pub restart_rmse: Vec<f64>,
}

/// Ridge term keeping the per-row systems solvable for rows with few revealed
/// entries.
const RIDGE: f64 = 1e-12;

/// Alternating least squares on `U V^T` over the revealed entries.
pub fn complete_bounded_rank(pm: &PartialMatrix, cfg: &SolverConfig) -> Result<CompletionResult> {
    cfg.validate()?;
    let n = pm.n();
    let r = cfg.rank;
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (i, j, a) in pm.revealed() {
        rows[i].push((j, a));
    }

    let mut best: Option<CompletionResult> = None;
    let mut restart_rmse = Vec::with_capacity(cfg.restarts);
    for t in 0..cfg.restarts {
        let mut g = rng::seeded(cfg.seed.wrapping_add(t as u64));
        let scale = libm::sqrt(cfg.coeff_bound / r as f64);
        let mut u = rng::gaussian_matrix(&mut g, n, r) * scale;
        let mut v = rng::gaussian_matrix(&mut g, n, r) * scale;
        let mut err = fit_error(&rows, &u, &v);
        for _ in 0..cfg.max_iter {
            if err <= cfg.tol {
                break;
            }
            als_half_step(&rows, &mut u, &v, r);
            als_half_step(&rows, &mut v, &u, r);
            let next = fit_error(&rows, &u, &v);
            let stalled = err - next <= 1e-15 * err.max(1.0);
            err = next;
            if stalled {
                break;
            }
        }

        let raw = &u * v.transpose();
        let mut clipped_entries = 0;
        let clipped = raw.map(|x| {
            if x.abs() > cfg.coeff_bound {
                clipped_entries += 1;
                x.signum() * cfg.coeff_bound
            } else {
                x
            }
        });
        let rmse_sum: f64 = pm.revealed().map(|(i, j, a)| sq(clipped[(i, j)] - a)).sum();
        restart_rmse.push(rmse_sum);
        if best.as_ref().is_none_or(|b| rmse_sum < b.rmse_sum) {
            best = Some(CompletionResult {
                matrix: DenseMatrix::new(clipped)?,
                factors: Factorization::new(u, v)?,
                rmse_sum,
                clipped_entries,
                converged: rmse_sum <= cfg.tol,
                best_restart: t,
                restart_rmse: Vec::new(),
            });
        }
    }
    let mut out = best.expect("at least one restart");
    out.restart_rmse = restart_rmse;
    Ok(out)
}

fn fit_error(rows: &[Vec<(usize, f64)>], u: &DMatrix<f64>, v: &DMatrix<f64>) -> f64 {
    rows.iter()
        .enumerate()
        .flat_map(|(i, row)| {
            row.iter()
                .map(move |&(j, a)| sq(u.row(i).dot(&v.row(j)) - a))
        })
        .sum()
}

/// Refits every row of `target` by least squares against the fixed factor.
fn als_half_step(
    rows: &[Vec<(usize, f64)>],
    target: &mut DMatrix<f64>,
    fixed: &DMatrix<f64>,
    r: usize,
) {
    for (i, row) in rows.iter().enumerate() {
        let mut gram = DMatrix::<f64>::identity(r, r) * RIDGE;
        let mut rhs = DVector::<f64>::zeros(r);
        for &(j, a) in row {
            let fj = fixed.row(j).transpose();
            gram += &fj * fj.transpose();
            rhs += fj * a;
        }
        if let Some(chol) = gram.cholesky() {
            target.set_row(i, &chol.solve(&rhs).transpose());
        }
    }
}

#[derive(Debug, Clone)]
pub struct GramSolveResult {
    pub assignment: VectorAssignment,
    /// Largest `|u_a . u_b - target|` of the best run.
    pub max_residual: f64,
    /// Sum of squared residuals of the best run.
    pub objective: f64,
    pub best_restart: usize,
    pub restart_residuals: Vec<f64>,
}

fn gram_objective(sys: &GramConstraintSystem, x: &DMatrix<f64>) -> f64 {
    sys.constraints()
        .iter()
        .map(|c| sq(x.row(c.a).dot(&x.row(c.b)) - c.target))
        .sum()
}

fn gram_gradient(sys: &GramConstraintSystem, x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut g = DMatrix::zeros(x.nrows(), x.ncols());
    for c in sys.constraints() {
        let res = x.row(c.a).dot(&x.row(c.b)) - c.target;
        if c.a == c.b {
            let row = x.row(c.a) * (4.0 * res);
            let mut ga = g.row_mut(c.a);
            ga += row;
        } else {
            let (ra, rb) = (x.row(c.b) * (2.0 * res), x.row(c.a) * (2.0 * res));
            let mut ga = g.row_mut(c.a);
            ga += ra;
            let mut gb = g.row_mut(c.b);
            gb += rb;
        }
    }
    g
}

fn gram_max_residual(sys: &GramConstraintSystem, x: &DMatrix<f64>) -> f64 {
    sys.constraints()
        .iter()
        .map(|c| (x.row(c.a).dot(&x.row(c.b)) - c.target).abs())
        .fold(0.0, f64::max)
}

/// Gradient descent with Armijo backtracking on the sum of squared constraint
/// residuals over label vectors in dimension `dim`.
pub fn solve_gram_system(
    sys: &GramConstraintSystem,
    dim: usize,
    cfg: &SolverConfig,
) -> Result<GramSolveResult> {
    if dim == 0 {
        return Err(Error::Invalid("dimension must be at least 1".into()));
    }
    if !(cfg.tol > 0.0) || cfg.restarts == 0 {
        return Err(Error::Invalid(
            "need a positive tolerance and at least one restart".into(),
        ));
    }
    let n = sys.labels().len();
    let mut best: Option<(f64, f64, usize, DMatrix<f64>)> = None;
    let mut restart_residuals = Vec::with_capacity(cfg.restarts);
    for t in 0..cfg.restarts {
        let mut g = rng::seeded(cfg.seed.wrapping_add(t as u64));
        let mut x = rng::gaussian_matrix(&mut g, n, dim) / libm::sqrt(dim as f64);
        let mut f = gram_objective(sys, &x);
        let mut step = 1.0;
        for _ in 0..cfg.max_iter {
            if f <= cfg.tol * cfg.tol {
                break;
            }
            let grad = gram_gradient(sys, &x);
            let gnorm2 = grad.norm_squared();
            if gnorm2 <= 1e-30 {
                break;
            }
            step *= 2.0;
            loop {
                let trial = &x - &grad * step;
                let ft = gram_objective(sys, &trial);
                if ft <= f - 1e-4 * step * gnorm2 {
                    x = trial;
                    f = ft;
                    break;
                }
                step /= 2.0;
                if step < 1e-20 {
                    break;
                }
            }
            if step < 1e-20 {
                break;
            }
        }
        let res = gram_max_residual(sys, &x);
        restart_residuals.push(res);
        if best.as_ref().is_none_or(|(b, ..)| res < *b) {
            best = Some((res, f, t, x));
        }
    }
    let (max_residual, objective, best_restart, x) = best.expect("at least one restart");
    let mut assignment = VectorAssignment::new(dim);
    for (k, label) in sys.labels().iter().enumerate() {
        assignment.insert(label.clone(), x.row(k).transpose())?;
    }
    Ok(GramSolveResult {
        assignment,
        max_residual,
        objective,
        best_restart,
        restart_residuals,
    })
}
