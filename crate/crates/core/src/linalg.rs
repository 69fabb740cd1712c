//! Small dense helpers shared by the factorization and decoding modules.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

/// Singular values (descending) with left and right singular vectors as
/// columns.
#[derive(Debug, Clone)]
pub struct Svd {
    pub values: DVector<f64>,
    pub u: DMatrix<f64>,
    pub v: DMatrix<f64>,
}

/// Thin SVD read off the symmetric eigendecomposition of `[[0, M], [M^T, 0]]`,
/// whose positive eigenvalues are the singular values of `M` with eigenvectors
/// `(u; v) / sqrt(2)`. Vectors paired with numerically zero singular values
/// are unspecified.
///
/// nalgebra's `svd(true, true)` returns wrong singular triples for some exactly
/// rank-deficient inputs (for example `x x^T` with `x` the constant vector in
/// dimension 7), so every caller that needs singular vectors goes through
/// here.
pub fn svd(m: &DMatrix<f64>) -> Svd {
    let (rows, cols) = m.shape();
    let p = rows.min(cols);
    let mut aug = DMatrix::zeros(rows + cols, rows + cols);
    aug.view_mut((0, rows), (rows, cols)).copy_from(m);
    aug.view_mut((rows, 0), (cols, rows))
        .copy_from(&m.transpose());
    let eig = aug.symmetric_eigen();
    let mut order: Vec<usize> = (0..rows + cols).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut values = DVector::zeros(p);
    let mut u = DMatrix::zeros(rows, p);
    let mut v = DMatrix::zeros(cols, p);
    for (k, &e) in order.iter().take(p).enumerate() {
        values[k] = eig.eigenvalues[e].max(0.0);
        let w = eig.eigenvectors.column(e);
        let (wu, wv) = (w.rows(0, rows), w.rows(rows, cols));
        let (nu, nv) = (wu.norm(), wv.norm());
        if nu > 0.0 {
            u.set_column(k, &(wu / nu));
        }
        if nv > 0.0 {
            v.set_column(k, &(wv / nv));
        }
    }
    Svd { values, u, v }
}

/// Orthonormal basis (as rows) of the row space of `rows`, from column-pivoted
/// QR of its transpose. Directions whose pivot falls below `rel_tol` times the
/// largest pivot are dropped.
pub fn orthonormal_row_basis(rows: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let dim = rows.ncols();
    if rows.nrows() == 0 || dim == 0 {
        return DMatrix::zeros(0, dim);
    }
    let qr = rows.transpose().col_piv_qr();
    let r = qr.r();
    let steps = r.nrows().min(r.ncols());
    let lead = if steps > 0 { r[(0, 0)].abs() } else { 0.0 };
    if lead == 0.0 {
        return DMatrix::zeros(0, dim);
    }
    let rank = (0..steps)
        .take_while(|&k| r[(k, k)].abs() > rel_tol * lead)
        .count();
    let q = qr.q();
    q.columns(0, rank).transpose()
}

/// Orthogonal projection of every row of `v` onto the span of the orthonormal
/// rows of `basis`.
pub fn project_rows(basis: &DMatrix<f64>, v: &DMatrix<f64>) -> DMatrix<f64> {
    let coords = v * basis.transpose();
    coords * basis
}

pub fn sq(x: f64) -> f64 {
    x * x
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
}

pub fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

pub fn row_norms(m: &DMatrix<f64>) -> impl Iterator<Item = f64> + '_ {
    m.row_iter().map(|r| r.norm())
}

pub fn max_row_norm(m: &DMatrix<f64>) -> f64 {
    row_norms(m).fold(0.0, f64::max)
}
