//! Partial and dense matrices, factorizations, and the checks run against them:
//! consistency with revealed entries, numerical rank, coherence and PSD-ness.
//!
//! Unrevealed entries are simply absent from a [`PartialMatrix`]; there is no
//! sentinel value. Indices are 0-based in memory.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;
use core::ops::Index;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;

/// Relative singular-value threshold used when no other tolerance is given.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

/// Symmetric `n x n` matrix with a revealed-entry mask and a coefficient bound.
///
/// Entries are stored once under the canonical key `(min(i,j), max(i,j))` and
/// mirrored on read, so `(i,j)` is revealed exactly when `(j,i)` is.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialMatrix {
    n: usize,
    c: f64,
    entries: BTreeMap<(usize, usize), f64>,
}

impl PartialMatrix {
    /// Fully unrevealed matrix.
    pub fn new(n: usize, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Invalid(format!(
                "coefficient bound must be positive, got {c}"
            )));
        }
        Ok(Self {
            n,
            c,
            entries: BTreeMap::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn coeff_bound(&self) -> f64 {
        self.c
    }

    /// Reveals `(i,j)` and `(j,i)` with `value`. Revealing an entry twice with
    /// different values is an error.
    pub fn reveal(&mut self, i: usize, j: usize, value: f64) -> Result<()> {
        for idx in [i, j] {
            if idx >= self.n {
                return Err(Error::IndexOutOfRange {
                    index: idx,
                    n: self.n,
                });
            }
        }
        if !value.is_finite() || value.abs() > self.c {
            return Err(Error::CoefficientBound {
                i,
                j,
                value,
                bound: self.c,
            });
        }
        let key = canonical(i, j);
        match self.entries.get(&key) {
            Some(&old) if old != value => Err(Error::ConflictingConstraint(
                format!("{i}"),
                format!("{j}"),
                old,
                value,
            )),
            _ => {
                self.entries.insert(key, value);
                Ok(())
            }
        }
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.entries.get(&canonical(i, j)).copied()
    }

    pub fn is_revealed(&self, i: usize, j: usize) -> bool {
        self.entries.contains_key(&canonical(i, j))
    }

    /// Revealed entries with `i <= j`, in key order.
    pub fn canonical_entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.entries.iter().map(|(&(i, j), &v)| (i, j, v))
    }

    /// Every revealed position `(i,j)` of Omega, both orientations.
    pub fn revealed(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.canonical_entries().flat_map(|(i, j, v)| {
            let mirror = if i != j { Some((j, i, v)) } else { None };
            core::iter::once((i, j, v)).chain(mirror)
        })
    }

    pub fn canonical_count(&self) -> usize {
        self.entries.len()
    }

    /// `|Omega|`, counting off-diagonal entries in both orientations.
    pub fn revealed_count(&self) -> usize {
        self.entries
            .keys()
            .map(|&(i, j)| if i == j { 1 } else { 2 })
            .sum()
    }

    pub fn unrevealed_count(&self) -> usize {
        self.n * self.n - self.revealed_count()
    }

    /// `p = |Omega| / n^2`; zero for the empty matrix.
    pub fn revealed_fraction(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        self.revealed_count() as f64 / (self.n * self.n) as f64
    }
}

fn canonical(i: usize, j: usize) -> (usize, usize) {
    if i <= j {
        (i, j)
    } else {
        (j, i)
    }
}

/// Dense real matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix(DMatrix<f64>);

impl DenseMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if let Some(bad) = m.iter().find(|x| !x.is_finite()) {
            return Err(Error::Invalid(format!("non-finite matrix entry {bad}")));
        }
        Ok(Self(m))
    }

    pub fn from_row_slice(rows: usize, cols: usize, values: &[f64]) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: format!("{} values", rows * cols),
                found: format!("{}", values.len()),
            });
        }
        Self::new(DMatrix::from_row_slice(rows, cols, values))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn ones(n: usize) -> Self {
        Self(DMatrix::from_element(n, n, 1.0))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self(DMatrix::zeros(rows, cols))
    }

    pub fn nrows(&self) -> usize {
        self.0.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.0.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    /// Values in row-major order.
    pub fn row_major(&self) -> Vec<f64> {
        self.0.transpose().iter().copied().collect()
    }

    pub fn max_abs(&self) -> f64 {
        linalg::max_abs(&self.0)
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.0[idx]
    }
}

/// Two families of row vectors in dimension `r`; entry `(i,j)` of the
/// factorized matrix is `u_i . v_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Factorization {
    u: DMatrix<f64>,
    v: DMatrix<f64>,
}

impl Factorization {
    pub fn new(u: DMatrix<f64>, v: DMatrix<f64>) -> Result<Self> {
        if u.ncols() != v.ncols() {
            return Err(Error::DimensionMismatch {
                expected: format!("inner dimension {}", u.ncols()),
                found: format!("{}", v.ncols()),
            });
        }
        if u.iter().chain(v.iter()).any(|x| !x.is_finite()) {
            return Err(Error::Invalid("non-finite factor entry".into()));
        }
        Ok(Self { u, v })
    }

    /// Inner dimension `r`.
    pub fn dim(&self) -> usize {
        self.u.ncols()
    }

    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn reconstruct(&self) -> DenseMatrix {
        DenseMatrix(&self.u * self.v.transpose())
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.u.row(i).dot(&self.v.row(j))
    }

    /// Largest row norm over both families.
    pub fn max_row_norm(&self) -> f64 {
        linalg::max_row_norm(&self.u).max(linalg::max_row_norm(&self.v))
    }

    /// Applies the same orthogonal map to every `u_i` and `v_j`.
    pub fn rotated(&self, q: &DMatrix<f64>) -> Result<Self> {
        if q.nrows() != self.dim() || q.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: format!("{0}x{0} rotation", self.dim()),
                found: format!("{}x{}", q.nrows(), q.ncols()),
            });
        }
        Ok(Self {
            u: &self.u * q.transpose(),
            v: &self.v * q.transpose(),
        })
    }
}

/// How well a dense matrix agrees with the revealed entries of a partial one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsistencyReport {
    /// Sum of squared errors over Omega (both orientations).
    pub rmse_sum: f64,
    pub max_entry_err: f64,
    pub rank_est: usize,
    /// Every entry of the dense matrix lies within the coefficient bound.
    pub coeff_bound_ok: bool,
    pub revealed_fraction: f64,
}

pub fn consistency(pm: &PartialMatrix, b: &DenseMatrix) -> Result<ConsistencyReport> {
    let (rmse_sum, max_entry_err) = revealed_errors(pm, b)?;
    Ok(ConsistencyReport {
        rmse_sum,
        max_entry_err,
        rank_est: numerical_rank(b, DEFAULT_RANK_TOL),
        coeff_bound_ok: b.max_abs() <= pm.coeff_bound(),
        revealed_fraction: pm.revealed_fraction(),
    })
}

/// `(sum of squared errors, max error)` over Omega, without the rank estimate
/// that [`consistency`] computes.
pub fn revealed_errors(pm: &PartialMatrix, b: &DenseMatrix) -> Result<(f64, f64)> {
    if b.nrows() != pm.n() || b.ncols() != pm.n() {
        return Err(Error::DimensionMismatch {
            expected: format!("{0}x{0}", pm.n()),
            found: format!("{}x{}", b.nrows(), b.ncols()),
        });
    }
    let mut sum = 0.0;
    let mut max = 0.0f64;
    for (i, j, a) in pm.revealed() {
        let err = (a - b[(i, j)]).abs();
        sum += err * err;
        max = max.max(err);
    }
    Ok((sum, max))
}

/// Number of singular values above `tol * sigma_max`.
pub fn numerical_rank(m: &DenseMatrix, tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.0.singular_values();
    let top = sv.max();
    if top <= 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * top).count()
}

/// Smallest `mu` for which the computed SVD meets the coherence bound
/// `||e_i^T U||^2 <= k mu / n` on both singular subspaces.
///
/// Row norms of `U_k` are the diagonal of the projector `U_k U_k^T`, so the
/// value does not depend on how ties among singular values were broken.
pub fn coherence(m: &DenseMatrix, tol: f64) -> Result<f64> {
    let (rows, cols) = (m.nrows(), m.ncols());
    if rows == 0 || cols == 0 || m.max_abs() == 0.0 {
        return Err(Error::ZeroMatrix);
    }
    let svd = linalg::svd(&m.0);
    let top = svd.values.max();
    let kept: Vec<usize> = (0..svd.values.len())
        .filter(|&k| svd.values[k] > tol * top)
        .collect();
    let k = kept.len() as f64;
    let leverage = |f: &DMatrix<f64>| {
        (0..f.nrows())
            .map(|i| kept.iter().map(|&c| f[(i, c)] * f[(i, c)]).sum::<f64>())
            .fold(0.0, f64::max)
    };
    let (leverage_u, leverage_v) = (leverage(&svd.u), leverage(&svd.v));
    Ok((rows as f64 / k * leverage_u).max(cols as f64 / k * leverage_v))
}

/// `true` iff the smallest eigenvalue is at least `-tol`.
pub fn is_psd(m: &DenseMatrix, tol: f64) -> Result<bool> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            expected: "square matrix".into(),
            found: format!("{}x{}", m.nrows(), m.ncols()),
        });
    }
    if m.nrows() == 0 {
        return Ok(true);
    }
    let asym = linalg::max_asymmetry(&m.0);
    if asym > 1e-9 * m.max_abs().max(1.0) {
        return Err(Error::Asymmetric(asym));
    }
    let eig = m.0.clone().symmetric_eigen();
    Ok(eig.eigenvalues.min() >= -tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn revealed_identity(n: usize) -> PartialMatrix {
        let mut pm = PartialMatrix::new(n, 1.0).unwrap();
        for i in 0..n {
            pm.reveal(i, i, 1.0).unwrap();
        }
        pm
    }

    #[test]
    fn consistency_of_exact_and_off_by_one() {
        let pm = revealed_identity(2);
        let exact = consistency(&pm, &DenseMatrix::identity(2)).unwrap();
        assert_eq!(exact.rmse_sum, 0.0);
        assert_eq!(exact.max_entry_err, 0.0);
        let off = DenseMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]).unwrap();
        let r = consistency(&pm, &off).unwrap();
        assert_eq!(r.rmse_sum, 1.0);
        assert_eq!(r.max_entry_err, 1.0);
    }

    #[test]
    fn consistency_rejects_wrong_shape() {
        let pm = revealed_identity(2);
        assert!(matches!(
            consistency(&pm, &DenseMatrix::identity(3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn symmetric_storage_and_conflicts() {
        let mut pm = PartialMatrix::new(3, 1.0).unwrap();
        pm.reveal(2, 0, 0.5).unwrap();
        assert_eq!(pm.get(0, 2), Some(0.5));
        assert_eq!(pm.revealed_count(), 2);
        assert!(pm.reveal(0, 2, 0.5).is_ok());
        assert!(pm.reveal(0, 2, 0.25).is_err());
        assert!(matches!(
            pm.reveal(0, 1, 2.0),
            Err(Error::CoefficientBound { .. })
        ));
        assert!(matches!(
            pm.reveal(0, 3, 0.0),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn rank_of_identity_ones_zero() {
        assert_eq!(numerical_rank(&DenseMatrix::identity(3), 1e-9), 3);
        assert_eq!(numerical_rank(&DenseMatrix::ones(4), 1e-9), 1);
        assert_eq!(numerical_rank(&DenseMatrix::zeros(3, 3), 1e-9), 0);
    }

    #[test]
    fn coherence_of_identity_and_ones() {
        assert!((coherence(&DenseMatrix::identity(5), 1e-9).unwrap() - 1.0).abs() < 1e-9);
        assert!((coherence(&DenseMatrix::ones(6), 1e-9).unwrap() - 1.0).abs() < 1e-9);
        assert_eq!(
            coherence(&DenseMatrix::zeros(3, 3), 1e-9),
            Err(Error::ZeroMatrix)
        );
    }

    #[test]
    fn coherence_of_spiky_matrix_is_large() {
        // e_1 e_1^T: all leverage on one row, mu = n.
        let mut m = DMatrix::zeros(4, 4);
        m[(0, 0)] = 1.0;
        let mu = coherence(&DenseMatrix::new(m).unwrap(), 1e-9).unwrap();
        assert!((mu - 4.0).abs() < 1e-9);
    }

    #[test]
    fn psd_checks() {
        assert!(is_psd(&DenseMatrix::identity(2), 1e-9).unwrap());
        let swap = DenseMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]).unwrap();
        assert!(!is_psd(&swap, 1e-9).unwrap());
        let skew = DenseMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]).unwrap();
        assert!(matches!(is_psd(&skew, 1e-9), Err(Error::Asymmetric(_))));
    }

    #[test]
    fn factorization_reconstructs_and_rejects_mismatch() {
        let u = DMatrix::from_row_slice(2, 1, &[1.0, 2.0]);
        let v = DMatrix::from_row_slice(2, 1, &[3.0, 4.0]);
        let f = Factorization::new(u.clone(), v).unwrap();
        assert_eq!(f.reconstruct().row_major(), vec![3.0, 4.0, 6.0, 8.0]);
        assert!(Factorization::new(u, DMatrix::zeros(2, 2)).is_err());
    }
}
