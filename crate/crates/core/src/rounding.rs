//! Decoding graph structure from a bounded-norm factorization of an
//! approximate completion of `P_G`: random-cone rounding to an independent set
//! and grid quantization to a coloring.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::graph::Coloring;
use crate::matrix::{DenseMatrix, Factorization, PartialMatrix};
use crate::rng;

const SQRT_PI: f64 = 1.772_453_850_905_516;

/// Vectors shorter than this are skipped by the cone rounding.
pub const DEGENERATE_NORM: f64 = 1e-12;

/// Relative slack on the `(cr)^{1/4}` row-norm bound accepted by
/// [`decode_coloring`]. The default net resolution leaves a relative margin
/// of `1e-6`, so properness still holds at this slack.
pub const NET_NORM_SLACK: f64 = 5e-7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConeRoundingParams {
    pub c: f64,
    pub r: usize,
    /// Accuracy threshold for surviving indices; also the lower bound on
    /// `u_i . v_j` guaranteed inside the returned set.
    pub delta: f64,
    /// Cone angle, `cos(phi) = delta sqrt(cr) / (1 - delta)^2`.
    pub phi: f64,
    pub seed: u64,
}

impl ConeRoundingParams {
    /// Parameters with the default threshold `delta = 1/(2cr)`.
    pub fn new(c: f64, r: usize, seed: u64) -> Result<Self> {
        Self::with_delta(c, r, 1.0 / (2.0 * c * r as f64), seed)
    }

    pub fn with_delta(c: f64, r: usize, delta: f64, seed: u64) -> Result<Self> {
        if !(c > 0.0) || r == 0 {
            return Err(Error::Invalid(format!(
                "need c > 0 and r >= 1, got c = {c}, r = {r}"
            )));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Invalid(format!(
                "delta must lie in (0, 1), got {delta}"
            )));
        }
        let cos_phi = delta * libm::sqrt(c * r as f64) / ((1.0 - delta) * (1.0 - delta));
        if !(cos_phi > 0.0 && cos_phi < 1.0) {
            return Err(Error::Invalid(format!(
                "cone angle undefined: cos(phi) = {cos_phi}"
            )));
        }
        Ok(Self {
            c,
            r,
            delta,
            phi: libm::acos(cos_phi),
            seed,
        })
    }

    /// Membership threshold `cos(phi/2)` on normalized vectors.
    pub fn cap_threshold(&self) -> f64 {
        libm::cos(self.phi / 2.0)
    }
}

/// Indices whose every revealed entry (in its row and in its column) is within
/// `delta` of `m`.
pub fn filter_accurate_submatrix(
    pm: &PartialMatrix,
    m: &DenseMatrix,
    delta: f64,
) -> Result<Vec<usize>> {
    let n = pm.n();
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: format!("{n}x{n}"),
            found: format!("{}x{}", m.nrows(), m.ncols()),
        });
    }
    let mut keep = alloc::vec![true; n];
    for (i, j, a) in pm.revealed() {
        if (m[(i, j)] - a).abs() > delta {
            keep[i] = false;
            keep[j] = false;
        }
    }
    Ok((0..n).filter(|&i| keep[i]).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndependentSetDecode {
    pub members: Vec<usize>,
    /// The sampled unit direction.
    pub direction: Vec<f64>,
    /// Survivors dropped because `u_i` or `v_i` was numerically zero.
    pub skipped: Vec<usize>,
    pub seed: u64,
}

/// Random-cone rounding: keeps every survivor whose normalized `u_i` and `v_i`
/// both lie within angle `phi/2` of a random direction.
///
/// Every returned pair satisfies `u_i . v_j > delta` whenever the factorization
/// obeys the `(cr)^{1/4}` row-norm bound and survivors are `delta`-accurate;
/// this is checked and reported as [`Error::RoundingGuarantee`] otherwise.
pub fn decode_independent_set(
    fact: &Factorization,
    params: &ConeRoundingParams,
    survivors: &[usize],
) -> Result<IndependentSetDecode> {
    let n = fact.u().nrows();
    if fact.dim() != params.r {
        return Err(Error::DimensionMismatch {
            expected: format!("factorization of dimension {}", params.r),
            found: format!("{}", fact.dim()),
        });
    }
    let mut rng = rng::seeded(params.seed);
    let x = rng::unit_vector(&mut rng, params.r);
    let threshold = params.cap_threshold();

    let mut members = Vec::new();
    let mut skipped = Vec::new();
    for &i in survivors {
        if i >= n {
            return Err(Error::IndexOutOfRange { index: i, n });
        }
        let u = fact.u().row(i);
        let v = fact.v().row(i);
        let (nu, nv) = (u.norm(), v.norm());
        if nu < DEGENERATE_NORM || nv < DEGENERATE_NORM {
            skipped.push(i);
            continue;
        }
        if u.dot(&x.transpose()) / nu > threshold && v.dot(&x.transpose()) / nv > threshold {
            members.push(i);
        }
    }
    members.sort_unstable();
    members.dedup();

    for &i in &members {
        for &j in &members {
            let value = fact.entry(i, j);
            if !(value > params.delta) {
                return Err(Error::RoundingGuarantee {
                    i,
                    j,
                    value,
                    delta: params.delta,
                });
            }
        }
    }
    Ok(IndependentSetDecode {
        members,
        direction: x.iter().copied().collect(),
        skipped,
        seed: params.seed,
    })
}

/// Lower bound on the probability that a single index lands in the set,
/// `1 / (r sqrt(pi) (8 sqrt(cr))^r)`.
pub fn cap_probability_bound(c: f64, r: usize) -> f64 {
    1.0 / (r as f64 * SQRT_PI * libm::pow(8.0 * libm::sqrt(c * r as f64), r as f64))
}

/// Expected-size bound as stated: `(1 - 4(cr)^2 eps) n / (r sqrt(pi) (8 sqrt(cr))^r)`,
/// where `eps` is the sum of squared errors divided by `n`.
pub fn expected_size_bound_stated(n: usize, c: f64, r: usize, eps: f64) -> f64 {
    let cr = c * r as f64;
    (1.0 - 4.0 * cr * cr * eps) * n as f64 * cap_probability_bound(c, r)
}

/// Expected-size bound with the extra factor 2 in the denominator:
/// `(1 - eps/delta^2) n / (2 r sqrt(pi) (8 sqrt(cr))^r)`.
pub fn expected_size_bound_halved(n: usize, c: f64, r: usize, eps: f64, delta: f64) -> f64 {
    (1.0 - eps / (delta * delta)) * n as f64 * cap_probability_bound(c, r) / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetColoringParams {
    pub c: f64,
    pub r: usize,
    /// Entrywise error of the factorized matrix on revealed entries.
    pub eps: f64,
    pub delta_net: f64,
}

impl NetColoringParams {
    /// Parameters with the default resolution
    /// `(1 - 2 eps) (cr)^{-1/4} / 2`, shrunk by a relative `1e-6`.
    pub fn new(c: f64, r: usize, eps: f64) -> Result<Self> {
        let limit = Self::resolution_limit(c, r, eps)?;
        Ok(Self {
            c,
            r,
            eps,
            delta_net: limit * (1.0 - 1e-6),
        })
    }

    pub fn with_delta_net(c: f64, r: usize, eps: f64, delta_net: f64) -> Result<Self> {
        let limit = Self::resolution_limit(c, r, eps)?;
        if !(delta_net > 0.0 && delta_net < limit) {
            return Err(Error::Invalid(format!(
                "net resolution {delta_net} must lie in (0, {limit})"
            )));
        }
        Ok(Self {
            c,
            r,
            eps,
            delta_net,
        })
    }

    fn resolution_limit(c: f64, r: usize, eps: f64) -> Result<f64> {
        if !(c > 0.0) || r == 0 {
            return Err(Error::Invalid(format!(
                "need c > 0 and r >= 1, got c = {c}, r = {r}"
            )));
        }
        if !(0.0..0.5).contains(&eps) {
            return Err(Error::Invalid(format!(
                "entrywise error must lie in [0, 1/2), got {eps}"
            )));
        }
        Ok((1.0 - 2.0 * eps) / libm::pow(c * r as f64, 0.25) / 2.0)
    }

    /// Half the side of the hypercube containing every factor row.
    pub fn half_side(&self) -> f64 {
        libm::pow(self.c * self.r as f64, 0.25)
    }

    /// Side of a grid cell; its diagonal is `2 delta_net`.
    pub fn cell_side(&self) -> f64 {
        2.0 * self.delta_net / libm::sqrt(self.r as f64)
    }

    pub fn cells_per_axis(&self) -> usize {
        libm::ceil(2.0 * self.half_side() / self.cell_side()) as usize
    }
}

/// `(4 sqrt(cr) / (1 - 2 eps))^{2r}`.
pub fn coloring_bound(c: f64, r: usize, eps: f64) -> f64 {
    libm::pow(
        4.0 * libm::sqrt(c * r as f64) / (1.0 - 2.0 * eps),
        2.0 * r as f64,
    )
}

/// Colors vertex `i` by the pair of grid cells containing `u_i` and `v_i`.
/// Colors are numbered in order of first appearance.
pub fn decode_coloring(fact: &Factorization, params: &NetColoringParams) -> Result<Coloring> {
    if fact.dim() != params.r {
        return Err(Error::DimensionMismatch {
            expected: format!("factorization of dimension {}", params.r),
            found: format!("{}", fact.dim()),
        });
    }
    let h = params.half_side();
    let bound = h * (1.0 + NET_NORM_SLACK);
    let side = params.cell_side();
    let cells = params.cells_per_axis().max(1);
    let cell_of = |row: DVector<f64>, index: usize| -> Result<Vec<usize>> {
        let norm = row.norm();
        if norm > bound {
            return Err(Error::NormBound {
                index,
                norm,
                bound: h,
            });
        }
        Ok(row
            .iter()
            .map(|&x| (libm::floor((x + h) / side).max(0.0) as usize).min(cells - 1))
            .collect())
    };

    let n = fact.u().nrows();
    let mut ids: BTreeMap<(Vec<usize>, Vec<usize>), usize> = BTreeMap::new();
    let mut colors = Vec::with_capacity(n);
    for i in 0..n {
        let key = (
            cell_of(fact.u().row(i).transpose(), i)?,
            cell_of(fact.v().row(i).transpose(), i)?,
        );
        let next = ids.len();
        colors.push(*ids.entry(key).or_insert(next));
    }
    Coloring::new(ids.len(), colors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{coloring_factorization, completion_from_coloring, graph_to_partial, Graph};
    use crate::matrix::revealed_errors;
    use nalgebra::DMatrix;

    #[test]
    fn default_cone_parameters() {
        let p = ConeRoundingParams::new(1.0, 2, 0).unwrap();
        assert_eq!(p.delta, 0.25);
        let cos_phi = 0.25 * libm::sqrt(2.0) / 0.5625;
        assert!((libm::cos(p.phi) - cos_phi).abs() < 1e-14);
        assert!(ConeRoundingParams::with_delta(1.0, 2, 1.5, 0).is_err());
        assert!(ConeRoundingParams::with_delta(4.0, 4, 0.9, 0).is_err());
    }

    #[test]
    fn filter_on_exact_and_corrupted_completions() {
        let g = Graph::cycle(6);
        let f = Coloring::new(2, (0..6).map(|v| v % 2).collect()).unwrap();
        let pm = graph_to_partial(&g);
        let m = completion_from_coloring(&g, &f).unwrap();
        assert_eq!(
            filter_accurate_submatrix(&pm, &m, 0.25).unwrap(),
            (0..6).collect::<Vec<_>>()
        );

        let mut bad = m.clone().into_inner();
        bad[(3, 3)] += 0.5;
        let bad = DenseMatrix::new(bad).unwrap();
        assert_eq!(
            filter_accurate_submatrix(&pm, &bad, 0.25).unwrap(),
            [0, 1, 2, 4, 5]
        );
    }

    #[test]
    fn filter_respects_averaging_bound() {
        let (g, f) = Graph::planted(40, 3, 0.4, 11);
        let pm = graph_to_partial(&g);
        let m = completion_from_coloring(&g, &f).unwrap().into_inner();
        let mut r = rng::seeded(5);
        let noise = rng::gaussian_matrix(&mut r, 40, 40) * 0.1;
        let noisy = DenseMatrix::new(&m + (&noise + noise.transpose()) * 0.5).unwrap();
        let (sum, _) = revealed_errors(&pm, &noisy).unwrap();
        let delta = 0.15;
        let kept = filter_accurate_submatrix(&pm, &noisy, delta).unwrap();
        // Independent count of indices touching a violating revealed entry.
        let violating = (0..40)
            .filter(|&i| {
                (0..40).any(|j| {
                    pm.get(i, j)
                        .is_some_and(|a| (noisy[(i, j)] - a).abs() > delta)
                })
            })
            .count();
        assert_eq!(kept.len(), 40 - violating);
        assert!(kept.len() as f64 >= 40.0 - sum / (delta * delta));
    }

    #[test]
    fn cone_sets_are_independent_and_reproducible() {
        let (g, f) = Graph::planted(60, 2, 0.3, 3);
        let fact = coloring_factorization(&f);
        let survivors: Vec<usize> = (0..60).collect();
        let mut nonempty = 0;
        for seed in 0..50 {
            let p = ConeRoundingParams::new(1.0, 2, seed).unwrap();
            let t = decode_independent_set(&fact, &p, &survivors).unwrap();
            assert!(g.is_independent(&t.members));
            assert_eq!(t, decode_independent_set(&fact, &p, &survivors).unwrap());
            nonempty += usize::from(!t.members.is_empty());
        }
        assert!(nonempty > 0);
    }

    #[test]
    fn degenerate_rows_are_skipped() {
        let u = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let fact = Factorization::new(u.clone(), u).unwrap();
        let p = ConeRoundingParams::new(1.0, 2, 1).unwrap();
        let t = decode_independent_set(&fact, &p, &[0, 1]).unwrap();
        assert_eq!(t.skipped, [1]);
        assert!(!t.members.contains(&1));
    }

    #[test]
    fn bounds_have_expected_values() {
        let denom = 2.0 * SQRT_PI * 128.0;
        assert!((cap_probability_bound(1.0, 2) - 1.0 / denom).abs() < 1e-15);
        assert!(
            (expected_size_bound_halved(2000, 1.0, 2, 0.0, 0.25) - 1000.0 / denom).abs() < 1e-12
        );
        assert!((expected_size_bound_stated(2000, 1.0, 2, 0.0) - 2000.0 / denom).abs() < 1e-12);
        assert!((coloring_bound(1.0, 1, 0.0) - 16.0).abs() < 1e-12);
    }

    #[test]
    fn k2_gets_two_colors() {
        let g = Graph::complete(2);
        let f = Coloring::new(2, alloc::vec![0, 1]).unwrap();
        let fact = coloring_factorization(&f);
        let params = NetColoringParams::new(1.0, 2, 0.0).unwrap();
        let out = decode_coloring(&fact, &params).unwrap();
        assert_ne!(out.color(0), out.color(1));
        out.check_proper(&g).unwrap();
    }

    #[test]
    fn net_coloring_rejects_long_rows() {
        let u = DMatrix::from_row_slice(1, 1, &[2.0]);
        let fact = Factorization::new(u.clone(), u).unwrap();
        let params = NetColoringParams::new(1.0, 1, 0.0).unwrap();
        assert!(matches!(
            decode_coloring(&fact, &params),
            Err(Error::NormBound { index: 0, .. })
        ));
    }

    #[test]
    fn net_resolution_must_respect_limit() {
        assert!(NetColoringParams::with_delta_net(1.0, 1, 0.0, 0.5).is_err());
        assert!(NetColoringParams::with_delta_net(1.0, 1, 0.0, 0.49).is_ok());
        assert!(NetColoringParams::new(1.0, 1, 0.5).is_err());
    }
}
