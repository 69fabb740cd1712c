//! Instance generators shared by the property and acceptance tests.
#![allow(dead_code)]

use hardcomplete_core::gadgets::{
    Assignment, Literal, OneInKSatInstance, PartitionInstance, PartitionSplit,
};
use hardcomplete_core::matrix::DenseMatrix;
use hardcomplete_core::rng::{self, Rng};
use num_rational::Ratio;
use rand::seq::SliceRandom;
use rand::Rng as _;

/// Rank-`rank` matrix `A B^T` with Gaussian factors, scaled so the largest
/// entry has magnitude exactly `c`.
pub fn random_low_rank(
    rng: &mut Rng,
    rows: usize,
    cols: usize,
    rank: usize,
    c: f64,
) -> DenseMatrix {
    let a = rng::gaussian_matrix(rng, rows, rank);
    let b = rng::gaussian_matrix(rng, cols, rank);
    let m = a * b.transpose();
    let scale = c / m.abs().max();
    DenseMatrix::new(m * scale).unwrap()
}

/// Symmetric variant `A A^T`, scaled to max entry `c`.
pub fn random_symmetric_low_rank(rng: &mut Rng, n: usize, rank: usize, c: f64) -> DenseMatrix {
    let a = rng::gaussian_matrix(rng, n, rank);
    let m = &a * a.transpose();
    let scale = c / m.abs().max();
    DenseMatrix::new(m * scale).unwrap()
}

/// Integer weights split into two halves of equal sum, over a random common
/// denominator, with the items shuffled. Returns the planted split.
pub fn partitionable(rng: &mut Rng, n: usize) -> (PartitionInstance, PartitionSplit) {
    assert!(n >= 2);
    let left = rng.random_range(1..n);
    let right = n - left;
    let mut a: Vec<i128> = (0..left).map(|_| rng.random_range(1..=20)).collect();
    let mut total: i128 = a.iter().sum();
    if total < right as i128 {
        a[0] += right as i128 - total;
        total = right as i128;
    }
    // Random composition of `total` into `right` positive parts.
    let mut cuts: Vec<i128> = Vec::new();
    let mut pool: Vec<i128> = (1..total).collect();
    pool.shuffle(rng);
    cuts.extend(pool.into_iter().take(right - 1));
    cuts.sort_unstable();
    let mut prev = 0;
    let mut b = Vec::with_capacity(right);
    for c in cuts.into_iter().chain(std::iter::once(total)) {
        b.push(c - prev);
        prev = c;
    }
    let mut items: Vec<(i128, bool)> = a
        .into_iter()
        .map(|w| (w, true))
        .chain(b.into_iter().map(|w| (w, false)))
        .collect();
    items.shuffle(rng);
    let den: i128 = rng.random_range(1..=12);
    let weights = items.iter().map(|&(w, _)| Ratio::new(w, den)).collect();
    let split = PartitionSplit::new(
        items
            .iter()
            .enumerate()
            .filter(|(_, (_, l))| *l)
            .map(|(i, _)| i),
    );
    (PartitionInstance::from_ratios(weights).unwrap(), split)
}

/// Random exact-one-in-k instance with a planted satisfying assignment.
pub fn planted_one_in_k(
    rng: &mut Rng,
    k: usize,
    n_vars: usize,
    m: usize,
) -> (OneInKSatInstance, Assignment) {
    assert!(n_vars >= k);
    let values: Vec<i64> = (0..n_vars)
        .map(|_| if rng.random::<bool>() { 1 } else { -1 })
        .collect();
    let mut vars: Vec<usize> = (1..=n_vars).collect();
    let clauses = (0..m)
        .map(|_| {
            vars.shuffle(rng);
            let hot = rng.random_range(0..k);
            vars[..k]
                .iter()
                .enumerate()
                .map(|(p, &var)| {
                    // Literal value is sign * f(var); exactly position `hot` reads -1.
                    let want = if p == hot { -1 } else { 1 };
                    Literal {
                        var,
                        positive: want * values[var - 1] == 1,
                    }
                })
                .collect()
        })
        .collect();
    (
        OneInKSatInstance::new(k, n_vars, clauses).unwrap(),
        Assignment::new(values).unwrap(),
    )
}
