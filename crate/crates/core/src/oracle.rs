//! Exhaustive search for small instances, used to close roundtrips.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_integer::Integer;
use num_traits::CheckedMul;

use crate::error::{Error, Result};
use crate::gadgets::{Assignment, OneInKSatInstance, PartitionInstance, PartitionSplit};
use crate::graph::{Coloring, Graph};

/// Largest `n log2(k)` accepted by [`brute_coloring`].
pub const COLORING_BITS: f64 = 25.0;
/// Largest item or variable count accepted by the other oracles.
pub const MAX_BRUTE_N: usize = 24;

/// Lexicographically first proper `k`-coloring, if any.
pub fn brute_coloring(g: &Graph, k: usize) -> Result<Option<Coloring>> {
    let n = g.n();
    if k > 1 && n as f64 * libm::log2(k as f64) > COLORING_BITS {
        return Err(Error::TooLarge(format!("{n} vertices with {k} colors")));
    }
    let mut adj = vec![Vec::new(); n];
    for (a, b) in g.edges() {
        adj[b].push(a);
    }
    let mut colors = vec![0usize; n];
    if n > 0 && (k == 0 || !extend(&adj, k, &mut colors, 0)) {
        return Ok(None);
    }
    Coloring::new(k.max(1), colors).map(Some)
}

fn extend(adj: &[Vec<usize>], k: usize, colors: &mut [usize], v: usize) -> bool {
    if v == colors.len() {
        return true;
    }
    for c in 0..k {
        if adj[v].iter().all(|&u| colors[u] != c) {
            colors[v] = c;
            if extend(adj, k, colors, v + 1) {
                return true;
            }
        }
    }
    false
}

/// A subset with equal sums, found over exact integer-scaled weights. Item 0
/// is always placed in the returned set; subsets of the remaining items are
/// tried in increasing bitmask order.
pub fn brute_partition(inst: &PartitionInstance) -> Result<Option<PartitionSplit>> {
    let n = inst.n();
    if n > MAX_BRUTE_N {
        return Err(Error::TooLarge(format!("{n} items")));
    }
    let overflow = || Error::TooLarge("weights overflow 128-bit integers".into());
    let mut lcm = 1i128;
    for w in inst.weights() {
        lcm = (lcm / lcm.gcd(w.denom()))
            .checked_mul(*w.denom())
            .ok_or_else(overflow)?;
    }
    let ints = inst
        .weights()
        .iter()
        .map(|w| {
            w.numer()
                .checked_mul(&(lcm / w.denom()))
                .ok_or_else(overflow)
        })
        .collect::<Result<Vec<i128>>>()?;
    let total = ints
        .iter()
        .try_fold(0i128, |acc, &w| acc.checked_add(w))
        .ok_or_else(overflow)?;
    if total.is_odd() {
        return Ok(None);
    }
    let half = total / 2;
    for mask in 0u64..(1u64 << (n - 1)) {
        let mut sum = ints[0];
        for (i, &w) in ints.iter().enumerate().skip(1) {
            if mask >> (i - 1) & 1 == 1 {
                sum += w;
            }
        }
        if sum == half {
            let set = core::iter::once(0).chain((1..n).filter(|&i| mask >> (i - 1) & 1 == 1));
            return Ok(Some(PartitionSplit::new(set)));
        }
    }
    Ok(None)
}

/// A `+-1` assignment with exactly one `-1` literal per clause, trying `+1`
/// before `-1` variable by variable.
pub fn brute_one_in_k(inst: &OneInKSatInstance) -> Result<Option<Assignment>> {
    let n = inst.n_vars();
    if n > MAX_BRUTE_N {
        return Err(Error::TooLarge(format!("{n} variables")));
    }
    let mut occurs = vec![Vec::new(); n + 1];
    for (c, clause) in inst.clauses().iter().enumerate() {
        for lit in clause {
            occurs[lit.var].push((c, lit.sign()));
        }
    }
    let mut state = SatState {
        negatives: vec![0; inst.clauses().len()],
        open: vec![inst.k(); inst.clauses().len()],
        values: vec![0; n],
    };
    if state.search(&occurs, 1) {
        Assignment::new(state.values).map(Some)
    } else {
        Ok(None)
    }
}

struct SatState {
    negatives: Vec<usize>,
    open: Vec<usize>,
    values: Vec<i64>,
}

impl SatState {
    fn search(&mut self, occurs: &[Vec<(usize, i64)>], var: usize) -> bool {
        if var == occurs.len() {
            return true;
        }
        for value in [1i64, -1] {
            let mut ok = true;
            for &(c, sign) in &occurs[var] {
                self.open[c] -= 1;
                if sign * value < 0 {
                    self.negatives[c] += 1;
                }
                ok &= self.negatives[c] <= 1 && (self.open[c] > 0 || self.negatives[c] == 1);
            }
            if ok {
                self.values[var - 1] = value;
                if self.search(occurs, var + 1) {
                    return true;
                }
            }
            for &(c, sign) in &occurs[var] {
                self.open[c] += 1;
                if sign * value < 0 {
                    self.negatives[c] -= 1;
                }
            }
        }
        false
    }
}
