use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

use nalgebra::DVector;
use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedSub, Zero};

use super::{GramConstraintSystem, Label, Reduction, VectorAssignment};
use crate::error::{Error, Result};

/// Positive item weights, kept exactly. The gadget works with the weights
/// divided by their total.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionInstance {
    weights: Vec<Ratio<i128>>,
}

impl PartitionInstance {
    pub fn from_ratios(weights: Vec<Ratio<i128>>) -> Result<Self> {
        if weights.len() < 2 {
            return Err(Error::Invalid(format!(
                "partition needs at least 2 items, got {}",
                weights.len()
            )));
        }
        if let Some((i, w)) = weights.iter().enumerate().find(|(_, w)| *w.numer() <= 0) {
            return Err(Error::Invalid(format!(
                "weight {} must be positive, got {w}",
                i + 1
            )));
        }
        let inst = Self { weights };
        inst.total()?;
        Ok(inst)
    }

    /// Converts each float to the simplest fraction it rounds to (so `0.1`
    /// becomes `1/10`).
    pub fn from_f64(weights: &[f64]) -> Result<Self> {
        let ratios = weights
            .iter()
            .map(|&w| {
                if !(w.is_finite() && w > 0.0) {
                    return Err(Error::Invalid(format!(
                        "weight must be positive and finite, got {w}"
                    )));
                }
                Ratio::approximate_float(w)
                    .ok_or_else(|| Error::Invalid(format!("weight {w} has no rational form")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_ratios(ratios)
    }

    pub fn n(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[Ratio<i128>] {
        &self.weights
    }

    pub fn total(&self) -> Result<Ratio<i128>> {
        checked_sum(self.weights.iter())
    }

    /// Sum of the raw weights, recorded when normalizing.
    pub fn scale(&self) -> f64 {
        self.total().map_or(f64::NAN, |t| ratio_to_f64(&t))
    }

    /// Weights divided by their total, so they sum to 1.
    pub fn normalized(&self) -> Vec<f64> {
        let total = self.total().expect("total checked at construction");
        self.weights
            .iter()
            .map(|w| ratio_to_f64(&(w / total)))
            .collect()
    }

    /// `sum_{i in I} a_i - sum_{i not in I} a_i`, exactly, on raw weights.
    pub fn residue(&self, split: &PartitionSplit) -> Result<Ratio<i128>> {
        let inside = checked_sum(
            self.weights
                .iter()
                .enumerate()
                .filter(|(i, _)| split.contains(*i))
                .map(|(_, w)| w),
        )?;
        let outside = checked_sum(
            self.weights
                .iter()
                .enumerate()
                .filter(|(i, _)| !split.contains(*i))
                .map(|(_, w)| w),
        )?;
        inside.checked_sub(&outside).ok_or_else(overflow)
    }

    pub fn is_balanced(&self, split: &PartitionSplit) -> Result<bool> {
        Ok(self.residue(split)?.is_zero())
    }
}

pub(crate) fn ratio_to_f64(r: &Ratio<i128>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

fn overflow() -> Error {
    Error::TooLarge("rational weights overflow 128-bit arithmetic".into())
}

fn checked_sum<'a>(mut it: impl Iterator<Item = &'a Ratio<i128>>) -> Result<Ratio<i128>> {
    it.try_fold(Ratio::zero(), |acc: Ratio<i128>, w| {
        acc.checked_add(w).ok_or_else(overflow)
    })
}

/// Subset `I` of item indices (0-based).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionSplit {
    pub in_set: BTreeSet<usize>,
}

impl PartitionSplit {
    pub fn new(in_set: impl IntoIterator<Item = usize>) -> Self {
        Self {
            in_set: in_set.into_iter().collect(),
        }
    }

    pub fn contains(&self, i: usize) -> bool {
        self.in_set.contains(&i)
    }

    pub fn complement(&self, n: usize) -> Self {
        Self::new((0..n).filter(|i| !self.contains(*i)))
    }
}

fn item(i: usize, slot: usize) -> Label {
    Label::Item { item: i + 1, slot }
}

/// Three unit vectors per item: an orthonormal pair plus their normalized
/// sum, with the triple of item `i+1` (cyclically) at angle `a_i` from the
/// triple of item `i`.
///
/// Emits `9n` constraints: `3n` unit norms, `n` orthogonality, `2n`
/// sum-coupling and `3n` rotation. For `n = 2` the two rotation constraints on
/// each pair are both kept.
pub fn partition_gadget(inst: &PartitionInstance) -> Result<GramConstraintSystem> {
    let n = inst.n();
    let a = inst.normalized();
    let labels = (0..n)
        .flat_map(|i| (1..=3).map(move |s| item(i, s)))
        .collect();
    let mut sys = GramConstraintSystem::new(labels, Reduction::Partition(inst.clone()))?;
    let h = core::f64::consts::FRAC_1_SQRT_2;
    for i in 0..n {
        for s in 1..=3 {
            sys.push(&item(i, s), &item(i, s), 1.0)?;
        }
    }
    for i in 0..n {
        sys.push(&item(i, 1), &item(i, 2), 0.0)?;
    }
    for i in 0..n {
        sys.push(&item(i, 3), &item(i, 1), h)?;
        sys.push(&item(i, 3), &item(i, 2), h)?;
    }
    for (i, &ai) in a.iter().enumerate() {
        let next = (i + 1) % n;
        let target = libm::cos(ai);
        for s in 1..=3 {
            sys.push(&item(i, s), &item(next, s), target)?;
        }
    }
    Ok(sys)
}

/// Planar witness for an exact split: item `i` gets the rotation pair at
/// angle `theta_i`, where `theta` walks forward by `a_i` for items in the
/// split and backward otherwise.
pub fn partition_completeness(
    inst: &PartitionInstance,
    split: &PartitionSplit,
) -> Result<VectorAssignment> {
    if let Some(&bad) = split.in_set.iter().find(|&&i| i >= inst.n()) {
        return Err(Error::IndexOutOfRange {
            index: bad,
            n: inst.n(),
        });
    }
    let residue = inst.residue(split)?;
    if !residue.is_zero() {
        return Err(Error::InexactSplit(residue.to_string()));
    }
    let a = inst.normalized();
    let h = core::f64::consts::FRAC_1_SQRT_2;
    let mut va = VectorAssignment::new(2);
    let mut theta = 0.0;
    for (i, &ai) in a.iter().enumerate() {
        let (s, c) = libm::sincos(theta);
        va.insert(item(i, 1), DVector::from_vec(alloc::vec![c, s]))?;
        va.insert(item(i, 2), DVector::from_vec(alloc::vec![-s, c]))?;
        va.insert(
            item(i, 3),
            DVector::from_vec(alloc::vec![h * (c - s), h * (s + c)]),
        )?;
        theta += if split.contains(i) { ai } else { -ai };
    }
    Ok(va)
}
