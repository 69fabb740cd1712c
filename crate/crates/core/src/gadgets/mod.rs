//! Gram-constraint systems: labeled vectors plus inner-product equalities.
//! A system is the constraint-list view of a partial PSD matrix; the
//! Partition and Exact-one-in-k-SAT reductions emit systems of this form.

pub(crate) mod csp;
mod label;
mod partition;

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::matrix::{DenseMatrix, PartialMatrix};
use crate::rng;

pub use csp::{csp_completeness, csp_gadget, Assignment, Literal, OneInKSatInstance};
pub use label::Label;
pub use partition::{partition_completeness, partition_gadget, PartitionInstance, PartitionSplit};

/// Which reduction produced a system, with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum Reduction {
    Partition(PartitionInstance),
    OneInKSat(OneInKSatInstance),
    Amplified { copies: usize, base: Box<Reduction> },
    Custom,
}

impl Reduction {
    pub fn kind(&self) -> &'static str {
        match self {
            Reduction::Partition(_) => "partition",
            Reduction::OneInKSat(_) => "csp",
            Reduction::Amplified { .. } => "amplified",
            Reduction::Custom => "custom",
        }
    }
}

/// Constraint families, derived from the labels a constraint touches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Family {
    UnitNorm,
    Orthogonality,
    SumCoupling,
    Rotation,
    InternalVariable,
    ExternalVariable,
    InternalClause,
    ExternalClause,
    CrossBlock,
    Other,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::UnitNorm => "unit_norm",
            Family::Orthogonality => "orthogonality",
            Family::SumCoupling => "sum_coupling",
            Family::Rotation => "rotation",
            Family::InternalVariable => "internal_variable",
            Family::ExternalVariable => "external_variable",
            Family::InternalClause => "internal_clause",
            Family::ExternalClause => "external_clause",
            Family::CrossBlock => "cross_block",
            Family::Other => "other",
        }
    }

    pub fn of(a: &Label, b: &Label) -> Family {
        use Label::*;
        match (a, b) {
            (Block { copy: s, inner: x }, Block { copy: t, inner: y }) => {
                if s == t {
                    Family::of(x, y)
                } else {
                    Family::CrossBlock
                }
            }
            (Item { item: i, slot: s }, Item { item: j, slot: t }) => {
                if a == b {
                    Family::UnitNorm
                } else if i != j {
                    Family::Rotation
                } else if s.max(t) == &3 {
                    Family::SumCoupling
                } else {
                    Family::Orthogonality
                }
            }
            (Clause(i), Clause(j)) => {
                if i == j {
                    Family::InternalClause
                } else if *i == 0 || *j == 0 {
                    Family::ExternalClause
                } else {
                    Family::Other
                }
            }
            (Clause(_), x) | (x, Clause(_)) if x.var().is_some() => Family::InternalClause,
            _ => match (a.var(), b.var()) {
                (Some(x), Some(y)) if x == y => Family::InternalVariable,
                (Some(_), Some(_)) => Family::ExternalVariable,
                _ => Family::Other,
            },
        }
    }
}

/// `u_a . u_b = target`, with `a <= b` as label indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constraint {
    pub a: usize,
    pub b: usize,
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GramConstraintSystem {
    labels: Vec<Label>,
    index: BTreeMap<Label, usize>,
    constraints: Vec<Constraint>,
    reduction: Reduction,
}

impl GramConstraintSystem {
    pub fn new(labels: Vec<Label>, reduction: Reduction) -> Result<Self> {
        let mut index = BTreeMap::new();
        for (k, l) in labels.iter().enumerate() {
            if index.insert(l.clone(), k).is_some() {
                return Err(Error::Invalid(format!("duplicate label {l}")));
            }
        }
        Ok(Self {
            labels,
            index,
            constraints: Vec::new(),
            reduction,
        })
    }

    pub fn push(&mut self, a: &Label, b: &Label, target: f64) -> Result<()> {
        let ia = self.require_index(a)?;
        let ib = self.require_index(b)?;
        self.push_indices(ia, ib, target)
    }

    pub fn push_indices(&mut self, a: usize, b: usize, target: f64) -> Result<()> {
        for idx in [a, b] {
            if idx >= self.labels.len() {
                return Err(Error::IndexOutOfRange {
                    index: idx,
                    n: self.labels.len(),
                });
            }
        }
        if !target.is_finite() {
            return Err(Error::Invalid(format!("non-finite target {target}")));
        }
        self.constraints.push(Constraint {
            a: a.min(b),
            b: a.max(b),
            target,
        });
        Ok(())
    }

    fn require_index(&self, l: &Label) -> Result<usize> {
        self.index
            .get(l)
            .copied()
            .ok_or_else(|| Error::MissingLabel(l.to_string()))
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn label_index(&self, l: &Label) -> Option<usize> {
        self.index.get(l).copied()
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn reduction(&self) -> &Reduction {
        &self.reduction
    }

    pub fn family(&self, c: &Constraint) -> Family {
        Family::of(&self.labels[c.a], &self.labels[c.b])
    }

    pub fn count_family(&self, family: Family) -> usize {
        self.constraints
            .iter()
            .filter(|c| self.family(c) == family)
            .count()
    }

    /// Signed residuals `u_a . u_b - target`, one per constraint.
    pub fn residuals(&self, va: &VectorAssignment) -> Result<Vec<f64>> {
        let vectors = self
            .labels
            .iter()
            .map(|l| va.require(l))
            .collect::<Result<Vec<_>>>()?;
        Ok(self
            .constraints
            .iter()
            .map(|c| vectors[c.a].dot(vectors[c.b]) - c.target)
            .collect())
    }

    pub fn max_residual(&self, va: &VectorAssignment) -> Result<f64> {
        Ok(self
            .residuals(va)?
            .into_iter()
            .fold(0.0, |m, r| m.max(r.abs())))
    }

    /// Largest absolute residual per constraint family.
    pub fn residuals_by_family(&self, va: &VectorAssignment) -> Result<BTreeMap<Family, f64>> {
        let mut out = BTreeMap::new();
        for (c, r) in self.constraints.iter().zip(self.residuals(va)?) {
            let slot = out.entry(self.family(c)).or_insert(0.0f64);
            *slot = slot.max(r.abs());
        }
        Ok(out)
    }
}

/// Label -> vector map in a fixed ambient dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorAssignment {
    dim: usize,
    vectors: BTreeMap<Label, DVector<f64>>,
}

impl VectorAssignment {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            vectors: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, label: Label, v: DVector<f64>) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: format!("vector of length {}", self.dim),
                found: format!("{} for {label}", v.len()),
            });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Invalid(format!(
                "non-finite entry in vector {label}"
            )));
        }
        self.vectors.insert(label, v);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, label: &Label) -> Option<&DVector<f64>> {
        self.vectors.get(label)
    }

    pub fn require(&self, label: &Label) -> Result<&DVector<f64>> {
        self.vectors
            .get(label)
            .ok_or_else(|| Error::MissingLabel(label.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Label, &DVector<f64>)> {
        self.vectors.iter()
    }

    /// Applies `q` (of shape `new_dim x dim`) to every vector.
    pub fn transformed(&self, q: &DMatrix<f64>) -> Result<Self> {
        if q.ncols() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: format!("{} columns", self.dim),
                found: format!("{}", q.ncols()),
            });
        }
        let vectors = self
            .vectors
            .iter()
            .map(|(l, v)| (l.clone(), q * v))
            .collect();
        Ok(Self {
            dim: q.nrows(),
            vectors,
        })
    }

    /// Places every vector in coordinates `offset..offset+dim` of a
    /// `new_dim`-dimensional space.
    pub fn embedded(&self, new_dim: usize, offset: usize) -> Result<Self> {
        if offset + self.dim > new_dim {
            return Err(Error::Invalid(format!(
                "cannot place dimension {} at offset {offset} in dimension {new_dim}",
                self.dim
            )));
        }
        let vectors = self
            .vectors
            .iter()
            .map(|(l, v)| {
                let mut w = DVector::zeros(new_dim);
                w.rows_mut(offset, self.dim).copy_from(v);
                (l.clone(), w)
            })
            .collect();
        Ok(Self {
            dim: new_dim,
            vectors,
        })
    }

    /// Adds iid `N(0, sigma^2)` noise to every coordinate, in label order.
    pub fn perturbed(&self, sigma: f64, seed: u64) -> Self {
        let mut r = rng::seeded(seed);
        let vectors = self
            .vectors
            .iter()
            .map(|(l, v)| {
                (
                    l.clone(),
                    v + rng::gaussian_vector(&mut r, self.dim) * sigma,
                )
            })
            .collect();
        Self {
            dim: self.dim,
            vectors,
        }
    }

    /// Gram matrix of the vectors for `labels`, in that order.
    pub fn gram(&self, labels: &[Label]) -> Result<DenseMatrix> {
        let rows = labels
            .iter()
            .map(|l| self.require(l))
            .collect::<Result<Vec<_>>>()?;
        DenseMatrix::new(DMatrix::from_fn(labels.len(), labels.len(), |i, j| {
            rows[i].dot(rows[j])
        }))
    }
}

/// Block-diagonal repetition with revealed zeros between blocks.
pub trait Amplify: Sized {
    fn amplify_block_diagonal(&self, copies: usize) -> Result<Self>;
}

fn check_copies(copies: usize) -> Result<()> {
    if copies == 0 {
        return Err(Error::Invalid(
            "amplification needs at least one copy".into(),
        ));
    }
    Ok(())
}

impl Amplify for GramConstraintSystem {
    /// Copy `t` (1-based) relabels `l` as `b{t}/l`; every pair of vectors in
    /// different copies is constrained to be orthogonal.
    fn amplify_block_diagonal(&self, copies: usize) -> Result<Self> {
        check_copies(copies)?;
        if copies == 1 {
            return Ok(self.clone());
        }
        let n = self.labels.len();
        let labels = (1..=copies)
            .flat_map(|t| {
                self.labels.iter().map(move |l| Label::Block {
                    copy: t,
                    inner: Box::new(l.clone()),
                })
            })
            .collect();
        let reduction = Reduction::Amplified {
            copies,
            base: Box::new(self.reduction.clone()),
        };
        let mut out = GramConstraintSystem::new(labels, reduction)?;
        for t in 0..copies {
            for c in &self.constraints {
                out.push_indices(t * n + c.a, t * n + c.b, c.target)?;
            }
        }
        for s in 0..copies {
            for t in (s + 1)..copies {
                for a in 0..n {
                    for b in 0..n {
                        out.push_indices(s * n + a, t * n + b, 0.0)?;
                    }
                }
            }
        }
        Ok(out)
    }
}

impl Amplify for PartialMatrix {
    fn amplify_block_diagonal(&self, copies: usize) -> Result<Self> {
        check_copies(copies)?;
        let n = self.n();
        let mut out = PartialMatrix::new(n * copies, self.coeff_bound())?;
        for t in 0..copies {
            for (i, j, v) in self.canonical_entries() {
                out.reveal(t * n + i, t * n + j, v)?;
            }
            for s in (t + 1)..copies {
                for i in 0..n {
                    for j in 0..n {
                        out.reveal(t * n + i, s * n + j, 0.0)?;
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Partial matrix over the label indices whose revealed entries are the
/// constraint targets. The coefficient bound is the largest `|target|`
/// (1 for a system with no nonzero target).
pub fn gram_system_to_partial(sys: &GramConstraintSystem) -> Result<PartialMatrix> {
    let c = sys
        .constraints
        .iter()
        .fold(0.0f64, |m, c| m.max(c.target.abs()));
    let mut pm = PartialMatrix::new(sys.labels.len(), if c > 0.0 { c } else { 1.0 })?;
    for con in &sys.constraints {
        if let Some(old) = pm.get(con.a, con.b) {
            if (old - con.target).abs() > 1e-12 {
                return Err(Error::ConflictingConstraint(
                    sys.labels[con.a].to_string(),
                    sys.labels[con.b].to_string(),
                    old,
                    con.target,
                ));
            }
            continue;
        }
        pm.reveal(con.a, con.b, con.target)?;
    }
    Ok(pm)
}

/// Parses a label list, reporting the first malformed entry.
pub fn parse_labels<'a>(items: impl IntoIterator<Item = &'a str>) -> Result<Vec<Label>> {
    items.into_iter().map(|s| s.parse::<Label>()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_pair() -> GramConstraintSystem {
        let a = Label::Clause(1);
        let b = Label::Clause(2);
        let mut sys =
            GramConstraintSystem::new(alloc::vec![a.clone(), b.clone()], Reduction::Custom)
                .unwrap();
        sys.push(&a, &a, 1.0).unwrap();
        sys.push(&b, &b, 1.0).unwrap();
        sys.push(&b, &a, 0.0).unwrap();
        sys
    }

    #[test]
    fn constraints_are_canonical_and_checked() {
        let mut sys = unit_pair();
        assert!(sys.constraints().iter().all(|c| c.a <= c.b));
        assert!(sys.push_indices(0, 7, 0.0).is_err());
        assert!(sys.push_indices(0, 1, f64::NAN).is_err());
        assert!(matches!(
            sys.push(&Label::Clause(9), &Label::Clause(1), 0.0),
            Err(Error::MissingLabel(_))
        ));
    }

    #[test]
    fn duplicate_labels_rejected() {
        let l = Label::Clause(0);
        assert!(GramConstraintSystem::new(alloc::vec![l.clone(), l], Reduction::Custom).is_err());
    }

    #[test]
    fn to_partial_small_cases() {
        let pm = gram_system_to_partial(&unit_pair()).unwrap();
        assert_eq!(pm.revealed_count(), 4);
        assert_eq!(pm.get(0, 1), Some(0.0));

        let empty =
            GramConstraintSystem::new(alloc::vec![Label::Clause(0)], Reduction::Custom).unwrap();
        assert_eq!(gram_system_to_partial(&empty).unwrap().revealed_count(), 0);

        let mut bad = unit_pair();
        bad.push(&Label::Clause(1), &Label::Clause(2), 0.5).unwrap();
        assert!(matches!(
            gram_system_to_partial(&bad),
            Err(Error::ConflictingConstraint(..))
        ));
    }

    #[test]
    fn residuals_and_missing_labels() {
        let sys = unit_pair();
        let mut va = VectorAssignment::new(2);
        va.insert(Label::Clause(1), DVector::from_vec(alloc::vec![1.0, 0.0]))
            .unwrap();
        assert!(matches!(sys.residuals(&va), Err(Error::MissingLabel(_))));
        va.insert(Label::Clause(2), DVector::from_vec(alloc::vec![0.0, 1.0]))
            .unwrap();
        assert_eq!(sys.max_residual(&va).unwrap(), 0.0);
        assert!(va.insert(Label::Clause(3), DVector::zeros(3)).is_err());
    }

    #[test]
    fn amplification_counts() {
        let sys = unit_pair();
        assert_eq!(sys.amplify_block_diagonal(1).unwrap(), sys);
        let two = sys.amplify_block_diagonal(2).unwrap();
        assert_eq!(two.labels().len(), 4);
        assert_eq!(two.constraints().len(), 2 * 3 + 4);
        assert_eq!(two.count_family(Family::CrossBlock), 4);
        assert!(sys.amplify_block_diagonal(0).is_err());

        let pm = gram_system_to_partial(&sys)
            .unwrap()
            .amplify_block_diagonal(3)
            .unwrap();
        assert_eq!(pm.n(), 6);
        assert_eq!(pm.revealed_count(), 3 * 4 + 6 * 4);
    }
}
