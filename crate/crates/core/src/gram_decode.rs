//! Reading combinatorial solutions back out of vectors that (approximately)
//! satisfy a Partition or Exact-one-in-k-SAT gadget.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gadgets::csp::{block_labels, insert_block_sums, insert_clause_vectors, partner};
use crate::gadgets::{
    Assignment, Family, GramConstraintSystem, Label, OneInKSatInstance, PartitionInstance,
    PartitionSplit, Reduction, VectorAssignment,
};
use crate::linalg;

/// Rotations smaller than this carry no readable sign.
pub const MIN_ROTATION: f64 = 1e-12;

/// Gram determinant below which a variable basis is treated as degenerate.
pub const DEGENERATE_DET: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionDecode {
    pub split: PartitionSplit,
    /// Signed rotation angle from item `i` to item `i+1`, cyclically.
    pub angles: Vec<f64>,
    /// Smallest singular value of the stacked basis vectors (0 in dim 2).
    pub planarity_residual: f64,
    /// `sum_i s_i a_i` on normalized weights.
    pub signed_sum: f64,
    pub max_constraint_residual: f64,
}

fn partition_instance(sys: &GramConstraintSystem) -> Result<&PartitionInstance> {
    match sys.reduction() {
        Reduction::Partition(inst) => Ok(inst),
        other => Err(Error::UnsupportedKind(other.kind().into())),
    }
}

fn csp_instance(sys: &GramConstraintSystem) -> Result<&OneInKSatInstance> {
    match sys.reduction() {
        Reduction::OneInKSat(inst) => Ok(inst),
        other => Err(Error::UnsupportedKind(other.kind().into())),
    }
}

/// Reads `s_i` as the orientation of the rotation from `u(i,1)` to
/// `u(i+1,1)` and returns `I = {i : s_i = +1}`.
///
/// Three-dimensional inputs are first projected onto the best-fit plane of
/// the `u(i,1), u(i,2)` vectors. The plane's orientation comes from its
/// principal basis; a reflection flips every sign and yields the complementary
/// split.
pub fn decode_partition(
    sys: &GramConstraintSystem,
    va: &VectorAssignment,
    tol: f64,
) -> Result<PartitionDecode> {
    let inst = partition_instance(sys)?;
    let n = inst.n();
    let a = inst.normalized();
    let max_constraint_residual = sys.max_residual(va)?;

    let item = |i: usize, slot: usize| va.require(&Label::Item { item: i + 1, slot });
    let (points, planarity_residual): (Vec<[f64; 2]>, f64) = match va.dim() {
        2 => (
            (0..n)
                .map(|i| item(i, 1).map(|v| [v[0], v[1]]))
                .collect::<Result<_>>()?,
            0.0,
        ),
        3 => {
            let mut stacked = DMatrix::zeros(2 * n, 3);
            for i in 0..n {
                stacked.row_mut(2 * i).copy_from(&item(i, 1)?.transpose());
                stacked
                    .row_mut(2 * i + 1)
                    .copy_from(&item(i, 2)?.transpose());
            }
            let svd = linalg::svd(&stacked);
            let residual = svd.values[2];
            if residual > tol {
                return Err(Error::NotPlanar { residual, tol });
            }
            let (e1, e2) = (svd.v.column(0).into_owned(), svd.v.column(1).into_owned());
            let pts = (0..n)
                .map(|i| item(i, 1).map(|v| [v.dot(&e1), v.dot(&e2)]))
                .collect::<Result<_>>()?;
            (pts, residual)
        }
        d => {
            return Err(Error::Invalid(format!(
                "partition decoding needs dimension 2 or 3, got {d}"
            )))
        }
    };

    let mut angles = Vec::with_capacity(n);
    let mut in_set = Vec::new();
    let mut signed_sum = 0.0;
    for i in 0..n {
        let (p, q) = (points[i], points[(i + 1) % n]);
        let angle = libm::atan2(p[0] * q[1] - p[1] * q[0], p[0] * q[0] + p[1] * q[1]);
        if angle.abs() < MIN_ROTATION && a[i] > tol {
            return Err(Error::AmbiguousSign(i, (i + 1) % n));
        }
        if angle >= 0.0 {
            in_set.push(i);
            signed_sum += a[i];
        } else {
            signed_sum -= a[i];
        }
        angles.push(angle);
    }
    Ok(PartitionDecode {
        split: PartitionSplit::new(in_set),
        angles,
        planarity_residual,
        signed_sum,
        max_constraint_residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RepairReport {
    /// Internal-variable error level used for the bounds: the larger of the
    /// caller's value and the measured residual.
    pub eps: f64,
    pub internal_residual_before: f64,
    pub internal_residual_after: f64,
    /// Largest `|u~ - u|` over variable-block vectors.
    pub max_drift: f64,
    /// Largest `|u~ - u|` over clause vectors.
    pub max_clause_drift: f64,
}

impl RepairReport {
    /// `3 sqrt(eps)`.
    pub fn drift_bound(&self) -> f64 {
        3.0 * libm::sqrt(self.eps)
    }

    /// `7 sqrt(eps)`, the bound on how far any inner product moves.
    pub fn product_bound(&self) -> f64 {
        7.0 * libm::sqrt(self.eps)
    }
}

fn max_family_residual(
    sys: &GramConstraintSystem,
    va: &VectorAssignment,
    family: Family,
) -> Result<f64> {
    Ok(sys
        .residuals_by_family(va)?
        .get(&family)
        .copied()
        .unwrap_or(0.0))
}

/// Restores the internal variable constraints exactly.
///
/// In each variable block, basis vector `i` is replaced by its normalized
/// component orthogonal to the already repaired vectors `j < i` and the
/// original vectors `j > i`; the pair sums are then rebuilt from the repaired
/// basis, and clause vectors are rebuilt as the corresponding normalized
/// signed sums.
pub fn repair_internal(
    va: &VectorAssignment,
    sys: &GramConstraintSystem,
    eps: f64,
) -> Result<(VectorAssignment, RepairReport)> {
    let inst = csp_instance(sys)?;
    let k = inst.k();
    let d = 2 * k;
    if va.dim() < d {
        return Err(Error::Invalid(format!(
            "dimension {} cannot hold a {d}-vector orthonormal basis",
            va.dim()
        )));
    }
    let before = max_family_residual(sys, va, Family::InternalVariable)?;
    let mut out = VectorAssignment::new(va.dim());

    for x in 0..=inst.n_vars() {
        let mut b = DMatrix::zeros(va.dim(), d);
        for i in 0..d {
            b.set_column(
                i,
                va.require(&Label::Basis {
                    var: x,
                    index: i + 1,
                })?,
            );
        }
        let det = (b.transpose() * &b).determinant();
        if !(det >= DEGENERATE_DET) {
            return Err(Error::DegenerateBasis { var: x, det });
        }
        for i in 0..d {
            let others = b.clone().remove_column(i);
            let q = others.qr().q();
            let col = b.column(i).into_owned();
            let perp = &col - &q * (q.transpose() * &col);
            let norm = perp.norm();
            if !(norm > 0.0) {
                return Err(Error::DegenerateBasis { var: x, det });
            }
            b.set_column(i, &(perp / norm));
        }
        for i in 0..d {
            out.insert(
                Label::Basis {
                    var: x,
                    index: i + 1,
                },
                b.column(i).into_owned(),
            )?;
        }
        insert_block_sums(&mut out, x, k)?;
    }
    insert_clause_vectors(&mut out, inst)?;

    let mut max_drift = 0.0f64;
    let mut max_clause_drift = 0.0f64;
    for (label, v) in out.iter() {
        let drift = (v - va.require(label)?).norm();
        match label {
            Label::Clause(_) => max_clause_drift = max_clause_drift.max(drift),
            _ => max_drift = max_drift.max(drift),
        }
    }
    let after = max_family_residual(sys, &out, Family::InternalVariable)?;
    let report = RepairReport {
        eps: eps.max(before),
        internal_residual_before: before,
        internal_residual_after: after,
        max_drift,
        max_clause_drift,
    };
    Ok((out, report))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentDiagnostics {
    /// Largest external-variable residual after repair.
    pub delta: f64,
    /// `1 - 12 delta k`, the floor for the magnitudes below.
    pub magnitude_floor: f64,
    /// Per variable, `min_i |u~(x0,i) . u~(x,p(i))|` over odd `i`.
    pub magnitudes: Vec<f64>,
    /// Largest `|u~(C0) . u~(C) - (1 - 2/k)|` over clauses.
    pub clause_deviation: f64,
    /// `min(2/(13k^2), 2/(24k + k^2))`.
    pub clause_threshold: f64,
    pub repair: RepairReport,
    /// First clause (1-based) the decoded assignment violates, if any.
    pub violated_clause: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentDecode {
    pub assignment: Assignment,
    pub diagnostics: AssignmentDiagnostics,
}

/// Repairs the internal constraints, then reads
/// `f(x) = sign(u~(x0,1) . u~(x,2))`, checking that every odd pair plane of
/// `x` gives the same sign.
pub fn decode_assignment(
    sys: &GramConstraintSystem,
    va: &VectorAssignment,
    eps: f64,
) -> Result<AssignmentDecode> {
    let inst = csp_instance(sys)?;
    let k = inst.k();
    let d = 2 * k;
    if va.dim() > 2 * d - 1 {
        return Err(Error::Invalid(format!(
            "dimension {} exceeds 4k - 1 = {}",
            va.dim(),
            2 * d - 1
        )));
    }
    let (repaired, repair) = repair_internal(va, sys, eps)?;
    let delta = max_family_residual(sys, &repaired, Family::ExternalVariable)?;

    let dot = |a: Label, b: Label| -> Result<f64> {
        Ok(repaired.require(&a)?.dot(repaired.require(&b)?))
    };
    let mut values = Vec::with_capacity(inst.n_vars());
    let mut magnitudes = Vec::with_capacity(inst.n_vars());
    for x in 1..=inst.n_vars() {
        let mut sign = 0i64;
        let mut smallest = f64::INFINITY;
        for i in (1..=d).step_by(2) {
            let m = dot(
                Label::Basis { var: 0, index: i },
                Label::Basis {
                    var: x,
                    index: partner(i),
                },
            )?;
            let s = if m >= 0.0 { 1 } else { -1 };
            if sign != 0 && s != sign {
                return Err(Error::SignInconsistency { var: x });
            }
            sign = s;
            smallest = smallest.min(m.abs());
        }
        values.push(sign);
        magnitudes.push(smallest);
    }
    let assignment = Assignment::new(values)?;

    let target = 1.0 - 2.0 / k as f64;
    let mut clause_deviation = 0.0f64;
    for c in 1..=inst.clauses().len() {
        clause_deviation =
            clause_deviation.max((dot(Label::Clause(0), Label::Clause(c))? - target).abs());
    }
    let kf = k as f64;
    let diagnostics = AssignmentDiagnostics {
        delta,
        magnitude_floor: 1.0 - 12.0 * delta * kf,
        magnitudes,
        clause_deviation,
        clause_threshold: (2.0 / (13.0 * kf * kf)).min(2.0 / (24.0 * kf + kf * kf)),
        repair,
        violated_clause: inst.first_violated(&assignment)?,
    };
    Ok(AssignmentDecode {
        assignment,
        diagnostics,
    })
}

/// All variable-block labels of a CSP system, in block order.
pub fn variable_labels(inst: &OneInKSatInstance) -> Vec<Label> {
    (0..=inst.n_vars())
        .flat_map(|x| block_labels(x, inst.k()))
        .collect()
}

/// Largest change of any inner product between two vectors of `labels`.
pub fn max_product_change(
    before: &VectorAssignment,
    after: &VectorAssignment,
    labels: &[Label],
) -> Result<f64> {
    let stack = |va: &VectorAssignment| -> Result<DMatrix<f64>> {
        let rows: Vec<DVector<f64>> = labels
            .iter()
            .map(|l| va.require(l).cloned())
            .collect::<Result<_>>()?;
        Ok(DMatrix::from_columns(&rows))
    };
    let (p, q) = (stack(before)?, stack(after)?);
    let change = q.transpose() * &q - p.transpose() * &p;
    Ok(change.abs().max())
}
