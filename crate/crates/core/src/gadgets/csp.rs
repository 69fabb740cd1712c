use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec::Vec;

use nalgebra::DVector;

use super::{GramConstraintSystem, Label, Reduction, VectorAssignment};
use crate::error::{Error, Result};

/// Signed occurrence of variable `var` (1-based) in a clause.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Literal {
    pub var: usize,
    pub positive: bool,
}

impl Literal {
    pub fn sign(self) -> i64 {
        if self.positive {
            1
        } else {
            -1
        }
    }
}

/// Exact-one-in-k-SAT: under a `+-1` assignment a clause holds iff exactly one
/// of its signed literals evaluates to `-1`, i.e. the signed sum is `k - 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct OneInKSatInstance {
    k: usize,
    n_vars: usize,
    clauses: Vec<Vec<Literal>>,
}

impl OneInKSatInstance {
    pub fn new(k: usize, n_vars: usize, clauses: Vec<Vec<Literal>>) -> Result<Self> {
        if k < 3 {
            return Err(Error::Invalid(format!(
                "clause width must be at least 3, got {k}"
            )));
        }
        for (c, clause) in clauses.iter().enumerate() {
            if clause.len() != k {
                return Err(Error::Invalid(format!(
                    "clause {} has {} literals, expected {k}",
                    c + 1,
                    clause.len()
                )));
            }
            let mut seen = BTreeSet::new();
            for lit in clause {
                if lit.var == 0 || lit.var > n_vars {
                    return Err(Error::Invalid(format!(
                        "clause {} uses variable {} outside 1..={n_vars}",
                        c + 1,
                        lit.var
                    )));
                }
                if !seen.insert(lit.var) {
                    return Err(Error::Invalid(format!(
                        "clause {} repeats variable {}",
                        c + 1,
                        lit.var
                    )));
                }
            }
        }
        Ok(Self { k, n_vars, clauses })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn clauses(&self) -> &[Vec<Literal>] {
        &self.clauses
    }

    /// Signed sum of the literal values of clause `c` (0-based).
    pub fn clause_sum(&self, c: usize, f: &Assignment) -> i64 {
        self.clauses[c]
            .iter()
            .map(|l| l.sign() * f.value(l.var))
            .sum()
    }

    /// First violated clause, 1-based.
    pub fn first_violated(&self, f: &Assignment) -> Result<Option<usize>> {
        if f.values.len() != self.n_vars {
            return Err(Error::DimensionMismatch {
                expected: format!("{} variables", self.n_vars),
                found: format!("{}", f.values.len()),
            });
        }
        let target = self.k as i64 - 2;
        Ok((0..self.clauses.len())
            .find(|&c| self.clause_sum(c, f) != target)
            .map(|c| c + 1))
    }
}

/// `+-1` value for each variable; `values[v - 1]` belongs to variable `v`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub values: Vec<i64>,
}

impl Assignment {
    pub fn new(values: Vec<i64>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|v| v.abs() != 1) {
            return Err(Error::Invalid(format!(
                "assignment values must be +1 or -1, got {bad}"
            )));
        }
        Ok(Self { values })
    }

    pub fn value(&self, var: usize) -> i64 {
        self.values[var - 1]
    }
}

fn basis(var: usize, index: usize) -> Label {
    Label::Basis { var, index }
}

fn sum(var: usize, i: usize, j: usize, plus: bool) -> Label {
    Label::Sum { var, i, j, plus }
}

/// Partner index: `i + 1` for odd `i`, `i - 1` for even `i` (1-based).
pub(crate) fn partner(i: usize) -> usize {
    if i % 2 == 1 {
        i + 1
    } else {
        i - 1
    }
}

/// Labels of one variable block: `2k` basis vectors, then the `+` and `-`
/// normalized sums for every pair `i < j`.
pub(crate) fn block_labels(var: usize, k: usize) -> Vec<Label> {
    let mut out: Vec<Label> = (1..=2 * k).map(|i| basis(var, i)).collect();
    for i in 1..=2 * k {
        for j in (i + 1)..=2 * k {
            out.push(sum(var, i, j, true));
            out.push(sum(var, i, j, false));
        }
    }
    out
}

/// Variable blocks `x0..xn` (each with `2k + 2 C(2k,2)` vectors), then clause
/// vectors `C0..Cm`.
///
/// Besides the four constraint families, each variable is tied to the
/// reference block by `u(x0,i,i',+) . u(x,p(i),p(i'),-) = 0` for odd
/// `i < i'`. These make every variable's `2x2` rotation blocks share one
/// angle; without them a variable could read differently on different pairs.
/// The reference-only constraints `u(x0,i,j,+) . u(x0,i,j,-) = 0` for odd
/// `i < j` are emitted once.
pub fn csp_gadget(inst: &OneInKSatInstance) -> Result<GramConstraintSystem> {
    let k = inst.k;
    let d = 2 * k;
    let mut labels = Vec::new();
    for x in 0..=inst.n_vars {
        labels.extend(block_labels(x, k));
    }
    labels.extend((0..=inst.clauses.len()).map(Label::Clause));
    let mut sys = GramConstraintSystem::new(labels, Reduction::OneInKSat(inst.clone()))?;

    let h = core::f64::consts::FRAC_1_SQRT_2;
    for x in 0..=inst.n_vars {
        for l in block_labels(x, k) {
            sys.push(&l, &l, 1.0)?;
        }
        for i in 1..=d {
            for j in (i + 1)..=d {
                sys.push(&basis(x, i), &basis(x, j), 0.0)?;
            }
        }
        for i in 1..=d {
            for j in (i + 1)..=d {
                sys.push(&sum(x, i, j, true), &basis(x, i), h)?;
                sys.push(&sum(x, i, j, true), &basis(x, j), h)?;
                sys.push(&sum(x, i, j, false), &basis(x, i), h)?;
                sys.push(&sum(x, i, j, false), &basis(x, j), -h)?;
            }
        }
    }
    for i in (1..=d).step_by(2) {
        for j in ((i + 2)..=d).step_by(2) {
            sys.push(&sum(0, i, j, true), &sum(0, i, j, false), 0.0)?;
        }
    }

    for x in 1..=inst.n_vars {
        for i in 1..=d {
            for j in (1..=d).filter(|&j| j != partner(i)) {
                sys.push(&basis(0, i), &basis(x, j), 0.0)?;
            }
        }
        for i in (1..=d).step_by(2) {
            sys.push(&sum(0, i, i + 1, true), &sum(x, i, i + 1, true), 0.0)?;
        }
        for i in (1..=d).step_by(2) {
            for i2 in ((i + 2)..=d).step_by(2) {
                sys.push(
                    &sum(0, i, i2, true),
                    &sum(x, partner(i), partner(i2), false),
                    0.0,
                )?;
            }
        }
    }

    let root_k = libm::sqrt(k as f64);
    sys.push(&Label::Clause(0), &Label::Clause(0), 1.0)?;
    for g in 1..=k {
        sys.push(&Label::Clause(0), &basis(0, 2 * g - 1), 1.0 / root_k)?;
    }
    for (c, clause) in inst.clauses.iter().enumerate() {
        let cl = Label::Clause(c + 1);
        sys.push(&cl, &cl, 1.0)?;
        for (g, lit) in clause.iter().enumerate() {
            sys.push(
                &cl,
                &basis(lit.var, 2 * (g + 1)),
                lit.sign() as f64 / root_k,
            )?;
        }
    }
    let target = 1.0 - 2.0 / k as f64;
    for c in 1..=inst.clauses.len() {
        sys.push(&Label::Clause(0), &Label::Clause(c), target)?;
    }
    Ok(sys)
}

/// Inserts the pair sums of a block whose basis vectors are already present.
pub(crate) fn insert_block_sums(va: &mut VectorAssignment, var: usize, k: usize) -> Result<()> {
    let d = 2 * k;
    let h = core::f64::consts::FRAC_1_SQRT_2;
    for i in 1..=d {
        for j in (i + 1)..=d {
            let (bi, bj) = (
                va.require(&basis(var, i))?.clone(),
                va.require(&basis(var, j))?.clone(),
            );
            va.insert(sum(var, i, j, true), (&bi + &bj) * h)?;
            va.insert(sum(var, i, j, false), (bi - bj) * h)?;
        }
    }
    Ok(())
}

/// Inserts `u(C0) = k^{-1/2} sum_g u(x0, 2g-1)` and
/// `u(C) = k^{-1/2} sum_g s_g u(x_{i_g}, 2g)` from the basis vectors present.
pub(crate) fn insert_clause_vectors(
    va: &mut VectorAssignment,
    inst: &OneInKSatInstance,
) -> Result<()> {
    let k = inst.k;
    let scale = 1.0 / libm::sqrt(k as f64);
    let mut c0 = DVector::zeros(va.dim());
    for g in 1..=k {
        c0 += va.require(&basis(0, 2 * g - 1))?;
    }
    va.insert(Label::Clause(0), c0 * scale)?;
    for (c, clause) in inst.clauses.iter().enumerate() {
        let mut v = DVector::zeros(va.dim());
        for (g, lit) in clause.iter().enumerate() {
            v += va.require(&basis(lit.var, 2 * (g + 1)))? * lit.sign() as f64;
        }
        va.insert(Label::Clause(c + 1), v * scale)?;
    }
    Ok(())
}

/// Witness in dimension `2k` for a satisfying assignment: the reference basis
/// is the standard basis and variable `x` uses `u(x, p(i)) = f(x) e_i` for odd
/// `i` and `-f(x) e_i` for even `i`.
pub fn csp_completeness(inst: &OneInKSatInstance, f: &Assignment) -> Result<VectorAssignment> {
    if let Some(c) = inst.first_violated(f)? {
        return Err(Error::UnsatisfiedClause(c));
    }
    let k = inst.k;
    let d = 2 * k;
    let mut va = VectorAssignment::new(d);
    let e = |i: usize, s: f64| {
        let mut v = DVector::zeros(d);
        v[i - 1] = s;
        v
    };
    for i in 1..=d {
        va.insert(basis(0, i), e(i, 1.0))?;
    }
    for x in 1..=inst.n_vars {
        let fx = f.value(x) as f64;
        for i in 1..=d {
            let s = if i % 2 == 1 { fx } else { -fx };
            va.insert(basis(x, partner(i)), e(i, s))?;
        }
    }
    for x in 0..=inst.n_vars {
        insert_block_sums(&mut va, x, k)?;
    }
    insert_clause_vectors(&mut va, inst)?;
    Ok(va)
}
