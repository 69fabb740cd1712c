use alloc::string::String;

/// Errors raised by the reductions, factorization pipeline and decoders.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("index {index} out of range for dimension {n}")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("entry ({i}, {j}) = {value} exceeds coefficient bound {bound}")]
    CoefficientBound {
        i: usize,
        j: usize,
        value: f64,
        bound: f64,
    },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    Asymmetric(f64),

    #[error("coherence is undefined for the zero matrix")]
    ZeroMatrix,

    #[error("coloring is improper: edge ({0}, {1}) joins equal colors")]
    ImproperColoring(usize, usize),

    #[error("color class {0} is empty")]
    EmptyColorClass(usize),

    #[error("solver did not converge after {iterations} iterations (best residual {residual:e}, eta {eta})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        eta: f64,
    },

    #[error("row {index} has norm {norm} above the factorization bound {bound}")]
    NormBound { index: usize, norm: f64, bound: f64 },

    #[error("rounding guarantee violated: u_{i} . v_{j} = {value} <= delta {delta}")]
    RoundingGuarantee {
        i: usize,
        j: usize,
        value: f64,
        delta: f64,
    },

    #[error("split is not exact: residue {0}")]
    InexactSplit(String),

    #[error("assignment violates clause {0}")]
    UnsatisfiedClause(usize),

    #[error("planarity residual {residual:e} exceeds tolerance {tol:e}")]
    NotPlanar { residual: f64, tol: f64 },

    #[error("rotation between items {0} and {1} is too small to read a sign from")]
    AmbiguousSign(usize, usize),

    #[error("variable {var} basis is numerically degenerate (gram determinant {det:e})")]
    DegenerateBasis { var: usize, det: f64 },

    #[error("variable {var}: rotation sign differs between pair planes")]
    SignInconsistency { var: usize },

    #[error("missing vector for label {0}")]
    MissingLabel(String),

    #[error("conflicting constraints on ({0}, {1}): {2} vs {3}")]
    ConflictingConstraint(String, String, f64, f64),

    #[error("instance too large for exhaustive search: {0}")]
    TooLarge(String),

    #[error("unsupported reduction kind for this operation: {0}")]
    UnsupportedKind(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
