use thiserror::Error;

/// Errors raised by the algebraic and geometric routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degree overflow: {left} + {right} exceeds dimension {dim}")]
    DegreeOverflow {
        left: usize,
        right: usize,
        dim: usize,
    },

    #[error("unsupported dimension {0} (must be 1..=8)")]
    UnsupportedDimension(usize),

    #[error("degree {degree} is larger than dimension {dim}")]
    DegreeTooLarge { degree: usize, dim: usize },

    #[error("coefficient count {got} does not match C({dim}, {degree}) = {expected}")]
    CoefficientCount {
        dim: usize,
        degree: usize,
        expected: usize,
        got: usize,
    },

    #[error("cannot contract a degree-0 form")]
    ContractScalar,

    #[error("metric is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("3-form is degenerate: stabilizer dimension {stabilizer_dim}, expected 14")]
    Degenerate { stabilizer_dim: usize },

    #[error("3-form is of split type: the volume-valued pairing is indefinite")]
    SplitForm,

    #[error("expected a unit vector, got norm {norm}")]
    NonUnitVector { norm: f64 },

    #[error("zero vector")]
    ZeroVector,

    #[error("basis vectors are linearly dependent")]
    DependentBasis,
}

pub type Result<T> = std::result::Result<T, GeometryError>;
