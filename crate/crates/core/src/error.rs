use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QmkError {
    #[error("invalid space: {0}")]
    InvalidSpace(String),
    #[error("axis {axis} out of range for dimension {dim}")]
    AxisOutOfRange { axis: usize, dim: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("coherent-state tail {deficit:e} exceeds tolerance {tol:e}")]
    TailTolerance { deficit: f64, tol: f64 },
    #[error("two-particle dimension {dim} exceeds limit {limit}")]
    MemoryGuard { dim: usize, limit: usize },
    #[error("basis not orthonormal (defect {defect:e})")]
    NotOrthonormal { defect: f64 },
    #[error("matrix is not Hermitian (defect {defect:e})")]
    NotHermitian { defect: f64 },
    #[error("materially negative eigenvalue {value:e}")]
    NegativeEigenvalue { value: f64 },
    #[error("invalid density operator: {0}")]
    InvalidDensity(String),
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("invalid coupling: {0}")]
    InvalidCoupling(String),
    #[error("marginal traces differ: {left} vs {right}")]
    InfeasibleMarginals { left: f64, right: f64 },
    #[error("singular normal system")]
    SingularNormalSystem,
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("negative discriminant {value:e}")]
    NegativeDiscriminant { value: f64 },
    #[error("dual pair infeasible (margin {margin:e})")]
    DualInfeasible { margin: f64 },
    #[error("support {m}x{n} too large for enumeration")]
    SupportTooLarge { m: usize, n: usize },
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, QmkError>;
