use thiserror::Error;

/// Errors produced by the separability toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimensions {m}x{n}: both factors must be at least 2")]
    InvalidDims { m: usize, n: usize },

    #[error("operator space too large: n = {n} exceeds the configured maximum {max}")]
    DimensionTooLarge { n: usize, max: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },

    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("trace is {0}, expected 1")]
    InvalidTrace(f64),

    #[error("matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("vector is not normalized (norm {0})")]
    NonUnitVector(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("decomposition weights sum to {0}, expected 1")]
    WeightNormalization(f64),

    #[error("degenerate cut: rho - sigma is parallel to the test witness")]
    DegenerateCut,

    #[error("no strictly feasible point exists in the candidate witness set")]
    RegionEmpty,

    #[error("oracle budget exhausted after {evaluations} evaluations")]
    BudgetExhausted { evaluations: usize },

    #[error("oracle call budget exhausted after {calls} calls")]
    OracleBudget { calls: usize, trace: Box<crate::cutting_plane::RunTrace> },

    #[error("grid resolution too fine: {estimated} points exceeds budget {budget}")]
    GridTooFine { estimated: u64, budget: u64 },

    #[error("observable value {value} outside spectral range [{min}, {max}]")]
    SpectralBound { value: f64, min: f64, max: f64 },

    #[error("inconsistent measurement: implied value {implied}, supplied {supplied}")]
    InconsistentMeasurement { implied: f64, supplied: f64 },

    #[error("state is not PPT-negative (min eigenvalue {0:e})")]
    NotPptNegative(f64),

    #[error("invalid witness: {0}")]
    InvalidWitness(String),
}

pub type Result<T> = std::result::Result<T, Error>;
