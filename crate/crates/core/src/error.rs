use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("degenerate support: {0}")]
    DegenerateSupport(String),

    #[error("invalid design: {0}")]
    InvalidDesign(String),

    #[error("non-probabilistic design: unit {unit} has treatment probability {probability}")]
    NonProbabilistic { unit: usize, probability: f64 },

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("estimator does not match design: {0}")]
    EstimatorDesignMismatch(String),

    #[error("shape error: expected length {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("singular covariate: {0}")]
    SingularCovariate(String),

    #[error("missing dependency: {0}")]
    Dependency(String),

    #[error("unsupported covariate: {0}")]
    UnsupportedCovariate(String),

    #[error("constraint flavor mismatch: {0}")]
    FlavorMismatch(String),

    #[error("inconsistent program: {0}")]
    Inconsistent(String),

    #[error("infeasible program: {0}")]
    Infeasible(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("pairing error: {0}")]
    Pairing(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("estimator unstable under resampling: {0}")]
    Instability(String),

    #[error("malformed solution file: {0}")]
    MalformedSolution(String),

    #[error("solution rejected: {0}")]
    SolutionValidation(String),

    #[error("solver capacity exceeded: {0}")]
    SolverCapacity(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
