use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LqgError {
    #[error("pole: map undefined at {0}")]
    Pole(String),
    #[error("domain mismatch: {0}")]
    DomainMismatch(String),
    #[error("kernel evaluated on the diagonal")]
    Diagonal,
    #[error("quadrature error: {0}")]
    Quadrature(String),
    #[error("grid has {nodes} nodes, limit is {limit}")]
    Size { nodes: usize, limit: usize },
    #[error("factorization failed: {0}")]
    Factorization(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("unsupported domain: {0}")]
    Domain(String),
    #[error("coincident insertion points")]
    CoincidentInsertions,
    #[error("field carries no covariance metadata")]
    MissingCovarianceMetadata,
    #[error("field has no free boundary")]
    NoFreeBoundary,
    #[error("empty sample")]
    EmptySample,
    #[error("step size error: {0}")]
    StepSize(String),
    #[error("window mismatch: {0}")]
    WindowMismatch(String),
    #[error("max attempts exceeded after {attempts} attempts (acceptance rate {rate})")]
    MaxAttemptsExceeded { attempts: usize, rate: f64 },
    #[error("insertion bounds violated: {}", .0.join("; "))]
    BoundsViolation(Vec<String>),
    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("{sampler} replica {replica}: {source}")]
    Tagged {
        sampler: String,
        replica: u64,
        source: Box<LqgError>,
    },
}

impl From<std::io::Error> for LqgError {
    fn from(e: std::io::Error) -> Self {
        LqgError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, LqgError>;
