use thiserror::Error;

pub type Result<T, E = DpflError> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DpflError {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid joint table: {0}")]
    InvalidJoint(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// `q[index] == 0` while `p[index] > 0`; the divergence is infinite.
    #[error("absolute continuity violated at index {index}")]
    AbsoluteContinuityViolation { index: usize },

    #[error("column {column} has zero total mass")]
    ZeroEvidence { column: usize },

    #[error("non-finite exponent in encoder row {row}")]
    NonFiniteExponent { row: usize },

    #[error("singular covariance: {0}")]
    SingularCovariance(String),

    #[error("PSD repair exceeded the jitter budget for {0}")]
    PsdRepairExceeded(String),

    #[error("sweep grid axis `{0}` is empty")]
    EmptyGrid(&'static str),

    #[error("no records to plot")]
    EmptyRecords,

    #[error("malformed {what}: {message}")]
    Parse { what: String, message: String },

    #[error("unknown information field `{0}`")]
    UnknownField(String),
}
