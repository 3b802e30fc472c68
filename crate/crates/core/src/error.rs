use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("vertical coupling is not Hermitian (defect {defect:e})")]
    NotHermitian { defect: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// `position` is the column offset inside the strip where the sweep
    /// broke down, `None` for dense factorizations.
    #[error("singular resolvent (condition estimate {condition:e}, sweep position {position:?})")]
    Singular {
        condition: f64,
        position: Option<usize>,
    },

    #[error("sigma needs at least two columns, got a = b = {0}")]
    DomainTooSmall(i64),

    #[error("unsupported geometry: {0}")]
    UnsupportedGeometry(String),

    #[error("argument error: {0}")]
    Argument(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("size guard: {0}")]
    SizeGuard(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("overflow before renormalization: {0}")]
    StepSize(String),

    #[error("certification failure at scale {scale:e}: {reason}")]
    Certification { scale: f64, reason: String },

    #[error("too many singular draws: {excluded} of {total}")]
    ExcessiveExclusions { excluded: usize, total: usize },
}
