use thiserror::Error;

pub type Result<T> = std::result::Result<T, TomoError>;

#[derive(Debug, Error)]
pub enum TomoError {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("covariance is not symmetric positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("bad magic: expected TOMOGRD1")]
    BadMagic,

    #[error("truncated file: {0}")]
    Truncated(String),

    #[error("payload size mismatch: header declares {expected} bytes, found {actual}")]
    PayloadSizeMismatch { expected: usize, actual: usize },

    #[error("non-finite sample at index {index}")]
    NonFiniteSample { index: usize },

    #[error("malformed header: {0}")]
    Header(String),

    #[error("angular undersampling: {angles} angles given, at least {min} required")]
    AngularUndersampling { angles: usize, min: usize },

    #[error("out of range: {0}")]
    OutOfRange(String),

    #[error("quadrature budget below minimum: {0}")]
    QuadratureBudget(String),

    #[error("output domain intersects the singular set: {0}")]
    SingularSet(String),

    #[error("rank deficient: rank {rank} of {expected} (condition number {condition:.3e})")]
    RankDeficient {
        rank: usize,
        expected: usize,
        condition: f64,
    },

    #[error("computational budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl TomoError {
    /// Stable short code, one per variant.
    pub fn code(&self) -> &'static str {
        match self {
            TomoError::InvalidDomain(_) => "invalid-domain",
            TomoError::NotPositiveDefinite(_) => "not-spd",
            TomoError::DomainMismatch(_) => "domain-mismatch",
            TomoError::DimensionMismatch { .. } => "dimension-mismatch",
            TomoError::InvalidParameter(_) => "invalid-parameter",
            TomoError::BadMagic => "bad-magic",
            TomoError::Truncated(_) => "truncated",
            TomoError::PayloadSizeMismatch { .. } => "payload-size-mismatch",
            TomoError::NonFiniteSample { .. } => "non-finite-sample",
            TomoError::Header(_) => "malformed-header",
            TomoError::AngularUndersampling { .. } => "angular-undersampling",
            TomoError::OutOfRange(_) => "out-of-range",
            TomoError::QuadratureBudget(_) => "quadrature-budget",
            TomoError::SingularSet(_) => "singular-set",
            TomoError::RankDeficient { .. } => "rank-deficient",
            TomoError::BudgetExceeded(_) => "budget-exceeded",
            TomoError::Unsupported(_) => "unsupported",
            TomoError::Io(_) => "io",
            TomoError::Json(_) => "json",
        }
    }

    /// Errors caused by numerical budgets rather than malformed input.
    pub fn is_budget(&self) -> bool {
        matches!(
            self,
            TomoError::QuadratureBudget(_) | TomoError::BudgetExceeded(_)
        )
    }
}
