//! Error taxonomy shared by every module of the crate.
//!
//! Errors split into two families: *usage* errors (mismatched dimensions,
//! invalid parameters, truncation boxes too small for the data) that indicate
//! a caller bug or bad configuration, and *numerical* failures (positivity
//! violations, nonconvergence, non-finite data) that indicate the computation
//! itself degenerated. [`NctError::is_usage`] exposes the distinction so
//! drivers can map the two families to different exit codes.

pub type Result<T> = std::result::Result<T, NctError>;

#[derive(Debug, thiserror::Error)]
pub enum NctError {
    /// Operands have incompatible dimensions (index length, vector length,
    /// axis out of range).
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// Binary operation on elements living over different twist matrices.
    #[error("theta mismatch: operands belong to different tori")]
    ThetaMismatch,

    /// A scalar or structural parameter is outside its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A truncation box is too small for the element it must represent.
    #[error("truncation box too small: {0}")]
    BoxTooSmall(String),

    /// The requested truncation would exceed the configured matrix-side cap.
    #[error("matrix side {side} exceeds cap {cap}")]
    SideCapExceeded { side: usize, cap: usize },

    /// An operation requiring a selfadjoint element received one that is not.
    #[error("input not selfadjoint: {0}")]
    NotSelfAdjoint(String),

    /// An operation requiring strict positivity found spectrum at or below
    /// the required margin.
    #[error("positivity failure: {0}")]
    PositivityFailure(String),

    /// A function was evaluated outside its numerical domain (for example a
    /// logarithm below the domain floor).
    #[error("domain violation: {0}")]
    DomainViolation(String),

    /// The numerical kernel failed (nonconvergence, non-finite intermediate).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Wire-format serialization or deserialization failed.
    #[error("serialization error: {0}")]
    Serialization(String),
}

impl NctError {
    /// True for errors that indicate caller misuse or bad configuration
    /// rather than a numerical breakdown of an otherwise valid computation.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            NctError::DimensionMismatch(_)
                | NctError::ThetaMismatch
                | NctError::InvalidParameter(_)
                | NctError::BoxTooSmall(_)
                | NctError::SideCapExceeded { .. }
                | NctError::NotSelfAdjoint(_)
                | NctError::Serialization(_)
        )
    }
}
