use thiserror::Error;

/// Errors raised by the moment, Hankel and kriging routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("moment sequence too short: need {needed} entries, have {available}")]
    Length { needed: usize, available: usize },

    #[error("domain error: {0}")]
    Domain(String),

    /// Precision escalation hit the ceiling without the two last candidates agreeing.
    #[error("precision ceiling of {ceiling} bits reached without stabilisation (last candidates {previous} and {current})")]
    Precision {
        ceiling: u32,
        previous: String,
        current: String,
    },

    #[error("degenerate system: {0}")]
    Degenerate(String),

    #[error("kernel matrix for the {family} kernel is singular or indefinite on this design")]
    Singular { family: String },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
