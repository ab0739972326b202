use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter {name}: {message}")]
    InvalidParameter { name: &'static str, message: String },

    /// The peak energy constraint would be violated. This signals an encoder
    /// bug: schemes must budget their transmissions, never clip them.
    #[error("energy budget exceeded: spent {spent} + {increment} > budget {budget}")]
    BudgetExceeded {
        spent: f64,
        increment: f64,
        budget: f64,
    },

    #[error("no sign change over bracket [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("exponent curves do not cross for these parameters")]
    NoCrossover,

    #[error("malformed CSV: {0}")]
    Csv(String),
}

impl Error {
    pub fn invalid(name: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
