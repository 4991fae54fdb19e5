use thiserror::Error;

/// Errors raised by the library.
///
/// The variants split along the line the CLI cares about: configuration
/// problems (bad parameters, inconsistent setups) versus numerical or
/// domain failures that arise from the data.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("simulation produced a non-finite value at step {step}")]
    Simulation { step: usize },

    #[error("no root: {0}")]
    NoRoot(String),

    #[error("horizon too small: omitted tail bound {bound:e} exceeds tolerance {tolerance:e}")]
    HorizonTooSmall { bound: f64, tolerance: f64 },
}

impl Error {
    /// True for errors caused by the caller's configuration rather than by the data.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
