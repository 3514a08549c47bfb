use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter fell outside the region where a formula or guarantee applies.
    #[error("domain error: {constraint} (got {value})")]
    Domain { constraint: String, value: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("quadrature for {integral} did not converge (estimated error {error:e})")]
    Quadrature { integral: String, error: f64 },
}

impl Error {
    pub(crate) fn domain(constraint: impl Into<String>, value: f64) -> Self {
        Error::Domain {
            constraint: constraint.into(),
            value,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
