use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{what}: xi = {xi} is outside the explicit range (0, {max}]")]
    OutOfRange {
        what: &'static str,
        xi: f64,
        max: f64,
    },

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("commensurability is undecidable on floating-point matrices: {0}")]
    Undecidable(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error(
        "quadrature did not converge: estimated error {error:e} after {evaluations} evaluations"
    )]
    Quadrature { error: f64, evaluations: usize },

    #[error("runaway trajectory: more than {0} collision events")]
    Runaway(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
