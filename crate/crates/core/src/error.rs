use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("enumeration cap exceeded: {states} states needs {bits:.2} bits, cap is {cap} bits")]
    CapExceeded { states: String, bits: f64, cap: u32 },
    #[error("state value {value} out of range for q = {q}")]
    BadValue { value: usize, q: usize },
    #[error("shape does not fit the torus: {0}")]
    RangeError(String),
    #[error("conditioning event has zero probability")]
    ZeroConditioning,
    #[error("measure is not non-null (delta = 0) at site {site}")]
    NonNullViolation { site: usize },
    #[error("required cylinder probability is zero: {0}")]
    PositivityError(String),
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("sample ensemble is empty")]
    EmptyEnsemble,
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("at t = {t}: {source}")]
    AtTime { t: f64, source: Box<Error> },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::Invalid(msg.into())
}
