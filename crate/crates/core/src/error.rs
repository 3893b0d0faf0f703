use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("duplicate site label `{0}`")]
    DuplicateSite(String),
    #[error("unknown site label `{0}`")]
    UnknownSite(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("register mismatch between operands")]
    RegisterMismatch,
    #[error("state is not normalized")]
    Unnormalized,
    #[error("charge matrix is not normalized: sum |M_ab|^2 = {found}, expected {expected}")]
    ChargeNormalization { expected: f64, found: f64 },
    #[error("vertex {vertex} is not supported by the {configuration} charge configuration")]
    UnsupportedVertex { vertex: String, configuration: String },
    #[error("unknown group element token `{0}`")]
    UnknownElement(String),
    #[error("invalid gate: {0}")]
    InvalidGate(String),
    #[error("photon truncation overflow in mode `{mode}`: {photons} photons exceed the cap of {cap}")]
    TruncationOverflow { mode: String, photons: usize, cap: usize },
    #[error("parameter out of range: {0}")]
    OutOfRange(String),
    #[error("invalid optical element {index}: {reason}")]
    InvalidElement { index: usize, reason: String },
    #[error("json: {0}")]
    Json(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e.to_string())
    }
}
