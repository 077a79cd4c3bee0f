use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid disk point: {0}")]
    InvalidPoint(String),

    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),

    #[error("invalid exponent set: {0}")]
    InvalidExponents(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("points {first} and {second} coincide; the separation product vanishes")]
    CoincidentPoints { first: usize, second: usize },

    #[error("truncation out of range: {0}")]
    Truncation(String),

    #[error("empty matrix")]
    EmptyMatrix,

    #[error("matrix is rank deficient: sigma_min = {sigma_min:e}, sigma_max = {sigma_max:e}")]
    RankDeficient { sigma_min: f64, sigma_max: f64 },

    #[error("outer frame not certified on rows >= {row_offset}: A_hat = {a_hat:e}")]
    NotOuterFrame { row_offset: usize, a_hat: f64 },

    #[error("approximation step failed at J = {j}: best errors ({target_error:e}, {zero_error:e}) vs epsilon {epsilon:e} with support {support}")]
    FitFailed {
        j: usize,
        epsilon: f64,
        support: usize,
        target_error: f64,
        zero_error: f64,
    },

    #[error("no perturbation cutoff below n = {n}: tail never drops below A = {a_reference:e}")]
    NoCutoff { n: usize, a_reference: f64 },

    #[error("frame-bound estimate did not converge by K = {k_cols}: A_hat = {a_hat:e}")]
    NotConverged { k_cols: usize, a_hat: f64 },

    #[error("empty block [{lo}, {hi}) in exponent set")]
    EmptyBlock { lo: f64, hi: f64 },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
