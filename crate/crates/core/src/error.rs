use thiserror::Error;

/// Errors raised by curve construction, metric evaluation, flows and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("curve needs at least {min} samples, got {got}")]
    TooFewSamples { min: usize, got: usize },

    #[error("not immersed: {0}")]
    NotImmersed(String),

    #[error("non-finite value at sample {0}")]
    NonFinite(usize),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("curve must live in R^n with n >= 2, got n = {0}")]
    AmbientDimension(usize),

    #[error("resample first: curve is not arc-uniform (relative chord deviation {0:.3e})")]
    NotArcUniform(f64),

    #[error("an even number of samples is required, got {0}")]
    OddSampleCount(usize),

    #[error("planar only: operation needs n = 2, got n = {0}")]
    PlanarOnly(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("spectrum is not Hermitian (max asymmetry {0:.3e}); cannot synthesize a real field")]
    NotHermitian(f64),

    #[error("unsupported transfer: no frequency multiplier for metric {0}")]
    UnsupportedTransfer(String),

    #[error("{0} is a Finsler norm, not an inner product")]
    NotAnInnerProduct(String),

    #[error("internal error: negative squared norm {0:.3e} (broken discretization)")]
    NegativeSquaredNorm(f64),

    #[error("flat curve: use flat_lift first")]
    FlatCurve,

    #[error("curve is not flat")]
    NotFlat,

    #[error("outside projection neighborhood: {0}")]
    ProjectionFailed(String),

    #[error("open curves are not supported")]
    OpenCurve,

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
