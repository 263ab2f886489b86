use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("gap [{n1}, {n2}] is not valid for a sweep of {len} samples")]
    InvalidGap { n1: usize, n2: usize, len: usize },

    #[error("gap covers the whole sweep: no interference-free data")]
    NoInterferenceFreeData,

    #[error("insufficient interference-free data: {0}")]
    InsufficientData(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error(
        "target {index} at {range_m} m has beat frequency {beat_hz} Hz beyond the unambiguous limit {limit_hz} Hz"
    )]
    TargetOutOfRange {
        index: usize,
        range_m: f64,
        beat_hz: f64,
        limit_hz: f64,
    },

    #[error("interference outside band")]
    InterferenceOutsideBand,

    #[error("signal has zero power")]
    ZeroPower,

    #[error("zero matrix")]
    ZeroMatrix,

    #[error("rank-deficient truncation: sigma[{order}]/sigma[1] = {ratio:e}; try a smaller model order")]
    RankDeficient { order: usize, ratio: f64 },

    #[error("ill-conditioned least-squares system (condition estimate {condition:e})")]
    IllConditioned { condition: f64 },

    #[error("no interference found")]
    NoInterferenceFound,

    #[error("sweep unusable: interference covers the whole sweep")]
    SweepUnusable,

    #[error("ragged input: row {row} has {len} samples, expected {expected}")]
    Ragged { row: usize, len: usize, expected: usize },

    #[error("sweep file: {0}")]
    SweepFile(String),

    #[error("config line {line}: {message}")]
    ConfigSyntax { line: usize, message: String },

    #[error("config field `{section}.{key}`: {message}")]
    ConfigField {
        section: String,
        key: String,
        message: String,
    },

    #[error("missing required config field `{section}.{key}`")]
    ConfigMissing { section: String, key: String },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
