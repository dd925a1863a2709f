//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing column '{0}' in header")]
    MissingColumn(String),

    #[error("row {row}: cannot parse '{value}' as a time")]
    BadTimeCell { row: usize, value: String },

    #[error("row {row}: non-numeric value '{value}' in numerical column '{column}'")]
    NonNumericCell {
        row: usize,
        column: String,
        value: String,
    },

    #[error("no events")]
    NoEvents,

    #[error("row {row}: unknown sequence '{name}'")]
    UnknownSequence { row: usize, name: String },

    #[error("row {row}: unknown event type '{name}'")]
    UnknownEventType { row: usize, name: String },

    #[error("row {row}: t_start/t_stop override inconsistent with event times for sequence '{name}'")]
    BadWindowOverride { row: usize, name: String },

    #[error("event type vocabulary is empty; load sequences first")]
    NoEventTypes,

    #[error("no types retained")]
    NoTypesRetained,

    #[error("type index {0} out of range for {1} types")]
    TypeOutOfRange(usize, usize),

    #[error("the two corpora have different event type vocabularies")]
    TypeVocabMismatch,

    #[error("{0}")]
    MissingFeatures(String),

    #[error("bin width must be positive, got {0}")]
    BadBinWidth(f64),

    #[error("kernel evaluated at negative time {0}")]
    NegativeTime(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-positive intensity at observed event (sequence {seq_index}, t = {time})")]
    NonPositiveIntensity { seq_index: usize, time: f64 },

    #[error("no samples")]
    NoSamples,

    #[error("non-finite loss {value} at epoch {epoch}, step {step}; training aborted")]
    Divergence { epoch: usize, step: usize, value: f64 },

    #[error("thinning envelope violated at t = {time}: acceptance ratio {ratio} > 1; kernel bound is unsound")]
    EnvelopeViolated { time: f64, ratio: f64 },

    #[error("prediction horizon starts at {t0} but sequence '{name}' is observed until {t_stop}")]
    PredictHorizon { name: String, t0: f64, t_stop: f64 },

    #[error("manifest format version {found} not supported (this build reads version {supported})")]
    ManifestVersion { found: u32, supported: u32 },

    #[error("manifest array '{name}': expected shape {expected:?}, found {found:?}")]
    ManifestArrayShape {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("manifest is missing parameter array '{0}'")]
    ManifestMissingArray(String),

    #[error("manifest carries unknown parameter array '{0}'")]
    ManifestUnknownArray(String),

    #[error("manifest declares {manifest} event types but data has {data}")]
    IncompatibleTypes { manifest: usize, data: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
