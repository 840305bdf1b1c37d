//! Crate-wide error type.
//!
//! Every failure carries enough context to name the violated condition;
//! callers (CLI, FFI) map variants onto exit/status codes without string
//! matching.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A point was handed to a system living on a different space.
    #[error("space mismatch: {context} expects {expected}, got {got}")]
    SpaceMismatch {
        context: &'static str,
        expected: &'static str,
        got: &'static str,
    },

    /// Rotation numbers must be declared irrational (continued-fraction
    /// data with a non-empty repeating tail, or a named constant).
    #[error("rotation number declared rational: {0}")]
    RationalRotation(String),

    /// A coordinate fell outside its space's admissible range.
    #[error("invalid coordinate for {space}: {detail}")]
    InvalidCoordinate { space: &'static str, detail: String },

    /// Fourier cobounding-function solve is obstructed.
    #[error("no cobounding function: {0}")]
    NoSolution(String),

    /// A named construction condition failed with a residual.
    #[error("construction condition {condition} violated: {detail}")]
    ConstraintViolation { condition: String, detail: String },

    /// Requested resolution is finer than the active precision mode supports.
    #[error("precision mode '{mode}' cannot resolve {detail}; {advice}")]
    PrecisionExceeded {
        mode: String,
        detail: String,
        advice: String,
    },

    /// An operation required a periodic point and the input is not one.
    #[error("point is not {period}-periodic: {detail}")]
    NotPeriodic { period: u32, detail: String },

    /// Empirical invariant means did not straddle zero.
    #[error("invariant bracket failed: {0}")]
    BracketFailed(String),

    /// A diagnostic criterion does not apply to the given system.
    #[error("criterion inapplicable: {0}")]
    CriterionInapplicable(String),

    /// Run configuration is malformed; names the offending field.
    #[error("config field '{field}': {detail}")]
    Config { field: String, detail: String },

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("config parse: {0}")]
    TomlParse(#[from] toml::de::Error),

    #[error("report serialize: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
