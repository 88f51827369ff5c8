//! Error type shared by the whole crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Launch-frame basis failed the orthonormality check.
    #[error("invalid frame: {0}")]
    InvalidFrame(String),

    /// Geometry from which no line of sight can be formed.
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    /// Non-positive or otherwise unusable time step.
    #[error("invalid step: {0}")]
    InvalidStep(String),

    /// Gravity evaluated at the field singularity.
    #[error("gravity singularity: position has zero norm")]
    Singularity,

    /// Body axes cannot be formed (e.g. zero velocity).
    #[error("undefined body axes: {0}")]
    UndefinedAxes(String),

    /// Guidance command outside its admissible range.
    #[error("command out of range: {0}")]
    CommandOutOfRange(String),

    /// Non-finite value produced during integration or an update.
    #[error("numeric fault at step {step}: {detail}")]
    NumericFault { step: u64, detail: String },

    /// Vector/parameter length does not match the declared layout.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// More training steps executed than the schedule covers.
    #[error("learning-rate schedule exhausted: executed {executed} of {total}")]
    ScheduleExhausted { executed: u64, total: u64 },

    /// Configuration file problem, with the offending key path.
    #[error("config error at `{key}`{}: {message}", fmt_line(.line))]
    Config {
        key: String,
        line: Option<usize>,
        message: String,
    },

    /// Malformed checkpoint file.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn fmt_line(line: &Option<usize>) -> String {
    match line {
        Some(n) => format!(" (line {n})"),
        None => String::new(),
    }
}

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            line: None,
            message: message.into(),
        }
    }

    pub fn config_at(key: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            line: Some(line),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
