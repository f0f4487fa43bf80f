use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("payload length mismatch: header declares {expected} values, payload holds {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("non-finite value at payload index {index}")]
    NonFinite { index: usize },

    #[error("recording too short: needs {required_s} s, has {available_s} s (short by {shortfall_s} s)")]
    RecordingTooShort {
        required_s: f64,
        available_s: f64,
        shortfall_s: f64,
    },

    #[error("{what} is at or above the Nyquist frequency for fs = {fs} Hz")]
    AboveNyquist { what: String, fs: f64 },

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("segment of {segment_s} s is shorter than twice the largest lag; usable max lag is {usable_max_lag_s} s")]
    SegmentTooShort {
        segment_s: f64,
        usable_max_lag_s: f64,
    },

    #[error("zero-variance sample: {0}")]
    ZeroVariance(String),

    #[error("training diverged at epoch {epoch}: non-finite loss")]
    Diverged { epoch: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 2 config, 3 I/O, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } | Error::Csv(_) => 3,
            Error::Numerical(_)
            | Error::Diverged { .. }
            | Error::UndefinedCorrelation(_)
            | Error::ZeroVariance(_) => 4,
            _ => 2,
        }
    }
}
