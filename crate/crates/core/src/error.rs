use std::path::PathBuf;

use thiserror::Error;

/// Coarse failure class, mapped one-to-one onto CLI exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Malformed input or violated precondition (exit code 1).
    Validation,
    /// Numerically degenerate input such as a zero dynamic range (exit code 2).
    Numeric,
    /// Filesystem or stream failure (exit code 3).
    Io,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Validation => 1,
            ErrorKind::Numeric => 2,
            ErrorKind::Io => 3,
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite sample at frame {frame}, sub-carrier {subcarrier}")]
    NonFiniteSample { frame: usize, subcarrier: usize },

    #[error("undefined phase for zero sample at sub-carrier {0}")]
    UndefinedPhase(usize),

    #[error("empty frame: a CSI needs at least one sub-carrier")]
    EmptyFrame,

    #[error("frame {frame} has {found} samples, expected {expected}")]
    RaggedFrame { frame: usize, expected: usize, found: usize },

    #[error("rx_time decreases at frame {0}")]
    NonMonotoneTime(usize),

    #[error("unsupported bandwidth {0} MHz (expected 20, 40, 80 or 160)")]
    UnsupportedBandwidth(u32),

    #[error("parse error at row {row}, column {col}: {msg}")]
    Parse { row: usize, col: usize, msg: String },

    #[error("row {row} has {found} cells, expected {expected}")]
    RaggedRow { row: usize, expected: usize, found: usize },

    #[error("no frames")]
    NoFrames,

    #[error("empty channel: every sub-carrier is suppressed")]
    EmptyChannel,

    #[error("missing mandatory metadata field `{0}`")]
    MissingField(String),

    #[error("invalid metadata: {0}")]
    InvalidMetadata(String),

    #[error("zero-energy frame {0}")]
    ZeroEnergyFrame(usize),

    #[error("degenerate dynamic range (max = min = {0})")]
    DegenerateRange(f64),

    #[error("insufficient frames: need at least {needed}, got {got}")]
    InsufficientFrames { needed: usize, got: usize },

    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("zero-variance series")]
    ZeroVariance,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("value {value} at index {index} is outside {range}")]
    OutOfRange { index: usize, value: f64, range: String },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("series diverges: {0}")]
    Divergent(String),

    #[error("reduced alphabet of {symbols} symbols is too large; use alphabet reduction r >= {required_r}")]
    AlphabetTooLarge { symbols: usize, required_r: u32 },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        use Error::*;
        match self {
            ZeroEnergyFrame(_) | DegenerateRange(_) | ZeroVariance | Divergent(_) | UndefinedPhase(_) => {
                ErrorKind::Numeric
            }
            AlphabetTooLarge { .. } => ErrorKind::Numeric,
            Io { .. } => ErrorKind::Io,
            Stage { source, .. } => source.kind(),
            _ => ErrorKind::Validation,
        }
    }

    /// Tags an error with the pipeline stage that raised it.
    pub fn at(self, stage: &'static str) -> Self {
        Error::Stage { stage, source: Box::new(self) }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_keeps_inner_kind() {
        let e = Error::DegenerateRange(7.0).at("unit_normalize");
        assert_eq!(e.kind(), ErrorKind::Numeric);
        assert_eq!(e.kind().exit_code(), 2);
        assert!(e.to_string().starts_with("unit_normalize: degenerate"));
        assert_eq!(Error::MissingField("bandwidth".into()).kind().exit_code(), 1);
    }
}
