use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("radix must be at least 2, got {0}")]
    InvalidRadix(u64),

    #[error("{value} has no terminating base-{radix} expansion")]
    NonTerminatingExpansion { value: String, radix: u32 },

    #[error("radix mismatch: fraction is base {fraction}, operation expects base {expected}")]
    RadixMismatch { fraction: u32, expected: u32 },

    #[error("invalid p-adic fraction: {0}")]
    InvalidFraction(String),

    #[error("transform size {size} exceeds the row limit {limit}")]
    SizeLimitExceeded { size: u128, limit: usize },

    #[error("signal length {len} is not a power of {radix}")]
    LengthNotPowerOfRadix { len: usize, radix: u32 },

    #[error("invalid signal: {0}")]
    InvalidSignal(String),

    #[error("length mismatch: expected {expected} samples, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("row {row} out of range for a code set of size {size}")]
    RowOutOfRange { row: u64, size: u64 },

    #[error("LFSR seed must be nonzero")]
    ZeroSeed,

    #[error("invalid LFSR taps: {0}")]
    InvalidTaps(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("signal has zero energy")]
    ZeroSignalEnergy,

    #[error("spectrum is identically zero")]
    ZeroSpectrum,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error in {path} at {location}: {message}")]
    Parse {
        path: PathBuf,
        location: String,
        message: String,
    },

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Io,
    Domain,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_stage(self, stage: &str) -> Self {
        Error::Stage {
            stage: stage.to_string(),
            source: Box::new(self),
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) => ErrorClass::Config,
            Error::Io { .. } | Error::Parse { .. } | Error::UnsupportedFormat(_) => ErrorClass::Io,
            Error::Stage { source, .. } => source.class(),
            _ => ErrorClass::Domain,
        }
    }

    /// Stable process exit code: 2 config, 3 I/O, 4 numeric/domain.
    pub fn exit_code(&self) -> i32 {
        match self.class() {
            ErrorClass::Config => 2,
            ErrorClass::Io => 3,
            ErrorClass::Domain => 4,
        }
    }
}
