//! File formats, parameter sweeps, verification suites and the `saddlepc`
//! command-line driver built on `saddlepc-core`.
//!
//! - [`triangle`]: Triangle `.node`/`.ele` meshes.
//! - [`matrix_market`]: MatrixMarket coordinate matrices.
//! - [`sweep`]: JSON sweep specifications, presets and CSV tables.
//! - [`verify`]: the property suites run by `saddlepc verify`.
//! - [`app`]: argument parsing and the subcommands.

pub mod app;
pub mod matrix_market;
pub mod sweep;
pub mod triangle;
pub mod verify;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "SADDLEPC_OUT_DIR";

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: index {index} out of range (count {count})")]
    IndexOutOfRange { line: usize, index: usize, count: usize },
    #[error("invalid sweep specification: {0}")]
    Spec(String),
    #[error(transparent)]
    Core(#[from] saddlepc_core::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl FormatError {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        FormatError::Parse { line, message: message.into() }
    }
}
