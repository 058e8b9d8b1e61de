use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: expected {expected}, found {found}")]
    DimensionMismatch { op: &'static str, expected: usize, found: usize },
    #[error("invalid compressed-row structure: {0}")]
    InvalidCsr(&'static str),
    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },
    #[error("matrix is indefinite: non-positive pivot {pivot:e} at row {row}")]
    Indefinite { row: usize, pivot: f64 },
    #[error("matrix is numerically singular at row {row}")]
    Singular { row: usize },
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("rank condition violated: {0}")]
    RankCondition(String),
    #[error("iteration did not converge after {iterations} steps (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
}
