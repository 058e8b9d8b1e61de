//! Linear-algebra kernels shared by every other module.

mod dense;
mod eigen;
mod factor;
mod incomplete;
mod qr;
mod sparse;
pub mod vector;

pub use dense::{DenseLu, DenseMatrix};
pub use eigen::{sym_eig, sym_eigvals, SymEig};
pub use factor::{factorize, FactorKind, Factorization};
pub use incomplete::IncompleteCholesky;
pub use qr::{moore_penrose, null_basis, ColPivQr, NullBasisPair, DEFAULT_RANK_TOL};
pub use sparse::{spmv, SparseMatrix};

#[inline]
pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub(crate) fn hypot(a: f64, b: f64) -> f64 {
    libm::hypot(a, b)
}
