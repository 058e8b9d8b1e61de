//! Saddle-point systems from lowest-order edge-element discretizations of the
//! time-harmonic Maxwell equations, together with the preconditioners used to
//! solve them and dense machinery to verify their algebraic and spectral
//! structure.
//!
//! The crate is `no_std` (with `alloc`); file formats, timing and the command
//! line driver live in the companion `saddlepc` crate.
//!
//! Layout:
//! - [`la`]: sparse/dense kernels, factorizations, eigen and null-space tools.
//! - [`mesh`]: 2D triangulations of the square and L-shaped domains.
//! - [`fem`]: curl-curl, edge-mass and discrete-gradient assembly.
//! - [`saddle`]: the system, preconditioner actions and exact-inverse formulas.
//! - [`krylov`]: CG and MINRES in non-standard inner products.
//! - [`spectral`]: eigenvalue diagnostics of the preconditioned operators.
//! - [`genspd`]: inverses of generalized (non-symmetric) saddle-point matrices.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod error;
pub mod fem;
pub mod genspd;
pub mod krylov;
pub mod la;
pub mod mesh;
pub mod report;
pub mod saddle;
pub mod spectral;

pub use error::{Error, Result};
