//! Support vector machines for indefinite (Krein-space) kernels.
//!
//! Indefinite similarity measures such as the sigmoid kernel produce Gram
//! matrices with negative eigenvalues, which breaks the convexity assumptions
//! of standard SVM solvers. This crate trains max-margin classifiers directly
//! on such kernels by relating the indefinite problem to an equivalent
//! positive-definite one, solving that with an active-set method, and mapping
//! the solution back:
//!
//! * **TrIK-SVM** (`train_triksvm`) shifts the spectrum: for any `lambda` at
//!   or below the least eigenvalue, `K - 2*lambda*I` is positive semidefinite
//!   and differs from `K` only on the diagonal, so training never needs the
//!   full Gram matrix — kernel columns are produced on demand through an LRU
//!   cache.
//! * **KSVM** (`train_ksvm`) is the classical eigendecomposition baseline: it
//!   flips negative eigenvalues, trains on the flipped matrix, and projects
//!   the coefficients back through the sign matrix. It is exact but requires
//!   the full spectrum and produces dense coefficient vectors.
//!
//! The crate also ships the supporting pieces: dense symmetric linear algebra
//! (`linalg`), kernel evaluation and Gram providers (`kernels`), the spectral
//! decompositions and coefficient transitions (`decomposition`), synthetic
//! data and file I/O (`data`), and reproducible benchmark harnesses
//! (`experiments`).

pub mod data;
pub mod decomposition;
mod error;
pub mod experiments;
pub mod kernels;
pub mod linalg;
pub mod solver;

pub use error::{Error, Result};
