//! Dense linear-algebra kernels: matrix type, symmetric eigendecomposition,
//! thin SVD. All routines are sequential and bitwise deterministic.

mod eigen;
mod matrix;
mod svd;

pub use eigen::{sym_eigen, SymEigen};
pub use matrix::{dot, fix_sign, norm2, DenseMatrix};
pub use svd::{thin_svd, ThinSvd};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric (max deviation {deviation:e})")]
    Asymmetric { deviation: f64 },
    #[error("requested {requested} components but only {available} are available")]
    TooManyComponents { requested: usize, available: usize },
    #[error("matrix contains NaN or infinite entries")]
    NonFinite,
}
