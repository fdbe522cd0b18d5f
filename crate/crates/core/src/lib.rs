//! High-dimensional covariance estimation, shrinkage, sparse precision
//! matrices, regression and classification.

pub mod classify;
pub mod cli;
pub mod data;
pub mod error;
pub mod inference;
pub mod numerics;
pub mod rng;
pub mod posdef;
pub mod precision;
pub mod regress;
pub mod regularize;
pub mod shrinkage;
pub mod sparsepca;
pub mod spectra;

pub use data::{DataMatrix, Scaling};
pub use error::{Error, Result};
pub use numerics::SymmetricMatrix;
