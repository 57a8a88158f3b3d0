//! Krylov-subspace partial least squares for ill-posed linear regression.
//!
//! The crate bundles the estimators (PLS, minimum-norm least squares, PCR,
//! ridge, LASSO), Krylov-space diagnostics, perturbation audits, a latent
//! factor simulation harness and iteratively reweighted PLS for GLMs.

pub mod error;
pub mod estimators;
pub mod irpls;
pub mod krylov;
pub mod lasso;
pub mod linalg;
pub mod perturbation;
pub mod selection;
pub mod simulation;

pub use error::{Error, Result};
pub use linalg::PsdMatrix;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
