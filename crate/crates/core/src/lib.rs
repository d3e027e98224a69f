//! Bayesian diffeomorphic registration of 2D and small 3D images.
//!
//! A stationary velocity field parametrises the transformation. A diagonal
//! plus low-rank Gaussian is fitted by variational inference, after which
//! preconditioned Langevin dynamics draws posterior samples. The likelihood
//! is a Gaussian mixture over locally standardised residuals and the
//! regularisation strength is learnt.

pub mod error;
pub mod field;
pub mod inference;
pub mod io;
pub mod likelihood;
pub mod metrics;
pub mod pipeline;
pub mod posterior;
pub mod regulariser;
pub mod selftest;
pub mod svf;

pub use error::{Error, Result};
