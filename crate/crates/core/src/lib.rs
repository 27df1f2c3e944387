//! Fairness–accuracy tradeoff certificates for regression under statistical
//! parity, and Wasserstein-regularized fair regression trained by gradient
//! descent-ascent.

pub mod bounds;
pub mod certify;
pub mod data;
pub mod dist1d;
pub mod error;
pub mod lp;
pub mod metrics;
pub mod nn;
pub mod optim;
pub mod train;
pub mod verify;

pub use dist1d::{EmpiricalDist1D, GaussianDist1D};
pub use error::{Error, Result};
