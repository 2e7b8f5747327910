//! Gaussian analytic functions on the unit disc: coefficient models, sampling,
//! certified hole estimation, spectral covariance tools and analytic bound envelopes.

pub mod coeffs;
mod error;
pub mod envelopes;
pub mod gaf;
pub mod holes;
pub mod numeric;
pub mod oracles;
pub mod rng;
pub mod special;
pub mod spectra;
pub mod stats;

pub use coeffs::{CoefficientModel, ModelDescriptor, ModelKind};
pub use error::{Error, Result};
pub use gaf::{GafSample, GaussianSource};
