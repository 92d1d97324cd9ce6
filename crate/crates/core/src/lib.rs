//! Channel estimation for RIS-aided mmWave MIMO links by atomic norm
//! minimization.

pub mod anm;
pub mod channel;
pub mod error;
pub mod estimator;
pub mod experiments;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod omp;
pub mod oracle;
pub mod ris;
pub mod rng;
pub mod sounding;
pub mod spectral;

pub use error::{Error, Result};
