//! Volterra-series input-output analysis of weakly nonlinear quantum optical networks.

pub mod algebra;
pub mod cli;
pub mod error;
pub mod kernel;
pub mod linalg;
pub mod model;
pub mod network;
pub mod oracle;
pub mod response;
pub mod spectra;
pub mod specfile;

pub use error::{Error, Result};
