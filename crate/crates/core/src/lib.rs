pub mod budget;
pub mod channel;
pub mod cli;
pub mod config;
pub mod decomposition;
pub mod error;
pub mod gates;
pub mod linalg;
pub mod noise;
pub mod optim;
pub mod qpd;
pub mod sampler;
pub mod solver;
pub mod stinespring;
pub mod variational;

pub use error::{QpdError, Result};

/// Formats a double with 17 significant digits.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}
