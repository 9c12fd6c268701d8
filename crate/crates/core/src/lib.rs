//! Synthesis of fractional Brownian motion and Rosenblatt paths, discrete
//! wavelet-variance statistics, the constants of their limit theorems, and
//! log-log regression estimation of the self-similarity index H.

pub mod cli;
pub mod constants;
pub mod error;
pub mod estimation;
pub mod io;
pub mod montecarlo;
pub mod statistics;
pub mod synthesis;
pub mod wavelets;

pub use error::{Error, Result};
