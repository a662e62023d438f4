//! Quantum extreme learning machine pipeline for transmission-spectrum
//! atmospheric retrieval at desk scale.
//!
//! Synthetic spectra are generated on a discrete parameter grid, optionally
//! noised with a photometric shot-noise model, compressed patch by patch with
//! PCA, encoded into small simulated quantum reservoirs, and mapped to the
//! atmospheric parameters by a pseudoinverse-trained linear readout. The
//! [`eval`] module reproduces the evaluation suite: accuracy metrics,
//! bootstrap intervals, and configuration sweeps.

pub mod config;
pub mod error;
pub mod eval;
pub mod forward;
pub mod pca;
pub mod reservoir;
pub mod preprocess;
pub mod readout;
pub mod noise;
pub mod params;
pub mod pipeline;
pub mod spectrum;

pub use error::{Error, Result};
