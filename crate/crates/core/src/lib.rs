//! Interference mitigation for FMCW beat signals: simulation, gapped
//! matrix-pencil reconstruction with zeroing and Burg baselines, range and
//! range-Doppler processing, and Monte Carlo evaluation.

// `!(x > y)` is used on purpose so NaN fails range checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod mitigate;
pub mod pencil;
pub mod sigmodel;
pub mod spectra;
pub mod sweepfile;
pub mod synth;

pub use error::{Error, Result};
