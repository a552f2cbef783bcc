//! Speaker identification from EEG: preprocessing, a compact
//! temporal-spectral-spatial CNN, cross-validated evaluation, phase-locking
//! connectivity, envelope analysis, statistics and a synthetic generator.

pub mod data;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod neurofeat;
pub mod nn;

pub use error::{Error, Result};
pub mod pipeline;
pub mod stats;
pub mod synth;
