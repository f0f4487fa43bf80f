//! Leakage audit for decoders trained on continuous, temporally
//! autocorrelated multichannel recordings.
//!
//! The crate synthesizes phantom recordings (or ingests real ones), relabels
//! them according to block-design experiment templates, splits them with the
//! strategies under audit, trains a small from-scratch CNN, and reports how far
//! decoding accuracy sits above chance. A separate analysis measures long-range
//! temporal correlations of wavelet amplitude envelopes.

pub mod cli;
pub mod design;
pub mod dsp;
pub mod error;
pub mod experiments;
pub mod lrtc;
pub mod neural;
pub mod signal;
pub mod splits;
pub mod stats;

pub use error::{Error, Result};
pub use signal::MultichannelSeries;
