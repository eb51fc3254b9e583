//! Toolkit for auditing label noise in multi-label music-tag groundtruth,
//! training a compact convolutional tagger on log-mel spectrograms, and
//! analysing the label vectors of the trained model.
//!
//! Module map:
//!
//! * [`tagdata`] track/tag groundtruth, vocabularies, splits, annotation subsets
//! * [`cooccur`] normalised tag co-occurrence
//! * [`noise`] error rates, groundtruth precision/recall, prevalence correction,
//!   percentile bootstrap, synthetic noise injection
//! * [`dsp`] WAV input, resampling, log-mel spectrogram frontend
//! * [`convnet`] the compact convnet with analytic backpropagation and Adam
//! * [`eval`] AUC-ROC and correlation statistics
//! * [`lvs`] label-vector similarity and its comparison against co-occurrence
//! * [`experiments`] synthetic noise sweeps and their report rendering
//!
//! Data-parallel loops go through [`parallel`], which falls back to plain
//! sequential iteration when the `parallel` feature is disabled. Every
//! parallel reduction is performed in a fixed order, so results do not depend
//! on the number of worker threads.

pub mod convnet;
pub mod cooccur;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod experiments;
pub mod lvs;
pub mod noise;
pub mod parallel;
pub mod provenance;
pub mod tagdata;

mod binio;

pub use error::{Error, Result};

/// Crate version, embedded in artifact provenance.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
