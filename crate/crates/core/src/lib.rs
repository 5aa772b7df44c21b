//! EEG emotion classification from differential-entropy asymmetric maps.
//!
//! The pipeline runs in five stages, one module each:
//!
//! - [`signal`]: epoching, Hanning windowing, FFT, periodogram and band power.
//! - [`features`]: band-wise differential entropy (DE), smoothing, window
//!   averaging, the pairwise asymmetric map (AsMap) and the DE-derived
//!   baselines (flat DE, DASM, RASM, DCAU).
//! - [`nn`]: a small deterministic CNN/MLP engine with manual backprop, Adam
//!   and a finite-difference gradient checker.
//! - [`dataset`]: recording I/O, label schemes, train/test splits and a
//!   spectrally shaped synthetic EEG generator.
//! - [`experiment`]: end-to-end runs, evaluation reports and band × window
//!   sweeps.

pub mod dataset;
pub mod error;
pub mod experiment;
pub mod features;
pub mod nn;
pub mod signal;

pub use error::{Error, Result};
