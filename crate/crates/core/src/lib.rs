//! Acoustic-to-articulatory speech inversion toolkit.
//!
//! The pipeline: audio is resampled to 16 kHz, cut into 2 s segments, and
//! featurized into auditory spectrograms (or mel spectrograms / MFCCs). A
//! dilated temporal convolutional network regresses tract variables plus
//! acoustically derived source features (aperiodicity, periodicity, pitch)
//! on a 100 Hz grid, trained with masked MSE and evaluated with Pearson
//! correlation. A built-in synthetic source-filter corpus generator makes
//! the whole loop verifiable without licensed articulatory data.

pub mod app;
pub mod cli;
pub mod data;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod infer;
pub mod io;
pub mod nn;
pub mod synth;
pub mod train;
pub mod tv;

pub use error::{Result, SiError};
