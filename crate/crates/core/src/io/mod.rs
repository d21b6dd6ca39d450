//! File formats: WAV audio ingest/emit and the binary feature-matrix format.

pub mod featfile;
pub mod wav;

pub use featfile::{read_channel_names, read_feature_matrix, write_channel_names, write_feature_matrix};
pub use wav::{read_wav, write_wav};
