//! Flat binary feature-file format.
//!
//! Layout, little-endian: magic "AIFM", u32 version (1), u32 frames,
//! u32 channels, u32 frame rate in millihertz, u8 kind byte, then
//! frames x channels 32-bit floats, row-major by frame.
//!
//! Target files carry a sidecar structured-text manifest (`<file>.channels`)
//! naming the channels, e.g. ["ap","per","pitch"].

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::dsp::{FeatureKind, FeatureMatrix};
use crate::error::{Result, SiError};

const MAGIC: &[u8; 4] = b"AIFM";
const VERSION: u32 = 1;

pub fn write_feature_matrix(path: &Path, fm: &FeatureMatrix) -> Result<()> {
    let mut out = Vec::with_capacity(21 + fm.data.len() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(fm.frames as u32).to_le_bytes());
    out.extend_from_slice(&(fm.channels as u32).to_le_bytes());
    out.extend_from_slice(&((fm.frame_rate * 1000.0).round() as u32).to_le_bytes());
    out.push(fm.kind.as_byte());
    for &v in &fm.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let mut f = fs::File::create(path)?;
    f.write_all(&out)?;
    Ok(())
}

pub fn read_feature_matrix(path: &Path) -> Result<FeatureMatrix> {
    let buf = fs::read(path)?;
    if buf.len() < 21 || &buf[0..4] != MAGIC {
        return Err(SiError::Data(format!("{}: not a feature file", path.display())));
    }
    let u32_at = |at: usize| u32::from_le_bytes([buf[at], buf[at + 1], buf[at + 2], buf[at + 3]]);
    let version = u32_at(4);
    if version != VERSION {
        return Err(SiError::Data(format!(
            "{}: unsupported feature file version {version}",
            path.display()
        )));
    }
    let frames = u32_at(8) as usize;
    let channels = u32_at(12) as usize;
    let frame_rate = u32_at(16) as f64 / 1000.0;
    let kind = FeatureKind::from_byte(buf[20])?;
    let expected = 21 + frames * channels * 4;
    if buf.len() != expected {
        return Err(SiError::Data(format!(
            "{}: payload size mismatch (expected {expected} bytes, got {})",
            path.display(),
            buf.len()
        )));
    }
    let mut data = Vec::with_capacity(frames * channels);
    for i in 0..frames * channels {
        let at = 21 + i * 4;
        data.push(f32::from_le_bytes([buf[at], buf[at + 1], buf[at + 2], buf[at + 3]]));
    }
    Ok(FeatureMatrix { data, frames, channels, frame_rate, kind })
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut os = path.as_os_str().to_os_string();
    os.push(".channels");
    PathBuf::from(os)
}

/// Write the channel-name sidecar next to a feature file.
pub fn write_channel_names(feature_path: &Path, names: &[String]) -> Result<()> {
    let json = serde_json::to_string(&names)
        .map_err(|e| SiError::Data(format!("channel manifest: {e}")))?;
    fs::write(sidecar_path(feature_path), json)?;
    Ok(())
}

pub fn read_channel_names(feature_path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(sidecar_path(feature_path))?;
    serde_json::from_str(&text).map_err(|e| SiError::Data(format!("channel manifest: {e}")))
}
