//! Minimal 16-bit PCM WAV reader/writer.
//!
//! Ingest accepts mono files or takes the first channel of multichannel
//! files. The writer always emits mono 16-bit PCM, which is all the corpus
//! layout needs.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::dsp::WaveBuffer;
use crate::error::{Result, SiError};

fn read_u16(buf: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([buf[at], buf[at + 1]])
}

fn read_u32(buf: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([buf[at], buf[at + 1], buf[at + 2], buf[at + 3]])
}

/// Read a 16-bit PCM WAV file into a mono [`WaveBuffer`], samples scaled to [-1, 1].
pub fn read_wav(path: &Path) -> Result<WaveBuffer> {
    let buf = fs::read(path)?;
    if buf.len() < 44 || &buf[0..4] != b"RIFF" || &buf[8..12] != b"WAVE" {
        return Err(SiError::Data(format!("{}: not a RIFF/WAVE file", path.display())));
    }

    let mut fmt: Option<(u16, u16, u32, u16)> = None; // (format, channels, rate, bits)
    let mut data: Option<&[u8]> = None;
    let mut pos = 12;
    while pos + 8 <= buf.len() {
        let id = &buf[pos..pos + 4];
        let size = read_u32(&buf, pos + 4) as usize;
        let body_end = (pos + 8 + size).min(buf.len());
        let body = &buf[pos + 8..body_end];
        match id {
            b"fmt " => {
                if body.len() < 16 {
                    return Err(SiError::Data(format!("{}: truncated fmt chunk", path.display())));
                }
                fmt = Some((read_u16(body, 0), read_u16(body, 2), read_u32(body, 4), read_u16(body, 14)));
            }
            b"data" => data = Some(body),
            _ => {}
        }
        pos = pos + 8 + size + (size & 1); // chunks are word-aligned
    }

    let (format, channels, rate, bits) =
        fmt.ok_or_else(|| SiError::Data(format!("{}: missing fmt chunk", path.display())))?;
    let data = data.ok_or_else(|| SiError::Data(format!("{}: missing data chunk", path.display())))?;
    if format != 1 || bits != 16 {
        return Err(SiError::Data(format!(
            "{}: only 16-bit PCM is supported (format {format}, {bits} bits)",
            path.display()
        )));
    }
    if channels == 0 || rate == 0 {
        return Err(SiError::Data(format!("{}: invalid fmt chunk", path.display())));
    }

    let stride = 2 * channels as usize;
    let n = data.len() / stride;
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let at = i * stride;
        let v = i16::from_le_bytes([data[at], data[at + 1]]);
        samples.push(v as f32 / 32768.0);
    }
    Ok(WaveBuffer::new(samples, rate))
}

/// Write a mono 16-bit PCM WAV file. Samples are clamped to [-1, 1].
pub fn write_wav(path: &Path, wave: &WaveBuffer) -> Result<()> {
    let n = wave.samples.len();
    let data_len = (n * 2) as u32;
    let mut out = Vec::with_capacity(44 + n * 2);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&wave.sample_rate.to_le_bytes());
    out.extend_from_slice(&(wave.sample_rate * 2).to_le_bytes()); // byte rate
    out.extend_from_slice(&2u16.to_le_bytes()); // block align
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &s in &wave.samples {
        let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        out.extend_from_slice(&v.to_le_bytes());
    }
    let mut f = fs::File::create(path)?;
    f.write_all(&out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_mono() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.wav");
        let wave = WaveBuffer::new(vec![0.0, 0.5, -0.5, 0.25], 16000);
        write_wav(&path, &wave).unwrap();
        let back = read_wav(&path).unwrap();
        assert_eq!(back.sample_rate, 16000);
        assert_eq!(back.samples.len(), 4);
        for (a, b) in wave.samples.iter().zip(&back.samples) {
            assert!((a - b).abs() < 1.0 / 32000.0, "{a} vs {b}");
        }
    }

    #[test]
    fn takes_first_channel_of_stereo() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("st.wav");
        // Hand-build a stereo file: L=[1000, 2000], R=[-1000, -2000] (i16).
        let mut buf = Vec::new();
        buf.extend_from_slice(b"RIFF");
        buf.extend_from_slice(&(36u32 + 8).to_le_bytes());
        buf.extend_from_slice(b"WAVE");
        buf.extend_from_slice(b"fmt ");
        buf.extend_from_slice(&16u32.to_le_bytes());
        buf.extend_from_slice(&1u16.to_le_bytes());
        buf.extend_from_slice(&2u16.to_le_bytes());
        buf.extend_from_slice(&16000u32.to_le_bytes());
        buf.extend_from_slice(&64000u32.to_le_bytes());
        buf.extend_from_slice(&4u16.to_le_bytes());
        buf.extend_from_slice(&16u16.to_le_bytes());
        buf.extend_from_slice(b"data");
        buf.extend_from_slice(&8u32.to_le_bytes());
        for v in [1000i16, -1000, 2000, -2000] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        fs::write(&path, &buf).unwrap();
        let wave = read_wav(&path).unwrap();
        assert_eq!(wave.samples.len(), 2);
        assert!(wave.samples[0] > 0.0 && wave.samples[1] > 0.0);
    }

    #[test]
    fn rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.wav");
        fs::write(&path, b"not a wav at all").unwrap();
        assert!(read_wav(&path).is_err());
    }
}
