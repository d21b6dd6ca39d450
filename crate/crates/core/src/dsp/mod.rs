//! Audio front-end: wave buffers, resampling, 2 s segmentation, and the
//! three input representations (auditory spectrogram, mel spectrogram, MFCC).
//!
//! Pipeline convention: ingest normalizes everything to 16 kHz, segments
//! into 2 s windows (zero-padded at the end), then featurizes per segment.
//! The TCN input representations (audspec, mspec) use an 8 ms hop so a 2 s
//! segment yields 250 frames, which the network's upsample-by-4 /
//! average-pool-by-5 tail maps onto the 200-frame (100 Hz) target grid.
//! MFCCs keep the conventional 10 ms hop (200 frames per segment).

mod audspec;
mod mel;

pub use audspec::{auditory_spectrogram, cochlear_center_frequencies, AUDSPEC_CHANNELS, AUDSPEC_FRAMES};
pub(crate) use audspec::gammatone_bandpass as gammatone_bandpass_f64;
pub use mel::{dct_ii_orthonormal, hz_to_mel, mel_filterbank_centers_hz, mel_to_hz, melspectrogram, mfcc,
              LOG_ENERGY_FLOOR, MEL_CHANNELS, MFCC_COEFFS, MFCC_FRAMES, MSPEC_FRAMES};

use crate::error::{Result, SiError};

/// Pipeline sample rate: every ingested signal is resampled to this.
pub const TARGET_SAMPLE_RATE: u32 = 16_000;
/// Samples in one 2 s segment at 16 kHz.
pub const SEGMENT_SAMPLES: usize = 32_000;
/// Segment duration in seconds.
pub const SEGMENT_SECONDS: f64 = 2.0;
/// Target (TV/source-feature) frame rate in Hz.
pub const TARGET_FRAME_RATE: u32 = 100;
/// Target frames per 2 s segment.
pub const SEGMENT_TARGET_FRAMES: usize = 200;

/// Mono audio samples with their sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveBuffer {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
}

impl WaveBuffer {
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Self {
        WaveBuffer { samples, sample_rate }
    }

    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// What a feature matrix holds; stored in the binary header as one byte.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    Audspec,
    Mspec,
    Mfcc,
    Targets,
}

impl FeatureKind {
    pub fn as_byte(self) -> u8 {
        match self {
            FeatureKind::Audspec => 0,
            FeatureKind::Mspec => 1,
            FeatureKind::Mfcc => 2,
            FeatureKind::Targets => 3,
        }
    }

    pub fn from_byte(b: u8) -> Result<Self> {
        match b {
            0 => Ok(FeatureKind::Audspec),
            1 => Ok(FeatureKind::Mspec),
            2 => Ok(FeatureKind::Mfcc),
            3 => Ok(FeatureKind::Targets),
            _ => Err(SiError::Data(format!("unknown feature kind byte {b}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::Audspec => "audspec",
            FeatureKind::Mspec => "mspec",
            FeatureKind::Mfcc => "mfcc",
            FeatureKind::Targets => "targets",
        }
    }
}

impl std::str::FromStr for FeatureKind {
    type Err = SiError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "audspec" => Ok(FeatureKind::Audspec),
            "mspec" => Ok(FeatureKind::Mspec),
            "mfcc" => Ok(FeatureKind::Mfcc),
            "targets" => Ok(FeatureKind::Targets),
            _ => Err(SiError::Config(format!("unknown feature kind '{s}'"))),
        }
    }
}

/// Frames x channels real matrix with frame-rate metadata, row-major by frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub data: Vec<f32>,
    pub frames: usize,
    pub channels: usize,
    /// Frames per second.
    pub frame_rate: f64,
    pub kind: FeatureKind,
}

impl FeatureMatrix {
    pub fn zeros(frames: usize, channels: usize, frame_rate: f64, kind: FeatureKind) -> Self {
        FeatureMatrix { data: vec![0.0; frames * channels], frames, channels, frame_rate, kind }
    }

    pub fn at(&self, frame: usize, channel: usize) -> f32 {
        self.data[frame * self.channels + channel]
    }

    pub fn at_mut(&mut self, frame: usize, channel: usize) -> &mut f32 {
        &mut self.data[frame * self.channels + channel]
    }

    pub fn frame(&self, frame: usize) -> &[f32] {
        &self.data[frame * self.channels..(frame + 1) * self.channels]
    }

    /// One channel as a column vector.
    pub fn channel(&self, channel: usize) -> Vec<f32> {
        (0..self.frames).map(|f| self.at(f, channel)).collect()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// One 2 s analysis window cut from an utterance. The wave is always exactly
/// [`SEGMENT_SAMPLES`] long; `valid_samples` counts the non-padding prefix.
#[derive(Debug, Clone)]
pub struct Segment {
    pub wave: WaveBuffer,
    pub valid_samples: usize,
    pub source_utterance_id: String,
    /// Start of this segment within the utterance, in seconds.
    pub offset: f64,
}

/// Downsample to `target_rate` with a 64-tap windowed-sinc anti-alias filter
/// (cutoff 0.45 x target Nyquist). Equal rates pass through bit-identically.
pub fn resample(wave: &WaveBuffer, target_rate: u32) -> Result<WaveBuffer> {
    if wave.is_empty() {
        return Err(SiError::Data("resample: empty input".into()));
    }
    if target_rate == 0 {
        return Err(SiError::Config("resample: target rate must be positive".into()));
    }
    if target_rate == wave.sample_rate {
        return Ok(wave.clone());
    }
    if target_rate > wave.sample_rate {
        return Err(SiError::Config(format!(
            "resample: upsampling not supported ({} -> {} Hz)",
            wave.sample_rate, target_rate
        )));
    }

    let src_rate = wave.sample_rate as f64;
    let dst_rate = target_rate as f64;
    let n_in = wave.samples.len();
    // Output count chosen so duration matches within one sample period.
    let n_out = ((n_in as u64 * target_rate as u64 + wave.sample_rate as u64 / 2)
        / wave.sample_rate as u64) as usize;

    // Cutoff relative to the source rate, in cycles per input sample.
    let cutoff_hz = 0.45 * dst_rate / 2.0;
    let nu = cutoff_hz / src_rate;
    const HALF_TAPS: isize = 32; // 64-tap kernel

    let x = &wave.samples;
    let mut out = Vec::with_capacity(n_out);
    for n in 0..n_out {
        let p = n as f64 * src_rate / dst_rate;
        let m0 = p.ceil() as isize - HALF_TAPS;
        let mut acc = 0.0f64;
        let mut wsum = 0.0f64;
        for m in m0..m0 + 2 * HALF_TAPS {
            let u = m as f64 - p;
            let sinc = if u.abs() < 1e-12 {
                1.0
            } else {
                let a = std::f64::consts::PI * 2.0 * nu * u;
                a.sin() / a
            };
            // Hamming window over the +-32-sample support.
            let w = 0.54 + 0.46 * (std::f64::consts::PI * u / HALF_TAPS as f64).cos();
            let h = 2.0 * nu * sinc * w;
            wsum += h;
            if m >= 0 && (m as usize) < n_in {
                acc += x[m as usize] as f64 * h;
            }
        }
        // Normalizing by the kernel sum pins DC gain at exactly 1.
        out.push((acc / wsum) as f32);
    }
    Ok(WaveBuffer::new(out, target_rate))
}

/// Split a 16 kHz wave into 2 s segments, zero-padding the final one.
/// Concatenating the valid regions reconstructs the input exactly.
pub fn segment_and_pad(wave: &WaveBuffer, utterance_id: &str) -> Vec<Segment> {
    assert_eq!(wave.sample_rate, TARGET_SAMPLE_RATE, "segment_and_pad expects 16 kHz input");
    let n = wave.samples.len();
    if n == 0 {
        return Vec::new();
    }
    let n_segments = n.div_ceil(SEGMENT_SAMPLES);
    let mut segments = Vec::with_capacity(n_segments);
    for s in 0..n_segments {
        let start = s * SEGMENT_SAMPLES;
        let end = ((s + 1) * SEGMENT_SAMPLES).min(n);
        let mut samples = vec![0.0f32; SEGMENT_SAMPLES];
        samples[..end - start].copy_from_slice(&wave.samples[start..end]);
        segments.push(Segment {
            wave: WaveBuffer::new(samples, TARGET_SAMPLE_RATE),
            valid_samples: end - start,
            source_utterance_id: utterance_id.to_string(),
            offset: start as f64 / TARGET_SAMPLE_RATE as f64,
        });
    }
    segments
}

/// Per-channel z-normalization over all frames (population std). Constant
/// channels map to zero rather than dividing by zero.
pub fn znorm_utterance(fm: &FeatureMatrix) -> FeatureMatrix {
    znorm_valid(fm, fm.frames)
}

/// Z-normalize using statistics from the first `valid_frames` frames only,
/// then apply to every frame. Used when trailing frames are segment padding.
pub fn znorm_valid(fm: &FeatureMatrix, valid_frames: usize) -> FeatureMatrix {
    let valid = valid_frames.min(fm.frames).max(1);
    let mut out = fm.clone();
    for c in 0..fm.channels {
        let mut mean = 0.0f64;
        for f in 0..valid {
            mean += fm.at(f, c) as f64;
        }
        mean /= valid as f64;
        let mut var = 0.0f64;
        for f in 0..valid {
            let d = fm.at(f, c) as f64 - mean;
            var += d * d;
        }
        var /= valid as f64;
        let std = var.sqrt();
        if std > 0.0 {
            for f in 0..fm.frames {
                *out.at_mut(f, c) = ((fm.at(f, c) as f64 - mean) / std) as f32;
            }
        } else {
            for f in 0..fm.frames {
                *out.at_mut(f, c) = 0.0;
            }
        }
    }
    out
}
