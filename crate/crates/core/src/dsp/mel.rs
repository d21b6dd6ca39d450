//! Mel spectrogram and MFCC extraction.
//!
//! Both use a 20 ms Hamming analysis window on 16 kHz segments with 40
//! triangular mel filters spanning 0-8000 Hz. The mel spectrogram hops 8 ms
//! (250 frames per 2 s segment, the TCN input grid); MFCCs hop 10 ms
//! (200 frames) and keep cepstral coefficients 0-12 from an orthonormal
//! DCT-II over the 40 log energies.

use rustfft::{num_complex::Complex, FftPlanner};

use super::{FeatureKind, FeatureMatrix, Segment, TARGET_SAMPLE_RATE};

/// Analysis window: 20 ms at 16 kHz.
const WINDOW_SAMPLES: usize = 320;
/// FFT length (window zero-padded).
const FFT_SIZE: usize = 512;
/// Mel spectrogram hop: 8 ms.
const MSPEC_HOP: usize = 128;
/// MFCC hop: 10 ms.
const MFCC_HOP: usize = 160;

pub const MEL_CHANNELS: usize = 40;
pub const MFCC_COEFFS: usize = 13;
/// Frames per 2 s segment at the 8 ms hop.
pub const MSPEC_FRAMES: usize = 250;
/// Frames per 2 s segment at the 10 ms hop.
pub const MFCC_FRAMES: usize = 200;
/// Energies are clamped here before the log so silence stays finite.
pub const LOG_ENERGY_FLOOR: f64 = 1e-10;

const MEL_FMAX_HZ: f64 = 8000.0;

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Center frequencies (Hz) of the 40 triangular filters.
pub fn mel_filterbank_centers_hz() -> Vec<f64> {
    let top = hz_to_mel(MEL_FMAX_HZ);
    (1..=MEL_CHANNELS)
        .map(|j| mel_to_hz(j as f64 * top / (MEL_CHANNELS + 1) as f64))
        .collect()
}

/// Triangular filter weights evaluated on the FFT bin grid,
/// `MEL_CHANNELS` rows of `FFT_SIZE/2 + 1` weights.
fn mel_filterbank() -> Vec<Vec<f64>> {
    let n_bins = FFT_SIZE / 2 + 1;
    let top = hz_to_mel(MEL_FMAX_HZ);
    let points: Vec<f64> = (0..MEL_CHANNELS + 2)
        .map(|j| mel_to_hz(j as f64 * top / (MEL_CHANNELS + 1) as f64))
        .collect();
    let bin_hz = TARGET_SAMPLE_RATE as f64 / FFT_SIZE as f64;
    let mut filters = vec![vec![0.0; n_bins]; MEL_CHANNELS];
    for (j, filter) in filters.iter_mut().enumerate() {
        let (lo, mid, hi) = (points[j], points[j + 1], points[j + 2]);
        for (k, w) in filter.iter_mut().enumerate() {
            let f = k as f64 * bin_hz;
            if f > lo && f < mid {
                *w = (f - lo) / (mid - lo);
            } else if (f - mid).abs() < 1e-9 {
                *w = 1.0;
            } else if f > mid && f < hi {
                *w = (hi - f) / (hi - mid);
            }
        }
    }
    filters
}

fn hamming(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.54 - 0.46 * (2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos())
        .collect()
}

/// Per-frame power spectra for a segment at the given hop. Frame k starts at
/// k*hop; windows running past the end are zero-padded, so a 2 s segment
/// yields exactly len/hop frames.
fn power_frames(seg: &Segment, hop: usize) -> Vec<Vec<f64>> {
    assert_eq!(seg.wave.sample_rate, TARGET_SAMPLE_RATE, "featurization expects 16 kHz segments");
    let samples = &seg.wave.samples;
    let n_frames = samples.len().div_ceil(hop);
    let window = hamming(WINDOW_SAMPLES);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(FFT_SIZE);
    let n_bins = FFT_SIZE / 2 + 1;

    let mut frames = Vec::with_capacity(n_frames);
    let mut buf = vec![Complex::new(0.0, 0.0); FFT_SIZE];
    for k in 0..n_frames {
        let start = k * hop;
        for (i, b) in buf.iter_mut().enumerate() {
            let v = if i < WINDOW_SAMPLES && start + i < samples.len() {
                samples[start + i] as f64 * window[i]
            } else {
                0.0
            };
            *b = Complex::new(v, 0.0);
        }
        fft.process(&mut buf);
        frames.push(buf[..n_bins].iter().map(|c| c.norm_sqr()).collect());
    }
    frames
}

/// Log-mel energies: frames x 40, 8 ms hop (250 frames for a 2 s segment).
pub fn melspectrogram(seg: &Segment) -> FeatureMatrix {
    let filters = mel_filterbank();
    let power = power_frames(seg, MSPEC_HOP);
    let mut fm = FeatureMatrix::zeros(
        power.len(),
        MEL_CHANNELS,
        TARGET_SAMPLE_RATE as f64 / MSPEC_HOP as f64,
        FeatureKind::Mspec,
    );
    for (k, spectrum) in power.iter().enumerate() {
        for (j, filter) in filters.iter().enumerate() {
            let e: f64 = filter.iter().zip(spectrum).map(|(w, p)| w * p).sum();
            *fm.at_mut(k, j) = e.max(LOG_ENERGY_FLOOR).ln() as f32;
        }
    }
    fm
}

/// MFCCs: frames x 13, 10 ms hop (200 frames for a 2 s segment).
pub fn mfcc(seg: &Segment) -> FeatureMatrix {
    let filters = mel_filterbank();
    let power = power_frames(seg, MFCC_HOP);
    let mut fm = FeatureMatrix::zeros(
        power.len(),
        MFCC_COEFFS,
        TARGET_SAMPLE_RATE as f64 / MFCC_HOP as f64,
        FeatureKind::Mfcc,
    );
    let mut logmel = vec![0.0f64; MEL_CHANNELS];
    for (k, spectrum) in power.iter().enumerate() {
        for (j, filter) in filters.iter().enumerate() {
            let e: f64 = filter.iter().zip(spectrum).map(|(w, p)| w * p).sum();
            logmel[j] = e.max(LOG_ENERGY_FLOOR).ln();
        }
        let cepstrum = dct_ii_orthonormal(&logmel);
        for (c, &v) in cepstrum[..MFCC_COEFFS].iter().enumerate() {
            *fm.at_mut(k, c) = v as f32;
        }
    }
    fm
}

/// Orthonormal DCT-II: y[k] = s(k) * sum_n x[n] cos(pi/N (n+1/2) k),
/// s(0) = sqrt(1/N), s(k>0) = sqrt(2/N).
pub fn dct_ii_orthonormal(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut out = vec![0.0; n];
    for (k, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (i, &v) in x.iter().enumerate() {
            acc += v * (std::f64::consts::PI / n as f64 * (i as f64 + 0.5) * k as f64).cos();
        }
        let scale = if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
        *o = scale * acc;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::{segment_and_pad, WaveBuffer, SEGMENT_SAMPLES};

    fn tone_segment(freq: f64, amp: f32) -> Segment {
        let samples: Vec<f32> = (0..SEGMENT_SAMPLES)
            .map(|i| {
                amp * (2.0 * std::f64::consts::PI * freq * i as f64 / 16000.0).sin() as f32
            })
            .collect();
        segment_and_pad(&WaveBuffer::new(samples, 16000), "tone").remove(0)
    }

    fn silence_segment() -> Segment {
        segment_and_pad(&WaveBuffer::new(vec![0.0; SEGMENT_SAMPLES], 16000), "sil").remove(0)
    }

    #[test]
    fn mel_scale_formula_point() {
        // Filter-placement sanity: 1 kHz sits at ~1000 mel on this scale.
        let m = hz_to_mel(1000.0);
        assert!((m - 999.99).abs() < 0.1, "mel(1000) = {m}");
    }

    #[test]
    fn mspec_shape_and_floor_on_silence() {
        let fm = melspectrogram(&silence_segment());
        assert_eq!((fm.frames, fm.channels), (MSPEC_FRAMES, MEL_CHANNELS));
        let floor = (LOG_ENERGY_FLOOR).ln() as f32;
        assert!(fm.data.iter().all(|&v| v == floor));
    }

    #[test]
    fn mspec_tone_peaks_at_nearest_center() {
        let fm = melspectrogram(&tone_segment(1000.0, 0.5));
        // Filterbank-center oracle: nearest center to 1 kHz.
        let centers = mel_filterbank_centers_hz();
        let expected = centers
            .iter()
            .enumerate()
            .min_by(|a, b| {
                (a.1 - 1000.0).abs().partial_cmp(&(b.1 - 1000.0).abs()).unwrap()
            })
            .unwrap()
            .0;
        // Column energy argmax.
        let mut best = (0, f64::NEG_INFINITY);
        for c in 0..fm.channels {
            let e: f64 = fm.channel(c).iter().map(|&v| v as f64).sum();
            if e > best.1 {
                best = (c, e);
            }
        }
        assert_eq!(best.0, expected);
    }

    #[test]
    fn mfcc_shape_is_200_by_13() {
        let fm = mfcc(&tone_segment(440.0, 0.3));
        assert_eq!((fm.frames, fm.channels), (MFCC_FRAMES, MFCC_COEFFS));
        assert!(fm.all_finite());
    }

    #[test]
    fn dct_of_constant_is_c0_only() {
        let x = vec![3.7; 40];
        let y = dct_ii_orthonormal(&x);
        assert!((y[0] - 3.7 * 40.0f64.sqrt()).abs() < 1e-9);
        for &v in &y[1..] {
            assert!(v.abs() < 1e-9);
        }
    }

    #[test]
    fn dct_hand_computed_4_point() {
        // Direct-formula oracle for [1,2,3,4].
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = dct_ii_orthonormal(&x);
        let mut expect = [0.0f64; 4];
        for k in 0..4 {
            let mut acc = 0.0;
            for (n, &v) in x.iter().enumerate() {
                acc += v * (std::f64::consts::PI / 4.0 * (n as f64 + 0.5) * k as f64).cos();
            }
            let s = if k == 0 { 0.5 } else { (2.0f64 / 4.0).sqrt() };
            expect[k] = s * acc;
        }
        for (a, b) in y.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12);
        }
        // Orthonormal DCT-II of [1,2,3,4]: c0 = 10/2 = 5.
        assert!((y[0] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn amplitude_scaling_washes_out_after_znorm() {
        use crate::dsp::znorm_utterance;
        // Use a chirpy multi-tone so no channel is constant.
        let make = |alpha: f32| {
            let samples: Vec<f32> = (0..SEGMENT_SAMPLES)
                .map(|i| {
                    let t = i as f64 / 16000.0;
                    alpha
                        * ((2.0 * std::f64::consts::PI * (300.0 + 150.0 * t) * t).sin()
                            + 0.5 * (2.0 * std::f64::consts::PI * 1100.0 * t).sin())
                            as f32
                })
                .collect();
            segment_and_pad(&WaveBuffer::new(samples, 16000), "a").remove(0)
        };
        let base = znorm_utterance(&melspectrogram(&make(1.0)));
        for alpha in [0.5f32, 2.0] {
            let scaled = znorm_utterance(&melspectrogram(&make(alpha)));
            for (a, b) in base.data.iter().zip(&scaled.data) {
                assert!((a - b).abs() < 1e-4, "alpha={alpha}: {a} vs {b}");
            }
        }
        // MFCC: scaling shifts only c0 (by a constant), removed by z-norm.
        let base = znorm_utterance(&mfcc(&make(1.0)));
        let scaled = znorm_utterance(&mfcc(&make(2.0)));
        for (a, b) in base.data.iter().zip(&scaled.data) {
            assert!((a - b).abs() < 1e-4);
        }
    }
}
