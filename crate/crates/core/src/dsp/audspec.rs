//! Auditory spectrogram: a cochlear-inspired time x tonotopic-frequency
//! representation.
//!
//! Stage order per channel: constant-Q bandpass filter (4th-order gammatone
//! built from cascaded complex one-pole resonators), hair-cell stage
//! (temporal derivative, cube-root compression, one-pole membrane low-pass),
//! lateral inhibition across the tonotopic axis (first difference,
//! half-wave rectified), then leaky integration sampled every 8 ms.
//!
//! 128 channels at 24 per octave: cf(k) = 440 * 2^((k-31)/24), spanning
//! ~180 Hz to ~7 kHz (about 5.3 octaves). The exact filter shapes are this
//! module's own; downstream contracts rely only on nonnegativity, the
//! tonotopic peak location, and the 250 x 128 shape for 2 s segments.

use rustfft::num_complex::Complex;

use super::{FeatureKind, FeatureMatrix, Segment, TARGET_SAMPLE_RATE};

pub const AUDSPEC_CHANNELS: usize = 128;
/// Frames per 2 s segment at the 8 ms frame rate.
pub const AUDSPEC_FRAMES: usize = 250;

/// Samples per output frame (8 ms at 16 kHz).
const FRAME_HOP: usize = 128;
/// Constant-Q factor: per-channel bandwidth is cf / Q.
const FILTER_Q: f64 = 8.0;
/// Hair-cell membrane low-pass cutoff, Hz.
const HAIRCELL_LP_HZ: f64 = 2000.0;
/// Leaky integrator time constant, seconds.
const INTEGRATION_TAU: f64 = 0.008;

/// Center frequencies of the 128 cochlear channels, ascending.
pub fn cochlear_center_frequencies() -> Vec<f64> {
    (0..AUDSPEC_CHANNELS)
        .map(|k| 440.0 * 2f64.powf((k as f64 - 31.0) / 24.0))
        .collect()
}

/// 4th-order gammatone bandpass (unit gain at cf) as a cascade of complex
/// one-pole resonators; real part of the cascade output.
pub(crate) fn gammatone_bandpass(x: &[f32], fs: f64, cf: f64, bw: f64) -> Vec<f64> {
    let r = (-2.0 * std::f64::consts::PI * bw / fs).exp();
    let theta = 2.0 * std::f64::consts::PI * cf / fs;
    let rot = Complex::new(r * theta.cos(), r * theta.sin());
    let gain = 1.0 - r;
    let mut stages = [Complex::new(0.0f64, 0.0); 4];
    let mut out = Vec::with_capacity(x.len());
    for &xi in x {
        let mut c = Complex::new(xi as f64, 0.0);
        for stage in stages.iter_mut() {
            *stage = c * gain + *stage * rot;
            c = *stage;
        }
        out.push(c.re);
    }
    out
}

/// Bandpass + hair-cell stage for one channel.
fn haircell_channel(x: &[f32], fs: f64, cf: f64) -> Vec<f64> {
    let mut y = gammatone_bandpass(x, fs, cf, cf / FILTER_Q);
    let lp_a = (-2.0 * std::f64::consts::PI * HAIRCELL_LP_HZ / fs).exp();
    let mut prev = 0.0f64;
    let mut lp = 0.0f64;
    for v in y.iter_mut() {
        let d = *v - prev; // temporal derivative
        prev = *v;
        let compressed = d.cbrt();
        lp = lp_a * lp + (1.0 - lp_a) * compressed;
        *v = lp;
    }
    y
}

/// Auditory spectrogram of a 16 kHz segment: frames x 128, all entries >= 0.
/// A 2 s segment yields exactly 250 frames.
pub fn auditory_spectrogram(seg: &Segment) -> FeatureMatrix {
    assert_eq!(seg.wave.sample_rate, TARGET_SAMPLE_RATE, "audspec expects 16 kHz segments");
    let fs = TARGET_SAMPLE_RATE as f64;
    let x = &seg.wave.samples;
    let n_frames = x.len() / FRAME_HOP;
    let mut fm = FeatureMatrix::zeros(
        n_frames,
        AUDSPEC_CHANNELS,
        fs / FRAME_HOP as f64,
        FeatureKind::Audspec,
    );

    let integ_a = (-1.0 / (INTEGRATION_TAU * fs)).exp();
    let mut below: Vec<f64> = vec![0.0; x.len()]; // channel k-1 hair-cell output
    for (k, &cf) in cochlear_center_frequencies().iter().enumerate() {
        let h = haircell_channel(x, fs, cf);
        // Lateral inhibition against the channel below, then leaky
        // integration sampled at the frame hop.
        let mut w = 0.0f64;
        for (t, (&ht, &bt)) in h.iter().zip(below.iter()).enumerate() {
            let z = (ht - bt).max(0.0);
            w = integ_a * w + (1.0 - integ_a) * z;
            if (t + 1) % FRAME_HOP == 0 {
                let frame = (t + 1) / FRAME_HOP - 1;
                if frame < n_frames {
                    *fm.at_mut(frame, k) = w as f32;
                }
            }
        }
        below = h;
    }
    fm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::{segment_and_pad, WaveBuffer, SEGMENT_SAMPLES};

    fn tone_segment(freq: f64) -> Segment {
        let samples: Vec<f32> = (0..SEGMENT_SAMPLES)
            .map(|i| 0.5 * (2.0 * std::f64::consts::PI * freq * i as f64 / 16000.0).sin() as f32)
            .collect();
        segment_and_pad(&WaveBuffer::new(samples, 16000), "tone").remove(0)
    }

    fn nearest_channel(freq: f64) -> usize {
        cochlear_center_frequencies()
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - freq).abs().partial_cmp(&(b.1 - freq).abs()).unwrap())
            .unwrap()
            .0
    }

    #[test]
    fn silence_maps_to_all_zeros() {
        let seg = segment_and_pad(&WaveBuffer::new(vec![0.0; SEGMENT_SAMPLES], 16000), "s")
            .remove(0);
        let fm = auditory_spectrogram(&seg);
        assert_eq!((fm.frames, fm.channels), (AUDSPEC_FRAMES, AUDSPEC_CHANNELS));
        assert!(fm.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn shape_is_250_by_128_and_nonnegative() {
        let fm = auditory_spectrogram(&tone_segment(700.0));
        assert_eq!((fm.frames, fm.channels), (AUDSPEC_FRAMES, AUDSPEC_CHANNELS));
        assert!(fm.data.iter().all(|&v| v >= 0.0 && v.is_finite()));
    }

    #[test]
    fn tone_peak_sits_on_the_tonotopic_axis() {
        for freq in [500.0, 1000.0, 2000.0] {
            let fm = auditory_spectrogram(&tone_segment(freq));
            // Column energies, skipping the initial filter transient.
            let mut energies = vec![0.0f64; fm.channels];
            for f in 25..fm.frames {
                for (c, e) in energies.iter_mut().enumerate() {
                    *e += fm.at(f, c) as f64;
                }
            }
            let argmax = energies
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            let expected = nearest_channel(freq);
            // Lateral inhibition shifts the maximum onto the rising edge of
            // the excitation pattern, so allow +-2 channels (one-twelfth of
            // an octave) around the CF-table prediction.
            assert!(
                (argmax as isize - expected as isize).abs() <= 2,
                "freq {freq}: argmax {argmax}, expected near {expected}"
            );
            // Dominant band (>= 50% of max) is a single contiguous run.
            let max = energies[argmax];
            let dominant: Vec<usize> = (0..fm.channels)
                .filter(|&c| energies[c] >= 0.5 * max)
                .collect();
            for pair in dominant.windows(2) {
                assert_eq!(pair[1], pair[0] + 1, "dominant band not contiguous: {dominant:?}");
            }
        }
    }
}
