//! Source features: aperiodicity, periodicity, and pitch.
//!
//! A multiband normalized-autocorrelation detector. The signal is split
//! into 6 gammatone bands spaced on the ERB scale between 80 and 4000 Hz;
//! each band is reduced to a hair-cell-style envelope (half-wave
//! rectification plus a one-pole low-pass) so that integer-lag
//! autocorrelation tracks the fundamental even when the period is a
//! non-integer number of samples and the band carries only high harmonics.
//! Each 40 ms frame (10 ms hop) computes per-band normalized
//! autocorrelations over the 50-400 Hz lag range. Periodicity is the
//! energy-weighted autocorrelation peak mass of the bands whose own peak
//! agrees with the consensus lag; aperiodicity is the energy fraction that
//! lacks such a coherent peak; pitch is the reciprocal of the consensus lag
//! (parabolically interpolated), reported only on voiced frames.
//!
//! Normalized autocorrelation cancels signal gain, so all three tracks are
//! amplitude-invariant. Digital silence reports 0/0/0 by convention.

use crate::dsp::{FeatureKind, FeatureMatrix, WaveBuffer, TARGET_SAMPLE_RATE};
use crate::error::{Result, SiError};

/// Analysis window: 40 ms at 16 kHz.
const WINDOW: usize = 640;
/// Hop: 10 ms at 16 kHz.
const HOP: usize = 160;
/// Pitch search range.
pub const PITCH_MIN_HZ: f64 = 50.0;
pub const PITCH_MAX_HZ: f64 = 400.0;
/// A frame is voiced iff periodicity reaches this threshold.
pub const VOICING_THRESHOLD: f32 = 0.45;
/// A band is voiced-consistent if its own autocorrelation at the consensus
/// lag reaches this value.
const COHERENCE_THRESHOLD: f64 = 0.5;

const N_BANDS: usize = 6;
const BAND_LO_HZ: f64 = 80.0;
const BAND_HI_HZ: f64 = 4000.0;

/// The three source tracks on the 100 Hz frame grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceTracks {
    pub aperiodicity: Vec<f32>,
    pub periodicity: Vec<f32>,
    pub pitch: Vec<f32>,
    pub frame_rate: f64,
}

impl SourceTracks {
    pub fn len(&self) -> usize {
        self.pitch.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pitch.is_empty()
    }
}

fn erb_scale(hz: f64) -> f64 {
    21.4 * (1.0 + 0.00437 * hz).log10()
}

fn erb_scale_inv(e: f64) -> f64 {
    (10f64.powf(e / 21.4) - 1.0) / 0.00437
}

fn erb_bandwidth(hz: f64) -> f64 {
    1.019 * 24.7 * (0.00437 * hz + 1.0)
}

/// Hair-cell-style band envelope: gammatone bandpass, half-wave
/// rectification, then two cascaded one-pole low-passes at 450 Hz. The
/// double pole kills carrier leakage from single-harmonic bands (whose
/// envelope is flat and therefore votes nothing after mean removal) while
/// passing fundamental-rate beats across the whole 50-400 Hz pitch range.
/// Homogeneous in amplitude, so normalized autocorrelation on it stays
/// gain-invariant.
fn band_envelope(x: &[f32], fs: f64, cf: f64) -> Vec<f64> {
    let mut y = crate::dsp::gammatone_bandpass_f64(x, fs, cf, erb_bandwidth(cf));
    let a = (-2.0 * std::f64::consts::PI * 450.0 / fs).exp();
    let mut lp1 = 0.0f64;
    let mut lp2 = 0.0f64;
    for v in y.iter_mut() {
        lp1 = a * lp1 + (1.0 - a) * v.max(0.0);
        lp2 = a * lp2 + (1.0 - a) * lp1;
        *v = lp2;
    }
    y
}

/// Center frequencies of the analysis bands, ERB-spaced 80-4000 Hz.
pub fn band_center_frequencies() -> Vec<f64> {
    let lo = erb_scale(BAND_LO_HZ);
    let hi = erb_scale(BAND_HI_HZ);
    (0..N_BANDS)
        .map(|i| erb_scale_inv(lo + i as f64 * (hi - lo) / (N_BANDS - 1) as f64))
        .collect()
}

/// Normalized autocorrelation of a mean-removed window over [min_lag, max_lag].
/// Returns (r values indexed from min_lag, window energy after mean removal).
fn normalized_autocorr(window: &[f64], min_lag: usize, max_lag: usize) -> (Vec<f64>, f64) {
    let w = window.len();
    let mean = window.iter().sum::<f64>() / w as f64;
    let x: Vec<f64> = window.iter().map(|v| v - mean).collect();

    // Prefix sums of squares give both denominator energies in O(1) per lag.
    let mut sq_prefix = vec![0.0f64; w + 1];
    for (t, &v) in x.iter().enumerate() {
        sq_prefix[t + 1] = sq_prefix[t] + v * v;
    }
    let energy = sq_prefix[w];

    let mut r = vec![0.0f64; max_lag - min_lag + 1];
    for lag in min_lag..=max_lag.min(w - 1) {
        let n = w - lag;
        let mut num = 0.0f64;
        for t in 0..n {
            num += x[t] * x[t + lag];
        }
        let e0 = sq_prefix[n];
        let e1 = sq_prefix[w] - sq_prefix[lag];
        let denom = (e0 * e1).sqrt();
        if denom > 0.0 {
            r[lag - min_lag] = num / denom;
        }
    }
    (r, energy)
}

/// Local maxima of `r` (plateau-safe), as indices into `r`.
fn local_maxima(r: &[f64]) -> Vec<usize> {
    let mut peaks = Vec::new();
    for i in 0..r.len() {
        let left = if i == 0 { f64::NEG_INFINITY } else { r[i - 1] };
        let right = if i + 1 == r.len() { f64::NEG_INFINITY } else { r[i + 1] };
        if r[i] >= left && r[i] > right {
            peaks.push(i);
        }
    }
    peaks
}

/// Pick the peak lag: smallest-lag valid local maximum within 3% of the
/// best one.
///
/// A maximum only counts as a period candidate if the function dips below
/// 70% of its height at some smaller lag. That excludes the monotone decay
/// of narrowband-noise correlation (high at small lags without any true
/// period) and the zero-lag hill. Among the survivors, periodic signals
/// repeat their peak at every lag multiple, and integer-lag sampling of a
/// non-integer period shaves a little off the fundamental's sample, so the
/// smallest lag within a 3% band of the best wins.
fn leading_peak(r: &[f64]) -> Option<usize> {
    let valid = period_candidates(r);
    let global = valid.iter().map(|&i| r[i]).fold(f64::NEG_INFINITY, f64::max);
    if !global.is_finite() {
        return None;
    }
    valid.into_iter().find(|&i| r[i] >= global - 0.03 * global.abs() - 1e-12)
}

/// Dip-validated local maxima: candidates for a period.
fn period_candidates(r: &[f64]) -> Vec<usize> {
    let peaks = local_maxima(r);
    let mut valid = Vec::new();
    let mut prefix_min = f64::INFINITY;
    let mut next_peak = 0usize;
    for (i, &v) in r.iter().enumerate() {
        if next_peak < peaks.len() && peaks[next_peak] == i {
            if v > 0.0 && prefix_min < 0.7 * v {
                valid.push(i);
            }
            next_peak += 1;
        }
        prefix_min = prefix_min.min(v);
    }
    valid
}

/// Consensus period for the multiband sum: the dip-validated maximum under
/// a small lag-proportional cost (0.04 per octave). The cost resolves the
/// near-ties a periodic signal produces at every lag multiple toward the
/// fundamental without letting substructure peaks at period fractions win.
fn best_period_candidate(summed: &[f64], min_lag: usize) -> Option<usize> {
    period_candidates(summed)
        .into_iter()
        .map(|i| {
            let lag = (i + min_lag) as f64;
            (i, summed[i] - 0.04 * (lag / min_lag as f64).log2())
        })
        .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .map(|(i, _)| i)
}

/// Parabolic interpolation of the peak position around index i.
fn refine_peak(r: &[f64], i: usize) -> f64 {
    if i == 0 || i + 1 >= r.len() {
        return i as f64;
    }
    let (a, b, c) = (r[i - 1], r[i], r[i + 1]);
    let denom = a - 2.0 * b + c;
    if denom.abs() < 1e-12 {
        return i as f64;
    }
    let delta = 0.5 * (a - c) / denom;
    i as f64 + delta.clamp(-0.5, 0.5)
}

/// Pitch and autocorrelation strength of a single frame.
///
/// The lag range runs from 2 samples up to sample_rate/50 Hz, so the frame
/// must be at least twice the maximum lag. Strength is the maximum
/// normalized autocorrelation; pitch comes from the leading peak with
/// parabolic refinement. A constant frame reports (0, 0).
pub fn pitch_autocorr(frame: &[f32], sample_rate: u32) -> Result<(f32, f32)> {
    let max_lag = (sample_rate as f64 / PITCH_MIN_HZ).floor() as usize;
    if frame.len() < 2 * max_lag {
        return Err(SiError::Config(format!(
            "pitch_autocorr: frame of {} samples is shorter than twice the maximum lag {max_lag}",
            frame.len()
        )));
    }
    let min_lag = 2;
    let window: Vec<f64> = frame.iter().map(|&v| v as f64).collect();
    let (r, energy) = normalized_autocorr(&window, min_lag, max_lag);
    if energy <= 0.0 {
        return Ok((0.0, 0.0));
    }
    let strength = r.iter().cloned().fold(f64::NEG_INFINITY, f64::max).clamp(0.0, 1.0);
    let pitch = match leading_peak(&r) {
        Some(i) if r[i] > 0.0 => {
            let lag = refine_peak(&r, i) + min_lag as f64;
            sample_rate as f64 / lag
        }
        _ => 0.0,
    };
    Ok((pitch as f32, strength as f32))
}

/// Run the full detector on 16 kHz audio: one frame per 10 ms.
/// Audio shorter than one 40 ms analysis window yields empty tracks.
pub fn app_analyze(wave: &WaveBuffer) -> Result<SourceTracks> {
    if wave.sample_rate != TARGET_SAMPLE_RATE {
        return Err(SiError::Data(format!(
            "app_analyze expects 16 kHz audio, got {} Hz",
            wave.sample_rate
        )));
    }
    let n = wave.samples.len();
    let empty = SourceTracks {
        aperiodicity: Vec::new(),
        periodicity: Vec::new(),
        pitch: Vec::new(),
        frame_rate: 100.0,
    };
    if n < WINDOW {
        return Ok(empty);
    }

    let fs = TARGET_SAMPLE_RATE as f64;
    let min_lag = (fs / PITCH_MAX_HZ).ceil() as usize; // 40
    let max_lag = (fs / PITCH_MIN_HZ).floor() as usize; // 320

    // Band envelopes for the whole signal, one pass per band.
    let bands: Vec<Vec<f64>> = band_center_frequencies()
        .iter()
        .map(|&cf| band_envelope(&wave.samples, fs, cf))
        .collect();

    let n_frames = n / HOP;
    let mut tracks = empty;
    let n_lags = max_lag - min_lag + 1;
    for frame in 0..n_frames {
        // Center the analysis window on the frame's hop midpoint so the
        // tracks align with the 100 Hz target grid; edges zero-pad.
        let center = frame * HOP + HOP / 2;
        let start = center.saturating_sub(WINDOW / 2);
        let mut band_r: Vec<Vec<f64>> = Vec::with_capacity(N_BANDS);
        let mut band_energy = vec![0.0f64; N_BANDS];
        for (b, band) in bands.iter().enumerate() {
            let mut window = vec![0.0f64; WINDOW];
            let end = (start + WINDOW).min(n);
            window[..end - start].copy_from_slice(&band[start..end]);
            let (r, e) = normalized_autocorr(&window, min_lag, max_lag);
            band_energy[b] = e;
            band_r.push(r);
        }
        let total_energy: f64 = band_energy.iter().sum();
        if total_energy <= 0.0 {
            // Digital silence: 0/0/0 by convention.
            tracks.aperiodicity.push(0.0);
            tracks.periodicity.push(0.0);
            tracks.pitch.push(0.0);
            continue;
        }

        // Consensus lag from the cross-band autocorrelation sum. Band votes
        // are energy shares clipped to [0.02, 0.30]: the band sitting on a
        // resonance carries almost all the envelope energy but also
        // formant substructure (within-period bumps correlating at
        // fractions of the period), while quiet bands still have clean
        // peaks at the true period; clipping keeps both failure modes out.
        let mut summed = vec![0.0f64; n_lags];
        let mut weight_sum = 0.0f64;
        let weights: Vec<f64> = band_energy
            .iter()
            .map(|&e| {
                let w = (e / total_energy).clamp(0.02, 0.30);
                weight_sum += w;
                w
            })
            .collect();
        for b in 0..N_BANDS {
            let w = weights[b] / weight_sum;
            for (s, &r) in summed.iter_mut().zip(&band_r[b]) {
                *s += w * r;
            }
        }
        let Some(consensus) = best_period_candidate(&summed, min_lag) else {
            // Sound without any period candidate: fully aperiodic.
            tracks.aperiodicity.push(1.0);
            tracks.periodicity.push(0.0);
            tracks.pitch.push(0.0);
            continue;
        };

        // Voiced-consistent bands: periodic at the consensus lag. Spurious
        // single-band peaks never form the consensus (the energy-weighted
        // sum washes them out), so checking each band at one shared lag is
        // both simpler and more robust than per-band peak picking.
        let mut periodicity = 0.0f64;
        let mut coherent_energy = 0.0f64;
        for b in 0..N_BANDS {
            let r_at_consensus = band_r[b][consensus];
            if r_at_consensus >= COHERENCE_THRESHOLD {
                let w = band_energy[b] / total_energy;
                coherent_energy += band_energy[b];
                periodicity += w * r_at_consensus.min(1.0);
            }
        }
        let aperiodicity = (1.0 - coherent_energy / total_energy).clamp(0.0, 1.0);
        let periodicity = periodicity.clamp(0.0, 1.0) as f32;

        let pitch = if periodicity >= VOICING_THRESHOLD {
            let lag = (refine_peak(&summed, consensus) + min_lag as f64)
                .clamp(min_lag as f64, max_lag as f64);
            (fs / lag) as f32
        } else {
            0.0
        };
        tracks.aperiodicity.push(aperiodicity as f32);
        tracks.periodicity.push(periodicity);
        tracks.pitch.push(pitch);
    }
    Ok(tracks)
}

/// Per-variable normalization statistics for the three source channels.
/// The pitch entry is in the log1p domain.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceStats {
    pub mean: [f64; 3],
    pub std: [f64; 3],
}

/// Z-score the source tracks into a 3-channel feature matrix (ap, per,
/// pitch), log1p-transforming pitch first so unvoiced zeros stay finite.
/// Channels with zero std are centered only.
pub fn normalize_source_targets(tracks: &SourceTracks, stats: &SourceStats) -> FeatureMatrix {
    let n = tracks.len();
    let mut fm = FeatureMatrix::zeros(n, 3, tracks.frame_rate, FeatureKind::Targets);
    for f in 0..n {
        let raw = [
            tracks.aperiodicity[f] as f64,
            tracks.periodicity[f] as f64,
            (tracks.pitch[f] as f64).ln_1p(),
        ];
        for c in 0..3 {
            let centered = raw[c] - stats.mean[c];
            *fm.at_mut(f, c) =
                if stats.std[c] > 0.0 { (centered / stats.std[c]) as f32 } else { centered as f32 };
        }
    }
    fm
}

/// Exact inverse of [`normalize_source_targets`].
pub fn denormalize_source_targets(fm: &FeatureMatrix, stats: &SourceStats) -> SourceTracks {
    let mut tracks = SourceTracks {
        aperiodicity: Vec::with_capacity(fm.frames),
        periodicity: Vec::with_capacity(fm.frames),
        pitch: Vec::with_capacity(fm.frames),
        frame_rate: fm.frame_rate,
    };
    for f in 0..fm.frames {
        let undo = |c: usize| -> f64 {
            let v = fm.at(f, c) as f64;
            if stats.std[c] > 0.0 {
                v * stats.std[c] + stats.mean[c]
            } else {
                v + stats.mean[c]
            }
        };
        tracks.aperiodicity.push(undo(0) as f32);
        tracks.periodicity.push(undo(1) as f32);
        tracks.pitch.push(undo(2).exp_m1().max(0.0) as f32);
    }
    tracks
}
