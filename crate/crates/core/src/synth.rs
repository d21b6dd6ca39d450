//! Synthetic source-filter corpus: paired (audio, tract variables, source
//! features) for desk-scale end-to-end verification.
//!
//! Each utterance draws two latent articulatory gestures (band-limited
//! random sinusoids) that drive all six tract variables through a fixed
//! mixing matrix plus a small private component per TV. Two cascaded
//! time-varying resonators filter a voiced/unvoiced excitation; their
//! center frequencies are affine in LA and TTCD (smaller constriction
//! degree, lower resonance), so the articulatory trajectories are
//! recoverable from the audio by construction. Ground-truth source tracks
//! are the generating voicing and pitch values.
//!
//! Everything is a pure function of (seed, speaker_id, utt_id): the corpus
//! regenerates bit-exactly from its manifest.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::dsp::{WaveBuffer, TARGET_FRAME_RATE, TARGET_SAMPLE_RATE};
use crate::error::{Result, SiError};
use crate::tv::TrajectorySet;

/// Target channel names emitted by the generator: six TVs then the three
/// source features.
pub const TARGET_CHANNELS: [&str; 9] =
    ["LA", "LP", "TBCL", "TBCD", "TTCL", "TTCD", "ap", "per", "pitch"];

/// TV value ranges (min, max) in mm / radians, in TARGET_CHANNELS order.
const TV_RANGES: [(f64, f64); 6] =
    [(5.0, 25.0), (-2.0, 6.0), (20.0, 60.0), (2.0, 20.0), (5.0, 40.0), (2.0, 20.0)];

/// Gesture loadings (g1, g2) per TV as fractions of the half-range. LA is
/// g1-heavy and TTCD is g2-heavy; the resonators expose exactly those two,
/// which keeps every TV largely predictable from the audio.
const TV_MIX: [(f64, f64); 6] = [
    (0.72, 0.10),  // LA
    (0.35, 0.40),  // LP
    (0.40, 0.38),  // TBCL
    (0.15, 0.68),  // TBCD
    (0.42, -0.35), // TTCL
    (-0.12, 0.72), // TTCD
];

/// Private-sinusoid amplitude per TV, fraction of the half-range.
const TV_PRIVATE: f64 = 0.12;

fn default_tempo_factors() -> Vec<f64> {
    vec![1.0, 1.5]
}

/// Generator configuration. The seed fixes the whole corpus bit-exactly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_speakers: usize,
    pub utterances_per_speaker: usize,
    /// Utterance duration range in seconds.
    pub duration_range: (f64, f64),
    pub seed: u64,
    /// Speaker pitch-base range in Hz.
    pub pitch_base_range: (f64, f64),
    /// Per-speaker jitter of TV centers, mm.
    pub palate_jitter: f64,
    /// Relative jitter of the TV-to-resonance map per speaker.
    pub resonance_scale_jitter: f64,
    /// Per-utterance tempo factors (normal/fast production-rate pairing).
    #[serde(default = "default_tempo_factors")]
    pub tempo_factors: Vec<f64>,
    /// Force the voicing value everywhere (1.0 fully voiced, 0.0 unvoiced).
    #[serde(default)]
    pub force_voicing: Option<f64>,
    /// Force a constant pitch in Hz.
    #[serde(default)]
    pub force_pitch_hz: Option<f64>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_speakers: 12,
            utterances_per_speaker: 40,
            duration_range: (1.2, 2.0),
            seed: 7,
            pitch_base_range: (90.0, 220.0),
            palate_jitter: 1.5,
            resonance_scale_jitter: 0.08,
            tempo_factors: default_tempo_factors(),
            force_voicing: None,
            force_pitch_hz: None,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

fn speaker_rng(cfg: &SynthConfig, speaker: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(cfg.seed ^ splitmix64(0x5EED + speaker as u64)))
}

fn utterance_rng(cfg: &SynthConfig, speaker: usize, utt: usize) -> ChaCha8Rng {
    let mix = splitmix64((speaker as u64) << 32 | utt as u64);
    ChaCha8Rng::seed_from_u64(splitmix64(cfg.seed ^ mix))
}

#[derive(Debug, Clone)]
struct SpeakerParams {
    pitch_base: f64,
    tv_center_offset: [f64; 6],
    /// (offset_hz, hz_per_mm) for the two resonators.
    res1: (f64, f64),
    res2: (f64, f64),
}

fn speaker_params(cfg: &SynthConfig, speaker: usize) -> SpeakerParams {
    let mut rng = speaker_rng(cfg, speaker);
    let pitch_base = rng.gen_range(cfg.pitch_base_range.0..cfg.pitch_base_range.1);
    let mut tv_center_offset = [0.0; 6];
    for v in tv_center_offset.iter_mut() {
        *v = rng.gen_range(-cfg.palate_jitter..cfg.palate_jitter);
    }
    let j = cfg.resonance_scale_jitter;
    let mut jit = || 1.0 + rng.gen_range(-j..j);
    let res1 = (280.0 * jit(), 24.0 * jit());
    let res2 = (900.0 * jit(), 55.0 * jit());
    SpeakerParams { pitch_base, tv_center_offset, res1, res2 }
}

/// A random-phase sinusoid bank evaluated on the 100 Hz frame grid.
struct Sinusoid {
    freq: f64,
    phase: f64,
    amp: f64,
}

impl Sinusoid {
    fn sample(&self, t: f64) -> f64 {
        self.amp * (2.0 * std::f64::consts::PI * self.freq * t + self.phase).sin()
    }
}

fn draw_sinusoids(rng: &mut ChaCha8Rng, n: usize, amp: f64) -> Vec<Sinusoid> {
    (0..n)
        .map(|_| Sinusoid {
            freq: rng.gen_range(0.3..5.0),
            phase: rng.gen_range(0.0..2.0 * std::f64::consts::PI),
            amp: amp * rng.gen_range(0.6..1.0),
        })
        .collect()
}

/// One time-varying two-pole resonator section.
struct Resonator {
    y1: f64,
    y2: f64,
}

impl Resonator {
    fn new() -> Self {
        Resonator { y1: 0.0, y2: 0.0 }
    }

    fn tick(&mut self, x: f64, freq: f64, bw: f64, fs: f64) -> f64 {
        let r = (-std::f64::consts::PI * bw / fs).exp();
        let c = 2.0 * r * (2.0 * std::f64::consts::PI * freq / fs).cos();
        let g = 1.0 - r; // keeps the gain roughly level across frequencies
        let y = g * x + c * self.y1 - r * r * self.y2;
        self.y2 = self.y1;
        self.y1 = y;
        y
    }
}

/// Generate one utterance: 16 kHz audio plus the 9-track ground truth
/// (6 TVs + ap/per/pitch) at 100 Hz. Deterministic in (seed, ids).
pub fn generate_utterance(
    cfg: &SynthConfig,
    speaker_id: usize,
    utt_id: usize,
) -> Result<(WaveBuffer, TrajectorySet)> {
    if speaker_id >= cfg.n_speakers || utt_id >= cfg.utterances_per_speaker {
        return Err(SiError::Config(format!(
            "generate_utterance: ids ({speaker_id},{utt_id}) out of range"
        )));
    }
    let spk = speaker_params(cfg, speaker_id);
    let mut rng = utterance_rng(cfg, speaker_id, utt_id);

    let duration = rng.gen_range(cfg.duration_range.0..cfg.duration_range.1);
    let tempo = cfg.tempo_factors[rng.gen_range(0..cfg.tempo_factors.len().max(1))];
    let n_frames = (duration * TARGET_FRAME_RATE as f64).round() as usize;
    let n_samples = n_frames * (TARGET_SAMPLE_RATE as usize / TARGET_FRAME_RATE as usize);

    // Latent gestures: two per utterance, each a sum of two sinusoids.
    let g1 = draw_sinusoids(&mut rng, 2, 0.5);
    let g2 = draw_sinusoids(&mut rng, 2, 0.5);
    let privates: Vec<Sinusoid> = (0..6).flat_map(|_| draw_sinusoids(&mut rng, 1, 1.0)).collect();

    // TV trajectories on the frame grid.
    let mut tv = vec![vec![0f32; n_frames]; 6];
    for f in 0..n_frames {
        let t = tempo * f as f64 / TARGET_FRAME_RATE as f64;
        let (s1, s2) = (g1.iter().map(|s| s.sample(t)).sum::<f64>(),
                        g2.iter().map(|s| s.sample(t)).sum::<f64>());
        for (i, track) in tv.iter_mut().enumerate() {
            let (lo, hi) = TV_RANGES[i];
            let half = (hi - lo) / 2.0;
            let center = (lo + hi) / 2.0 + spk.tv_center_offset[i].clamp(-half * 0.1, half * 0.1);
            let (w1, w2) = TV_MIX[i];
            let value = center
                + half * (w1 * s1 + w2 * s2 + TV_PRIVATE * privates[i].sample(t));
            track[f] = value.clamp(lo, hi) as f32;
        }
    }

    // Voicing segments (utterances open unvoiced, like a breathy attack)
    // and a slow pitch modulation around the speaker base. The frame-grid
    // values snap 0/1; the sample-level interpolation below turns each
    // boundary into a 10 ms ramp.
    let mut voicing = vec![0f64; n_frames];
    match cfg.force_voicing {
        Some(v) => voicing.fill(v.clamp(0.0, 1.0)),
        None => {
            let mut f = 0usize;
            let mut voiced = false;
            while f < n_frames {
                let dur_s = if voiced {
                    rng.gen_range(0.9..1.8)
                } else {
                    rng.gen_range(0.12..0.25)
                };
                let len = ((dur_s / tempo) * TARGET_FRAME_RATE as f64).round().max(1.0) as usize;
                let end = (f + len).min(n_frames);
                for v in voicing.iter_mut().take(end).skip(f) {
                    *v = if voiced { 1.0 } else { 0.0 };
                }
                f = end;
                voiced = !voiced;
            }
        }
    }
    let pitch_mod = Sinusoid {
        freq: rng.gen_range(0.2..0.8),
        phase: rng.gen_range(0.0..2.0 * std::f64::consts::PI),
        amp: 1.0,
    };
    let pitch_contour: Vec<f64> = match cfg.force_pitch_hz {
        Some(hz) => vec![hz; n_frames],
        None => (0..n_frames)
            .map(|f| {
                let t = tempo * f as f64 / TARGET_FRAME_RATE as f64;
                spk.pitch_base * 2f64.powf(0.15 * pitch_mod.sample(t))
            })
            .collect(),
    };

    // Source-feature ground truth straight from the generating values.
    let mut ap = vec![0f32; n_frames];
    let mut per = vec![0f32; n_frames];
    let mut pitch = vec![0f32; n_frames];
    for f in 0..n_frames {
        per[f] = voicing[f] as f32;
        ap[f] = (1.0 - voicing[f]) as f32;
        pitch[f] = if voicing[f] >= 0.5 { pitch_contour[f] as f32 } else { 0.0 };
    }

    // Audio: impulse train + noise excitation through the two resonators.
    let fs = TARGET_SAMPLE_RATE as f64;
    let hop = TARGET_SAMPLE_RATE as usize / TARGET_FRAME_RATE as usize;
    let interp = |track: &[f64], s: usize| -> f64 {
        let pos = s as f64 / hop as f64;
        let i = (pos.floor() as usize).min(n_frames - 1);
        let j = (i + 1).min(n_frames - 1);
        let frac = pos - i as f64;
        track[i] * (1.0 - frac) + track[j] * frac
    };
    let la: Vec<f64> = tv[0].iter().map(|&v| v as f64).collect();
    let ttcd: Vec<f64> = tv[5].iter().map(|&v| v as f64).collect();

    // Excitation first: a fractionally placed impulse train (each pulse is
    // linearly split across the two samples around its exact crossing time,
    // so half-integer periods do not alternate between rounded intervals)
    // plus noise gated by the unvoiced fraction.
    let mut excitation = vec![0f64; n_samples];
    let mut phase = 0.0f64;
    let mut noise_track = vec![0f64; n_samples];
    for s in 0..n_samples {
        let v = interp(&voicing, s).clamp(0.0, 1.0);
        let f0 = interp(&pitch_contour, s);
        let step = f0 / fs;
        phase += step;
        if phase >= 1.0 {
            phase -= 1.0;
            let frac = (phase / step).min(1.0); // crossing happened frac ago
            let amp = 2.0 * v;
            if s > 0 {
                excitation[s - 1] += amp * frac;
            }
            excitation[s] += amp * (1.0 - frac);
        }
        let noise: f64 = rng.gen_range(-1.0..1.0);
        excitation[s] += (1.0 - v) * noise * 0.25;
        noise_track[s] = (1.0 - v) * noise;
    }

    let mut r1 = Resonator::new();
    let mut r2 = Resonator::new();
    let mut samples = vec![0f32; n_samples];
    let mut peak = 0f64;
    for (s, out) in samples.iter_mut().enumerate() {
        let f1 = spk.res1.0 + spk.res1.1 * interp(&la, s);
        let f2 = spk.res2.0 + spk.res2.1 * interp(&ttcd, s);
        let filtered = r2.tick(r1.tick(excitation[s], f1, 200.0, fs), f2, 250.0, fs);
        // Unvoiced stretches mix in enough direct noise to stay broadband
        // (narrowband noise alone would read as weakly periodic).
        let y = filtered + noise_track[s] * 0.12;
        peak = peak.max(y.abs());
        *out = y as f32;
    }
    if peak > 0.0 {
        let gain = (0.5 / peak) as f32;
        for s in samples.iter_mut() {
            *s *= gain;
        }
    }

    let names: Vec<String> = TARGET_CHANNELS.iter().map(|s| s.to_string()).collect();
    let mut tracks = tv;
    tracks.push(ap);
    tracks.push(per);
    tracks.push(pitch);
    Ok((
        WaveBuffer::new(samples, TARGET_SAMPLE_RATE),
        TrajectorySet { names, tracks, frame_rate: TARGET_FRAME_RATE as f64, valid_frames: n_frames },
    ))
}

/// One corpus entry: where the audio and targets live, relative to the root.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct UtteranceRecord {
    pub id: String,
    pub speaker: String,
    pub duration: f64,
    pub wav: String,
    pub targets: String,
}

/// Corpus manifest written by the generator (`corpus.txt`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub generator: SynthConfig,
    pub channels: Vec<String>,
    pub utterances: Vec<UtteranceRecord>,
}

/// Generate the full corpus under `out_dir`: audio/*.wav, targets/*.bin,
/// and corpus.txt recording every generator parameter.
pub fn generate_corpus(cfg: &SynthConfig, out_dir: &Path) -> Result<CorpusManifest> {
    if cfg.n_speakers < 4 {
        return Err(SiError::Config(format!(
            "synth corpus needs at least 4 speakers for disjoint splits, got {}",
            cfg.n_speakers
        )));
    }
    std::fs::create_dir_all(out_dir.join("audio"))?;
    std::fs::create_dir_all(out_dir.join("targets"))?;
    let mut utterances = Vec::with_capacity(cfg.n_speakers * cfg.utterances_per_speaker);
    for speaker in 0..cfg.n_speakers {
        for utt in 0..cfg.utterances_per_speaker {
            let (wave, traj) = generate_utterance(cfg, speaker, utt)?;
            let id = format!("spk{speaker:02}_utt{utt:03}");
            let wav_rel = format!("audio/{id}.wav");
            let tgt_rel = format!("targets/{id}.bin");
            crate::io::write_wav(&out_dir.join(&wav_rel), &wave)?;
            let fm = trajectory_to_matrix(&traj);
            crate::io::write_feature_matrix(&out_dir.join(&tgt_rel), &fm)?;
            crate::io::write_channel_names(&out_dir.join(&tgt_rel), &traj.names)?;
            utterances.push(UtteranceRecord {
                id,
                speaker: format!("spk{speaker:02}"),
                duration: wave.duration_seconds(),
                wav: wav_rel,
                targets: tgt_rel,
            });
        }
    }
    let manifest = CorpusManifest {
        generator: cfg.clone(),
        channels: TARGET_CHANNELS.iter().map(|s| s.to_string()).collect(),
        utterances,
    };
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| SiError::Data(format!("corpus manifest: {e}")))?;
    std::fs::write(out_dir.join("corpus.txt"), json)?;
    Ok(manifest)
}

pub fn read_corpus_manifest(path: &Path) -> Result<CorpusManifest> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| SiError::Data(format!("{}: {e}", path.display())))
}

/// Pack a trajectory set into a targets feature matrix (frames x channels).
pub fn trajectory_to_matrix(traj: &TrajectorySet) -> crate::dsp::FeatureMatrix {
    let frames = traj.len();
    let channels = traj.tracks.len();
    let mut fm = crate::dsp::FeatureMatrix::zeros(
        frames,
        channels,
        traj.frame_rate,
        crate::dsp::FeatureKind::Targets,
    );
    for (c, track) in traj.tracks.iter().enumerate() {
        for (f, &v) in track.iter().enumerate() {
            *fm.at_mut(f, c) = v;
        }
    }
    fm
}
