//! Split manifests, target normalization, featurization, and the segment
//! loader feeding the training loop.
//!
//! Splits are speaker-independent: speakers are shuffled by seed and
//! partitioned so no speaker appears in two splits; all normalization
//! statistics come from the training split only. The pitch channel is
//! z-scored in the log1p domain so unvoiced zeros stay finite.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

use crate::dsp::{self, FeatureKind, FeatureMatrix};
use crate::error::{Result, SiError};
use crate::nn::TargetStat;
use crate::synth::{CorpusManifest, UtteranceRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl std::str::FromStr for Split {
    type Err = SiError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            _ => Err(SiError::Config(format!("unknown split '{s}'"))),
        }
    }
}

/// Speaker-independent split assignment plus train-split normalization
/// statistics. Persisted as structured text (`manifest.txt`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub ratios: (f64, f64, f64),
    /// speaker -> split
    pub assignment: BTreeMap<String, Split>,
    pub channels: Vec<String>,
    pub stats: Vec<TargetStat>,
    pub utterances: Vec<UtteranceRecord>,
}

impl SplitManifest {
    pub fn split_of(&self, utt: &UtteranceRecord) -> Split {
        self.assignment[&utt.speaker]
    }

    pub fn utterances_in(&self, split: Split) -> Vec<&UtteranceRecord> {
        self.utterances.iter().filter(|u| self.split_of(u) == split).collect()
    }
}

/// Partition speakers into train/dev/test by seed. Dev and test sizes are
/// rounded from the ratios (at least one speaker each); train takes the
/// remainder. Statistics are computed from the training split only.
pub fn make_splits(
    corpus: &CorpusManifest,
    root: &Path,
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<SplitManifest> {
    let mut speakers: Vec<String> = corpus
        .utterances
        .iter()
        .map(|u| u.speaker.clone())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let n = speakers.len();
    if n < 4 {
        return Err(SiError::Data(format!("need at least 4 speakers to split, got {n}")));
    }
    let sum = ratios.0 + ratios.1 + ratios.2;
    if !(sum.is_finite() && (sum - 1.0).abs() < 1e-6) {
        return Err(SiError::Config(format!("split ratios must sum to 1, got {sum}")));
    }
    let n_dev = ((ratios.1 * n as f64).round() as usize).max(1);
    let n_test = ((ratios.2 * n as f64).round() as usize).max(1);
    if n_dev + n_test >= n {
        return Err(SiError::Data(format!(
            "too few speakers ({n}) for dev {n_dev} + test {n_test} with a nonempty train split"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    speakers.shuffle(&mut rng);
    let mut assignment = BTreeMap::new();
    for (i, speaker) in speakers.iter().enumerate() {
        let split = if i < n_dev {
            Split::Dev
        } else if i < n_dev + n_test {
            Split::Test
        } else {
            Split::Train
        };
        assignment.insert(speaker.clone(), split);
    }

    let mut manifest = SplitManifest {
        seed,
        ratios,
        assignment,
        channels: corpus.channels.clone(),
        stats: Vec::new(),
        utterances: corpus.utterances.clone(),
    };
    manifest.stats = compute_target_stats(&manifest, root)?;
    Ok(manifest)
}

/// One-pass per-channel mean/std over every training-split frame. Pitch is
/// accumulated in the log1p domain.
pub fn compute_target_stats(manifest: &SplitManifest, root: &Path) -> Result<Vec<TargetStat>> {
    let n_ch = manifest.channels.len();
    let mut count = 0u64;
    let mut sum = vec![0f64; n_ch];
    let mut sumsq = vec![0f64; n_ch];
    for utt in manifest.utterances_in(Split::Train) {
        let fm = crate::io::read_feature_matrix(&root.join(&utt.targets))?;
        if fm.channels != n_ch {
            return Err(SiError::Data(format!(
                "{}: expected {n_ch} target channels, got {}",
                utt.targets, fm.channels
            )));
        }
        for f in 0..fm.frames {
            for c in 0..n_ch {
                let mut v = fm.at(f, c) as f64;
                if manifest.channels[c] == "pitch" {
                    v = v.ln_1p();
                }
                sum[c] += v;
                sumsq[c] += v * v;
            }
        }
        count += fm.frames as u64;
    }
    if count == 0 {
        return Err(SiError::Data("no training frames to compute statistics from".into()));
    }
    Ok((0..n_ch)
        .map(|c| {
            let mean = sum[c] / count as f64;
            let var = (sumsq[c] / count as f64 - mean * mean).max(0.0);
            TargetStat {
                name: manifest.channels[c].clone(),
                mean,
                std: var.sqrt(),
                log_domain: manifest.channels[c] == "pitch",
            }
        })
        .collect())
}

/// Z-score target channels with train-split stats (log1p first for the
/// pitch channel). Zero-std channels are centered only.
pub fn normalize_targets(fm: &FeatureMatrix, stats: &[TargetStat]) -> Result<FeatureMatrix> {
    if fm.channels != stats.len() {
        return Err(SiError::Data(format!(
            "normalize_targets: {} channels vs {} stats",
            fm.channels,
            stats.len()
        )));
    }
    let mut out = fm.clone();
    for c in 0..fm.channels {
        let s = &stats[c];
        for f in 0..fm.frames {
            let mut v = fm.at(f, c) as f64;
            if s.log_domain {
                v = v.ln_1p();
            }
            v -= s.mean;
            if s.std > 0.0 {
                v /= s.std;
            }
            *out.at_mut(f, c) = v as f32;
        }
    }
    Ok(out)
}

/// Exact inverse of [`normalize_targets`].
pub fn denormalize_targets(fm: &FeatureMatrix, stats: &[TargetStat]) -> Result<FeatureMatrix> {
    if fm.channels != stats.len() {
        return Err(SiError::Data(format!(
            "denormalize_targets: {} channels vs {} stats",
            fm.channels,
            stats.len()
        )));
    }
    let mut out = fm.clone();
    for c in 0..fm.channels {
        let s = &stats[c];
        for f in 0..fm.frames {
            let mut v = fm.at(f, c) as f64;
            if s.std > 0.0 {
                v *= s.std;
            }
            v += s.mean;
            if s.log_domain {
                v = v.exp_m1().max(0.0);
            }
            *out.at_mut(f, c) = v as f32;
        }
    }
    Ok(out)
}

pub fn write_split_manifest(path: &Path, manifest: &SplitManifest) -> Result<()> {
    let json = serde_json::to_string_pretty(manifest)
        .map_err(|e| SiError::Data(format!("split manifest: {e}")))?;
    std::fs::write(path, json)?;
    Ok(())
}

pub fn read_split_manifest(path: &Path) -> Result<SplitManifest> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| SiError::Data(format!("{}: {e}", path.display())))
}

/// Featurize one wave into the per-utterance feature matrix: 2 s segments,
/// per-segment features, utterance-wise z-normalization over valid frames.
pub fn featurize_wave(wave: &crate::dsp::WaveBuffer, id: &str, kind: FeatureKind) -> Result<FeatureMatrix> {
    let wave16 = dsp::resample(wave, dsp::TARGET_SAMPLE_RATE)?;
    let segments = dsp::segment_and_pad(&wave16, id);
    if segments.is_empty() {
        return Err(SiError::Data(format!("{id}: empty audio")));
    }
    let mats: Vec<FeatureMatrix> = segments
        .iter()
        .map(|seg| match kind {
            FeatureKind::Audspec => Ok(dsp::auditory_spectrogram(seg)),
            FeatureKind::Mspec => Ok(dsp::melspectrogram(seg)),
            FeatureKind::Mfcc => Ok(dsp::mfcc(seg)),
            FeatureKind::Targets => {
                Err(SiError::Config("featurize: 'targets' is not an input kind".into()))
            }
        })
        .collect::<Result<_>>()?;
    let per_seg = mats[0].frames;
    let channels = mats[0].channels;
    let mut all = FeatureMatrix::zeros(per_seg * mats.len(), channels, mats[0].frame_rate, kind);
    for (s, m) in mats.iter().enumerate() {
        all.data[s * per_seg * channels..(s + 1) * per_seg * channels].copy_from_slice(&m.data);
    }
    // Valid frames form a prefix: all segments are fully valid except the
    // zero-padded tail of the last one.
    let hop = dsp::TARGET_SAMPLE_RATE as usize / (mats[0].frame_rate as usize);
    let last_valid = segments.last().unwrap().valid_samples.div_ceil(hop);
    let valid = per_seg * (segments.len() - 1) + last_valid.min(per_seg);
    Ok(dsp::znorm_valid(&all, valid))
}

/// Conventional on-disk location of a featurized utterance.
pub fn feature_path(root: &Path, id: &str, kind: FeatureKind) -> std::path::PathBuf {
    root.join("feats").join(format!("{id}.{}.bin", kind.name()))
}

/// Featurize every utterance of a corpus into `out_root/feats/`, fanned out
/// over `threads` workers (per-utterance work is independent, so the output
/// bytes do not depend on the thread count).
pub fn featurize_corpus(
    manifest: &[UtteranceRecord],
    in_root: &Path,
    out_root: &Path,
    kind: FeatureKind,
    threads: usize,
) -> Result<()> {
    std::fs::create_dir_all(out_root.join("feats"))?;
    let work = |utt: &UtteranceRecord| -> Result<()> {
        let wave = crate::io::read_wav(&in_root.join(&utt.wav))?;
        let fm = featurize_wave(&wave, &utt.id, kind)?;
        crate::io::write_feature_matrix(&feature_path(out_root, &utt.id, kind), &fm)?;
        Ok(())
    };
    if threads <= 1 {
        for utt in manifest {
            work(utt)?;
        }
        return Ok(());
    }
    let chunk = manifest.len().div_ceil(threads);
    std::thread::scope(|scope| {
        let handles: Vec<_> = manifest
            .chunks(chunk.max(1))
            .map(|part| scope.spawn(move || part.iter().try_for_each(work)))
            .collect();
        for h in handles {
            h.join().map_err(|_| SiError::Data("featurize worker panicked".into()))??;
        }
        Ok(())
    })
}

/// One training example: a 2 s input window with its aligned target frames
/// and valid-frame mask.
#[derive(Debug, Clone)]
pub struct SegmentSample {
    pub utterance: String,
    pub input: Vec<f32>,
    pub in_channels: usize,
    pub in_frames: usize,
    pub target: Vec<f32>,
    pub n_targets: usize,
    pub mask: Vec<bool>,
}

/// Indices of the target channels to train on: all of them, or TVs only.
pub fn select_channels(channels: &[String], tv_only: bool) -> Vec<usize> {
    let source = ["ap", "per", "pitch"];
    (0..channels.len())
        .filter(|&c| !tv_only || !source.contains(&channels[c].as_str()))
        .collect()
}

/// Load every segment of a split as training-ready samples. Features must
/// have been produced by `featurize_corpus` with the same kind.
pub fn load_split_segments(
    manifest: &SplitManifest,
    root: &Path,
    kind: FeatureKind,
    split: Split,
    tv_only: bool,
) -> Result<Vec<SegmentSample>> {
    let picked = select_channels(&manifest.channels, tv_only);
    let stats = &manifest.stats;
    let mut samples = Vec::new();
    for utt in manifest.utterances_in(split) {
        let feats = crate::io::read_feature_matrix(&feature_path(root, &utt.id, kind))?;
        let targets_raw = crate::io::read_feature_matrix(&root.join(&utt.targets))?;
        let targets = normalize_targets(&targets_raw, stats)?;
        let per_seg_in = match kind {
            FeatureKind::Audspec => dsp::AUDSPEC_FRAMES,
            FeatureKind::Mspec => dsp::MSPEC_FRAMES,
            _ => return Err(SiError::Config(format!("{} is not a TCN input kind", kind.name()))),
        };
        if feats.frames % per_seg_in != 0 {
            return Err(SiError::Data(format!(
                "{}: {} frames is not a whole number of segments",
                utt.id, feats.frames
            )));
        }
        let n_seg = feats.frames / per_seg_in;
        let per_seg_out = dsp::SEGMENT_TARGET_FRAMES;
        let total_target = targets.frames;
        let expected_segments = total_target.div_ceil(per_seg_out);
        if expected_segments != n_seg {
            return Err(SiError::Data(format!(
                "{}: {} target frames do not match {} feature segments",
                utt.id, total_target, n_seg
            )));
        }
        for s in 0..n_seg {
            let mut input = vec![0f32; feats.channels * per_seg_in];
            // Transpose frames x channels to channels x frames for the model.
            for f in 0..per_seg_in {
                let frame = feats.frame(s * per_seg_in + f);
                for (c, &v) in frame.iter().enumerate() {
                    input[c * per_seg_in + f] = v;
                }
            }
            let mut target = vec![0f32; picked.len() * per_seg_out];
            let mut mask = vec![false; per_seg_out];
            for f in 0..per_seg_out {
                let global = s * per_seg_out + f;
                if global >= total_target {
                    break;
                }
                mask[f] = true;
                for (ci, &c) in picked.iter().enumerate() {
                    target[ci * per_seg_out + f] = targets.at(global, c);
                }
            }
            samples.push(SegmentSample {
                utterance: utt.id.clone(),
                input,
                in_channels: feats.channels,
                in_frames: per_seg_in,
                target,
                n_targets: picked.len(),
                mask,
            });
        }
    }
    Ok(samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_corpus, SynthConfig};

    fn tiny_corpus(dir: &Path) -> CorpusManifest {
        let cfg = SynthConfig {
            n_speakers: 5,
            utterances_per_speaker: 2,
            duration_range: (1.0, 1.4),
            seed: 11,
            ..Default::default()
        };
        generate_corpus(&cfg, dir).unwrap()
    }

    #[test]
    fn splits_are_speaker_disjoint_and_exhaustive() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = tiny_corpus(dir.path());
        let manifest = make_splits(&corpus, dir.path(), (0.6, 0.2, 0.2), 3).unwrap();
        let mut seen = std::collections::BTreeMap::new();
        for utt in &manifest.utterances {
            let split = manifest.split_of(utt);
            if let Some(prev) = seen.insert(utt.speaker.clone(), split) {
                assert_eq!(prev, split, "speaker {} in two splits", utt.speaker);
            }
        }
        let total: usize = [Split::Train, Split::Dev, Split::Test]
            .iter()
            .map(|&s| manifest.utterances_in(s).len())
            .sum();
        assert_eq!(total, manifest.utterances.len());
    }

    #[test]
    fn split_counts_mirror_the_ratio_request() {
        // 46 speakers at 0.8/0.1/0.1 partition as 36/5/5.
        let utterances: Vec<UtteranceRecord> = (0..46)
            .map(|s| UtteranceRecord {
                id: format!("u{s}"),
                speaker: format!("spk{s:02}"),
                duration: 2.0,
                wav: String::new(),
                targets: String::new(),
            })
            .collect();
        let mut speakers: Vec<String> = utterances.iter().map(|u| u.speaker.clone()).collect();
        speakers.dedup();
        let n = speakers.len() as f64;
        let n_dev = ((0.1 * n).round() as usize).max(1);
        let n_test = ((0.1 * n).round() as usize).max(1);
        assert_eq!((46 - n_dev - n_test, n_dev, n_test), (36, 5, 5));
    }

    #[test]
    fn same_seed_same_assignment() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = tiny_corpus(dir.path());
        let a = make_splits(&corpus, dir.path(), (0.6, 0.2, 0.2), 42).unwrap();
        let b = make_splits(&corpus, dir.path(), (0.6, 0.2, 0.2), 42).unwrap();
        assert_eq!(a.assignment, b.assignment);
        let c = make_splits(&corpus, dir.path(), (0.6, 0.2, 0.2), 43).unwrap();
        assert!(a.assignment != c.assignment || a.seed != c.seed);
    }

    #[test]
    fn normalization_roundtrip_and_train_mean() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = tiny_corpus(dir.path());
        let manifest = make_splits(&corpus, dir.path(), (0.6, 0.2, 0.2), 3).unwrap();
        let utt = &manifest.utterances[0];
        let raw = crate::io::read_feature_matrix(&dir.path().join(&utt.targets)).unwrap();
        let normed = normalize_targets(&raw, &manifest.stats).unwrap();
        let back = denormalize_targets(&normed, &manifest.stats).unwrap();
        for (a, b) in raw.data.iter().zip(&back.data) {
            assert!((a - b).abs() <= 1e-6 * a.abs().max(1.0), "{a} vs {b}");
        }
        // A matrix sitting exactly at the training means normalizes to zero.
        let mut at_mean = FeatureMatrix::zeros(4, manifest.stats.len(), 100.0, FeatureKind::Targets);
        for c in 0..manifest.stats.len() {
            let s = &manifest.stats[c];
            let raw_mean = if s.log_domain { s.mean.exp_m1() } else { s.mean };
            for f in 0..4 {
                *at_mean.at_mut(f, c) = raw_mean as f32;
            }
        }
        let z = normalize_targets(&at_mean, &manifest.stats).unwrap();
        assert!(z.data.iter().all(|&v| v.abs() < 1e-5), "{:?}", z.data);
    }

    #[test]
    fn featurize_and_load_segments_align() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = tiny_corpus(dir.path());
        let manifest = make_splits(&corpus, dir.path(), (0.6, 0.2, 0.2), 3).unwrap();
        featurize_corpus(&corpus.utterances, dir.path(), dir.path(), FeatureKind::Mspec, 2)
            .unwrap();
        let samples =
            load_split_segments(&manifest, dir.path(), FeatureKind::Mspec, Split::Train, false)
                .unwrap();
        assert!(!samples.is_empty());
        for s in &samples {
            assert_eq!(s.in_channels, 40);
            assert_eq!(s.in_frames, 250);
            assert_eq!(s.n_targets, 9);
            assert_eq!(s.mask.len(), 200);
            assert!(s.mask[0]);
            assert!(s.input.iter().all(|v| v.is_finite()));
        }
        // TV-only selection drops the three source channels.
        let tv = load_split_segments(&manifest, dir.path(), FeatureKind::Mspec, Split::Train, true)
            .unwrap();
        assert_eq!(tv[0].n_targets, 6);
    }

    #[test]
    fn too_few_speakers_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = SynthConfig {
            n_speakers: 4,
            utterances_per_speaker: 1,
            duration_range: (1.0, 1.2),
            ..Default::default()
        };
        let corpus = generate_corpus(&cfg, dir.path()).unwrap();
        // 0.5/0.25/0.25 on 4 speakers leaves 2/1/1: fine.
        assert!(make_splits(&corpus, dir.path(), (0.5, 0.25, 0.25), 1).is_ok());
        // Half dev + half test leaves no train.
        assert!(make_splits(&corpus, dir.path(), (0.0, 0.5, 0.5), 1).is_err());
    }
}
