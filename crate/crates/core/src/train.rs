//! Training loop: seeded mini-batch shuffling, masked MSE, Adam with the
//! staircase learning-rate decay, early stopping on validation loss, and a
//! checkpoint at the best epoch.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::data::{load_split_segments, SegmentSample, Split, SplitManifest};
use crate::dsp::FeatureKind;
use crate::error::{Result, SiError};
use crate::nn::{
    build_tcn, lr_schedule, mse_loss_masked, save_checkpoint, Adam, Mode, TcnConfig, TcnModel,
    Tensor, TrainState,
};

fn default_lr() -> f64 {
    1e-3
}
fn default_batch() -> usize {
    64
}
fn default_max_epochs() -> usize {
    100
}
fn default_patience() -> usize {
    10
}
fn default_lr_step() -> usize {
    5
}
fn default_gamma() -> f64 {
    0.5
}

/// Training configuration (TOML). The learning rate and batch size default
/// to the grid winners (1e-3, 64).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    /// "audspec" or "mspec".
    pub input_kind: String,
    /// Train on tract variables only, dropping the source-feature targets.
    #[serde(default)]
    pub tv_only: bool,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_max_epochs")]
    pub max_epochs: usize,
    #[serde(default = "default_patience")]
    pub patience: usize,
    #[serde(default = "default_lr_step")]
    pub lr_step_epochs: usize,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            input_kind: "audspec".into(),
            tv_only: false,
            lr: default_lr(),
            batch_size: default_batch(),
            max_epochs: default_max_epochs(),
            patience: default_patience(),
            lr_step_epochs: default_lr_step(),
            gamma: default_gamma(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn feature_kind(&self) -> Result<FeatureKind> {
        match self.input_kind.as_str() {
            "audspec" => Ok(FeatureKind::Audspec),
            "mspec" => Ok(FeatureKind::Mspec),
            other => Err(SiError::Config(format!(
                "input_kind must be audspec or mspec, got '{other}'"
            ))),
        }
    }
}

pub fn read_train_config(path: &Path) -> Result<TrainConfig> {
    let text = std::fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| SiError::Config(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_val_mse: f64,
    pub final_train_mse: f64,
    /// One line per epoch: epoch, lr, train MSE, validation MSE.
    pub log: Vec<String>,
}

/// Assemble a batch tensor triple from samples.
fn make_batch(samples: &[&SegmentSample]) -> (Tensor<f32>, Tensor<f32>, Vec<bool>) {
    let b = samples.len();
    let (c_in, t_in) = (samples[0].in_channels, samples[0].in_frames);
    let (n_t, t_out) = (samples[0].n_targets, samples[0].mask.len());
    let mut input = Tensor::zeros(&[b, c_in, t_in]);
    let mut target = Tensor::zeros(&[b, n_t, t_out]);
    let mut mask = vec![false; b * t_out];
    for (i, s) in samples.iter().enumerate() {
        input.data[i * c_in * t_in..(i + 1) * c_in * t_in].copy_from_slice(&s.input);
        target.data[i * n_t * t_out..(i + 1) * n_t * t_out].copy_from_slice(&s.target);
        mask[i * t_out..(i + 1) * t_out].copy_from_slice(&s.mask);
    }
    (input, target, mask)
}

/// Mean masked MSE of a model over a sample set, eval mode, batched.
pub fn evaluate_mse(model: &mut TcnModel<f32>, samples: &[SegmentSample], batch: usize) -> Result<f64> {
    let mut total = 0.0f64;
    let mut frames = 0usize;
    for chunk in samples.chunks(batch.max(1)) {
        let refs: Vec<&SegmentSample> = chunk.iter().collect();
        let (input, target, mask) = make_batch(&refs);
        let pred = model.forward(&input, Mode::Eval)?;
        let (loss, _) = mse_loss_masked(&pred, &target, &mask)?;
        let n_valid = mask.iter().filter(|&&m| m).count();
        total += loss as f64 * n_valid as f64;
        frames += n_valid;
    }
    Ok(total / frames.max(1) as f64)
}

/// Train a TCN on the featurized corpus and write the best-validation
/// checkpoint (with optimizer state for exact resume) to `out_ckpt`.
/// Deterministic given the config seed in single-threaded mode.
pub fn train(
    config: &TrainConfig,
    manifest: &SplitManifest,
    root: &Path,
    out_ckpt: &Path,
) -> Result<TrainOutcome> {
    let kind = config.feature_kind()?;
    let train_samples = load_split_segments(manifest, root, kind, Split::Train, config.tv_only)?;
    let dev_samples = load_split_segments(manifest, root, kind, Split::Dev, config.tv_only)?;
    if train_samples.is_empty() || dev_samples.is_empty() {
        return Err(SiError::Data("empty train or dev split".into()));
    }
    let in_channels = train_samples[0].in_channels;
    let n_targets = train_samples[0].n_targets;
    let picked = crate::data::select_channels(&manifest.channels, config.tv_only);
    let stats: Vec<crate::nn::TargetStat> =
        picked.iter().map(|&c| manifest.stats[c].clone()).collect();

    let model_config = TcnConfig::new(in_channels, n_targets, config.seed);
    let mut model = build_tcn::<f32>(&model_config)?;
    let sizes: Vec<usize> = model.params().iter().map(|p| p.len()).collect();
    let mut adam = Adam::new(&sizes);

    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0usize;
    let mut epochs_since_best = 0usize;
    let mut final_train = f64::NAN;
    let mut log = Vec::new();
    let mut epochs_run = 0usize;

    let mut order: Vec<usize> = (0..train_samples.len()).collect();
    for epoch in 0..config.max_epochs {
        epochs_run = epoch + 1;
        let lr = lr_schedule(epoch, config.lr, config.gamma, config.lr_step_epochs);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(epoch as u64 + 1));
        order.shuffle(&mut rng);

        let mut train_loss = 0.0f64;
        let mut train_frames = 0usize;
        for chunk in order.chunks(config.batch_size.max(2)) {
            if chunk.len() < 2 {
                continue; // BatchNorm needs at least two segments
            }
            let refs: Vec<&SegmentSample> = chunk.iter().map(|&i| &train_samples[i]).collect();
            let (input, target, mask) = make_batch(&refs);
            model.zero_grad();
            let pred = model.forward(&input, Mode::Train)?;
            let (loss, dpred) = mse_loss_masked(&pred, &target, &mask)?;
            if !loss.is_finite() {
                return Err(SiError::Numeric(format!(
                    "non-finite training loss at epoch {epoch} (lr {lr:e}); \
                     inputs or learning rate are likely out of range"
                )));
            }
            model.backward(&dpred)?;
            let mut params = model.params_mut();
            adam.step(&mut params, lr as f32)?;
            let n_valid = mask.iter().filter(|&&m| m).count();
            train_loss += loss as f64 * n_valid as f64;
            train_frames += n_valid;
        }
        model.clear_caches();
        let train_mse = train_loss / train_frames.max(1) as f64;
        final_train = train_mse;
        let val_mse = evaluate_mse(&mut model, &dev_samples, config.batch_size)?;
        log.push(format!("epoch={epoch} lr={lr} train_mse={train_mse} val_mse={val_mse}"));

        if val_mse < best_val {
            best_val = val_mse;
            best_epoch = epoch;
            epochs_since_best = 0;
            let (m, v) = adam.moments();
            let state = TrainState {
                epoch: epoch as u32 + 1,
                adam_step: adam.step_count,
                seed: config.seed,
                best_val_mse: best_val,
                epochs_since_best: 0,
                adam_m: m.to_vec(),
                adam_v: v.to_vec(),
            };
            save_checkpoint(out_ckpt, &model, &stats, Some(&state))?;
        } else {
            epochs_since_best += 1;
            if epochs_since_best >= config.patience {
                break;
            }
        }
    }

    Ok(TrainOutcome { epochs_run, best_epoch, best_val_mse: best_val, final_train_mse: final_train, log })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unknown_input_kind() {
        let config = TrainConfig { input_kind: "cepstrum".into(), ..Default::default() };
        assert!(config.feature_kind().is_err());
    }

    #[test]
    fn config_toml_roundtrip_with_defaults() {
        let config: TrainConfig = toml::from_str("input_kind = \"audspec\"").unwrap();
        assert_eq!(config.lr, 1e-3);
        assert_eq!(config.batch_size, 64);
        assert_eq!(config.gamma, 0.5);
        assert_eq!(config.lr_step_epochs, 5);
        assert!(!config.tv_only);
    }
}
