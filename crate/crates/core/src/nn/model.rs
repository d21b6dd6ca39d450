//! The dilated TCN regressor and its binary checkpoint format.
//!
//! Stack: three 1x1 pre-processing convs C1-C3 (width w, 2w, 2w filters),
//! dilated convs d1-d3 (kernel 3, dilations 1/4/16, 2w filters), C4 (1x1,
//! 2w), frame-repeat upsample x4, C5 (1x1, w), average-pool 5, and a linear
//! 1x1 output head C6. BatchNorm + ReLU follow every conv except the head.
//! With w = 128 the time path maps 250 input frames onto the 200-frame
//! (100 Hz) target grid: 250 -> x4 -> 1000 -> /5 -> 200.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

use super::layers::{AvgPool1d, BatchNorm1d, Conv1d, Layer, Mode, Relu, Upsample};
use super::tensor::{Param, Tensor};
use super::Scalar;
use crate::error::{Result, SiError};

/// Standard width of the narrow layers (C1, C5); wide layers use twice this.
pub const STANDARD_WIDTH: usize = 128;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TcnConfig {
    /// Input feature channels: 128 for audspec, 40 for mspec.
    pub in_channels: usize,
    /// Output channels: 6/9 TVs alone, or 9/12 with source features.
    pub n_targets: usize,
    /// Narrow-layer width; [`STANDARD_WIDTH`] for the real model, smaller
    /// for gradient-check builds.
    pub width: usize,
    /// Weight-init seed.
    pub seed: u64,
}

impl TcnConfig {
    pub fn new(in_channels: usize, n_targets: usize, seed: u64) -> Self {
        TcnConfig { in_channels, n_targets, width: STANDARD_WIDTH, seed }
    }
}

/// Ordered layer stack with its build configuration.
#[derive(Debug, Clone)]
pub struct TcnModel<T: Scalar> {
    pub config: TcnConfig,
    pub layers: Vec<Layer<T>>,
}

/// Build the TCN with Kaiming-uniform weights (zero biases), seeded.
pub fn build_tcn<T: Scalar>(config: &TcnConfig) -> Result<TcnModel<T>> {
    if ![6, 9, 12].contains(&config.n_targets) {
        return Err(SiError::Config(format!(
            "build_tcn: n_targets must be 6, 9, or 12 (got {})",
            config.n_targets
        )));
    }
    if config.in_channels == 0 || config.width < 2 {
        return Err(SiError::Config("build_tcn: bad channel configuration".into()));
    }
    let w = config.width;
    let (narrow, wide) = (w, 2 * w);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let conv = |rng: &mut ChaCha8Rng, c_in: usize, c_out: usize, k: usize, dil: usize| {
        let mut layer = Conv1d::<T>::new(c_in, c_out, k, dil);
        let bound = (6.0 / (c_in * k) as f64).sqrt();
        for v in layer.weight.value.iter_mut() {
            *v = T::from_f64(rng.gen_range(-bound..bound));
        }
        Layer::Conv1d(layer)
    };
    let bn = |c: usize| Layer::BatchNorm1d(BatchNorm1d::<T>::new(c));
    let relu = || Layer::Relu(Relu::<T>::new());

    let mut layers = Vec::with_capacity(26);
    // Pre-processing 1x1 convs.
    layers.push(conv(&mut rng, config.in_channels, narrow, 1, 1)); // C1
    layers.push(bn(narrow));
    layers.push(relu());
    layers.push(conv(&mut rng, narrow, wide, 1, 1)); // C2
    layers.push(bn(wide));
    layers.push(relu());
    layers.push(conv(&mut rng, wide, wide, 1, 1)); // C3
    layers.push(bn(wide));
    layers.push(relu());
    // Dilated temporal stack.
    for dilation in [1usize, 4, 16] {
        layers.push(conv(&mut rng, wide, wide, 3, dilation)); // d1-d3
        layers.push(bn(wide));
        layers.push(relu());
    }
    // Projection + time-grid alignment.
    layers.push(conv(&mut rng, wide, wide, 1, 1)); // C4
    layers.push(bn(wide));
    layers.push(relu());
    layers.push(Layer::Upsample(Upsample::new(4)));
    layers.push(conv(&mut rng, wide, narrow, 1, 1)); // C5
    layers.push(bn(narrow));
    layers.push(relu());
    layers.push(Layer::AvgPool(AvgPool1d::new(5)));
    layers.push(conv(&mut rng, narrow, config.n_targets, 1, 1)); // C6, linear head

    Ok(TcnModel { config: config.clone(), layers })
}

impl<T: Scalar> TcnModel<T> {
    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let mut h = x.clone();
        for layer in self.layers.iter_mut() {
            h = layer.forward(&h, mode)?;
        }
        Ok(h)
    }

    /// Backpropagate from the loss gradient at the output; accumulates
    /// parameter gradients and returns the gradient at the input.
    pub fn backward(&mut self, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let mut g = dy.clone();
        for layer in self.layers.iter_mut().rev() {
            g = layer.backward(&g)?;
        }
        Ok(g)
    }

    pub fn zero_grad(&mut self) {
        for layer in self.layers.iter_mut() {
            for p in layer.params_mut() {
                p.zero_grad();
            }
        }
    }

    pub fn clear_caches(&mut self) {
        for layer in self.layers.iter_mut() {
            layer.clear_cache();
        }
    }

    /// All trainable parameters in a fixed order.
    pub fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }

    pub fn params(&self) -> Vec<&Param<T>> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }
}

/// Normalization record for one target variable, embedded in checkpoints
/// so inference can denormalize without the split manifest. `log_domain`
/// marks channels (pitch) z-scored after a log1p transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetStat {
    pub name: String,
    pub mean: f64,
    pub std: f64,
    pub log_domain: bool,
}

/// Optimizer and progress state embedded in a checkpoint for exact resume.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    /// Next epoch to run.
    pub epoch: u32,
    /// Adam step counter.
    pub adam_step: u64,
    /// Shuffle seed of the training run.
    pub seed: u64,
    pub best_val_mse: f64,
    pub epochs_since_best: u32,
    /// First moment per parameter, in model parameter order.
    pub adam_m: Vec<Vec<f32>>,
    /// Second moment per parameter.
    pub adam_v: Vec<Vec<f32>>,
}

const CKPT_MAGIC: &[u8; 4] = b"AITC";
const CKPT_VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f32s(out: &mut Vec<u8>, vs: &[f32]) {
    for &v in vs {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

/// Save a model (plus target stats and optionally training state) to the
/// binary checkpoint format: "AITC" header with the build config, a layer
/// table with parameters and running stats as f32 little-endian blobs, a
/// target-stats section, then the optimizer state section.
pub fn save_checkpoint(
    path: &Path,
    model: &TcnModel<f32>,
    stats: &[TargetStat],
    state: Option<&TrainState>,
) -> Result<()> {
    let mut out = Vec::new();
    out.extend_from_slice(CKPT_MAGIC);
    put_u32(&mut out, CKPT_VERSION);
    put_u32(&mut out, model.config.in_channels as u32);
    put_u32(&mut out, model.config.n_targets as u32);
    put_u32(&mut out, model.config.width as u32);
    put_u64(&mut out, model.config.seed);
    put_u32(&mut out, model.layers.len() as u32);
    for layer in &model.layers {
        match layer {
            Layer::Conv1d(l) => {
                out.push(0);
                put_u32(&mut out, l.in_channels as u32);
                put_u32(&mut out, l.out_channels as u32);
                put_u32(&mut out, l.kernel as u32);
                put_u32(&mut out, l.dilation as u32);
                put_f32s(&mut out, &l.weight.value);
                put_f32s(&mut out, &l.bias.value);
            }
            Layer::BatchNorm1d(l) => {
                out.push(1);
                put_u32(&mut out, l.channels as u32);
                put_f32s(&mut out, &l.gamma.value);
                put_f32s(&mut out, &l.beta.value);
                put_f32s(&mut out, &l.running_mean);
                put_f32s(&mut out, &l.running_var);
            }
            Layer::Relu(_) => out.push(2),
            Layer::Upsample(l) => {
                out.push(3);
                put_u32(&mut out, l.factor as u32);
            }
            Layer::AvgPool(l) => {
                out.push(4);
                put_u32(&mut out, l.window as u32);
            }
        }
    }
    put_u32(&mut out, stats.len() as u32);
    for s in stats {
        put_u32(&mut out, s.name.len() as u32);
        out.extend_from_slice(s.name.as_bytes());
        out.extend_from_slice(&s.mean.to_le_bytes());
        out.extend_from_slice(&s.std.to_le_bytes());
        out.push(s.log_domain as u8);
    }
    match state {
        Some(s) => {
            out.push(1);
            put_u32(&mut out, s.epoch);
            put_u64(&mut out, s.adam_step);
            put_u64(&mut out, s.seed);
            out.extend_from_slice(&s.best_val_mse.to_le_bytes());
            put_u32(&mut out, s.epochs_since_best);
            for m in &s.adam_m {
                put_f32s(&mut out, m);
            }
            for v in &s.adam_v {
                put_f32s(&mut out, v);
            }
        }
        None => out.push(0),
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(&out)?;
    Ok(())
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(SiError::Data(format!("{}: truncated checkpoint", self.path.display())));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        let s = self.take(4)?;
        Ok(u32::from_le_bytes([s[0], s[1], s[2], s[3]]))
    }

    fn u64(&mut self) -> Result<u64> {
        let s = self.take(8)?;
        Ok(u64::from_le_bytes(s.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        let s = self.take(8)?;
        Ok(f64::from_le_bytes(s.try_into().unwrap()))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let s = self.take(4 * n)?;
        Ok(s.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect())
    }
}

/// Load a checkpoint written by [`save_checkpoint`].
pub fn load_checkpoint(path: &Path) -> Result<(TcnModel<f32>, Vec<TargetStat>, Option<TrainState>)> {
    let buf = std::fs::read(path)?;
    if buf.len() < 8 || &buf[0..4] != CKPT_MAGIC {
        return Err(SiError::Data(format!("{}: not a checkpoint file", path.display())));
    }
    let mut cur = Cursor { buf: &buf, pos: 4, path };
    let version = cur.u32()?;
    if version != CKPT_VERSION {
        return Err(SiError::Data(format!(
            "{}: unsupported checkpoint version {version}",
            path.display()
        )));
    }
    let config = TcnConfig {
        in_channels: cur.u32()? as usize,
        n_targets: cur.u32()? as usize,
        width: cur.u32()? as usize,
        seed: cur.u64()?,
    };
    let n_layers = cur.u32()? as usize;
    let mut layers = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        match cur.u8()? {
            0 => {
                let (c_in, c_out) = (cur.u32()? as usize, cur.u32()? as usize);
                let (k, dil) = (cur.u32()? as usize, cur.u32()? as usize);
                let mut l = Conv1d::<f32>::new(c_in, c_out, k, dil);
                l.weight.value = cur.f32s(c_out * c_in * k)?;
                l.bias.value = cur.f32s(c_out)?;
                layers.push(Layer::Conv1d(l));
            }
            1 => {
                let c = cur.u32()? as usize;
                let mut l = BatchNorm1d::<f32>::new(c);
                l.gamma.value = cur.f32s(c)?;
                l.beta.value = cur.f32s(c)?;
                l.running_mean = cur.f32s(c)?;
                l.running_var = cur.f32s(c)?;
                layers.push(Layer::BatchNorm1d(l));
            }
            2 => layers.push(Layer::Relu(Relu::new())),
            3 => layers.push(Layer::Upsample(Upsample::new(cur.u32()? as usize))),
            4 => layers.push(Layer::AvgPool(AvgPool1d::new(cur.u32()? as usize))),
            tag => {
                return Err(SiError::Data(format!(
                    "{}: unknown layer tag {tag}",
                    path.display()
                )))
            }
        }
    }
    let model = TcnModel { config, layers };
    let n_stats = cur.u32()? as usize;
    let mut stats = Vec::with_capacity(n_stats);
    for _ in 0..n_stats {
        let name_len = cur.u32()? as usize;
        let name = String::from_utf8(cur.take(name_len)?.to_vec())
            .map_err(|_| SiError::Data(format!("{}: bad stat name", path.display())))?;
        let mean = cur.f64()?;
        let std = cur.f64()?;
        let log_domain = cur.u8()? == 1;
        stats.push(TargetStat { name, mean, std, log_domain });
    }
    let state = if cur.u8()? == 1 {
        let epoch = cur.u32()?;
        let adam_step = cur.u64()?;
        let seed = cur.u64()?;
        let best_val_mse = cur.f64()?;
        let epochs_since_best = cur.u32()?;
        let sizes: Vec<usize> = model.params().iter().map(|p| p.len()).collect();
        let mut adam_m = Vec::with_capacity(sizes.len());
        for &n in &sizes {
            adam_m.push(cur.f32s(n)?);
        }
        let mut adam_v = Vec::with_capacity(sizes.len());
        for &n in &sizes {
            adam_v.push(cur.f32s(n)?);
        }
        Some(TrainState { epoch, adam_step, seed, best_val_mse, epochs_since_best, adam_m, adam_v })
    } else {
        None
    };
    // Reject trailing garbage so identical-bytes comparisons stay meaningful.
    if cur.pos != buf.len() {
        return Err(SiError::Data(format!(
            "{}: {} trailing bytes after checkpoint payload",
            path.display(),
            buf.len() - cur.pos
        )));
    }
    Ok((model, stats, state))
}

/// Independent parameter-count oracle from the layer table formula:
/// conv contributes c_in*c_out*k + c_out, batchnorm contributes 2c.
pub fn expected_param_count(in_channels: usize, n_targets: usize, width: usize) -> usize {
    let (w, w2) = (width, 2 * width);
    let conv = |c_in: usize, c_out: usize, k: usize| c_in * c_out * k + c_out;
    let bn = |c: usize| 2 * c;
    conv(in_channels, w, 1)
        + bn(w)
        + conv(w, w2, 1)
        + bn(w2)
        + conv(w2, w2, 1)
        + bn(w2)
        + 3 * (conv(w2, w2, 3) + bn(w2))
        + conv(w2, w2, 1)
        + bn(w2)
        + conv(w2, w, 1)
        + bn(w)
        + conv(w, n_targets, 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_shape_contract() {
        for n_targets in [6usize, 9, 12] {
            let config = TcnConfig::new(128, n_targets, 7);
            let mut model = build_tcn::<f32>(&config).unwrap();
            let x = Tensor::zeros(&[2, 128, 250]);
            let y = model.forward(&x, Mode::Eval).unwrap();
            assert_eq!(y.shape, vec![2, n_targets, 200]);
        }
    }

    #[test]
    fn param_count_matches_counting_oracle() {
        let config = TcnConfig::new(128, 9, 7);
        let model = build_tcn::<f32>(&config).unwrap();
        assert_eq!(model.param_count(), expected_param_count(128, 9, 128));
        // Frozen regression constant for the standard 9-target build.
        assert_eq!(model.param_count(), 809_353);
    }

    #[test]
    fn same_seed_builds_identical_models() {
        let config = TcnConfig::new(40, 6, 1234);
        let a = build_tcn::<f32>(&config).unwrap();
        let b = build_tcn::<f32>(&config).unwrap();
        for (pa, pb) in a.params().iter().zip(b.params().iter()) {
            assert_eq!(pa.value, pb.value);
        }
    }

    #[test]
    fn eval_mode_is_deterministic() {
        let config = TcnConfig { in_channels: 8, n_targets: 6, width: 4, seed: 3 };
        let mut model = build_tcn::<f32>(&config).unwrap();
        let x = Tensor::from_vec(&[1, 8, 25], (0..200).map(|i| (i as f32 * 0.17).sin()).collect());
        let y1 = model.forward(&x, Mode::Eval).unwrap();
        let y2 = model.forward(&x, Mode::Eval).unwrap();
        assert_eq!(y1.data, y2.data);
    }

    #[test]
    fn rejects_invalid_n_targets() {
        assert!(build_tcn::<f32>(&TcnConfig::new(128, 7, 0)).is_err());
    }

    #[test]
    fn checkpoint_roundtrip_with_state() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let config = TcnConfig { in_channels: 8, n_targets: 6, width: 4, seed: 3 };
        let model = build_tcn::<f32>(&config).unwrap();
        let sizes: Vec<usize> = model.params().iter().map(|p| p.len()).collect();
        let state = TrainState {
            epoch: 17,
            adam_step: 85,
            seed: 99,
            best_val_mse: 0.125,
            epochs_since_best: 2,
            adam_m: sizes.iter().map(|&n| vec![0.5f32; n]).collect(),
            adam_v: sizes.iter().map(|&n| vec![0.25f32; n]).collect(),
        };
        let stats = vec![
            TargetStat { name: "LA".into(), mean: 15.0, std: 4.0, log_domain: false },
            TargetStat { name: "pitch".into(), mean: 3.2, std: 1.9, log_domain: true },
        ];
        save_checkpoint(&path, &model, &stats, Some(&state)).unwrap();
        let (back, back_stats, back_state) = load_checkpoint(&path).unwrap();
        assert_eq!(back.config, config);
        for (pa, pb) in model.params().iter().zip(back.params().iter()) {
            assert_eq!(pa.value, pb.value);
        }
        assert_eq!(back_stats, stats);
        assert_eq!(back_state.unwrap(), state);
        // Same input, same output through the roundtrip.
        let x = Tensor::from_vec(&[1, 8, 25], (0..200).map(|i| (i as f32 * 0.03).cos()).collect());
        let mut m1 = build_tcn::<f32>(&config).unwrap();
        let (mut m2, _, _) = load_checkpoint(&path).unwrap();
        assert_eq!(
            m1.forward(&x, Mode::Eval).unwrap().data,
            m2.forward(&x, Mode::Eval).unwrap().data
        );
    }
}
