//! Layer implementations: forward, exact backward, and parameter access.

use super::tensor::{Param, Tensor};
use super::Scalar;
use crate::error::{Result, SiError};

/// Forward mode. Train caches whatever backward needs and lets BatchNorm
/// use batch statistics; Eval uses running statistics and caches nothing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Add `w * src` into `dst` where the two windows overlap after shifting
/// `src` by `off`. This is the inner kernel of every convolution pass.
#[inline]
fn axpy_shifted<T: Scalar>(dst: &mut [T], src: &[T], w: T, off: isize) {
    let t = dst.len();
    debug_assert_eq!(src.len(), t);
    let (dst_start, src_start, n) = if off >= 0 {
        let off = off as usize;
        if off >= t {
            return;
        }
        (0, off, t - off)
    } else {
        let off = (-off) as usize;
        if off >= t {
            return;
        }
        (off, 0, t - off)
    };
    let d = &mut dst[dst_start..dst_start + n];
    let s = &src[src_start..src_start + n];
    for (dv, sv) in d.iter_mut().zip(s) {
        *dv += w * *sv;
    }
}

/// Dot product of the overlapping windows of `a` and `b` with `b` shifted by `off`.
#[inline]
fn dot_shifted<T: Scalar>(a: &[T], b: &[T], off: isize) -> T {
    let t = a.len();
    let (a_start, b_start, n) = if off >= 0 {
        let off = off as usize;
        if off >= t {
            return T::zero();
        }
        (0, off, t - off)
    } else {
        let off = (-off) as usize;
        if off >= t {
            return T::zero();
        }
        (off, 0, t - off)
    };
    let mut acc = T::zero();
    for (av, bv) in a[a_start..a_start + n].iter().zip(&b[b_start..b_start + n]) {
        acc += *av * *bv;
    }
    acc
}

/// 1-D convolution with zero "same" padding: output frame count equals the
/// input's. y[b,o,t] = bias[o] + sum_{c,k} w[o,c,k] * x[b,c,t+(k-K/2)*dilation].
#[derive(Debug, Clone)]
pub struct Conv1d<T: Scalar> {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub dilation: usize,
    /// [out_channels, in_channels, kernel], row-major.
    pub weight: Param<T>,
    pub bias: Param<T>,
    cached_input: Option<Tensor<T>>,
}

impl<T: Scalar> Conv1d<T> {
    pub fn new(in_channels: usize, out_channels: usize, kernel: usize, dilation: usize) -> Self {
        assert!(kernel >= 1 && dilation >= 1);
        Conv1d {
            in_channels,
            out_channels,
            kernel,
            dilation,
            weight: Param::new(vec![T::zero(); out_channels * in_channels * kernel]),
            bias: Param::new(vec![T::zero(); out_channels]),
            cached_input: None,
        }
    }

    fn offset(&self, k: usize) -> isize {
        (k as isize - (self.kernel / 2) as isize) * self.dilation as isize
    }

    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let (b, c_in, t) = x.dims3();
        if c_in != self.in_channels {
            return Err(SiError::Config(format!(
                "conv1d: channel mismatch (expected {}, got {c_in})",
                self.in_channels
            )));
        }
        let mut y = Tensor::zeros(&[b, self.out_channels, t]);
        for bi in 0..b {
            for o in 0..self.out_channels {
                let base = (bi * self.out_channels + o) * t;
                let row = &mut y.data[base..base + t];
                row.fill(self.bias.value[o]);
                for c in 0..c_in {
                    let x_row = x.row(bi, c);
                    for k in 0..self.kernel {
                        let w = self.weight.value[(o * c_in + c) * self.kernel + k];
                        axpy_shifted(row, x_row, w, self.offset(k));
                    }
                }
            }
        }
        if mode == Mode::Train {
            self.cached_input = Some(x.clone());
        }
        Ok(y)
    }

    pub fn backward(&mut self, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let x = self
            .cached_input
            .as_ref()
            .ok_or_else(|| SiError::Config("conv1d backward without cached forward".into()))?;
        let (b, c_in, t) = x.dims3();
        let mut dx = Tensor::zeros(&[b, c_in, t]);
        for bi in 0..b {
            for o in 0..self.out_channels {
                let dy_row = dy.row(bi, o);
                self.bias.grad[o] += dy_row.iter().copied().sum();
                for c in 0..c_in {
                    let x_row = x.row(bi, c);
                    let dx_row = dx.row_mut(bi, c);
                    for k in 0..self.kernel {
                        let off = self.offset(k);
                        let idx = (o * c_in + c) * self.kernel + k;
                        // dW is the correlation of dy with the shifted input.
                        self.weight.grad[idx] += dot_shifted(dy_row, x_row, off);
                        // dX scatters dy back through the same shift.
                        let w = self.weight.value[idx];
                        axpy_shifted(dx_row, dy_row, w, -off);
                    }
                }
            }
        }
        Ok(dx)
    }
}

#[derive(Debug, Clone)]
struct BnCache<T: Scalar> {
    xhat: Vec<T>,
    inv_std: Vec<T>,
    shape: Vec<usize>,
}

/// BatchNorm over the channel axis of (batch, channels, time) tensors.
/// Train mode normalizes with batch statistics (eps 1e-5) and maintains
/// running estimates with momentum 0.1; eval mode applies the running ones.
#[derive(Debug, Clone)]
pub struct BatchNorm1d<T: Scalar> {
    pub channels: usize,
    pub gamma: Param<T>,
    pub beta: Param<T>,
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
    pub momentum: T,
    pub eps: T,
    cache: Option<BnCache<T>>,
}

impl<T: Scalar> BatchNorm1d<T> {
    pub fn new(channels: usize) -> Self {
        BatchNorm1d {
            channels,
            gamma: Param::new(vec![T::one(); channels]),
            beta: Param::new(vec![T::zero(); channels]),
            running_mean: vec![T::zero(); channels],
            running_var: vec![T::one(); channels],
            momentum: T::from_f64(0.1),
            eps: T::from_f64(1e-5),
            cache: None,
        }
    }

    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let (b, c, t) = x.dims3();
        if c != self.channels {
            return Err(SiError::Config(format!(
                "batchnorm1d: channel mismatch (expected {}, got {c})",
                self.channels
            )));
        }
        let mut y = Tensor::zeros(&[b, c, t]);
        match mode {
            Mode::Train => {
                if b < 2 {
                    return Err(SiError::Config(
                        "batchnorm1d: train mode needs batch size >= 2".into(),
                    ));
                }
                let n = b * t;
                let n_t = T::from_f64(n as f64);
                let mut xhat = vec![T::zero(); b * c * t];
                let mut inv_std = vec![T::zero(); c];
                for ci in 0..c {
                    let mut sum = T::zero();
                    for bi in 0..b {
                        for &v in x.row(bi, ci) {
                            sum += v;
                        }
                    }
                    let mean = sum / n_t;
                    let mut varsum = T::zero();
                    for bi in 0..b {
                        for &v in x.row(bi, ci) {
                            let d = v - mean;
                            varsum += d * d;
                        }
                    }
                    let var = varsum / n_t; // biased, used for normalization
                    let istd = T::one() / (var + self.eps).sqrt();
                    inv_std[ci] = istd;
                    let (g, be) = (self.gamma.value[ci], self.beta.value[ci]);
                    for bi in 0..b {
                        let base = (bi * c + ci) * t;
                        for ti in 0..t {
                            let xh = (x.data[base + ti] - mean) * istd;
                            xhat[base + ti] = xh;
                            y.data[base + ti] = g * xh + be;
                        }
                    }
                    // Running stats use the unbiased batch variance.
                    let unbiased = varsum / T::from_f64((n - 1) as f64);
                    let m = self.momentum;
                    self.running_mean[ci] = (T::one() - m) * self.running_mean[ci] + m * mean;
                    self.running_var[ci] = (T::one() - m) * self.running_var[ci] + m * unbiased;
                }
                self.cache = Some(BnCache { xhat, inv_std, shape: vec![b, c, t] });
            }
            Mode::Eval => {
                for ci in 0..c {
                    let istd = T::one() / (self.running_var[ci] + self.eps).sqrt();
                    let (g, be) = (self.gamma.value[ci], self.beta.value[ci]);
                    let mean = self.running_mean[ci];
                    for bi in 0..b {
                        let base = (bi * c + ci) * t;
                        for ti in 0..t {
                            y.data[base + ti] = g * (x.data[base + ti] - mean) * istd + be;
                        }
                    }
                }
            }
        }
        Ok(y)
    }

    pub fn backward(&mut self, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let cache = self
            .cache
            .as_ref()
            .ok_or_else(|| SiError::Config("batchnorm1d backward without cached forward".into()))?;
        let (b, c, t) = (cache.shape[0], cache.shape[1], cache.shape[2]);
        let n_t = T::from_f64((b * t) as f64);
        let mut dx = Tensor::zeros(&[b, c, t]);
        for ci in 0..c {
            let mut sum_dy = T::zero();
            let mut sum_dy_xhat = T::zero();
            for bi in 0..b {
                let base = (bi * c + ci) * t;
                for ti in 0..t {
                    let g = dy.data[base + ti];
                    sum_dy += g;
                    sum_dy_xhat += g * cache.xhat[base + ti];
                }
            }
            self.beta.grad[ci] += sum_dy;
            self.gamma.grad[ci] += sum_dy_xhat;
            let g = self.gamma.value[ci];
            let istd = cache.inv_std[ci];
            let mean_dy = sum_dy / n_t;
            let mean_dy_xhat = sum_dy_xhat / n_t;
            for bi in 0..b {
                let base = (bi * c + ci) * t;
                for ti in 0..t {
                    let d = dy.data[base + ti] - mean_dy - cache.xhat[base + ti] * mean_dy_xhat;
                    dx.data[base + ti] = g * istd * d;
                }
            }
        }
        Ok(dx)
    }
}

/// Elementwise max(x, 0).
#[derive(Debug, Clone, Default)]
pub struct Relu<T: Scalar> {
    cached_input: Option<Tensor<T>>,
}

impl<T: Scalar> Relu<T> {
    pub fn new() -> Self {
        Relu { cached_input: None }
    }

    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let mut y = x.clone();
        for v in y.data.iter_mut() {
            if *v < T::zero() {
                *v = T::zero();
            }
        }
        if mode == Mode::Train {
            self.cached_input = Some(x.clone());
        }
        Ok(y)
    }

    pub fn backward(&mut self, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let x = self
            .cached_input
            .as_ref()
            .ok_or_else(|| SiError::Config("relu backward without cached forward".into()))?;
        let mut dx = dy.clone();
        for (d, &v) in dx.data.iter_mut().zip(&x.data) {
            if v <= T::zero() {
                *d = T::zero();
            }
        }
        Ok(dx)
    }
}

/// Repeat every frame `factor` times along the time axis.
#[derive(Debug, Clone)]
pub struct Upsample<T: Scalar> {
    pub factor: usize,
    _marker: std::marker::PhantomData<T>,
}

impl<T: Scalar> Upsample<T> {
    pub fn new(factor: usize) -> Self {
        assert!(factor >= 1);
        Upsample { factor, _marker: std::marker::PhantomData }
    }

    pub fn forward(&mut self, x: &Tensor<T>, _mode: Mode) -> Result<Tensor<T>> {
        let (b, c, t) = x.dims3();
        let mut y = Tensor::zeros(&[b, c, t * self.factor]);
        for bi in 0..b {
            for ci in 0..c {
                let x_row = x.row(bi, ci);
                let y_row = y.row_mut(bi, ci);
                for (ti, &v) in x_row.iter().enumerate() {
                    y_row[ti * self.factor..(ti + 1) * self.factor].fill(v);
                }
            }
        }
        Ok(y)
    }

    pub fn backward(&mut self, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let (b, c, t_out) = dy.dims3();
        let t = t_out / self.factor;
        let mut dx = Tensor::zeros(&[b, c, t]);
        for bi in 0..b {
            for ci in 0..c {
                let dy_row = dy.row(bi, ci);
                let dx_row = dx.row_mut(bi, ci);
                for ti in 0..t {
                    let mut acc = T::zero();
                    for &g in &dy_row[ti * self.factor..(ti + 1) * self.factor] {
                        acc += g;
                    }
                    dx_row[ti] = acc;
                }
            }
        }
        Ok(dx)
    }
}

/// Non-overlapping mean over `window` frames (stride == window).
#[derive(Debug, Clone)]
pub struct AvgPool1d<T: Scalar> {
    pub window: usize,
    _marker: std::marker::PhantomData<T>,
}

impl<T: Scalar> AvgPool1d<T> {
    pub fn new(window: usize) -> Self {
        assert!(window >= 1);
        AvgPool1d { window, _marker: std::marker::PhantomData }
    }

    pub fn forward(&mut self, x: &Tensor<T>, _mode: Mode) -> Result<Tensor<T>> {
        let (b, c, t) = x.dims3();
        if t % self.window != 0 {
            return Err(SiError::Config(format!(
                "avgpool1d: frame count {t} not divisible by window {}",
                self.window
            )));
        }
        let t_out = t / self.window;
        let inv = T::one() / T::from_f64(self.window as f64);
        let mut y = Tensor::zeros(&[b, c, t_out]);
        for bi in 0..b {
            for ci in 0..c {
                let x_row = x.row(bi, ci);
                let y_row = y.row_mut(bi, ci);
                for (to, yv) in y_row.iter_mut().enumerate() {
                    let mut acc = T::zero();
                    for &v in &x_row[to * self.window..(to + 1) * self.window] {
                        acc += v;
                    }
                    *yv = acc * inv;
                }
            }
        }
        Ok(y)
    }

    pub fn backward(&mut self, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let (b, c, t_out) = dy.dims3();
        let inv = T::one() / T::from_f64(self.window as f64);
        let mut dx = Tensor::zeros(&[b, c, t_out * self.window]);
        for bi in 0..b {
            for ci in 0..c {
                let dy_row = dy.row(bi, ci);
                let dx_row = dx.row_mut(bi, ci);
                for (to, &g) in dy_row.iter().enumerate() {
                    let spread = g * inv;
                    dx_row[to * self.window..(to + 1) * self.window].fill(spread);
                }
            }
        }
        Ok(dx)
    }
}

/// A layer in the TCN stack.
#[derive(Debug, Clone)]
pub enum Layer<T: Scalar> {
    Conv1d(Conv1d<T>),
    BatchNorm1d(BatchNorm1d<T>),
    Relu(Relu<T>),
    Upsample(Upsample<T>),
    AvgPool(AvgPool1d<T>),
}

impl<T: Scalar> Layer<T> {
    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        match self {
            Layer::Conv1d(l) => l.forward(x, mode),
            Layer::BatchNorm1d(l) => l.forward(x, mode),
            Layer::Relu(l) => l.forward(x, mode),
            Layer::Upsample(l) => l.forward(x, mode),
            Layer::AvgPool(l) => l.forward(x, mode),
        }
    }

    pub fn backward(&mut self, dy: &Tensor<T>) -> Result<Tensor<T>> {
        match self {
            Layer::Conv1d(l) => l.backward(dy),
            Layer::BatchNorm1d(l) => l.backward(dy),
            Layer::Relu(l) => l.backward(dy),
            Layer::Upsample(l) => l.backward(dy),
            Layer::AvgPool(l) => l.backward(dy),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        match self {
            Layer::Conv1d(l) => vec![&mut l.weight, &mut l.bias],
            Layer::BatchNorm1d(l) => vec![&mut l.gamma, &mut l.beta],
            _ => Vec::new(),
        }
    }

    pub fn params(&self) -> Vec<&Param<T>> {
        match self {
            Layer::Conv1d(l) => vec![&l.weight, &l.bias],
            Layer::BatchNorm1d(l) => vec![&l.gamma, &l.beta],
            _ => Vec::new(),
        }
    }

    /// Drop forward caches (used after an optimizer step to free memory).
    pub fn clear_cache(&mut self) {
        match self {
            Layer::Conv1d(l) => l.cached_input = None,
            Layer::BatchNorm1d(l) => l.cache = None,
            Layer::Relu(l) => l.cached_input = None,
            _ => {}
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t3(shape: &[usize], data: Vec<f64>) -> Tensor<f64> {
        Tensor::from_vec(shape, data)
    }

    #[test]
    fn conv_identity_kernel_passes_through() {
        let mut conv = Conv1d::<f64>::new(2, 2, 1, 1);
        // weight[o,c,0] = identity across channels
        conv.weight.value = vec![1.0, 0.0, 0.0, 1.0];
        let x = t3(&[1, 2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let y = conv.forward(&x, Mode::Eval).unwrap();
        assert_eq!(y.data, x.data);
    }

    #[test]
    fn conv_hand_case_matches_direct_sum_oracle() {
        // x=[1,2,3,4], kernel [1,0,-1], dilation 1, zero-padded ends.
        let mut conv = Conv1d::<f64>::new(1, 1, 3, 1);
        conv.weight.value = vec![1.0, 0.0, -1.0];
        let x = t3(&[1, 1, 4], vec![1.0, 2.0, 3.0, 4.0]);
        let y = conv.forward(&x, Mode::Eval).unwrap();
        // Oracle: y[t] = sum_k w[k] * x[t + k - 1] with out-of-range zeros.
        let xin = [1.0, 2.0, 3.0, 4.0];
        let w = [1.0, 0.0, -1.0];
        let mut expect = [0.0f64; 4];
        for (t, e) in expect.iter_mut().enumerate() {
            for (k, &wk) in w.iter().enumerate() {
                let idx = t as isize + k as isize - 1;
                if (0..4).contains(&idx) {
                    *e += wk * xin[idx as usize];
                }
            }
        }
        assert_eq!(y.data, expect.to_vec());
        assert_eq!(y.data, vec![-2.0, -2.0, -2.0, 3.0]);
    }

    #[test]
    fn conv_rejects_channel_mismatch() {
        let mut conv = Conv1d::<f64>::new(3, 1, 1, 1);
        let x = t3(&[1, 2, 2], vec![0.0; 4]);
        assert!(conv.forward(&x, Mode::Eval).is_err());
    }

    #[test]
    fn dilated_stack_receptive_field_is_43() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut convs: Vec<Conv1d<f64>> = [1usize, 4, 16]
            .iter()
            .map(|&d| {
                let mut c = Conv1d::new(1, 1, 3, d);
                for w in c.weight.value.iter_mut() {
                    *w = rng.gen_range(0.1..1.0); // positive: no cancellation
                }
                c
            })
            .collect();
        let t_len = 120;
        let run = |convs: &mut Vec<Conv1d<f64>>, x: &Tensor<f64>| -> Tensor<f64> {
            let mut h = x.clone();
            for c in convs.iter_mut() {
                h = c.forward(&h, Mode::Eval).unwrap();
            }
            h
        };
        let x0 = t3(&[1, 1, t_len], vec![0.1; t_len]);
        let y0 = run(&mut convs, &x0);
        let mut x1 = x0.clone();
        let probe = 60;
        x1.data[probe] += 1.0;
        let y1 = run(&mut convs, &x1);
        let changed: Vec<usize> = (0..t_len)
            .filter(|&t| (y1.data[t] - y0.data[t]).abs() > 1e-12)
            .collect();
        // RF = 1 + 2*(1+4+16) = 43: every change is confined to +-21
        // frames around the probe and both edges are reached. (A single
        // impulse leaves dilation holes inside the span, so the changed
        // set is not dense.)
        assert_eq!(*changed.first().unwrap(), probe - 21);
        assert_eq!(*changed.last().unwrap(), probe + 21);
        assert!(changed.iter().all(|&t| t >= probe - 21 && t <= probe + 21));
        assert_eq!(changed.last().unwrap() - changed.first().unwrap() + 1, 43);
    }

    #[test]
    fn batchnorm_train_normalizes_per_channel() {
        let mut bn = BatchNorm1d::<f64>::new(2);
        let x = t3(&[2, 2, 3], (0..12).map(|i| i as f64 * 0.7 - 2.0).collect());
        let y = bn.forward(&x, Mode::Train).unwrap();
        for c in 0..2 {
            let mut vals = Vec::new();
            for b in 0..2 {
                vals.extend_from_slice(y.row(b, c));
            }
            let mean: f64 = vals.iter().sum::<f64>() / vals.len() as f64;
            let var: f64 = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
            assert!(mean.abs() < 1e-10);
            assert!((var - 1.0).abs() < 1e-4); // eps shifts variance slightly
        }
    }

    #[test]
    fn batchnorm_affine_params_shift_and_scale() {
        let mut bn = BatchNorm1d::<f64>::new(1);
        bn.gamma.value = vec![2.0];
        bn.beta.value = vec![3.0];
        let x = t3(&[2, 1, 4], vec![-1.5, -0.5, 0.5, 1.5, -1.5, -0.5, 0.5, 1.5]);
        let y = bn.forward(&x, Mode::Train).unwrap();
        let mean: f64 = y.data.iter().sum::<f64>() / 8.0;
        let var: f64 = y.data.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 8.0;
        assert!((mean - 3.0).abs() < 1e-10);
        assert!((var.sqrt() - 2.0).abs() < 1e-4);
    }

    #[test]
    fn batchnorm_rejects_batch_of_one_in_train() {
        let mut bn = BatchNorm1d::<f64>::new(1);
        let x = t3(&[1, 1, 4], vec![1.0, 2.0, 3.0, 4.0]);
        assert!(bn.forward(&x, Mode::Train).is_err());
        assert!(bn.forward(&x, Mode::Eval).is_ok());
    }

    #[test]
    fn upsample_repeats_frames() {
        let mut up = Upsample::<f64>::new(4);
        let x = t3(&[1, 1, 2], vec![1.0, 2.0]);
        let y = up.forward(&x, Mode::Eval).unwrap();
        assert_eq!(y.data, vec![1.0, 1.0, 1.0, 1.0, 2.0, 2.0, 2.0, 2.0]);
        let dy = t3(&[1, 1, 8], vec![1.0; 8]);
        let dx = up.backward(&dy).unwrap();
        assert_eq!(dx.data, vec![4.0, 4.0]);
    }

    #[test]
    fn avgpool_hand_case() {
        let mut pool = AvgPool1d::<f64>::new(5);
        let x = t3(&[1, 1, 10], (1..=10).map(|v| v as f64).collect());
        let y = pool.forward(&x, Mode::Eval).unwrap();
        assert_eq!(y.data, vec![3.0, 8.0]);
        // Constant input stays constant.
        let x = t3(&[1, 1, 10], vec![2.5; 10]);
        let y = pool.forward(&x, Mode::Eval).unwrap();
        assert!(y.data.iter().all(|&v| (v - 2.5).abs() < 1e-12));
    }

    #[test]
    fn avgpool_rejects_indivisible_length() {
        let mut pool = AvgPool1d::<f64>::new(5);
        let x = t3(&[1, 1, 7], vec![0.0; 7]);
        assert!(pool.forward(&x, Mode::Eval).is_err());
    }

    #[test]
    fn upsample_then_avgpool_is_identity_on_values() {
        let mut up = Upsample::<f64>::new(5);
        let mut pool = AvgPool1d::<f64>::new(5);
        let x = t3(&[1, 2, 4], (0..8).map(|v| v as f64 * 0.3).collect());
        let y = pool.forward(&up.forward(&x, Mode::Eval).unwrap(), Mode::Eval).unwrap();
        for (a, b) in x.data.iter().zip(&y.data) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
