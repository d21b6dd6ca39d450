//! Mean-squared-error loss with a valid-frame mask.

use super::tensor::Tensor;
use super::Scalar;
use crate::error::{Result, SiError};

/// Masked MSE over (batch, channels, time) predictions. The mask has one
/// entry per (batch, frame); masked-out frames contribute nothing to the
/// loss and receive exactly-zero prediction gradients. Returns the loss and
/// dL/dpred.
pub fn mse_loss_masked<T: Scalar>(
    pred: &Tensor<T>,
    target: &Tensor<T>,
    mask: &[bool],
) -> Result<(T, Tensor<T>)> {
    if pred.shape != target.shape {
        return Err(SiError::Config(format!(
            "mse_loss: shape mismatch {:?} vs {:?}",
            pred.shape, target.shape
        )));
    }
    let (b, c, t) = pred.dims3();
    if mask.len() != b * t {
        return Err(SiError::Config(format!(
            "mse_loss: mask has {} entries for {} frames",
            mask.len(),
            b * t
        )));
    }
    let n_valid = mask.iter().filter(|&&m| m).count();
    if n_valid == 0 {
        return Err(SiError::Config("mse_loss: empty mask".into()));
    }
    let denom = T::from_f64((n_valid * c) as f64);
    let mut loss = T::zero();
    let mut grad = Tensor::zeros(&[b, c, t]);
    for bi in 0..b {
        for ci in 0..c {
            let base = (bi * c + ci) * t;
            for ti in 0..t {
                if !mask[bi * t + ti] {
                    continue;
                }
                let d = pred.data[base + ti] - target.data[base + ti];
                loss += d * d;
                grad.data[base + ti] = T::from_f64(2.0) * d / denom;
            }
        }
    }
    Ok((loss / denom, grad))
}

/// MSE over every frame (full mask).
pub fn mse_loss<T: Scalar>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<(T, Tensor<T>)> {
    let (b, _, t) = pred.dims3();
    mse_loss_masked(pred, target, &vec![true; b * t])
}
