//! Gradient verification against central finite differences.
//!
//! Runs the model + masked MSE loss in train mode at f64 and compares the
//! analytic parameter gradients with (f(p+h) - f(p-h)) / 2h on a seeded
//! sample of coordinates. BatchNorm running-stat updates during the probe
//! forwards are harmless: train-mode loss depends only on batch statistics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::loss::mse_loss_masked;
use super::model::TcnModel;
use super::tensor::Tensor;
use super::{Mode, Scalar};
use crate::error::Result;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub checked: usize,
    /// (param index, element index, analytic, numeric) of the worst case.
    pub worst: (usize, usize, f64, f64),
}

/// Uniformly sample `n` (param, element) coordinates over all parameters.
pub fn sample_coordinates<T: Scalar>(
    model: &TcnModel<T>,
    n: usize,
    seed: u64,
) -> Vec<(usize, usize)> {
    let sizes: Vec<usize> = model.params().iter().map(|p| p.len()).collect();
    let total: usize = sizes.iter().sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coords = Vec::with_capacity(n);
    for _ in 0..n {
        let mut flat = rng.gen_range(0..total);
        for (pi, &size) in sizes.iter().enumerate() {
            if flat < size {
                coords.push((pi, flat));
                break;
            }
            flat -= size;
        }
    }
    coords
}

/// Full analytic gradients per parameter, via one forward/backward pass.
pub fn analytic_grads<T: Scalar>(
    model: &mut TcnModel<T>,
    input: &Tensor<T>,
    target: &Tensor<T>,
    mask: &[bool],
) -> Result<Vec<Vec<T>>> {
    model.zero_grad();
    let pred = model.forward(input, Mode::Train)?;
    let (_, dpred) = mse_loss_masked(&pred, target, mask)?;
    model.backward(&dpred)?;
    Ok(model.params().iter().map(|p| p.grad.clone()).collect())
}

/// Central finite difference of the loss w.r.t. one parameter element.
pub fn numeric_grad<T: Scalar>(
    model: &mut TcnModel<T>,
    input: &Tensor<T>,
    target: &Tensor<T>,
    mask: &[bool],
    param: usize,
    element: usize,
    h: f64,
) -> Result<f64> {
    let original = model.params()[param].value[element];
    let hs = T::from_f64(h);

    model.params_mut()[param].value[element] = original + hs;
    let pred = model.forward(input, Mode::Train)?;
    let (loss_plus, _) = mse_loss_masked(&pred, target, mask)?;

    model.params_mut()[param].value[element] = original - hs;
    let pred = model.forward(input, Mode::Train)?;
    let (loss_minus, _) = mse_loss_masked(&pred, target, mask)?;

    model.params_mut()[param].value[element] = original;
    Ok((loss_plus.to_f64() - loss_minus.to_f64()) / (2.0 * h))
}

/// Compare analytic and numeric gradients on `n_samples` seeded coordinates;
/// the relative error uses a 1e-6 floor so exactly-zero gradients do not
/// blow up the ratio.
pub fn grad_check<T: Scalar>(
    model: &mut TcnModel<T>,
    input: &Tensor<T>,
    target: &Tensor<T>,
    mask: &[bool],
    n_samples: usize,
    h: f64,
    seed: u64,
) -> Result<GradCheckReport> {
    let coords = sample_coordinates(model, n_samples, seed);
    let grads = analytic_grads(model, input, target, mask)?;
    let mut report = GradCheckReport { max_rel_error: 0.0, checked: 0, worst: (0, 0, 0.0, 0.0) };
    for (pi, ei) in coords {
        let analytic = grads[pi][ei].to_f64();
        let numeric = numeric_grad(model, input, target, mask, pi, ei, h)?;
        let rel = relative_error(analytic, numeric);
        report.checked += 1;
        if rel > report.max_rel_error {
            report.max_rel_error = rel;
            report.worst = (pi, ei, analytic, numeric);
        }
    }
    Ok(report)
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::model::{build_tcn, TcnConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn reduced_model() -> (TcnModel<f64>, Tensor<f64>, Tensor<f64>, Vec<bool>) {
        let config = TcnConfig { in_channels: 8, n_targets: 6, width: 8, seed: 21 };
        let model = build_tcn::<f64>(&config).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let input = Tensor::from_vec(
            &[2, 8, 25],
            (0..2 * 8 * 25).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        );
        let target = Tensor::from_vec(
            &[2, 6, 20],
            (0..2 * 6 * 20).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        );
        // Mask out the tail frames of the second batch item, like padding.
        let mut mask = vec![true; 2 * 20];
        for m in mask.iter_mut().skip(35) {
            *m = false;
        }
        (model, input, target, mask)
    }

    #[test]
    fn linear_only_model_is_exact() {
        // Convs without BN/ReLU are linear in their parameters: central
        // differences are exact up to floating-point roundoff.
        let config = TcnConfig { in_channels: 4, n_targets: 6, width: 4, seed: 9 };
        let mut model = build_tcn::<f64>(&config).unwrap();
        model.layers.retain(|l| {
            matches!(
                l,
                crate::nn::Layer::Conv1d(_)
                    | crate::nn::Layer::Upsample(_)
                    | crate::nn::Layer::AvgPool(_)
            )
        });
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let input = Tensor::from_vec(
            &[2, 4, 25],
            (0..2 * 4 * 25).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        );
        let target = Tensor::from_vec(
            &[2, 6, 20],
            (0..2 * 6 * 20).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        );
        let mask = vec![true; 40];
        // Per-coordinate the loss is exactly quadratic, so central
        // differences are exact for any h; a large h keeps floating-point
        // cancellation out of the comparison.
        let coords = sample_coordinates(&model, 120, 4);
        let grads = analytic_grads(&mut model, &input, &target, &mask).unwrap();
        let mut max_rel: f64 = 0.0;
        for (pi, ei) in coords {
            let numeric = numeric_grad(&mut model, &input, &target, &mask, pi, ei, 1e-2).unwrap();
            let a = grads[pi][ei];
            max_rel = max_rel.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1.0));
        }
        assert!(max_rel < 1e-8, "linear gradients should be exact, got {max_rel}");
    }

    #[test]
    fn full_reduced_tcn_passes_at_1e_4() {
        let (mut model, input, target, mask) = reduced_model();
        let report = grad_check(&mut model, &input, &target, &mask, 220, 1e-5, 13).unwrap();
        assert!(report.checked >= 200);
        assert!(report.max_rel_error < 1e-4, "{report:?}");
    }

    #[test]
    fn corrupted_conv_backward_is_detected() {
        let (mut model, input, target, mask) = reduced_model();
        let coords = sample_coordinates(&model, 220, 13);
        let mut grads = analytic_grads(&mut model, &input, &target, &mask).unwrap();
        // Simulate a buggy conv backward: scale the first conv's weight
        // gradients by 1.5.
        for g in grads[0].iter_mut() {
            *g *= 1.5;
        }
        let mut max_rel: f64 = 0.0;
        for (pi, ei) in coords {
            let numeric =
                numeric_grad(&mut model, &input, &target, &mask, pi, ei, 1e-5).unwrap();
            max_rel = max_rel.max(relative_error(grads[pi][ei], numeric));
        }
        assert!(max_rel > 1e-2, "harness failed to flag corrupted gradients: {max_rel}");
    }
}
