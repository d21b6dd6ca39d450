//! Adam optimizer and the staircase learning-rate schedule.

use super::tensor::Param;
use super::Scalar;
use crate::error::{Result, SiError};

/// Adam with bias correction (beta1 0.9, beta2 0.999, eps 1e-8).
#[derive(Debug, Clone)]
pub struct Adam<T: Scalar> {
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    pub step_count: u64,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(param_sizes: &[usize]) -> Self {
        Adam {
            beta1: T::from_f64(0.9),
            beta2: T::from_f64(0.999),
            eps: T::from_f64(1e-8),
            step_count: 0,
            m: param_sizes.iter().map(|&n| vec![T::zero(); n]).collect(),
            v: param_sizes.iter().map(|&n| vec![T::zero(); n]).collect(),
        }
    }

    /// Apply one update using each parameter's accumulated gradient.
    pub fn step(&mut self, params: &mut [&mut Param<T>], lr: T) -> Result<()> {
        if params.len() != self.m.len() {
            return Err(SiError::Config(format!(
                "adam: {} parameter tensors, optimizer built for {}",
                params.len(),
                self.m.len()
            )));
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let bc1 = T::one() - self.beta1.powi(t);
        let bc2 = T::one() - self.beta2.powi(t);
        for (i, p) in params.iter_mut().enumerate() {
            if p.value.len() != self.m[i].len() {
                return Err(SiError::Config(format!(
                    "adam: parameter {i} size changed ({} vs {})",
                    p.value.len(),
                    self.m[i].len()
                )));
            }
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for j in 0..p.value.len() {
                let g = p.grad[j];
                m[j] = self.beta1 * m[j] + (T::one() - self.beta1) * g;
                v[j] = self.beta2 * v[j] + (T::one() - self.beta2) * g * g;
                let m_hat = m[j] / bc1;
                let v_hat = v[j] / bc2;
                p.value[j] = p.value[j] - lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }

    pub fn moments(&self) -> (&[Vec<T>], &[Vec<T>]) {
        (&self.m, &self.v)
    }

    pub fn restore_moments(&mut self, m: Vec<Vec<T>>, v: Vec<Vec<T>>, step_count: u64) {
        self.m = m;
        self.v = v;
        self.step_count = step_count;
    }
}

/// Staircase exponential decay: lr = base * gamma^(epoch / step_epochs),
/// integer division, so the rate halves every `step_epochs` epochs with the
/// default gamma of 0.5.
pub fn lr_schedule(epoch: usize, base_lr: f64, gamma: f64, step_epochs: usize) -> f64 {
    base_lr * gamma.powi((epoch / step_epochs.max(1)) as i32)
}
