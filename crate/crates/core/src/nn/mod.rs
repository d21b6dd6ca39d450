//! Reverse-mode-differentiated layers and the dilated TCN regressor.
//!
//! The layer set is deliberately small: 1-D (dilated) convolutions with
//! "same" padding, BatchNorm1d, ReLU, frame-repeat upsampling, and
//! non-overlapping average pooling. Each layer owns its parameters and the
//! forward cache its backward needs; a model is an ordered layer stack.
//! Training runs in f32; gradient checking builds the same stack in f64.

mod gradcheck;
mod layers;
mod loss;
mod model;
mod optim;
mod tensor;

pub use gradcheck::{analytic_grads, grad_check, numeric_grad, sample_coordinates, GradCheckReport};
pub use layers::{AvgPool1d, BatchNorm1d, Conv1d, Layer, Mode, Relu, Upsample};
pub use loss::{mse_loss, mse_loss_masked};
pub use model::{build_tcn, expected_param_count, load_checkpoint, save_checkpoint, TargetStat,
                TcnConfig, TcnModel, TrainState, STANDARD_WIDTH};
pub use optim::{lr_schedule, Adam};
pub use tensor::{Param, Tensor};

use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Element type for tensors and layers: f32 for training, f64 for checks.
pub trait Scalar:
    num_traits::Float + num_traits::NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
    fn from_f32(v: f32) -> Self;
    fn to_f32(self) -> f32;
}

impl Scalar for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
    fn from_f32(v: f32) -> Self {
        v
    }
    fn to_f32(self) -> f32 {
        self
    }
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn from_f32(v: f32) -> Self {
        v as f64
    }
    fn to_f32(self) -> f32 {
        self as f32
    }
}
