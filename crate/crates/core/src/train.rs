//! Training configuration, the linear-decay learning rate schedule and the
//! Adam optimizer. The epoch loop itself (file IO, checkpoints, logging)
//! lives in the companion crate; everything here is pure state arithmetic.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::error::{CoreError, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Which sub-network a run trains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Stage {
    Cc,
    Hr,
}

impl Stage {
    pub fn name(&self) -> &'static str {
        match self {
            Stage::Cc => "cc",
            Stage::Hr => "hr",
        }
    }
}

/// Negative sample source for the stage-2 contrastive loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum NegativeSource {
    /// Stage-1 output (the cascade default).
    CcOutput,
    /// Raw underwater image (the raw-as-negative ablation).
    Raw,
}

/// Hyperparameters of one training stage.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainConfig {
    pub stage: Stage,
    pub batch_size: usize,
    pub epochs: usize,
    /// Learning rate for the color correction stage.
    pub lr_cc: f64,
    /// Learning rate for the haze removal stage.
    pub lr_hr: f64,
    /// Adam first-moment coefficient.
    pub beta1: f64,
    /// Epoch at which the linear ramp to zero begins.
    pub decay_start_epoch: usize,
    pub seed: u64,
    pub use_contrastive: bool,
    pub negative_source: NegativeSource,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            stage: Stage::Cc,
            batch_size: 8,
            epochs: 150,
            lr_cc: 5e-4,
            lr_hr: 1e-3,
            beta1: 0.5,
            decay_start_epoch: 75,
            seed: 0,
            use_contrastive: true,
            negative_source: NegativeSource::CcOutput,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(CoreError::config("epochs and batch_size must be positive"));
        }
        if self.decay_start_epoch >= self.epochs {
            return Err(CoreError::config(format_args!(
                "decay_start_epoch {} must be < epochs {}",
                self.decay_start_epoch, self.epochs
            )));
        }
        if self.lr_cc <= 0.0 || self.lr_hr <= 0.0 {
            return Err(CoreError::config("learning rates must be positive"));
        }
        if !(0.0..1.0).contains(&self.beta1) {
            return Err(CoreError::config("beta1 must be in [0, 1)"));
        }
        Ok(())
    }

    pub fn base_lr(&self) -> f64 {
        match self.stage {
            Stage::Cc => self.lr_cc,
            Stage::Hr => self.lr_hr,
        }
    }
}

/// Learning rate at an epoch: constant until `decay_start_epoch`, then a
/// linear ramp reaching zero at `epochs`.
pub fn lr_at_epoch(config: &TrainConfig, epoch: usize) -> Result<f64> {
    if epoch >= config.epochs {
        return Err(CoreError::invalid(format_args!(
            "epoch {epoch} out of range (epochs = {})",
            config.epochs
        )));
    }
    let base = config.base_lr();
    if epoch < config.decay_start_epoch {
        return Ok(base);
    }
    let remaining = (config.epochs - epoch) as f64;
    let span = (config.epochs - config.decay_start_epoch) as f64;
    Ok(base * remaining / span)
}

/// Adam with bias correction; beta2 = 0.999, eps = 1e-8.
pub struct Adam<T> {
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: usize,
    m: Vec<Tensor<T>>,
    v: Vec<Tensor<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(param_shapes: &[crate::tensor::Shape], beta1: f64) -> Self {
        Adam {
            beta1,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: param_shapes.iter().map(|&s| Tensor::zeros(s)).collect(),
            v: param_shapes.iter().map(|&s| Tensor::zeros(s)).collect(),
        }
    }

    pub fn num_params(&self) -> usize {
        self.m.len()
    }

    /// One update. `params` and `grads` must be aligned with the shapes this
    /// optimizer was built from.
    pub fn step(&mut self, params: Vec<(String, &mut Arc<Tensor<T>>)>, grads: &[Tensor<T>], lr: f64) {
        assert_eq!(params.len(), self.m.len(), "optimizer/param count mismatch");
        assert_eq!(grads.len(), self.m.len(), "optimizer/grad count mismatch");
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let b1 = T::from_f64(self.beta1);
        let nb1 = T::from_f64(1.0 - self.beta1);
        let b2 = T::from_f64(self.beta2);
        let nb2 = T::from_f64(1.0 - self.beta2);
        let step_scale = T::from_f64(lr / bc1);
        let denom_scale = T::from_f64(1.0 / bc2);
        let eps = T::from_f64(self.eps);

        for (i, (_, slot)) in params.into_iter().enumerate() {
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            let g = &grads[i];
            debug_assert_eq!(m.shape(), g.shape());
            let tensor = Arc::make_mut(slot);
            for (((p, mv), vv), &gv) in tensor
                .data_mut()
                .iter_mut()
                .zip(m.data_mut())
                .zip(v.data_mut())
                .zip(g.data())
            {
                *mv = b1 * *mv + nb1 * gv;
                *vv = b2 * *vv + nb2 * gv * gv;
                let denom = (*vv * denom_scale).sqrt() + eps;
                *p = *p - step_scale * *mv / denom;
            }
        }
    }
}
