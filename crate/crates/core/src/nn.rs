//! Layer primitives shared by the two sub-networks and the perceptual
//! backbone: convolution with fan-in uniform init, and parameter plumbing for
//! optimizers and checkpoints.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::graph::{Graph, Value};
use crate::ops::ConvSpec;
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::tensor::{Shape, Tensor};

/// Named view over a model's parameters, in a stable traversal order.
pub type ParamList<'a, T> = Vec<(String, &'a Arc<Tensor<T>>)>;
pub type ParamListMut<'a, T> = Vec<(String, &'a mut Arc<Tensor<T>>)>;

/// Convolution layer. Weights `[c_out, c_in, k*k]`, bias `[c_out, 1, 1]`.
#[derive(Debug, Clone)]
pub struct Conv2dLayer<T> {
    pub w: Arc<Tensor<T>>,
    pub b: Arc<Tensor<T>>,
    pub c_in: usize,
    pub c_out: usize,
    pub spec: ConvSpec,
}

impl<T: Scalar> Conv2dLayer<T> {
    /// Fan-in uniform weights, zero bias.
    pub fn init(c_in: usize, c_out: usize, k: usize, stride: usize, pad: usize, rng: &mut Rng) -> Self {
        let fan_in = (c_in * k * k) as f64;
        let bound = 1.0 / fan_in.sqrt();
        let w = Tensor::uniform(Shape::new(c_out, c_in, k * k), -bound, bound, rng);
        let b = Tensor::zeros(Shape::new(c_out, 1, 1));
        Conv2dLayer {
            w: Arc::new(w),
            b: Arc::new(b),
            c_in,
            c_out,
            spec: ConvSpec { k, stride, pad },
        }
    }

    /// 3x3, stride 1, padding 1.
    pub fn init3(c_in: usize, c_out: usize, rng: &mut Rng) -> Self {
        Self::init(c_in, c_out, 3, 1, 1, rng)
    }

    /// 1x1 pointwise.
    pub fn init1(c_in: usize, c_out: usize, rng: &mut Rng) -> Self {
        Self::init(c_in, c_out, 1, 1, 0, rng)
    }

    /// Forward with trainable parameters.
    pub fn forward(&self, g: &mut Graph<T>, x: &Value<T>) -> Value<T> {
        let w = g.param(&self.w);
        let b = g.param(&self.b);
        g.conv2d(x, &w, &b, self.spec)
    }

    /// Forward with frozen parameters (no tape entries for w/b).
    pub fn forward_frozen(&self, g: &mut Graph<T>, x: &Value<T>) -> Value<T> {
        let w = g.frozen(&self.w);
        let b = g.frozen(&self.b);
        g.conv2d(x, &w, &b, self.spec)
    }

    pub fn param_count(&self) -> usize {
        self.w.len() + self.b.len()
    }

    pub fn visit<'a>(&'a self, prefix: &str, out: &mut ParamList<'a, T>) {
        out.push((alloc::format!("{prefix}.w"), &self.w));
        out.push((alloc::format!("{prefix}.b"), &self.b));
    }

    pub fn visit_mut<'a>(&'a mut self, prefix: &str, out: &mut ParamListMut<'a, T>) {
        out.push((alloc::format!("{prefix}.w"), &mut self.w));
        out.push((alloc::format!("{prefix}.b"), &mut self.b));
    }
}

/// Load named tensors into a parameter list, checking shapes.
pub fn load_params<T: Scalar>(
    params: ParamListMut<'_, T>,
    mut source: impl FnMut(&str) -> Option<Tensor<T>>,
) -> crate::error::Result<()> {
    for (name, slot) in params {
        let t = source(&name).ok_or_else(|| {
            crate::error::CoreError::CheckpointMismatch(alloc::format!("missing tensor `{name}`"))
        })?;
        if t.shape() != slot.shape() {
            return Err(crate::error::CoreError::CheckpointMismatch(alloc::format!(
                "tensor `{name}` has shape {}, expected {}",
                t.shape(),
                slot.shape()
            )));
        }
        *slot = Arc::new(t);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_seed_deterministic() {
        let a = Conv2dLayer::<f32>::init3(2, 4, &mut Rng::new(9));
        let b = Conv2dLayer::<f32>::init3(2, 4, &mut Rng::new(9));
        assert_eq!(a.w, b.w);
        assert!(a.b.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn fan_in_bound_respected() {
        let l = Conv2dLayer::<f64>::init3(8, 8, &mut Rng::new(1));
        let bound = 1.0 / ((8.0 * 9.0) as f64).sqrt();
        assert!(l.w.data().iter().all(|v| v.abs() <= bound));
    }

    #[test]
    fn param_count_covers_weights_and_bias() {
        let l = Conv2dLayer::<f32>::init3(2, 4, &mut Rng::new(1));
        assert_eq!(l.param_count(), 2 * 4 * 9 + 4);
    }

    #[test]
    fn load_params_checks_shape() {
        let mut l = Conv2dLayer::<f32>::init1(2, 2, &mut Rng::new(1));
        let mut params = Vec::new();
        l.visit_mut("c", &mut params);
        let bad = load_params(params, |_| Some(Tensor::zeros(Shape::new(1, 1, 1))));
        assert!(bad.is_err());
    }
}
