//! Color correction sub-network: a residual corrector over normalized Lab
//! chroma. Two conv-ReLU layers lift chroma into feature space, a stack of
//! feature attention blocks refines it, and a bottleneck head emits a chroma
//! delta that is added back to the input and squashed with tanh.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{CoreError, Result};
use crate::graph::{Graph, Value};
use crate::image::NormalizedChroma;
use crate::nn::{Conv2dLayer, ParamList, ParamListMut};
use crate::rng::Rng;
use crate::scalar::Scalar;

/// Channel count of attention bottlenecks (width / ATTN_REDUCTION, min 1).
const ATTN_REDUCTION: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CcNetConfig {
    /// Channel count of internal features.
    pub base_width: usize,
    /// Number of feature attention blocks. 5 unless an ablation overrides it.
    pub num_fab: usize,
    /// Spatial kernel extent of the non-attention convolutions.
    pub kernel_size: usize,
}

impl Default for CcNetConfig {
    fn default() -> Self {
        CcNetConfig { base_width: 64, num_fab: 5, kernel_size: 3 }
    }
}

impl CcNetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.base_width < 8 {
            return Err(CoreError::config(format_args!(
                "base_width must be >= 8, got {}",
                self.base_width
            )));
        }
        if self.num_fab == 0 {
            return Err(CoreError::config("num_fab must be >= 1"));
        }
        if self.kernel_size % 2 == 0 || self.kernel_size == 0 {
            return Err(CoreError::config("kernel_size must be odd"));
        }
        Ok(())
    }
}

/// Residual block with channel and pixel attention.
#[derive(Debug, Clone)]
pub struct FeatureAttention<T> {
    pub conv1: Conv2dLayer<T>,
    pub conv2: Conv2dLayer<T>,
    pub ca_down: Conv2dLayer<T>,
    pub ca_up: Conv2dLayer<T>,
    pub pa_down: Conv2dLayer<T>,
    pub pa_out: Conv2dLayer<T>,
}

impl<T: Scalar> FeatureAttention<T> {
    pub fn init(width: usize, k: usize, rng: &mut Rng) -> Self {
        let attn = (width / ATTN_REDUCTION).max(1);
        let pad = k / 2;
        FeatureAttention {
            conv1: Conv2dLayer::init(width, width, k, 1, pad, rng),
            conv2: Conv2dLayer::init(width, width, k, 1, pad, rng),
            ca_down: Conv2dLayer::init1(width, attn, rng),
            ca_up: Conv2dLayer::init1(attn, width, rng),
            pa_down: Conv2dLayer::init1(width, attn, rng),
            pa_out: Conv2dLayer::init1(attn, 1, rng),
        }
    }

    /// conv -> ReLU -> conv, channel attention, pixel attention, residual add.
    pub fn forward(&self, g: &mut Graph<T>, x: &Value<T>) -> Value<T> {
        let h = self.conv1.forward(g, x);
        let h = g.relu(&h);
        let h = self.conv2.forward(g, &h);

        // channel attention: pooled descriptor -> bottleneck -> sigmoid gains
        let s = g.global_avg_pool(&h);
        let s = self.ca_down.forward(g, &s);
        let s = g.relu(&s);
        let s = self.ca_up.forward(g, &s);
        let s = g.sigmoid(&s);
        let h = g.channel_scale(&h, &s);

        // pixel attention: per-position sigmoid gate
        let p = self.pa_down.forward(g, &h);
        let p = g.relu(&p);
        let p = self.pa_out.forward(g, &p);
        let p = g.sigmoid(&p);
        let h = g.plane_scale(&h, &p);

        g.add(&h, x)
    }

    pub fn param_count(&self) -> usize {
        self.conv1.param_count()
            + self.conv2.param_count()
            + self.ca_down.param_count()
            + self.ca_up.param_count()
            + self.pa_down.param_count()
            + self.pa_out.param_count()
    }

    fn visit<'a>(&'a self, prefix: &str, out: &mut ParamList<'a, T>) {
        self.conv1.visit(&alloc::format!("{prefix}.conv1"), out);
        self.conv2.visit(&alloc::format!("{prefix}.conv2"), out);
        self.ca_down.visit(&alloc::format!("{prefix}.ca_down"), out);
        self.ca_up.visit(&alloc::format!("{prefix}.ca_up"), out);
        self.pa_down.visit(&alloc::format!("{prefix}.pa_down"), out);
        self.pa_out.visit(&alloc::format!("{prefix}.pa_out"), out);
    }

    fn visit_mut<'a>(&'a mut self, prefix: &str, out: &mut ParamListMut<'a, T>) {
        self.conv1.visit_mut(&alloc::format!("{prefix}.conv1"), out);
        self.conv2.visit_mut(&alloc::format!("{prefix}.conv2"), out);
        self.ca_down.visit_mut(&alloc::format!("{prefix}.ca_down"), out);
        self.ca_up.visit_mut(&alloc::format!("{prefix}.ca_up"), out);
        self.pa_down.visit_mut(&alloc::format!("{prefix}.pa_down"), out);
        self.pa_out.visit_mut(&alloc::format!("{prefix}.pa_out"), out);
    }
}

/// The color correction network.
#[derive(Debug, Clone)]
pub struct CcNet<T> {
    pub config: CcNetConfig,
    pub head1: Conv2dLayer<T>,
    pub head2: Conv2dLayer<T>,
    pub fabs: Vec<FeatureAttention<T>>,
    pub tail1: Conv2dLayer<T>,
    pub tail2: Conv2dLayer<T>,
}

/// Deterministically initialize a color correction network.
pub fn build_ccnet<T: Scalar>(config: CcNetConfig, seed: u64) -> Result<CcNet<T>> {
    config.validate()?;
    let mut rng = Rng::new(seed);
    let w = config.base_width;
    let k = config.kernel_size;
    let pad = k / 2;
    Ok(CcNet {
        config,
        head1: Conv2dLayer::init(2, w, k, 1, pad, &mut rng),
        head2: Conv2dLayer::init(w, w, k, 1, pad, &mut rng),
        fabs: (0..config.num_fab).map(|_| FeatureAttention::init(w, k, &mut rng)).collect(),
        tail1: Conv2dLayer::init(w, w, k, 1, pad, &mut rng),
        tail2: Conv2dLayer::init(w, 2, k, 1, pad, &mut rng),
    })
}

impl<T: Scalar> CcNet<T> {
    /// Graph-level forward: chroma `[2, H, W]` in [-1, 1] to corrected chroma
    /// of the same shape.
    pub fn forward(&self, g: &mut Graph<T>, chroma: &Value<T>) -> Value<T> {
        debug_assert_eq!(chroma.shape().c, 2);
        let h = self.head1.forward(g, chroma);
        let h = g.relu(&h);
        let h = self.head2.forward(g, &h);
        let mut h = g.relu(&h);
        for fab in &self.fabs {
            h = fab.forward(g, &h);
        }
        let d = self.tail1.forward(g, &h);
        let d = g.relu(&d);
        let delta = self.tail2.forward(g, &d);
        let sum = g.add(chroma, &delta);
        g.tanh(&sum)
    }

    pub fn param_count(&self) -> usize {
        self.head1.param_count()
            + self.head2.param_count()
            + self.fabs.iter().map(|f| f.param_count()).sum::<usize>()
            + self.tail1.param_count()
            + self.tail2.param_count()
    }

    pub fn params(&self) -> ParamList<'_, T> {
        let mut out = Vec::new();
        self.head1.visit("head1", &mut out);
        self.head2.visit("head2", &mut out);
        for (i, fab) in self.fabs.iter().enumerate() {
            fab.visit(&alloc::format!("fab{i}"), &mut out);
        }
        self.tail1.visit("tail1", &mut out);
        self.tail2.visit("tail2", &mut out);
        out
    }

    pub fn params_mut(&mut self) -> ParamListMut<'_, T> {
        let mut out = Vec::new();
        self.head1.visit_mut("head1", &mut out);
        self.head2.visit_mut("head2", &mut out);
        for (i, fab) in self.fabs.iter_mut().enumerate() {
            fab.visit_mut(&alloc::format!("fab{i}"), &mut out);
        }
        self.tail1.visit_mut("tail1", &mut out);
        self.tail2.visit_mut("tail2", &mut out);
        out
    }

    pub fn param_names(&self) -> Vec<String> {
        self.params().into_iter().map(|(n, _)| n).collect()
    }
}

/// Run the network on validated chroma (inference path).
pub fn ccnet_forward<T: Scalar>(model: &CcNet<T>, chroma: &NormalizedChroma<T>) -> Result<NormalizedChroma<T>> {
    let mut g = Graph::inference();
    let x = g.input(chroma.tensor().clone(), false);
    let y = model.forward(&mut g, &x);
    NormalizedChroma::new(y.tensor().clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{Shape, Tensor};
    use alloc::sync::Arc;

    fn small() -> CcNetConfig {
        CcNetConfig { base_width: 8, num_fab: 5, kernel_size: 3 }
    }

    #[test]
    fn invalid_configs_rejected() {
        assert!(build_ccnet::<f32>(CcNetConfig { base_width: 0, ..small() }, 0).is_err());
        assert!(build_ccnet::<f32>(CcNetConfig { base_width: 4, ..small() }, 0).is_err());
        assert!(build_ccnet::<f32>(CcNetConfig { num_fab: 0, ..small() }, 0).is_err());
        assert!(build_ccnet::<f32>(CcNetConfig { kernel_size: 2, ..small() }, 0).is_err());
    }

    #[test]
    fn build_is_bit_deterministic() {
        let a = build_ccnet::<f64>(small(), 77).unwrap();
        let b = build_ccnet::<f64>(small(), 77).unwrap();
        for ((_, pa), (_, pb)) in a.params().iter().zip(b.params().iter()) {
            assert_eq!(pa.data(), pb.data());
        }
        let c = build_ccnet::<f64>(small(), 78).unwrap();
        assert_ne!(a.params()[0].1.data(), c.params()[0].1.data());
    }

    #[test]
    fn default_param_count_is_analytic() {
        // Analytic count from layer shapes, written out independently:
        // head: 2*64*9+64 + 64*64*9+64
        // fab x5: 2*(64*64*9+64) + (64*8+8) + (8*64+64) + (64*8+8) + (8*1+1)
        // tail: 64*64*9+64 + 64*2*9+2
        let head = 2 * 64 * 9 + 64 + 64 * 64 * 9 + 64;
        let fab = 2 * (64 * 64 * 9 + 64) + (64 * 8 + 8) + (8 * 64 + 64) + (64 * 8 + 8) + (8 + 1);
        let tail = 64 * 64 * 9 + 64 + 64 * 2 * 9 + 2;
        let expected = head + 5 * fab + tail;
        let model = build_ccnet::<f32>(CcNetConfig::default(), 0).unwrap();
        assert_eq!(model.param_count(), expected);
        assert_eq!(expected, 453_631);
    }

    #[test]
    fn output_shape_and_range() {
        let model = build_ccnet::<f32>(small(), 5).unwrap();
        for (h, w) in [(9usize, 12usize), (16, 16), (5, 7)] {
            let mut rng = Rng::new(2);
            let x = NormalizedChroma::new(Tensor::uniform(Shape::new(2, h, w), -1.0, 1.0, &mut rng)).unwrap();
            let y = ccnet_forward(&model, &x).unwrap();
            assert_eq!(y.tensor().shape(), Shape::new(2, h, w));
            assert!(y.tensor().data().iter().all(|v| v.abs() <= 1.0));
        }
    }

    #[test]
    fn zeroed_tail_is_residual_identity() {
        let mut model = build_ccnet::<f64>(small(), 3).unwrap();
        model.tail2.w = Arc::new(Tensor::zeros(model.tail2.w.shape()));
        model.tail2.b = Arc::new(Tensor::zeros(model.tail2.b.shape()));
        let mut rng = Rng::new(4);
        let x = Tensor::uniform(Shape::new(2, 6, 6), -0.9, 0.9, &mut rng);
        let y = ccnet_forward(&model, &NormalizedChroma::new(x.clone()).unwrap()).unwrap();
        let expect = x.map(|v| v.tanh());
        assert_eq!(y.tensor(), &expect);
    }

    #[test]
    fn fab_zero_input_zero_bias_gives_zero() {
        let fab = FeatureAttention::<f64>::init(8, 3, &mut Rng::new(1));
        let mut g = Graph::inference();
        let x = g.input(Tensor::zeros(Shape::new(8, 4, 4)), false);
        let y = fab.forward(&mut g, &x);
        assert!(y.tensor().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn fab_preserves_shape() {
        let fab = FeatureAttention::<f32>::init(8, 3, &mut Rng::new(1));
        let mut rng = Rng::new(2);
        for (h, w) in [(1usize, 1usize), (4, 9), (13, 3)] {
            let mut g = Graph::inference();
            let x = g.input(Tensor::uniform(Shape::new(8, h, w), -1.0, 1.0, &mut rng), false);
            let y = fab.forward(&mut g, &x);
            assert_eq!(y.shape(), Shape::new(8, h, w));
        }
    }

    #[test]
    fn forward_is_deterministic() {
        let model = build_ccnet::<f32>(small(), 10).unwrap();
        let mut rng = Rng::new(6);
        let x = NormalizedChroma::new(Tensor::uniform(Shape::new(2, 8, 8), -1.0, 1.0, &mut rng)).unwrap();
        let y1 = ccnet_forward(&model, &x).unwrap();
        let y2 = ccnet_forward(&model, &x).unwrap();
        assert_eq!(y1.tensor(), y2.tensor());
    }
}
