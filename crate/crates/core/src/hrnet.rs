//! Haze removal sub-network: a three-scale encoder whose features are fused
//! bottom-up with selective kernel fusion (per-channel softmax over the two
//! branches), finishing in a conv + tanh that emits the enhanced RGB image.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{CoreError, Result};
use crate::graph::{Graph, Value};
use crate::nn::{Conv2dLayer, ParamList, ParamListMut};
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

const SKFF_REDUCTION: usize = 8;
const SKFF_MIN_BOTTLENECK: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HrNetConfig {
    /// Channels at full, half and quarter resolution.
    pub scale_widths: [usize; 3],
    pub kernel_size: usize,
}

impl Default for HrNetConfig {
    fn default() -> Self {
        HrNetConfig { scale_widths: [32, 64, 128], kernel_size: 3 }
    }
}

impl HrNetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.scale_widths.iter().any(|&w| w < 8) {
            return Err(CoreError::config(format_args!(
                "scale widths must be >= 8, got {:?}",
                self.scale_widths
            )));
        }
        if self.kernel_size % 2 == 0 || self.kernel_size == 0 {
            return Err(CoreError::config("kernel_size must be odd"));
        }
        Ok(())
    }
}

/// Selective kernel feature fusion over two equally-shaped streams.
#[derive(Debug, Clone)]
pub struct Skff<T> {
    pub reduce: Conv2dLayer<T>,
    pub branch_a: Conv2dLayer<T>,
    pub branch_b: Conv2dLayer<T>,
}

/// Fusion result plus the per-channel branch weights (exposed so convexity
/// can be asserted).
pub struct SkffOut<T> {
    pub fused: Value<T>,
    pub weight_a: Value<T>,
    pub weight_b: Value<T>,
}

impl<T: Scalar> Skff<T> {
    pub fn init(channels: usize, rng: &mut Rng) -> Self {
        let d = (channels / SKFF_REDUCTION).max(SKFF_MIN_BOTTLENECK);
        Skff {
            reduce: Conv2dLayer::init1(channels, d, rng),
            branch_a: Conv2dLayer::init1(d, channels, rng),
            branch_b: Conv2dLayer::init1(d, channels, rng),
        }
    }

    /// Sum -> pooled descriptor -> bottleneck -> per-branch channel softmax ->
    /// attention-weighted sum. The two-way softmax is computed as
    /// `sigmoid(ya - yb)` and its complement, which is the same function.
    pub fn forward(&self, g: &mut Graph<T>, a: &Value<T>, b: &Value<T>) -> SkffOut<T> {
        debug_assert_eq!(a.shape(), b.shape(), "skff operands must share shape");
        let s = g.add(a, b);
        let z = g.global_avg_pool(&s);
        let z = self.reduce.forward(g, &z);
        let z = g.relu(&z);
        let ya = self.branch_a.forward(g, &z);
        let yb = self.branch_b.forward(g, &z);
        let d = g.sub(&ya, &yb);
        let wa = g.sigmoid(&d);
        let wb = g.affine(&wa, -T::one(), T::one());
        let fa = g.channel_scale(a, &wa);
        let fb = g.channel_scale(b, &wb);
        SkffOut { fused: g.add(&fa, &fb), weight_a: wa, weight_b: wb }
    }

    pub fn param_count(&self) -> usize {
        self.reduce.param_count() + self.branch_a.param_count() + self.branch_b.param_count()
    }

    fn visit<'a>(&'a self, prefix: &str, out: &mut ParamList<'a, T>) {
        self.reduce.visit(&alloc::format!("{prefix}.reduce"), out);
        self.branch_a.visit(&alloc::format!("{prefix}.branch_a"), out);
        self.branch_b.visit(&alloc::format!("{prefix}.branch_b"), out);
    }

    fn visit_mut<'a>(&'a mut self, prefix: &str, out: &mut ParamListMut<'a, T>) {
        self.reduce.visit_mut(&alloc::format!("{prefix}.reduce"), out);
        self.branch_a.visit_mut(&alloc::format!("{prefix}.branch_a"), out);
        self.branch_b.visit_mut(&alloc::format!("{prefix}.branch_b"), out);
    }
}

/// Fuse two feature maps; validated public entry point.
pub fn skff<T: Scalar>(module: &Skff<T>, a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    if a.shape() != b.shape() {
        return Err(CoreError::shape(format_args!("skff operands {} vs {}", a.shape(), b.shape())));
    }
    let mut g = Graph::inference();
    let av = g.input(a.clone(), false);
    let bv = g.input(b.clone(), false);
    let out = module.forward(&mut g, &av, &bv);
    Ok(out.fused.tensor().clone())
}

/// The haze removal network.
#[derive(Debug, Clone)]
pub struct HrNet<T> {
    pub config: HrNetConfig,
    pub feat: Conv2dLayer<T>,
    pub down2: Conv2dLayer<T>,
    pub down4: Conv2dLayer<T>,
    pub up_low: Conv2dLayer<T>,
    pub skff_mid: Skff<T>,
    pub up_mid: Conv2dLayer<T>,
    pub skff_high: Skff<T>,
    pub out: Conv2dLayer<T>,
}

/// Deterministically initialize a haze removal network.
pub fn build_hrnet<T: Scalar>(config: HrNetConfig, seed: u64) -> Result<HrNet<T>> {
    config.validate()?;
    let mut rng = Rng::new(seed);
    let [w0, w1, w2] = config.scale_widths;
    let k = config.kernel_size;
    let pad = k / 2;
    Ok(HrNet {
        config,
        feat: Conv2dLayer::init(3, w0, k, 1, pad, &mut rng),
        down2: Conv2dLayer::init(w0, w1, k, 2, pad, &mut rng),
        down4: Conv2dLayer::init(w0, w2, k, 4, pad, &mut rng),
        up_low: Conv2dLayer::init1(w2, w1, &mut rng),
        skff_mid: Skff::init(w1, &mut rng),
        up_mid: Conv2dLayer::init1(w1, w0, &mut rng),
        skff_high: Skff::init(w0, &mut rng),
        out: Conv2dLayer::init(w0, 3, k, 1, pad, &mut rng),
    })
}

impl<T: Scalar> HrNet<T> {
    /// Graph-level forward on an input whose sides are multiples of 4.
    /// `[3, H, W]` in [-1, 1] to `[3, H, W]` in [-1, 1].
    fn forward_aligned(&self, g: &mut Graph<T>, x: &Value<T>) -> Value<T> {
        let high = self.feat.forward(g, x);
        let high = g.relu(&high);

        let mid_down = self.down2.forward(g, &high);
        let low_down = self.down4.forward(g, &high);

        let mid_up = g.upsample2(&low_down);
        let mid_up = self.up_low.forward(g, &mid_up);
        let mid = self.skff_mid.forward(g, &mid_down, &mid_up).fused;

        let high_up = g.upsample2(&mid);
        let high_up = self.up_mid.forward(g, &high_up);
        let high = self.skff_high.forward(g, &high, &high_up).fused;

        let y = self.out.forward(g, &high);
        g.tanh(&y)
    }

    /// Forward with reflect pad / crop so arbitrary sizes keep their shape.
    /// Inputs smaller than 4x4 are rejected.
    pub fn forward(&self, g: &mut Graph<T>, x: &Value<T>) -> Result<Value<T>> {
        if x.shape().c != 3 {
            return Err(CoreError::shape(format_args!("dehazer expects 3 channels, got {}", x.shape().c)));
        }
        let (h, w) = x.shape().spatial();
        if h < 4 || w < 4 {
            return Err(CoreError::invalid(format_args!("input {h}x{w} below minimum 4x4")));
        }
        let pb = (4 - h % 4) % 4;
        let pr = (4 - w % 4) % 4;
        if pb == 0 && pr == 0 {
            return Ok(self.forward_aligned(g, x));
        }
        let padded = g.reflect_pad(x, (0, pb, 0, pr));
        let y = self.forward_aligned(g, &padded);
        Ok(g.crop(&y, 0, 0, h, w))
    }

    pub fn param_count(&self) -> usize {
        self.feat.param_count()
            + self.down2.param_count()
            + self.down4.param_count()
            + self.up_low.param_count()
            + self.skff_mid.param_count()
            + self.up_mid.param_count()
            + self.skff_high.param_count()
            + self.out.param_count()
    }

    pub fn params(&self) -> ParamList<'_, T> {
        let mut out = Vec::new();
        self.feat.visit("feat", &mut out);
        self.down2.visit("down2", &mut out);
        self.down4.visit("down4", &mut out);
        self.up_low.visit("up_low", &mut out);
        self.skff_mid.visit("skff_mid", &mut out);
        self.up_mid.visit("up_mid", &mut out);
        self.skff_high.visit("skff_high", &mut out);
        self.out.visit("out", &mut out);
        out
    }

    pub fn params_mut(&mut self) -> ParamListMut<'_, T> {
        let mut out = Vec::new();
        self.feat.visit_mut("feat", &mut out);
        self.down2.visit_mut("down2", &mut out);
        self.down4.visit_mut("down4", &mut out);
        self.up_low.visit_mut("up_low", &mut out);
        self.skff_mid.visit_mut("skff_mid", &mut out);
        self.up_mid.visit_mut("up_mid", &mut out);
        self.skff_high.visit_mut("skff_high", &mut out);
        self.out.visit_mut("out", &mut out);
        out
    }

    pub fn param_names(&self) -> Vec<String> {
        self.params().into_iter().map(|(n, _)| n).collect()
    }
}

/// Run the network on a `[3, H, W]` tensor in [-1, 1] (inference path).
pub fn hrnet_forward<T: Scalar>(model: &HrNet<T>, img: &Tensor<T>) -> Result<Tensor<T>> {
    let mut g = Graph::inference();
    let x = g.input(img.clone(), false);
    let y = model.forward(&mut g, &x)?;
    Ok(y.tensor().clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Shape;

    fn small() -> HrNetConfig {
        HrNetConfig { scale_widths: [8, 8, 8], kernel_size: 3 }
    }

    #[test]
    fn config_validation() {
        assert!(HrNetConfig { scale_widths: [8, 4, 8], kernel_size: 3 }.validate().is_err());
        assert!(HrNetConfig { scale_widths: [8, 8, 8], kernel_size: 4 }.validate().is_err());
        assert!(HrNetConfig::default().validate().is_ok());
    }

    #[test]
    fn default_param_count_is_analytic() {
        // feat 3*32*9+32; down2 32*64*9+64; down4 32*128*9+128;
        // up_low 128*64+64; skff_mid (64*8+8)+2*(8*64+64);
        // up_mid 64*32+32; skff_high (32*4+4)+2*(4*32+32); out 32*3*9+3
        let expected = (3 * 32 * 9 + 32)
            + (32 * 64 * 9 + 64)
            + (32 * 128 * 9 + 128)
            + (128 * 64 + 64)
            + ((64 * 8 + 8) + 2 * (8 * 64 + 64))
            + (64 * 32 + 32)
            + ((32 * 4 + 4) + 2 * (4 * 32 + 32))
            + (32 * 3 * 9 + 3);
        let model = build_hrnet::<f32>(HrNetConfig::default(), 0).unwrap();
        assert_eq!(model.param_count(), expected);
        assert_eq!(expected, 69_711);
    }

    #[test]
    fn shape_preserved_on_aligned_and_unaligned() {
        let model = build_hrnet::<f32>(small(), 1).unwrap();
        let mut rng = crate::rng::Rng::new(3);
        for (h, w) in [(8usize, 8usize), (16, 12), (9, 14), (13, 13), (5, 21)] {
            let x = Tensor::uniform(Shape::new(3, h, w), -1.0, 1.0, &mut rng);
            let y = hrnet_forward(&model, &x).unwrap();
            assert_eq!(y.shape(), Shape::new(3, h, w), "{h}x{w}");
            assert!(y.data().iter().all(|v| v.abs() <= 1.0));
        }
    }

    #[test]
    fn tiny_inputs_rejected() {
        let model = build_hrnet::<f32>(small(), 1).unwrap();
        let x = Tensor::zeros(Shape::new(3, 3, 8));
        assert!(hrnet_forward(&model, &x).is_err());
        let x = Tensor::zeros(Shape::new(2, 8, 8));
        assert!(hrnet_forward(&model, &x).is_err());
    }

    #[test]
    fn skff_identical_inputs_fuse_to_themselves() {
        let module = Skff::<f64>::init(8, &mut crate::rng::Rng::new(2));
        let mut rng = crate::rng::Rng::new(5);
        let a = Tensor::uniform(Shape::new(8, 4, 4), -1.0, 1.0, &mut rng);
        let fused = skff(&module, &a, &a).unwrap();
        assert!(fused.max_abs_diff(&a) < 1e-6);
    }

    #[test]
    fn skff_weights_are_convex() {
        let module = Skff::<f64>::init(8, &mut crate::rng::Rng::new(7));
        let mut rng = crate::rng::Rng::new(8);
        let a = Tensor::uniform(Shape::new(8, 5, 5), -1.0, 1.0, &mut rng);
        let b = Tensor::uniform(Shape::new(8, 5, 5), -1.0, 1.0, &mut rng);
        let mut g = Graph::inference();
        let av = g.input(a, false);
        let bv = g.input(b, false);
        let out = module.forward(&mut g, &av, &bv);
        for c in 0..8 {
            let wa = out.weight_a.tensor().data()[c];
            let wb = out.weight_b.tensor().data()[c];
            assert!((0.0..=1.0).contains(&wa));
            assert!((0.0..=1.0).contains(&wb));
            assert!((wa + wb - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn skff_shape_mismatch_rejected() {
        let module = Skff::<f32>::init(8, &mut crate::rng::Rng::new(1));
        let a = Tensor::zeros(Shape::new(8, 4, 4));
        let b = Tensor::zeros(Shape::new(8, 4, 5));
        assert!(skff(&module, &a, &b).is_err());
    }

    #[test]
    fn skff_scalar_trace_matches_hand_formula() {
        // 1-channel 1x1 case traced against the written formula with plain
        // f64 arithmetic: z = relu(Wr*(a+b) + br); ya/yb = Wa/Wb z + ba/bb;
        // wa = exp(ya)/(exp(ya)+exp(yb)); fused = wa*a + (1-wa)*b.
        let module = Skff::<f64>::init(1, &mut crate::rng::Rng::new(11));
        let (a, b) = (0.37f64, -0.81f64);

        let d = module.reduce.c_out;
        let mut z = alloc::vec![0.0f64; d];
        for i in 0..d {
            z[i] = (module.reduce.w.data()[i] * (a + b) + module.reduce.b.data()[i]).max(0.0);
        }
        let mut ya = 0.0;
        let mut yb = 0.0;
        for i in 0..d {
            ya += module.branch_a.w.data()[i] * z[i];
            yb += module.branch_b.w.data()[i] * z[i];
        }
        ya += module.branch_a.b.data()[0];
        yb += module.branch_b.b.data()[0];
        let wa = ya.exp() / (ya.exp() + yb.exp());
        let expected = wa * a + (1.0 - wa) * b;

        let at = Tensor::from_vec(Shape::new(1, 1, 1), alloc::vec![a]).unwrap();
        let bt = Tensor::from_vec(Shape::new(1, 1, 1), alloc::vec![b]).unwrap();
        let fused = skff(&module, &at, &bt).unwrap();
        assert!((fused.data()[0] - expected).abs() < 1e-12, "{} vs {expected}", fused.data()[0]);
    }

    #[test]
    fn forward_is_deterministic() {
        let model = build_hrnet::<f32>(small(), 9).unwrap();
        let mut rng = crate::rng::Rng::new(1);
        let x = Tensor::uniform(Shape::new(3, 12, 12), -1.0, 1.0, &mut rng);
        assert_eq!(hrnet_forward(&model, &x).unwrap(), hrnet_forward(&model, &x).unwrap());
    }
}
