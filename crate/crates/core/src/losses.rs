//! Training objectives: the explicit chroma loss of the color correction
//! stage, the windowed SSIM loss of the haze removal stage, and the
//! contrastive loss both stages add on top. The contrastive term pulls the
//! prediction toward a positive sample and away from a negative sample in a
//! frozen perceptual feature space; each stage picks its own negative, which
//! is what makes the cascade tighten its lower bound stage over stage.

use alloc::sync::Arc;

use crate::backbone::{FeatureExtractor, NUM_TAPS};
use crate::error::{CoreError, Result};
use crate::graph::{Graph, Value};
use crate::image::{Luma, NormalizedChroma, RgbImage};
use crate::ops::gaussian_window;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Denominator guard added to each layer's feature distance.
pub const CONTRAST_EPS: f64 = 1e-7;

/// SSIM window: 11x11 Gaussian, sigma 1.5, stabilizers for unit range.
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const SSIM_C1: f64 = 0.01 * 0.01;
const SSIM_C2: f64 = 0.03 * 0.03;

/// Scalar loss hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LossWeights<T> {
    /// Contrastive weight in the color correction hybrid loss.
    pub lambda_cc: T,
    /// Contrastive weight in the haze removal hybrid loss.
    pub lambda_hr: T,
    /// Contrastive normalization scale, stage 1.
    pub s_cc: T,
    /// Contrastive normalization scale, stage 2.
    pub s_hr: T,
    /// Per-tap feature weights, shallow to deep.
    pub layer_weights: [T; NUM_TAPS],
}

impl<T: Scalar> Default for LossWeights<T> {
    fn default() -> Self {
        LossWeights {
            lambda_cc: T::from_f64(0.5),
            lambda_hr: T::from_f64(0.5),
            s_cc: T::from_f64(100.0),
            s_hr: T::from_f64(1.0),
            layer_weights: [
                T::from_f64(1.0 / 32.0),
                T::from_f64(1.0 / 16.0),
                T::from_f64(1.0 / 8.0),
                T::from_f64(1.0 / 4.0),
                T::from_f64(1.0),
            ],
        }
    }
}

impl<T: Scalar> LossWeights<T> {
    pub fn validate(&self) -> Result<()> {
        let all = [self.lambda_cc, self.lambda_hr, self.s_cc, self.s_hr];
        if all.iter().chain(self.layer_weights.iter()).any(|w| *w <= T::zero() || !w.is_finite()) {
            return Err(CoreError::config("loss weights must be positive and finite"));
        }
        Ok(())
    }
}

/// A hybrid loss with its components kept separate for logging.
pub struct LossTerms<T> {
    pub total: Value<T>,
    pub main: Value<T>,
    pub ctr: Option<Value<T>>,
}

// ---- color loss -----------------------------------------------------------

/// Squared L2 over both chroma channels divided by H*W.
pub fn color_loss_graph<T: Scalar>(g: &mut Graph<T>, pred: &Value<T>, reference: &Value<T>) -> Value<T> {
    let (h, w) = pred.shape().spatial();
    let d = g.sub(pred, reference);
    let sq = g.mul(&d, &d);
    let s = g.sum(&sq);
    g.affine(&s, T::from_f64(1.0 / (h * w) as f64), T::zero())
}

/// Validated scalar color loss between two normalized chroma images.
pub fn color_loss<T: Scalar>(pred: &NormalizedChroma<T>, reference: &NormalizedChroma<T>) -> Result<T> {
    if pred.tensor().shape() != reference.tensor().shape() {
        return Err(CoreError::shape(format_args!(
            "color loss operands {} vs {}",
            pred.tensor().shape(),
            reference.tensor().shape()
        )));
    }
    let mut g = Graph::inference();
    let p = g.input(pred.tensor().clone(), false);
    let r = g.input(reference.tensor().clone(), false);
    Ok(color_loss_graph(&mut g, &p, &r).item())
}

// ---- SSIM loss --------------------------------------------------------------

/// 1 - mean windowed SSIM over valid 11x11 Gaussian windows, averaged across
/// channels. Requires both sides of the image to be at least the window size.
pub fn ssim_loss_graph<T: Scalar>(g: &mut Graph<T>, pred: &Value<T>, reference: &Value<T>) -> Result<Value<T>> {
    if pred.shape() != reference.shape() {
        return Err(CoreError::shape(format_args!(
            "ssim operands {} vs {}",
            pred.shape(),
            reference.shape()
        )));
    }
    let (h, w) = pred.shape().spatial();
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(CoreError::invalid(format_args!(
            "image {h}x{w} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} ssim window"
        )));
    }
    let win = Arc::new(gaussian_window::<T>(SSIM_WINDOW, SSIM_SIGMA));
    let c1 = T::from_f64(SSIM_C1);
    let c2 = T::from_f64(SSIM_C2);
    let two = T::from_f64(2.0);

    let mu_x = g.separable_valid(pred, &win);
    let mu_y = g.separable_valid(reference, &win);
    let xx = g.mul(pred, pred);
    let yy = g.mul(reference, reference);
    let xy = g.mul(pred, reference);
    let e_xx = g.separable_valid(&xx, &win);
    let e_yy = g.separable_valid(&yy, &win);
    let e_xy = g.separable_valid(&xy, &win);

    let mu_xx = g.mul(&mu_x, &mu_x);
    let mu_yy = g.mul(&mu_y, &mu_y);
    let mu_xy = g.mul(&mu_x, &mu_y);
    let var_x = g.sub(&e_xx, &mu_xx);
    let var_y = g.sub(&e_yy, &mu_yy);
    let cov = g.sub(&e_xy, &mu_xy);

    let num_a = g.affine(&mu_xy, two, c1);
    let num_b = g.affine(&cov, two, c2);
    let num = g.mul(&num_a, &num_b);
    let den_a_sum = g.add(&mu_xx, &mu_yy);
    let den_a = g.affine(&den_a_sum, T::one(), c1);
    let den_b_sum = g.add(&var_x, &var_y);
    let den_b = g.affine(&den_b_sum, T::one(), c2);
    let den = g.mul(&den_a, &den_b);

    let ssim_map = g.div(&num, &den);
    let mean = g.mean(&ssim_map);
    Ok(g.affine(&mean, -T::one(), T::one()))
}

/// Validated scalar SSIM loss between two images in [0, 1].
pub fn ssim_loss<T: Scalar>(pred: &RgbImage<T>, reference: &RgbImage<T>) -> Result<T> {
    let mut g = Graph::inference();
    let p = g.input(pred.tensor().clone(), false);
    let r = g.input(reference.tensor().clone(), false);
    Ok(ssim_loss_graph(&mut g, &p, &r)?.item())
}

// ---- contrastive loss -------------------------------------------------------

/// Tap features of a constant image, reusable across iterations.
pub fn cached_features<T: Scalar>(fe: &FeatureExtractor<T>, image: &Tensor<T>) -> [Arc<Tensor<T>>; NUM_TAPS] {
    fe.features(image)
}

/// Build the contrastive term: sum_i w_i * |E_i(anchor) - E_i(pos)|_1 /
/// (|E_i(anchor) - E_i(neg)|_1 + eps), divided by `scale`. L1 distances are
/// mean-reduced so the loss is resolution independent.
#[allow(clippy::too_many_arguments)]
pub fn contrastive_graph<T: Scalar>(
    g: &mut Graph<T>,
    anchor: &Value<T>,
    positive: &[Arc<Tensor<T>>; NUM_TAPS],
    negative: &[Arc<Tensor<T>>; NUM_TAPS],
    fe: &FeatureExtractor<T>,
    layer_weights: &[T; NUM_TAPS],
    scale: T,
    eps: T,
) -> Result<Value<T>> {
    if scale <= T::zero() {
        return Err(CoreError::invalid("contrastive scale must be positive"));
    }
    if eps < T::zero() {
        return Err(CoreError::invalid("contrastive epsilon must be non-negative"));
    }
    let anchor_taps = fe.forward_taps(g, anchor);
    let mut acc: Option<Value<T>> = None;
    for (i, a_tap) in anchor_taps.iter().enumerate() {
        let p = g.constant((*positive[i]).clone());
        let n = g.constant((*negative[i]).clone());
        let dp = g.sub(a_tap, &p);
        let dp = g.abs(&dp);
        let d_ap = g.mean(&dp);
        let dn = g.sub(a_tap, &n);
        let dn = g.abs(&dn);
        let d_an = g.mean(&dn);
        if d_an.item() + eps <= T::zero() {
            return Err(CoreError::ZeroContrastDenominator { layer: i + 1 });
        }
        let den = g.affine(&d_an, T::one(), eps);
        let ratio = g.div(&d_ap, &den);
        let weighted = g.affine(&ratio, layer_weights[i], T::zero());
        acc = Some(match acc {
            Some(prev) => g.add(&prev, &weighted),
            None => weighted,
        });
    }
    let total = acc.expect("at least one tap");
    Ok(g.affine(&total, T::one() / scale, T::zero()))
}

/// Validated scalar contrastive loss over three images in [0, 1], with the
/// default epsilon guard.
pub fn contrastive_loss<T: Scalar>(
    anchor: &RgbImage<T>,
    positive: &RgbImage<T>,
    negative: &RgbImage<T>,
    fe: &FeatureExtractor<T>,
    weights: &LossWeights<T>,
    scale: T,
) -> Result<T> {
    contrastive_loss_with_eps(anchor, positive, negative, fe, weights, scale, T::from_f64(CONTRAST_EPS))
}

/// As [`contrastive_loss`] but with an explicit epsilon; `eps == 0` turns the
/// denominator guard off and a feature-identical anchor/negative pair is
/// reported as [`CoreError::ZeroContrastDenominator`].
pub fn contrastive_loss_with_eps<T: Scalar>(
    anchor: &RgbImage<T>,
    positive: &RgbImage<T>,
    negative: &RgbImage<T>,
    fe: &FeatureExtractor<T>,
    weights: &LossWeights<T>,
    scale: T,
    eps: T,
) -> Result<T> {
    let (h, w) = (anchor.height(), anchor.width());
    if (positive.height(), positive.width()) != (h, w) || (negative.height(), negative.width()) != (h, w) {
        return Err(CoreError::shape("contrastive samples must share dimensions"));
    }
    let pos = cached_features(fe, positive.tensor());
    let neg = cached_features(fe, negative.tensor());
    let mut g = Graph::inference();
    let a = g.input(anchor.tensor().clone(), false);
    Ok(contrastive_graph(&mut g, &a, &pos, &neg, fe, &weights.layer_weights, scale, eps)?.item())
}

// ---- hybrid losses ------------------------------------------------------------

/// Stage-1 hybrid loss: `L_color + lambda_cc * L_ctr` where the contrastive
/// anchor is the RGB reconstruction of the predicted chroma merged with the
/// raw lightness plane. Pass `use_contrastive = false` for the ablation that
/// trains on the color loss alone.
#[allow(clippy::too_many_arguments)]
pub fn hybrid_cc_graph<T: Scalar>(
    g: &mut Graph<T>,
    pred_chroma: &Value<T>,
    raw_luma: &Arc<Tensor<T>>,
    ref_chroma: &Value<T>,
    positive: &[Arc<Tensor<T>>; NUM_TAPS],
    negative: &[Arc<Tensor<T>>; NUM_TAPS],
    fe: &FeatureExtractor<T>,
    weights: &LossWeights<T>,
    use_contrastive: bool,
) -> Result<LossTerms<T>> {
    let main = color_loss_graph(g, pred_chroma, ref_chroma);
    if !use_contrastive {
        return Ok(LossTerms { total: main.clone(), main, ctr: None });
    }
    let anchor = g.chroma_to_rgb(pred_chroma, raw_luma);
    let ctr = contrastive_graph(
        g,
        &anchor,
        positive,
        negative,
        fe,
        &weights.layer_weights,
        weights.s_cc,
        T::from_f64(CONTRAST_EPS),
    )?;
    let scaled = g.affine(&ctr, weights.lambda_cc, T::zero());
    let total = g.add(&main, &scaled);
    Ok(LossTerms { total, main, ctr: Some(ctr) })
}

/// Validated stage-1 hybrid loss value. The negative sample is the raw input
/// image; the positive is the pseudo-reference rebuilt with the raw lightness.
#[allow(clippy::too_many_arguments)]
pub fn hybrid_cc_loss<T: Scalar>(
    pred_chroma: &NormalizedChroma<T>,
    raw_luma: &Luma<T>,
    ref_chroma: &NormalizedChroma<T>,
    ref_rgb_hat: &RgbImage<T>,
    raw_rgb: &RgbImage<T>,
    fe: &FeatureExtractor<T>,
    weights: &LossWeights<T>,
) -> Result<T> {
    weights.validate()?;
    if pred_chroma.tensor().shape() != ref_chroma.tensor().shape() {
        return Err(CoreError::shape("prediction and reference chroma differ in shape"));
    }
    let pos = cached_features(fe, ref_rgb_hat.tensor());
    let neg = cached_features(fe, raw_rgb.tensor());
    let mut g = Graph::inference();
    let p = g.input(pred_chroma.tensor().clone(), false);
    let r = g.input(ref_chroma.tensor().clone(), false);
    let luma = Arc::new(raw_luma.tensor().clone());
    let terms = hybrid_cc_graph(&mut g, &p, &luma, &r, &pos, &neg, fe, weights, true)?;
    Ok(terms.total.item())
}

/// Stage-2 hybrid loss: `L_ssim + lambda_hr * L_ctr`. The negative sample is
/// the stage-1 output (or the raw image under the raw-as-negative ablation);
/// both prediction and reference are images in [0, 1].
#[allow(clippy::too_many_arguments)]
pub fn hybrid_hr_graph<T: Scalar>(
    g: &mut Graph<T>,
    pred_rgb: &Value<T>,
    ref_rgb: &Value<T>,
    positive: &[Arc<Tensor<T>>; NUM_TAPS],
    negative: &[Arc<Tensor<T>>; NUM_TAPS],
    fe: &FeatureExtractor<T>,
    weights: &LossWeights<T>,
    use_contrastive: bool,
) -> Result<LossTerms<T>> {
    let main = ssim_loss_graph(g, pred_rgb, ref_rgb)?;
    if !use_contrastive {
        return Ok(LossTerms { total: main.clone(), main, ctr: None });
    }
    let ctr = contrastive_graph(
        g,
        pred_rgb,
        positive,
        negative,
        fe,
        &weights.layer_weights,
        weights.s_hr,
        T::from_f64(CONTRAST_EPS),
    )?;
    let scaled = g.affine(&ctr, weights.lambda_hr, T::zero());
    let total = g.add(&main, &scaled);
    Ok(LossTerms { total, main, ctr: Some(ctr) })
}

/// Validated stage-2 hybrid loss value.
pub fn hybrid_hr_loss<T: Scalar>(
    pred: &RgbImage<T>,
    reference: &RgbImage<T>,
    cc_output: &RgbImage<T>,
    fe: &FeatureExtractor<T>,
    weights: &LossWeights<T>,
) -> Result<T> {
    weights.validate()?;
    let pos = cached_features(fe, reference.tensor());
    let neg = cached_features(fe, cc_output.tensor());
    let mut g = Graph::inference();
    let p = g.input(pred.tensor().clone(), false);
    let r = g.input(reference.tensor().clone(), false);
    let terms = hybrid_hr_graph(&mut g, &p, &r, &pos, &neg, fe, weights, true)?;
    Ok(terms.total.item())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backbone::BackboneConfig;
    use crate::rng::Rng;
    use crate::tensor::Shape;

    fn fe() -> FeatureExtractor<f64> {
        FeatureExtractor::seeded_random(BackboneConfig { width_divisor: 16 }, 42).unwrap()
    }

    fn rand_img(seed: u64, h: usize, w: usize) -> RgbImage<f64> {
        let mut rng = Rng::new(seed);
        RgbImage::new(Tensor::uniform(Shape::new(3, h, w), 0.0, 1.0, &mut rng)).unwrap()
    }

    #[test]
    fn color_loss_zero_on_identical() {
        let mut rng = Rng::new(1);
        let c = NormalizedChroma::new(Tensor::<f64>::uniform(Shape::new(2, 5, 5), -1.0, 1.0, &mut rng)).unwrap();
        assert_eq!(color_loss(&c, &c).unwrap(), 0.0);
    }

    #[test]
    fn color_loss_closed_form_offset() {
        // pred - ref == 0.5 on both channels: loss = 2 * 0.25 = 0.5 at any size
        for (h, w) in [(3usize, 4usize), (7, 7), (1, 9)] {
            let r = NormalizedChroma::new(Tensor::full(Shape::new(2, h, w), 0.1)).unwrap();
            let p = NormalizedChroma::new(Tensor::full(Shape::new(2, h, w), 0.6)).unwrap();
            let l: f64 = color_loss(&p, &r).unwrap();
            assert!((l - 0.5).abs() < 1e-12, "{h}x{w}: {l}");
        }
    }

    #[test]
    fn color_loss_shape_mismatch() {
        let a = NormalizedChroma::new(Tensor::<f32>::zeros(Shape::new(2, 4, 4))).unwrap();
        let b = NormalizedChroma::new(Tensor::<f32>::zeros(Shape::new(2, 4, 5))).unwrap();
        assert!(color_loss(&a, &b).is_err());
    }

    #[test]
    fn ssim_loss_zero_on_identical_and_positive_on_noise() {
        let img = rand_img(3, 16, 16);
        assert!(ssim_loss(&img, &img).unwrap().abs() < 1e-12);

        let mut rng = Rng::new(9);
        let noisy = RgbImage::from_unclamped(
            img.tensor().map(|v| v + rng.uniform(-0.4, 0.4)),
        )
        .unwrap();
        let l = ssim_loss(&noisy, &img).unwrap();
        assert!(l > 0.0 && l <= 1.0, "{l}");
    }

    #[test]
    fn ssim_rejects_small_images() {
        let a = rand_img(1, 8, 16);
        assert!(ssim_loss(&a, &a).is_err());
    }

    #[test]
    fn contrastive_zero_when_anchor_is_positive() {
        let fe = fe();
        let pos = rand_img(1, 16, 16);
        let neg = rand_img(2, 16, 16);
        let w = LossWeights::default();
        let l = contrastive_loss(&pos, &pos, &neg, &fe, &w, 1.0).unwrap();
        assert_eq!(l, 0.0);
    }

    #[test]
    fn contrastive_guarded_pole_and_disabled_eps() {
        let fe = fe();
        let a = rand_img(4, 16, 16);
        let pos = rand_img(5, 16, 16);
        let w = LossWeights::default();
        // anchor == negative: guarded -> large but finite
        let l = contrastive_loss(&a, &pos, &a, &fe, &w, 1.0).unwrap();
        assert!(l.is_finite() && l > 1e2, "{l}");
        // guard disabled -> documented error
        let e = contrastive_loss_with_eps(&a, &pos, &a, &fe, &w, 1.0, 0.0);
        assert!(matches!(e, Err(CoreError::ZeroContrastDenominator { .. })));
    }

    #[test]
    fn contrastive_scale_covariance() {
        let fe = fe();
        let a = rand_img(6, 16, 16);
        let p = rand_img(7, 16, 16);
        let n = rand_img(8, 16, 16);
        let w = LossWeights::default();
        let l1: f64 = contrastive_loss(&a, &p, &n, &fe, &w, 1.0).unwrap();
        let l100 = contrastive_loss(&a, &p, &n, &fe, &w, 100.0).unwrap();
        assert!((l100 - l1 / 100.0).abs() < 1e-6 * l1.abs().max(1.0));
    }

    #[test]
    fn contrastive_matches_manual_layer_composition() {
        let fe = fe();
        let a = rand_img(10, 16, 16);
        let p = rand_img(11, 16, 16);
        let n = rand_img(12, 16, 16);
        let w = LossWeights::<f64>::default();

        let fa = fe.features(a.tensor());
        let fp = fe.features(p.tensor());
        let fn_ = fe.features(n.tensor());
        let mut expected = 0.0f64;
        for i in 0..NUM_TAPS {
            let num: f64 = fa[i]
                .data()
                .iter()
                .zip(fp[i].data())
                .map(|(x, y)| (x - y).abs())
                .sum::<f64>()
                / fa[i].len() as f64;
            let den: f64 = fa[i]
                .data()
                .iter()
                .zip(fn_[i].data())
                .map(|(x, y)| (x - y).abs())
                .sum::<f64>()
                / fa[i].len() as f64;
            expected += w.layer_weights[i] * num / (den + CONTRAST_EPS);
        }
        let got = contrastive_loss(&a, &p, &n, &fe, &w, 1.0).unwrap();
        assert!((got - expected).abs() < 1e-9 * expected.max(1.0), "{got} vs {expected}");
    }

    #[test]
    fn permuting_layer_weights_changes_the_value() {
        let fe = fe();
        let a = rand_img(20, 16, 16);
        let p = rand_img(21, 16, 16);
        let n = rand_img(22, 16, 16);
        let w = LossWeights::<f64>::default();
        let mut perm = w;
        perm.layer_weights.reverse();
        let l = contrastive_loss(&a, &p, &n, &fe, &w, 1.0).unwrap();
        let lp = contrastive_loss(&a, &p, &n, &fe, &perm, 1.0).unwrap();
        assert!((l - lp).abs() > 1e-6, "{l} vs {lp}");
    }

    #[test]
    fn hybrid_cc_reduces_to_color_loss_without_contrastive() {
        let fe = fe();
        let mut rng = Rng::new(30);
        let pred = Tensor::<f64>::uniform(Shape::new(2, 16, 16), -0.5, 0.5, &mut rng);
        let refc = Tensor::<f64>::uniform(Shape::new(2, 16, 16), -0.5, 0.5, &mut rng);
        let luma = Arc::new(Tensor::<f64>::uniform(Shape::new(1, 16, 16), 20.0, 80.0, &mut rng));
        let pos = fe.features(rand_img(31, 16, 16).tensor());
        let neg = fe.features(rand_img(32, 16, 16).tensor());
        let w = LossWeights::default();

        let mut g = Graph::inference();
        let p = g.input(pred.clone(), false);
        let r = g.input(refc.clone(), false);
        let terms = hybrid_cc_graph(&mut g, &p, &luma, &r, &pos, &neg, &fe, &w, false).unwrap();
        assert!(terms.ctr.is_none());
        let direct = color_loss(
            &NormalizedChroma::new(pred).unwrap(),
            &NormalizedChroma::new(refc).unwrap(),
        )
        .unwrap();
        assert_eq!(terms.total.item(), direct);
    }

    #[test]
    fn hybrid_cc_matches_manual_composition() {
        let fe = fe();
        let mut rng = Rng::new(40);
        let pred = NormalizedChroma::new(Tensor::<f64>::uniform(Shape::new(2, 16, 16), -0.4, 0.4, &mut rng)).unwrap();
        let refc = NormalizedChroma::new(Tensor::<f64>::uniform(Shape::new(2, 16, 16), -0.4, 0.4, &mut rng)).unwrap();
        let luma = Luma::new(Tensor::<f64>::uniform(Shape::new(1, 16, 16), 20.0, 80.0, &mut rng)).unwrap();
        let ref_hat = rand_img(41, 16, 16);
        let raw = rand_img(42, 16, 16);
        let w = LossWeights::default();

        let total = hybrid_cc_loss(&pred, &luma, &refc, &ref_hat, &raw, &fe, &w).unwrap();

        let anchor = RgbImage::new(crate::color::chroma_to_rgb(pred.tensor(), luma.tensor())).unwrap();
        let manual = color_loss(&pred, &refc).unwrap()
            + w.lambda_cc * contrastive_loss(&anchor, &ref_hat, &raw, &fe, &w, w.s_cc).unwrap();
        assert!((total - manual).abs() < 1e-12, "{total} vs {manual}");
    }

    #[test]
    fn hybrid_hr_matches_manual_composition() {
        let fe = fe();
        let pred = rand_img(50, 16, 16);
        let reference = rand_img(51, 16, 16);
        let cc_out = rand_img(52, 16, 16);
        let w = LossWeights::default();

        let total = hybrid_hr_loss(&pred, &reference, &cc_out, &fe, &w).unwrap();
        let manual = ssim_loss(&pred, &reference).unwrap()
            + w.lambda_hr * contrastive_loss(&pred, &reference, &cc_out, &fe, &w, w.s_hr).unwrap();
        assert!((total - manual).abs() < 1e-12, "{total} vs {manual}");
    }

    #[test]
    fn hybrid_hr_zero_for_perfect_prediction() {
        let fe = fe();
        let reference = rand_img(60, 16, 16);
        let cc_out = rand_img(61, 16, 16);
        let w = LossWeights::default();
        let total = hybrid_hr_loss(&reference, &reference, &cc_out, &fe, &w).unwrap();
        assert!(total.abs() < 1e-12, "{total}");
    }

    #[test]
    fn weights_validation() {
        let mut w = LossWeights::<f32>::default();
        assert!(w.validate().is_ok());
        w.lambda_cc = 0.0;
        assert!(w.validate().is_err());
        let mut w = LossWeights::<f32>::default();
        w.layer_weights[3] = -1.0;
        assert!(w.validate().is_err());
    }
}
