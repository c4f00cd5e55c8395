//! Frozen perceptual feature extractor: the convolutional trunk of a
//! 19-layer VGG classifier, truncated after the 13th convolution. Features
//! are tapped at the ReLU outputs of convolutions 1, 3, 5, 9 and 13 — the
//! first convolution of each resolution stage.
//!
//! Weights are either loaded from a pretrained file (see the companion crate)
//! or seeded randomly; a random frozen backbone is a valid metric space for
//! offline tests, it just lacks pretrained semantics.

use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::error::{CoreError, Result};
use crate::graph::{Graph, Value};
use crate::nn::{Conv2dLayer, ParamList, ParamListMut};
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Full-width channel plan through conv5_1 and pool placement.
const CHANNELS: [usize; 13] = [64, 64, 128, 128, 256, 256, 256, 256, 512, 512, 512, 512, 512];
/// A max-pool runs before these conv indices.
const POOL_BEFORE: [usize; 4] = [2, 4, 8, 12];
/// Tap after the ReLU of these conv indices (0-based): convs 1,3,5,9,13.
const TAPS: [usize; 5] = [0, 2, 4, 8, 12];
pub const NUM_TAPS: usize = 5;

/// Canonical input normalization (images in [0, 1]).
const MEAN: [f64; 3] = [0.485, 0.456, 0.406];
const STD: [f64; 3] = [0.229, 0.224, 0.225];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BackboneConfig {
    /// Divide every stage width by this factor (min 8 channels). 1 matches
    /// the pretrained layout; larger divisors give fast random backbones for
    /// tests and smoke training.
    pub width_divisor: usize,
}

impl Default for BackboneConfig {
    fn default() -> Self {
        BackboneConfig { width_divisor: 1 }
    }
}

/// Frozen feature extractor. Parameters are immutable after construction;
/// identical inputs always produce identical features.
#[derive(Debug, Clone)]
pub struct FeatureExtractor<T> {
    convs: Vec<Conv2dLayer<T>>,
}

impl<T: Scalar> FeatureExtractor<T> {
    /// Seeded random backbone (offline fallback).
    pub fn seeded_random(config: BackboneConfig, seed: u64) -> Result<Self> {
        if config.width_divisor == 0 {
            return Err(CoreError::config("width_divisor must be >= 1"));
        }
        let mut rng = Rng::new(seed);
        let mut convs = Vec::with_capacity(CHANNELS.len());
        let mut c_in = 3usize;
        for &full in &CHANNELS {
            let c_out = (full / config.width_divisor).max(8);
            convs.push(Conv2dLayer::init(c_in, c_out, 3, 1, 1, &mut rng));
            c_in = c_out;
        }
        Ok(FeatureExtractor { convs })
    }

    /// Full-width backbone to be filled from a pretrained weight file.
    /// Conv tensors are named `conv0.w` .. `conv12.b` in trunk order.
    pub fn for_pretrained() -> Self {
        // Initialization is irrelevant; weights are replaced by the loader.
        Self::seeded_random(BackboneConfig::default(), 0).expect("static config is valid")
    }

    pub fn num_convs(&self) -> usize {
        self.convs.len()
    }

    pub fn params_mut(&mut self) -> ParamListMut<'_, T> {
        let mut out = Vec::new();
        for (i, c) in self.convs.iter_mut().enumerate() {
            c.visit_mut(&alloc::format!("conv{i}"), &mut out);
        }
        out
    }

    pub fn params(&self) -> ParamList<'_, T> {
        let mut out = Vec::new();
        for (i, c) in self.convs.iter().enumerate() {
            c.visit(&alloc::format!("conv{i}"), &mut out);
        }
        out
    }

    /// Expected weight shape of conv `i` as (c_out, c_in) — used by loaders.
    pub fn conv_dims(&self, i: usize) -> (usize, usize) {
        (self.convs[i].c_out, self.convs[i].c_in)
    }

    /// Forward through the trunk collecting the five tapped feature maps.
    /// `x` is `[3, H, W]` in [0, 1]; normalization happens inside.
    pub fn forward_taps(&self, g: &mut Graph<T>, x: &Value<T>) -> [Value<T>; NUM_TAPS] {
        debug_assert_eq!(x.shape().c, 3, "backbone expects RGB input");
        let scale: Vec<T> = STD.iter().map(|s| T::from_f64(1.0 / s)).collect();
        let shift: Vec<T> = MEAN.iter().zip(STD.iter()).map(|(m, s)| T::from_f64(-m / s)).collect();
        let mut h = g.channel_affine(x, &scale, &shift);

        let mut taps: Vec<Value<T>> = Vec::with_capacity(NUM_TAPS);
        for (i, conv) in self.convs.iter().enumerate() {
            if POOL_BEFORE.contains(&i) {
                h = g.maxpool2(&h);
            }
            h = conv.forward_frozen(g, &h);
            h = g.relu(&h);
            if TAPS.contains(&i) {
                taps.push(h.clone());
            }
        }
        taps.try_into().ok().expect("exactly five taps")
    }

    /// Tap features of a plain tensor, off any tape.
    pub fn features(&self, x: &Tensor<T>) -> [Arc<Tensor<T>>; NUM_TAPS] {
        let mut g = Graph::inference();
        let xv = g.input(x.clone(), false);
        let taps = self.forward_taps(&mut g, &xv);
        taps.map(|v| Arc::new(v.tensor().clone()))
    }
}
