//! Image containers used throughout the pipeline.
//!
//! All images are stored planar (channel-major), matching the tensor layout
//! the networks consume. `RgbImage` is the display-space currency in [0, 1];
//! `LabImage` keeps lightness and chroma separate because the color
//! correction stage only ever touches chroma.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec::Vec;

use crate::error::{CoreError, Result};
use crate::scalar::Scalar;
use crate::tensor::{Shape, Tensor};

/// RGB image, 3 channels, values in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage<T> {
    data: Tensor<T>,
}

impl<T: Scalar> RgbImage<T> {
    /// Wrap a `[3, H, W]` tensor, requiring finite values already in [0, 1].
    pub fn new(data: Tensor<T>) -> Result<Self> {
        if data.shape().c != 3 {
            return Err(CoreError::shape(format_args!("rgb image needs 3 channels, got {}", data.shape().c)));
        }
        if !data.is_finite() {
            return Err(CoreError::NonFinite("rgb image"));
        }
        let lo = T::from_f64(-1e-6);
        let hi = T::from_f64(1.0 + 1e-6);
        if data.data().iter().any(|&v| v < lo || v > hi) {
            return Err(CoreError::invalid("rgb values outside [0, 1]"));
        }
        Ok(RgbImage { data })
    }

    /// Wrap a `[3, H, W]` tensor, clamping out-of-gamut values into [0, 1].
    pub fn from_unclamped(data: Tensor<T>) -> Result<Self> {
        if data.shape().c != 3 {
            return Err(CoreError::shape(format_args!("rgb image needs 3 channels, got {}", data.shape().c)));
        }
        if !data.is_finite() {
            return Err(CoreError::NonFinite("rgb image"));
        }
        Ok(RgbImage { data: data.map(|v| v.max(T::zero()).min(T::one())) })
    }

    pub fn height(&self) -> usize {
        self.data.shape().h
    }

    pub fn width(&self) -> usize {
        self.data.shape().w
    }

    pub fn tensor(&self) -> &Tensor<T> {
        &self.data
    }

    pub fn into_tensor(self) -> Tensor<T> {
        self.data
    }

    #[inline]
    pub fn at(&self, c: usize, y: usize, x: usize) -> T {
        self.data.at(c, y, x)
    }

    /// Map [0, 1] to the network range [-1, 1].
    pub fn to_network(&self) -> Tensor<T> {
        self.data.map(|v| v + v - T::one())
    }

    /// Map a network-range `[3, H, W]` tensor back to a clamped image.
    pub fn from_network(t: &Tensor<T>) -> Result<Self> {
        let half = T::from_f64(0.5);
        Self::from_unclamped(t.map(|v| (v + T::one()) * half))
    }

    pub fn resize(&self, oh: usize, ow: usize) -> Result<Self> {
        Ok(RgbImage { data: resize_bilinear(&self.data, oh, ow)? })
    }

    pub fn hflip(&self) -> Self {
        RgbImage { data: hflip(&self.data) }
    }

    pub fn cast<U: Scalar>(&self) -> RgbImage<U> {
        RgbImage { data: self.data.cast() }
    }
}

/// CIELAB image with the lightness plane kept apart from chroma.
/// `l` is `[1, H, W]` in [0, 100]; `ab` is `[2, H, W]` in native Lab units.
#[derive(Debug, Clone, PartialEq)]
pub struct LabImage<T> {
    l: Tensor<T>,
    ab: Tensor<T>,
}

impl<T: Scalar> LabImage<T> {
    pub fn new(l: Tensor<T>, ab: Tensor<T>) -> Result<Self> {
        if l.shape().c != 1 || ab.shape().c != 2 || l.shape().spatial() != ab.shape().spatial() {
            return Err(CoreError::shape(format_args!(
                "lab planes disagree: L {} vs ab {}",
                l.shape(),
                ab.shape()
            )));
        }
        if !l.is_finite() || !ab.is_finite() {
            return Err(CoreError::NonFinite("lab image"));
        }
        let hundred = T::from_f64(100.0 + 1e-6);
        let lo = T::from_f64(-1e-6);
        if l.data().iter().any(|&v| v < lo || v > hundred) {
            return Err(CoreError::invalid("L channel outside [0, 100]"));
        }
        Ok(LabImage { l, ab })
    }

    pub fn height(&self) -> usize {
        self.l.shape().h
    }

    pub fn width(&self) -> usize {
        self.l.shape().w
    }

    pub fn luma(&self) -> &Tensor<T> {
        &self.l
    }

    pub fn chroma_raw(&self) -> &Tensor<T> {
        &self.ab
    }

    pub fn into_parts(self) -> (Tensor<T>, Tensor<T>) {
        (self.l, self.ab)
    }
}

/// Lab chroma scaled by 1/128 into the network range [-1, 1], `[2, H, W]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedChroma<T> {
    data: Tensor<T>,
}

impl<T: Scalar> NormalizedChroma<T> {
    pub fn new(data: Tensor<T>) -> Result<Self> {
        if data.shape().c != 2 {
            return Err(CoreError::shape(format_args!("chroma needs 2 channels, got {}", data.shape().c)));
        }
        if !data.is_finite() {
            return Err(CoreError::NonFinite("chroma"));
        }
        let hi = T::from_f64(1.0 + 1e-6);
        if data.data().iter().any(|&v| v < -hi || v > hi) {
            return Err(CoreError::invalid("normalized chroma outside [-1, 1]"));
        }
        Ok(NormalizedChroma { data })
    }

    pub fn tensor(&self) -> &Tensor<T> {
        &self.data
    }

    pub fn into_tensor(self) -> Tensor<T> {
        self.data
    }

    pub fn height(&self) -> usize {
        self.data.shape().h
    }

    pub fn width(&self) -> usize {
        self.data.shape().w
    }
}

/// Lightness plane `[1, H, W]` carried around the color correction network.
#[derive(Debug, Clone, PartialEq)]
pub struct Luma<T> {
    data: Tensor<T>,
}

impl<T: Scalar> Luma<T> {
    pub fn new(data: Tensor<T>) -> Result<Self> {
        if data.shape().c != 1 {
            return Err(CoreError::shape("luma must be single channel"));
        }
        Ok(Luma { data })
    }

    pub fn tensor(&self) -> &Tensor<T> {
        &self.data
    }

    pub fn into_tensor(self) -> Tensor<T> {
        self.data
    }
}

/// Mirror along the horizontal axis.
pub fn hflip<T: Scalar>(t: &Tensor<T>) -> Tensor<T> {
    let Shape { c, h, w } = t.shape();
    let mut out = Tensor::zeros(t.shape());
    for ci in 0..c {
        let src = t.channel(ci);
        let dst = out.channel_mut(ci);
        for y in 0..h {
            for x in 0..w {
                dst[y * w + x] = src[y * w + (w - 1 - x)];
            }
        }
    }
    out
}

/// Separable triangle-filter resize with half-pixel centers. The filter
/// support widens when downscaling so the result is antialiased.
pub fn resize_bilinear<T: Scalar>(t: &Tensor<T>, oh: usize, ow: usize) -> Result<Tensor<T>> {
    let Shape { c, h, w } = t.shape();
    if oh == 0 || ow == 0 {
        return Err(CoreError::invalid("resize target must be non-empty"));
    }
    if (oh, ow) == (h, w) {
        return Ok(t.clone());
    }
    let wx = axis_weights(w, ow);
    let wy = axis_weights(h, oh);

    let mut out = Tensor::zeros(Shape::new(c, oh, ow));
    let mut tmp = alloc::vec![0.0f64; h * ow];
    for ci in 0..c {
        let plane = t.channel(ci);
        for y in 0..h {
            let row = &plane[y * w..(y + 1) * w];
            for (ox, taps) in wx.iter().enumerate() {
                let mut acc = 0.0f64;
                for &(sx, wv) in taps {
                    acc += row[sx].as_f64() * wv;
                }
                tmp[y * ow + ox] = acc;
            }
        }
        let dst = out.channel_mut(ci);
        for (oy, taps) in wy.iter().enumerate() {
            for ox in 0..ow {
                let mut acc = 0.0f64;
                for &(sy, wv) in taps {
                    acc += tmp[sy * ow + ox] * wv;
                }
                dst[oy * ow + ox] = T::from_f64(acc);
            }
        }
    }
    Ok(out)
}

/// Per-output-pixel (source index, weight) taps for one axis.
fn axis_weights(src: usize, dst: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = src as f64 / dst as f64;
    let support = scale.max(1.0); // widen when downscaling
    let mut all = Vec::with_capacity(dst);
    for o in 0..dst {
        let center = (o as f64 + 0.5) * scale - 0.5;
        let lo = (center - support).ceil().max(0.0) as usize;
        let hi = ((center + support).floor() as isize).min(src as isize - 1) as usize;
        let mut taps = Vec::with_capacity(hi - lo + 1);
        let mut sum = 0.0;
        for s in lo..=hi {
            let d = (s as f64 - center).abs() / support;
            let wv = (1.0 - d).max(0.0);
            if wv > 0.0 {
                taps.push((s, wv));
                sum += wv;
            }
        }
        if taps.is_empty() {
            let s = (center.round().max(0.0) as usize).min(src - 1);
            taps.push((s, 1.0));
            sum = 1.0;
        }
        for t in taps.iter_mut() {
            t.1 /= sum;
        }
        all.push(taps);
    }
    all
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    #[test]
    fn rgb_image_rejects_out_of_range() {
        let t = Tensor::<f32>::full(Shape::new(3, 2, 2), 1.5);
        assert!(RgbImage::new(t.clone()).is_err());
        let img = RgbImage::from_unclamped(t).unwrap();
        assert!(img.tensor().data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn rgb_image_rejects_nan() {
        let mut t = Tensor::<f32>::zeros(Shape::new(3, 2, 2));
        t.data_mut()[0] = f32::NAN;
        assert!(RgbImage::new(t.clone()).is_err());
        assert!(RgbImage::from_unclamped(t).is_err());
    }

    #[test]
    fn network_range_roundtrip() {
        let mut rng = Rng::new(4);
        let img = RgbImage::new(Tensor::<f64>::uniform(Shape::new(3, 4, 4), 0.0, 1.0, &mut rng)).unwrap();
        let back = RgbImage::from_network(&img.to_network()).unwrap();
        assert!(img.tensor().max_abs_diff(back.tensor()) < 1e-12);
    }

    #[test]
    fn hflip_is_involution() {
        let mut rng = Rng::new(6);
        let t = Tensor::<f32>::uniform(Shape::new(3, 5, 7), 0.0, 1.0, &mut rng);
        assert_eq!(hflip(&hflip(&t)), t);
    }

    #[test]
    fn resize_constant_stays_constant() {
        let t = Tensor::<f64>::full(Shape::new(3, 13, 9), 0.42);
        for (oh, ow) in [(256usize, 256usize), (4, 4), (13, 9), (26, 18)] {
            let r = resize_bilinear(&t, oh, ow).unwrap();
            assert_eq!(r.shape(), Shape::new(3, oh, ow));
            assert!(r.data().iter().all(|v| (v - 0.42).abs() < 1e-12));
        }
    }

    #[test]
    fn downscale_averages() {
        // 2x2 -> 1x1 must average all four pixels.
        let t = Tensor::<f64>::from_vec(Shape::new(1, 2, 2), alloc::vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let r = resize_bilinear(&t, 1, 1).unwrap();
        assert!((r.data()[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn luma_must_be_single_channel() {
        assert!(Luma::new(Tensor::<f32>::zeros(Shape::new(2, 2, 2))).is_err());
    }
}
