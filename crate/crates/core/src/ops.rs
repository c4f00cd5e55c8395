//! Spatial kernels: convolution (im2col + GEMM), pooling, resampling and
//! padding, each with its adjoint. The tape in [`crate::graph`] dispatches
//! here; the kernels themselves know nothing about autodiff.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec;
use alloc::vec::Vec;

use crate::scalar::Scalar;
use crate::tensor::{Shape, Tensor};

/// Kernel size / stride / zero padding of a convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvSpec {
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
}

impl ConvSpec {
    pub fn out_dim(&self, d: usize) -> usize {
        (d + 2 * self.pad - self.k) / self.stride + 1
    }

    pub fn out_shape(&self, input: Shape, c_out: usize) -> Shape {
        Shape::new(c_out, self.out_dim(input.h), self.out_dim(input.w))
    }
}

/// Column buffer rows are capped so the im2col scratch stays cache friendly
/// even on large images.
const COL_BUDGET: usize = 1 << 20;

fn strip_rows(ckk: usize, ow: usize, oh: usize) -> usize {
    (COL_BUDGET / (ckk * ow).max(1)).clamp(1, oh.max(1))
}

/// Gather the im2col block for output rows [oy0, oy1) into `cols`,
/// laid out as [c_in * k * k, (oy1 - oy0) * ow] row-major.
fn im2col_strip<T: Scalar>(
    x: &Tensor<T>,
    spec: ConvSpec,
    oy0: usize,
    oy1: usize,
    ow: usize,
    cols: &mut [T],
) {
    let Shape { c, h, w } = x.shape();
    let k = spec.k;
    let n = (oy1 - oy0) * ow;
    let xd = x.data();
    let mut row = 0usize;
    for ci in 0..c {
        let plane = &xd[ci * h * w..(ci + 1) * h * w];
        for ky in 0..k {
            for kx in 0..k {
                let dst = &mut cols[row * n..(row + 1) * n];
                let mut j = 0usize;
                for oy in oy0..oy1 {
                    let sy = (oy * spec.stride + ky) as isize - spec.pad as isize;
                    if sy < 0 || sy >= h as isize {
                        for v in dst[j..j + ow].iter_mut() {
                            *v = T::zero();
                        }
                        j += ow;
                        continue;
                    }
                    let src_row = &plane[sy as usize * w..(sy as usize + 1) * w];
                    for ox in 0..ow {
                        let sx = (ox * spec.stride + kx) as isize - spec.pad as isize;
                        dst[j] = if sx < 0 || sx >= w as isize {
                            T::zero()
                        } else {
                            src_row[sx as usize]
                        };
                        j += 1;
                    }
                }
                row += 1;
            }
        }
    }
}

/// Scatter-add the adjoint of `im2col_strip`.
fn col2im_strip<T: Scalar>(
    dx: &mut Tensor<T>,
    spec: ConvSpec,
    oy0: usize,
    oy1: usize,
    ow: usize,
    cols: &[T],
) {
    let Shape { c, h, w } = dx.shape();
    let k = spec.k;
    let n = (oy1 - oy0) * ow;
    let dxd = dx.data_mut();
    let mut row = 0usize;
    for ci in 0..c {
        for ky in 0..k {
            for kx in 0..k {
                let src = &cols[row * n..(row + 1) * n];
                let mut j = 0usize;
                for oy in oy0..oy1 {
                    let sy = (oy * spec.stride + ky) as isize - spec.pad as isize;
                    if sy < 0 || sy >= h as isize {
                        j += ow;
                        continue;
                    }
                    let base = ci * h * w + sy as usize * w;
                    for ox in 0..ow {
                        let sx = (ox * spec.stride + kx) as isize - spec.pad as isize;
                        if sx >= 0 && sx < w as isize {
                            dxd[base + sx as usize] = dxd[base + sx as usize] + src[j];
                        }
                        j += 1;
                    }
                }
                row += 1;
            }
        }
    }
}

/// 2-D convolution. Weights are laid out `[c_out, c_in * k * k]`
/// (stored as a tensor of shape `[c_out, c_in, k * k]`), bias `[c_out, 1, 1]`.
pub fn conv2d<T: Scalar>(x: &Tensor<T>, w: &Tensor<T>, b: &Tensor<T>, spec: ConvSpec) -> Tensor<T> {
    let c_out = w.shape().c;
    let ckk = x.shape().c * spec.k * spec.k;
    debug_assert_eq!(w.shape().h * w.shape().w, x.shape().c * spec.k * spec.k, "weight/input channel mismatch");
    debug_assert_eq!(b.len(), c_out);

    let out_shape = spec.out_shape(x.shape(), c_out);
    let (oh, ow) = out_shape.spatial();
    let mut out = Tensor::zeros(out_shape);

    let strip = strip_rows(ckk, ow, oh);
    let mut cols = vec![T::zero(); ckk * strip * ow];
    let mut oy0 = 0usize;
    while oy0 < oh {
        let oy1 = (oy0 + strip).min(oh);
        let n = (oy1 - oy0) * ow;
        im2col_strip(x, spec, oy0, oy1, ow, &mut cols[..ckk * n]);
        // out[cout, strip] = W[cout, ckk] x cols[ckk, strip]
        T::gemm_strided(
            c_out, ckk, n,
            T::one(),
            w.data(), ckk as isize, 1,
            &cols[..ckk * n], n as isize, 1,
            T::zero(),
            &mut out.data_mut()[oy0 * ow..],
            (oh * ow) as isize, 1,
        );
        oy0 = oy1;
    }

    for c in 0..c_out {
        let bias = b.data()[c];
        for v in out.channel_mut(c) {
            *v = *v + bias;
        }
    }
    out
}

/// Adjoint of [`conv2d`]. Gradients are computed only for the requested
/// operands so frozen-weight branches pay for the input gradient alone.
pub fn conv2d_backward<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    dy: &Tensor<T>,
    spec: ConvSpec,
    need_dx: bool,
    need_dw: bool,
) -> (Option<Tensor<T>>, Option<Tensor<T>>, Option<Tensor<T>>) {
    let c_out = w.shape().c;
    let ckk = x.shape().c * spec.k * spec.k;
    let (oh, ow) = dy.shape().spatial();

    let mut dx = need_dx.then(|| Tensor::zeros(x.shape()));
    let mut dw = need_dw.then(|| Tensor::zeros(w.shape()));
    let db = need_dw.then(|| {
        let mut db = Tensor::zeros(Shape::new(c_out, 1, 1));
        for c in 0..c_out {
            let mut acc = T::zero();
            for &v in dy.channel(c) {
                acc = acc + v;
            }
            db.data_mut()[c] = acc;
        }
        db
    });

    if need_dx || need_dw {
        let strip = strip_rows(ckk, ow, oh);
        let mut cols = vec![T::zero(); if need_dw { ckk * strip * ow } else { 0 }];
        let mut dcols = vec![T::zero(); if need_dx { ckk * strip * ow } else { 0 }];
        let mut oy0 = 0usize;
        while oy0 < oh {
            let oy1 = (oy0 + strip).min(oh);
            let n = (oy1 - oy0) * ow;

            if let Some(dw) = dw.as_mut() {
                im2col_strip(x, spec, oy0, oy1, ow, &mut cols[..ckk * n]);
                // dW[cout, ckk] += dY_strip[cout, n] x cols^T[n, ckk]
                T::gemm_strided(
                    c_out, n, ckk,
                    T::one(),
                    &dy.data()[oy0 * ow..], (oh * ow) as isize, 1,
                    &cols[..ckk * n], 1, n as isize,
                    T::one(),
                    dw.data_mut(), ckk as isize, 1,
                );
            }
            if let Some(dx) = dx.as_mut() {
                // dcols[ckk, n] = W^T[ckk, cout] x dY_strip[cout, n]
                T::gemm_strided(
                    ckk, c_out, n,
                    T::one(),
                    w.data(), 1, ckk as isize,
                    &dy.data()[oy0 * ow..], (oh * ow) as isize, 1,
                    T::zero(),
                    &mut dcols[..ckk * n], n as isize, 1,
                );
                col2im_strip(dx, spec, oy0, oy1, ow, &dcols[..ckk * n]);
            }
            oy0 = oy1;
        }
    }

    (dx, dw, db)
}

/// 2x2 max pooling with stride 2, floor semantics. A dimension that is
/// already 1 passes through unchanged so very small feature maps stay valid.
/// Returns the pooled tensor and flat argmax indices for the adjoint.
pub fn maxpool2<T: Scalar>(x: &Tensor<T>) -> (Tensor<T>, Vec<u32>) {
    let Shape { c, h, w } = x.shape();
    let oh = (h / 2).max(1);
    let ow = (w / 2).max(1);
    let mut out = Tensor::zeros(Shape::new(c, oh, ow));
    let mut arg = vec![0u32; c * oh * ow];
    let xd = x.data();
    for ci in 0..c {
        for oy in 0..oh {
            let y0 = oy * 2;
            let y1 = (y0 + 2).min(h);
            for ox in 0..ow {
                let x0 = ox * 2;
                let x1 = (x0 + 2).min(w);
                let mut best = T::neg_infinity();
                let mut best_idx = 0usize;
                for y in y0..y1 {
                    for xx in x0..x1 {
                        let idx = (ci * h + y) * w + xx;
                        if xd[idx] > best {
                            best = xd[idx];
                            best_idx = idx;
                        }
                    }
                }
                *out.at_mut(ci, oy, ox) = best;
                arg[(ci * oh + oy) * ow + ox] = best_idx as u32;
            }
        }
    }
    (out, arg)
}

pub fn maxpool2_backward<T: Scalar>(x_shape: Shape, dy: &Tensor<T>, arg: &[u32]) -> Tensor<T> {
    let mut dx = Tensor::zeros(x_shape);
    let dxd = dx.data_mut();
    for (i, &v) in dy.data().iter().enumerate() {
        let idx = arg[i] as usize;
        dxd[idx] = dxd[idx] + v;
    }
    dx
}

#[inline]
fn bilinear_taps(o: usize, src_len: usize) -> (usize, usize, f64) {
    // Half-pixel centers, matching a standard align_corners=false resize.
    let s = (o as f64 + 0.5) / 2.0 - 0.5;
    let s = s.max(0.0);
    let y0 = (s.floor() as usize).min(src_len - 1);
    let y1 = (y0 + 1).min(src_len - 1);
    (y0, y1, s - y0 as f64)
}

/// Bilinear 2x upsampling.
pub fn upsample2<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let Shape { c, h, w } = x.shape();
    let (oh, ow) = (h * 2, w * 2);
    let mut out = Tensor::zeros(Shape::new(c, oh, ow));
    for ci in 0..c {
        let plane = x.channel(ci);
        let dst = out.channel_mut(ci);
        for oy in 0..oh {
            let (y0, y1, fy) = bilinear_taps(oy, h);
            let fy = T::from_f64(fy);
            for ox in 0..ow {
                let (x0, x1, fx) = bilinear_taps(ox, w);
                let fx = T::from_f64(fx);
                let a = plane[y0 * w + x0];
                let b = plane[y0 * w + x1];
                let cc = plane[y1 * w + x0];
                let d = plane[y1 * w + x1];
                let top = a + (b - a) * fx;
                let bot = cc + (d - cc) * fx;
                dst[oy * ow + ox] = top + (bot - top) * fy;
            }
        }
    }
    out
}

pub fn upsample2_backward<T: Scalar>(x_shape: Shape, dy: &Tensor<T>) -> Tensor<T> {
    let Shape { c, h, w } = x_shape;
    let (oh, ow) = (h * 2, w * 2);
    let mut dx = Tensor::zeros(x_shape);
    for ci in 0..c {
        let src = dy.channel(ci);
        let dst = dx.channel_mut(ci);
        for oy in 0..oh {
            let (y0, y1, fy) = bilinear_taps(oy, h);
            for ox in 0..ow {
                let (x0, x1, fx) = bilinear_taps(ox, w);
                let g = src[oy * ow + ox].as_f64();
                dst[y0 * w + x0] = dst[y0 * w + x0] + T::from_f64(g * (1.0 - fx) * (1.0 - fy));
                dst[y0 * w + x1] = dst[y0 * w + x1] + T::from_f64(g * fx * (1.0 - fy));
                dst[y1 * w + x0] = dst[y1 * w + x0] + T::from_f64(g * (1.0 - fx) * fy);
                dst[y1 * w + x1] = dst[y1 * w + x1] + T::from_f64(g * fx * fy);
            }
        }
    }
    dx
}

/// Reflection padding (edge pixel not repeated). `pads` is (top, bottom,
/// left, right); each pad must be < the corresponding dimension.
pub fn reflect_pad<T: Scalar>(x: &Tensor<T>, pads: (usize, usize, usize, usize)) -> Tensor<T> {
    let Shape { c, h, w } = x.shape();
    let (t, b, l, r) = pads;
    debug_assert!(t < h && b < h && l < w && r < w, "reflect pad larger than input");
    let (oh, ow) = (h + t + b, w + l + r);
    let mut out = Tensor::zeros(Shape::new(c, oh, ow));
    let reflect = |p: isize, n: usize| -> usize {
        let mut v = p;
        if v < 0 {
            v = -v;
        }
        if v >= n as isize {
            v = 2 * (n as isize - 1) - v;
        }
        v as usize
    };
    for ci in 0..c {
        let plane = x.channel(ci);
        let dst = out.channel_mut(ci);
        for oy in 0..oh {
            let sy = reflect(oy as isize - t as isize, h);
            for ox in 0..ow {
                let sx = reflect(ox as isize - l as isize, w);
                dst[oy * ow + ox] = plane[sy * w + sx];
            }
        }
    }
    out
}

pub fn reflect_pad_backward<T: Scalar>(
    x_shape: Shape,
    dy: &Tensor<T>,
    pads: (usize, usize, usize, usize),
) -> Tensor<T> {
    let Shape { c, h, w } = x_shape;
    let (t, _b, l, _r) = pads;
    let (oh, ow) = dy.shape().spatial();
    let mut dx = Tensor::zeros(x_shape);
    let reflect = |p: isize, n: usize| -> usize {
        let mut v = p;
        if v < 0 {
            v = -v;
        }
        if v >= n as isize {
            v = 2 * (n as isize - 1) - v;
        }
        v as usize
    };
    for ci in 0..c {
        let src = dy.channel(ci);
        let dst = dx.channel_mut(ci);
        for oy in 0..oh {
            let sy = reflect(oy as isize - t as isize, h);
            for ox in 0..ow {
                let sx = reflect(ox as isize - l as isize, w);
                dst[sy * w + sx] = dst[sy * w + sx] + src[oy * ow + ox];
            }
        }
    }
    dx
}

/// Crop a window starting at (y0, x0) of size (h, w).
pub fn crop<T: Scalar>(x: &Tensor<T>, y0: usize, x0: usize, h: usize, w: usize) -> Tensor<T> {
    let Shape { c, h: sh, w: sw } = x.shape();
    debug_assert!(y0 + h <= sh && x0 + w <= sw);
    let mut out = Tensor::zeros(Shape::new(c, h, w));
    for ci in 0..c {
        let plane = x.channel(ci);
        let dst = out.channel_mut(ci);
        for y in 0..h {
            let src = &plane[(y0 + y) * sw + x0..(y0 + y) * sw + x0 + w];
            dst[y * w..(y + 1) * w].copy_from_slice(src);
        }
    }
    out
}

pub fn crop_backward<T: Scalar>(x_shape: Shape, dy: &Tensor<T>, y0: usize, x0: usize) -> Tensor<T> {
    let mut dx = Tensor::zeros(x_shape);
    let (h, w) = dy.shape().spatial();
    let sw = x_shape.w;
    for ci in 0..x_shape.c {
        let src = dy.channel(ci);
        let dst = dx.channel_mut(ci);
        for y in 0..h {
            let d = &mut dst[(y0 + y) * sw + x0..(y0 + y) * sw + x0 + w];
            for (o, s) in d.iter_mut().zip(&src[y * w..(y + 1) * w]) {
                *o = *o + *s;
            }
        }
    }
    dx
}

/// Per-channel separable valid-mode filtering with a symmetric 1-D window
/// (both passes use the same window). Output is (h-k+1, w-k+1).
pub fn separable_valid<T: Scalar>(x: &Tensor<T>, window: &[T]) -> Tensor<T> {
    let Shape { c, h, w } = x.shape();
    let k = window.len();
    debug_assert!(h >= k && w >= k, "input smaller than filter window");
    let (oh, ow) = (h - k + 1, w - k + 1);
    let mut tmp = vec![T::zero(); h * ow];
    let mut out = Tensor::zeros(Shape::new(c, oh, ow));
    for ci in 0..c {
        let plane = x.channel(ci);
        // horizontal pass
        for y in 0..h {
            let row = &plane[y * w..(y + 1) * w];
            for ox in 0..ow {
                let mut acc = T::zero();
                for (i, &wv) in window.iter().enumerate() {
                    acc = acc + row[ox + i] * wv;
                }
                tmp[y * ow + ox] = acc;
            }
        }
        // vertical pass
        let dst = out.channel_mut(ci);
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = T::zero();
                for (i, &wv) in window.iter().enumerate() {
                    acc = acc + tmp[(oy + i) * ow + ox] * wv;
                }
                dst[oy * ow + ox] = acc;
            }
        }
    }
    out
}

/// Adjoint of [`separable_valid`]: scatter `dy` back through the window.
pub fn separable_valid_backward<T: Scalar>(x_shape: Shape, dy: &Tensor<T>, window: &[T]) -> Tensor<T> {
    let Shape { c, h, w } = x_shape;
    let (oh, ow) = dy.shape().spatial();
    let mut tmp = vec![T::zero(); h * ow];
    let mut dx = Tensor::zeros(x_shape);
    for ci in 0..c {
        let src = dy.channel(ci);
        for v in tmp.iter_mut() {
            *v = T::zero();
        }
        // vertical adjoint
        for oy in 0..oh {
            for (i, &wv) in window.iter().enumerate() {
                let y = oy + i;
                for ox in 0..ow {
                    tmp[y * ow + ox] = tmp[y * ow + ox] + src[oy * ow + ox] * wv;
                }
            }
        }
        // horizontal adjoint
        let dst = dx.channel_mut(ci);
        for y in 0..h {
            for ox in 0..ow {
                let g = tmp[y * ow + ox];
                for (i, &wv) in window.iter().enumerate() {
                    dst[y * w + ox + i] = dst[y * w + ox + i] + g * wv;
                }
            }
        }
    }
    dx
}

/// Normalized 1-D Gaussian window.
pub fn gaussian_window<T: Scalar>(k: usize, sigma: f64) -> Vec<T> {
    let mean = (k - 1) as f64 / 2.0;
    let mut win: Vec<f64> = (0..k)
        .map(|i| {
            let d = i as f64 - mean;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = win.iter().sum();
    for v in win.iter_mut() {
        *v /= sum;
    }
    win.into_iter().map(T::from_f64).collect()
}

/// Channel means: [C, H, W] -> [C, 1, 1].
pub fn global_avg_pool<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let Shape { c, h, w } = x.shape();
    let inv = T::from_f64(1.0 / (h * w) as f64);
    let mut out = Tensor::zeros(Shape::new(c, 1, 1));
    for ci in 0..c {
        let mut acc = T::zero();
        for &v in x.channel(ci) {
            acc = acc + v;
        }
        out.data_mut()[ci] = acc * inv;
    }
    out
}

pub fn global_avg_pool_backward<T: Scalar>(x_shape: Shape, dy: &Tensor<T>) -> Tensor<T> {
    let Shape { c, h, w } = x_shape;
    let inv = T::from_f64(1.0 / (h * w) as f64);
    let mut dx = Tensor::zeros(x_shape);
    for ci in 0..c {
        let g = dy.data()[ci] * inv;
        for v in dx.channel_mut(ci) {
            *v = g;
        }
    }
    dx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn naive_conv(x: &Tensor<f64>, w: &Tensor<f64>, b: &Tensor<f64>, spec: ConvSpec) -> Tensor<f64> {
        let Shape { c: cin, h, w: wd } = x.shape();
        let cout = w.shape().c;
        let k = spec.k;
        let out_shape = spec.out_shape(x.shape(), cout);
        let mut out = Tensor::zeros(out_shape);
        for co in 0..cout {
            for oy in 0..out_shape.h {
                for ox in 0..out_shape.w {
                    let mut acc = b.data()[co];
                    for ci in 0..cin {
                        for ky in 0..k {
                            for kx in 0..k {
                                let sy = (oy * spec.stride + ky) as isize - spec.pad as isize;
                                let sx = (ox * spec.stride + kx) as isize - spec.pad as isize;
                                if sy >= 0 && sy < h as isize && sx >= 0 && sx < wd as isize {
                                    let wv = w.data()[(co * cin + ci) * k * k + ky * k + kx];
                                    acc += wv * x.at(ci, sy as usize, sx as usize);
                                }
                            }
                        }
                    }
                    *out.at_mut(co, oy, ox) = acc;
                }
            }
        }
        out
    }

    #[test]
    fn conv_matches_naive_reference() {
        let mut rng = Rng::new(11);
        for &(cin, cout, h, w, k, s, p) in &[
            (1usize, 1usize, 5usize, 5usize, 3usize, 1usize, 1usize),
            (3, 4, 7, 6, 3, 1, 1),
            (2, 3, 8, 8, 3, 2, 1),
            (2, 5, 9, 9, 3, 4, 1),
            (4, 2, 6, 7, 1, 1, 0),
        ] {
            let spec = ConvSpec { k, stride: s, pad: p };
            let x = Tensor::<f64>::uniform(Shape::new(cin, h, w), -1.0, 1.0, &mut rng);
            let wt = Tensor::<f64>::uniform(Shape::new(cout, cin, k * k), -1.0, 1.0, &mut rng);
            let b = Tensor::<f64>::uniform(Shape::new(cout, 1, 1), -1.0, 1.0, &mut rng);
            let fast = conv2d(&x, &wt, &b, spec);
            let slow = naive_conv(&x, &wt, &b, spec);
            assert!(fast.max_abs_diff(&slow) < 1e-12, "cin={cin} cout={cout} k={k} s={s}");
        }
    }

    #[test]
    fn conv_backward_matches_finite_difference() {
        let mut rng = Rng::new(5);
        let spec = ConvSpec { k: 3, stride: 2, pad: 1 };
        let x = Tensor::<f64>::uniform(Shape::new(2, 6, 5), -1.0, 1.0, &mut rng);
        let w = Tensor::<f64>::uniform(Shape::new(3, 2, 9), -1.0, 1.0, &mut rng);
        let b = Tensor::<f64>::uniform(Shape::new(3, 1, 1), -1.0, 1.0, &mut rng);
        // Loss = weighted sum of outputs (weights fixed) so dL/dy is known.
        let dy = Tensor::<f64>::uniform(spec.out_shape(x.shape(), 3), -1.0, 1.0, &mut rng);
        let loss = |x: &Tensor<f64>, w: &Tensor<f64>, b: &Tensor<f64>| -> f64 {
            let y = conv2d(x, w, b, spec);
            y.data().iter().zip(dy.data()).map(|(a, g)| a * g).sum()
        };
        let (dx, dw, db) = conv2d_backward(&x, &w, &dy, spec, true, true);
        let (dx, dw, db) = (dx.unwrap(), dw.unwrap(), db.unwrap());
        let h = 1e-6;
        for (tensor, grad, name) in [(&x, &dx, "x"), (&w, &dw, "w"), (&b, &db, "b")] {
            for i in 0..tensor.len() {
                let mut tp = (*tensor).clone();
                tp.data_mut()[i] += h;
                let mut tm = (*tensor).clone();
                tm.data_mut()[i] -= h;
                let (fp, fm) = match name {
                    "x" => (loss(&tp, &w, &b), loss(&tm, &w, &b)),
                    "w" => (loss(&x, &tp, &b), loss(&x, &tm, &b)),
                    _ => (loss(&x, &w, &tp), loss(&x, &w, &tm)),
                };
                let fd = (fp - fm) / (2.0 * h);
                let an = grad.data()[i];
                assert!((fd - an).abs() < 1e-6 * (1.0 + fd.abs().max(an.abs())), "{name}[{i}]: fd={fd} an={an}");
            }
        }
    }

    #[test]
    fn maxpool_small_and_odd() {
        let x = Tensor::<f32>::from_vec(
            Shape::new(1, 3, 3),
            vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0],
        )
        .unwrap();
        let (y, _) = maxpool2(&x);
        assert_eq!(y.shape(), Shape::new(1, 1, 1));
        assert_eq!(y.data()[0], 5.0); // floor semantics drop the odd edge

        let unit = Tensor::<f32>::from_vec(Shape::new(1, 1, 1), vec![3.0]).unwrap();
        let (y, _) = maxpool2(&unit);
        assert_eq!(y.data()[0], 3.0);
    }

    #[test]
    fn maxpool_backward_routes_to_argmax() {
        let x = Tensor::<f64>::from_vec(Shape::new(1, 2, 2), vec![1.0, 9.0, 3.0, 4.0]).unwrap();
        let (y, arg) = maxpool2(&x);
        assert_eq!(y.data()[0], 9.0);
        let dy = Tensor::scalar(2.0);
        let dx = maxpool2_backward(x.shape(), &dy, &arg);
        assert_eq!(dx.data(), &[0.0, 2.0, 0.0, 0.0]);
    }

    #[test]
    fn upsample_doubles_and_preserves_constants() {
        let x = Tensor::<f64>::full(Shape::new(2, 3, 4), 0.7);
        let y = upsample2(&x);
        assert_eq!(y.shape(), Shape::new(2, 6, 8));
        assert!(y.data().iter().all(|v| (v - 0.7).abs() < 1e-12));
    }

    #[test]
    fn upsample_backward_is_adjoint() {
        // <up(x), dy> == <x, up^T(dy)> for random tensors.
        let mut rng = Rng::new(21);
        let x = Tensor::<f64>::uniform(Shape::new(1, 3, 3), -1.0, 1.0, &mut rng);
        let dy = Tensor::<f64>::uniform(Shape::new(1, 6, 6), -1.0, 1.0, &mut rng);
        let lhs: f64 = upsample2(&x).data().iter().zip(dy.data()).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.data().iter().zip(upsample2_backward(x.shape(), &dy).data()).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn reflect_pad_mirrors() {
        let x = Tensor::<f64>::from_vec(Shape::new(1, 1, 4), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let y = reflect_pad(&x, (0, 0, 2, 1));
        assert_eq!(y.data(), &[3.0, 2.0, 1.0, 2.0, 3.0, 4.0, 3.0]);
    }

    #[test]
    fn pad_crop_roundtrip() {
        let mut rng = Rng::new(2);
        let x = Tensor::<f64>::uniform(Shape::new(2, 5, 6), -1.0, 1.0, &mut rng);
        let p = reflect_pad(&x, (1, 2, 3, 1));
        let back = crop(&p, 1, 3, 5, 6);
        assert_eq!(back, x);
    }

    #[test]
    fn separable_valid_matches_direct() {
        let mut rng = Rng::new(8);
        let x = Tensor::<f64>::uniform(Shape::new(1, 7, 9), 0.0, 1.0, &mut rng);
        let win = gaussian_window::<f64>(3, 1.5);
        let y = separable_valid(&x, &win);
        assert_eq!(y.shape(), Shape::new(1, 5, 7));
        // direct 2-D filter at one sample
        let mut acc = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                acc += win[i] * win[j] * x.at(0, 2 + i, 3 + j);
            }
        }
        assert!((y.at(0, 2, 3) - acc).abs() < 1e-12);
    }

    #[test]
    fn separable_backward_is_adjoint() {
        let mut rng = Rng::new(13);
        let win = gaussian_window::<f64>(5, 1.5);
        let x = Tensor::<f64>::uniform(Shape::new(2, 8, 8), -1.0, 1.0, &mut rng);
        let dy = Tensor::<f64>::uniform(Shape::new(2, 4, 4), -1.0, 1.0, &mut rng);
        let lhs: f64 = separable_valid(&x, &win).data().iter().zip(dy.data()).map(|(a, b)| a * b).sum();
        let rhs: f64 = x
            .data()
            .iter()
            .zip(separable_valid_backward(x.shape(), &dy, &win).data())
            .map(|(a, b)| a * b)
            .sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn gap_means_channels() {
        let mut x = Tensor::<f64>::zeros(Shape::new(2, 2, 2));
        x.channel_mut(0).copy_from_slice(&[1.0, 2.0, 3.0, 4.0]);
        x.channel_mut(1).copy_from_slice(&[4.0, 4.0, 4.0, 4.0]);
        let y = global_avg_pool(&x);
        assert_eq!(y.data(), &[2.5, 4.0]);
    }
}
