//! sRGB (D65) <-> CIELAB conversion and the chroma split / merge steps that
//! route color through the correction network while lightness passes through
//! untouched.
//!
//! The differentiable `chroma_to_rgb` kernel at the bottom is what lets
//! training losses defined on RGB reconstructions push gradients back into
//! the chroma-space network output.

#[allow(unused_imports)]
use num_traits::Float;
use crate::error::{CoreError, Result};
use crate::image::{LabImage, Luma, NormalizedChroma, RgbImage};
use crate::scalar::Scalar;
use crate::tensor::{Shape, Tensor};

/// Chroma channels are scaled by 1/128 into [-1, 1] for the network.
pub const CHROMA_SCALE: f64 = 128.0;

// sRGB <-> XYZ (D65), Lindbloom matrices.
const RGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
];
const XYZ_TO_RGB: [[f64; 3]; 3] = [
    [3.2404542, -1.5371385, -0.4985314],
    [-0.9692660, 1.8760108, 0.0415560],
    [0.0556434, -0.2040259, 1.0572252],
];
const WHITE: [f64; 3] = [0.95047, 1.0, 1.08883];

const DELTA: f64 = 6.0 / 29.0;

#[inline]
fn srgb_to_linear(c: f64) -> f64 {
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

#[inline]
fn linear_to_srgb(c: f64) -> f64 {
    if c <= 0.0031308 {
        12.92 * c
    } else {
        1.055 * c.powf(1.0 / 2.4) - 0.055
    }
}

#[inline]
fn linear_to_srgb_grad(c: f64) -> f64 {
    if c <= 0.0031308 {
        12.92
    } else {
        (1.055 / 2.4) * c.powf(1.0 / 2.4 - 1.0)
    }
}

#[inline]
fn lab_f(t: f64) -> f64 {
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

#[inline]
fn lab_f_inv(t: f64) -> f64 {
    if t > DELTA {
        t * t * t
    } else {
        3.0 * DELTA * DELTA * (t - 4.0 / 29.0)
    }
}

#[inline]
fn lab_f_inv_grad(t: f64) -> f64 {
    if t > DELTA {
        3.0 * t * t
    } else {
        3.0 * DELTA * DELTA
    }
}

/// One sRGB pixel (components in [0, 1]) to (L, a, b).
pub fn pixel_rgb_to_lab(r: f64, g: f64, b: f64) -> (f64, f64, f64) {
    let (lr, lg, lb) = (srgb_to_linear(r), srgb_to_linear(g), srgb_to_linear(b));
    let mut xyz = [0.0f64; 3];
    for (i, row) in RGB_TO_XYZ.iter().enumerate() {
        xyz[i] = row[0] * lr + row[1] * lg + row[2] * lb;
    }
    let fx = lab_f(xyz[0] / WHITE[0]);
    let fy = lab_f(xyz[1] / WHITE[1]);
    let fz = lab_f(xyz[2] / WHITE[2]);
    (116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz))
}

/// One (L, a, b) pixel to sRGB, clamped to [0, 1].
pub fn pixel_lab_to_rgb(l: f64, a: f64, b: f64) -> (f64, f64, f64) {
    let fy = (l + 16.0) / 116.0;
    let fx = fy + a / 500.0;
    let fz = fy - b / 200.0;
    let xyz = [WHITE[0] * lab_f_inv(fx), WHITE[1] * lab_f_inv(fy), WHITE[2] * lab_f_inv(fz)];
    let mut rgb = [0.0f64; 3];
    for (i, row) in XYZ_TO_RGB.iter().enumerate() {
        rgb[i] = row[0] * xyz[0] + row[1] * xyz[1] + row[2] * xyz[2];
    }
    (
        linear_to_srgb(rgb[0]).clamp(0.0, 1.0),
        linear_to_srgb(rgb[1]).clamp(0.0, 1.0),
        linear_to_srgb(rgb[2]).clamp(0.0, 1.0),
    )
}

/// Convert an sRGB image to CIELAB. L lands in [0, 100] (clamped against
/// rounding overshoot at the white point), chroma stays in native Lab units.
pub fn rgb_to_lab<T: Scalar>(img: &RgbImage<T>) -> Result<LabImage<T>> {
    let (h, w) = (img.height(), img.width());
    let mut l = Tensor::zeros(Shape::new(1, h, w));
    let mut ab = Tensor::zeros(Shape::new(2, h, w));
    for y in 0..h {
        for x in 0..w {
            let (lv, av, bv) = pixel_rgb_to_lab(
                img.at(0, y, x).as_f64(),
                img.at(1, y, x).as_f64(),
                img.at(2, y, x).as_f64(),
            );
            *l.at_mut(0, y, x) = T::from_f64(lv.clamp(0.0, 100.0));
            *ab.at_mut(0, y, x) = T::from_f64(av);
            *ab.at_mut(1, y, x) = T::from_f64(bv);
        }
    }
    LabImage::new(l, ab)
}

/// Convert CIELAB back to sRGB; out-of-gamut values are clamped, never errors.
pub fn lab_to_rgb<T: Scalar>(img: &LabImage<T>) -> Result<RgbImage<T>> {
    let (h, w) = (img.height(), img.width());
    let mut out = Tensor::zeros(Shape::new(3, h, w));
    for y in 0..h {
        for x in 0..w {
            let (r, g, b) = pixel_lab_to_rgb(
                img.luma().at(0, y, x).as_f64(),
                img.chroma_raw().at(0, y, x).as_f64(),
                img.chroma_raw().at(1, y, x).as_f64(),
            );
            *out.at_mut(0, y, x) = T::from_f64(r);
            *out.at_mut(1, y, x) = T::from_f64(g);
            *out.at_mut(2, y, x) = T::from_f64(b);
        }
    }
    RgbImage::new(out)
}

/// Split a Lab image into network-ready chroma (scaled by 1/128) and the
/// untouched lightness plane.
pub fn split_lab<T: Scalar>(img: &LabImage<T>) -> Result<(NormalizedChroma<T>, Luma<T>)> {
    let inv = T::from_f64(1.0 / CHROMA_SCALE);
    let chroma = img.chroma_raw().map(|v| v * inv);
    Ok((NormalizedChroma::new(chroma)?, Luma::new(img.luma().clone())?))
}

/// Rescale chroma by 128 and recombine with a lightness plane.
pub fn merge_lab<T: Scalar>(chroma: &NormalizedChroma<T>, luma: &Luma<T>) -> Result<LabImage<T>> {
    if chroma.tensor().shape().spatial() != luma.tensor().shape().spatial() {
        return Err(CoreError::shape(format_args!(
            "chroma {} and luma {} dimensions differ",
            chroma.tensor().shape(),
            luma.tensor().shape()
        )));
    }
    let s = T::from_f64(CHROMA_SCALE);
    LabImage::new(luma.tensor().clone(), chroma.tensor().map(|v| v * s))
}

/// Merge normalized chroma with a lightness plane and convert to sRGB in one
/// step. Differentiable w.r.t. chroma; see [`chroma_to_rgb_backward`].
///
/// `chroma` is `[2, H, W]` in [-1, 1], `luma` is `[1, H, W]` in [0, 100];
/// output is `[3, H, W]` clamped to [0, 1].
pub fn chroma_to_rgb<T: Scalar>(chroma: &Tensor<T>, luma: &Tensor<T>) -> Tensor<T> {
    let (h, w) = chroma.shape().spatial();
    debug_assert_eq!(luma.shape().spatial(), (h, w));
    let mut out = Tensor::zeros(Shape::new(3, h, w));
    for y in 0..h {
        for x in 0..w {
            let (r, g, b) = pixel_lab_to_rgb(
                luma.at(0, y, x).as_f64(),
                chroma.at(0, y, x).as_f64() * CHROMA_SCALE,
                chroma.at(1, y, x).as_f64() * CHROMA_SCALE,
            );
            *out.at_mut(0, y, x) = T::from_f64(r);
            *out.at_mut(1, y, x) = T::from_f64(g);
            *out.at_mut(2, y, x) = T::from_f64(b);
        }
    }
    out
}

/// Gradient of [`chroma_to_rgb`] w.r.t. the chroma input. Clamped output
/// components contribute zero gradient.
pub fn chroma_to_rgb_backward<T: Scalar>(
    chroma: &Tensor<T>,
    luma: &Tensor<T>,
    dy: &Tensor<T>,
) -> Tensor<T> {
    let (h, w) = chroma.shape().spatial();
    let mut dchroma = Tensor::zeros(chroma.shape());
    for y in 0..h {
        for x in 0..w {
            let l = luma.at(0, y, x).as_f64();
            let a = chroma.at(0, y, x).as_f64() * CHROMA_SCALE;
            let b = chroma.at(1, y, x).as_f64() * CHROMA_SCALE;

            let fy = (l + 16.0) / 116.0;
            let fx = fy + a / 500.0;
            let fz = fy - b / 200.0;
            let xyz = [WHITE[0] * lab_f_inv(fx), WHITE[1] * lab_f_inv(fy), WHITE[2] * lab_f_inv(fz)];
            // dX/da and dZ/db in chroma (network) units
            let dx_da = WHITE[0] * lab_f_inv_grad(fx) * (CHROMA_SCALE / 500.0);
            let dz_db = -WHITE[2] * lab_f_inv_grad(fz) * (CHROMA_SCALE / 200.0);

            let mut ga = 0.0f64;
            let mut gb = 0.0f64;
            for (o, row) in XYZ_TO_RGB.iter().enumerate() {
                let lin = row[0] * xyz[0] + row[1] * xyz[1] + row[2] * xyz[2];
                let srgb = linear_to_srgb(lin);
                if !(0.0..=1.0).contains(&srgb) {
                    continue; // clamped: no gradient through this component
                }
                let g = dy.at(o, y, x).as_f64() * linear_to_srgb_grad(lin);
                ga += g * row[0] * dx_da;
                gb += g * row[2] * dz_db;
            }
            *dchroma.at_mut(0, y, x) = T::from_f64(ga);
            *dchroma.at_mut(1, y, x) = T::from_f64(gb);
        }
    }
    dchroma
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn rgb_of(r: f64, g: f64, b: f64) -> RgbImage<f64> {
        let mut t = Tensor::zeros(Shape::new(3, 1, 1));
        t.data_mut().copy_from_slice(&[r, g, b]);
        RgbImage::new(t).unwrap()
    }

    #[test]
    fn white_maps_to_achromatic_l100() {
        let lab = rgb_to_lab(&rgb_of(1.0, 1.0, 1.0)).unwrap();
        assert!((lab.luma().data()[0] - 100.0).abs() < 1e-3);
        assert!(lab.chroma_raw().data()[0].abs() < 1e-3);
        assert!(lab.chroma_raw().data()[1].abs() < 1e-3);
    }

    #[test]
    fn black_maps_to_origin() {
        let lab = rgb_to_lab(&rgb_of(0.0, 0.0, 0.0)).unwrap();
        assert!(lab.luma().data()[0].abs() < 1e-6);
        assert!(lab.chroma_raw().data()[0].abs() < 1e-6);
        assert!(lab.chroma_raw().data()[1].abs() < 1e-6);
    }

    #[test]
    fn lab_endpoints_invert() {
        let white = LabImage::new(
            Tensor::from_vec(Shape::new(1, 1, 1), alloc::vec![100.0f64]).unwrap(),
            Tensor::zeros(Shape::new(2, 1, 1)),
        )
        .unwrap();
        let rgb = lab_to_rgb(&white).unwrap();
        for c in 0..3 {
            assert!((rgb.at(c, 0, 0) - 1.0).abs() < 1e-4);
        }
        let black = LabImage::new(
            Tensor::<f64>::zeros(Shape::new(1, 1, 1)),
            Tensor::zeros(Shape::new(2, 1, 1)),
        )
        .unwrap();
        let rgb = lab_to_rgb(&black).unwrap();
        for c in 0..3 {
            assert!(rgb.at(c, 0, 0).abs() < 1e-4);
        }
    }

    #[test]
    fn split_scales_by_128() {
        let lab = LabImage::new(
            Tensor::full(Shape::new(1, 1, 1), 50.0f64),
            Tensor::from_vec(Shape::new(2, 1, 1), alloc::vec![64.0, -128.0]).unwrap(),
        )
        .unwrap();
        let (chroma, luma) = split_lab(&lab).unwrap();
        assert_eq!(chroma.tensor().data(), &[0.5, -1.0]);
        assert_eq!(luma.tensor().data(), &[50.0]);
    }

    #[test]
    fn merge_rejects_dimension_mismatch() {
        let chroma = NormalizedChroma::new(Tensor::<f64>::zeros(Shape::new(2, 2, 2))).unwrap();
        let luma = Luma::new(Tensor::<f64>::zeros(Shape::new(1, 3, 2))).unwrap();
        assert!(merge_lab(&chroma, &luma).is_err());
    }

    #[test]
    fn split_merge_roundtrip_is_tight() {
        let mut rng = Rng::new(17);
        let ab = Tensor::<f64>::uniform(Shape::new(2, 6, 5), -120.0, 120.0, &mut rng);
        let l = Tensor::<f64>::uniform(Shape::new(1, 6, 5), 0.0, 100.0, &mut rng);
        let lab = LabImage::new(l, ab).unwrap();
        let (chroma, luma) = split_lab(&lab).unwrap();
        let back = merge_lab(&chroma, &luma).unwrap();
        assert!(back.chroma_raw().max_abs_diff(lab.chroma_raw()) < 1e-6);
        assert_eq!(back.luma(), lab.luma());
    }

    #[test]
    fn chroma_to_rgb_matches_plain_conversion() {
        let mut rng = Rng::new(23);
        let chroma = Tensor::<f64>::uniform(Shape::new(2, 3, 3), -0.3, 0.3, &mut rng);
        let l = Tensor::<f64>::uniform(Shape::new(1, 3, 3), 10.0, 90.0, &mut rng);
        let fused = chroma_to_rgb(&chroma, &l);

        let lab = merge_lab(
            &NormalizedChroma::new(chroma.clone()).unwrap(),
            &Luma::new(l.clone()).unwrap(),
        )
        .unwrap();
        let reference = lab_to_rgb(&lab).unwrap();
        assert!(fused.max_abs_diff(reference.tensor()) < 1e-12);
    }

    #[test]
    fn chroma_gradient_matches_finite_difference() {
        let mut rng = Rng::new(31);
        let chroma = Tensor::<f64>::uniform(Shape::new(2, 2, 2), -0.2, 0.2, &mut rng);
        let l = Tensor::<f64>::uniform(Shape::new(1, 2, 2), 20.0, 80.0, &mut rng);
        let dy = Tensor::<f64>::uniform(Shape::new(3, 2, 2), -1.0, 1.0, &mut rng);
        let grad = chroma_to_rgb_backward(&chroma, &l, &dy);
        let loss = |c: &Tensor<f64>| -> f64 {
            chroma_to_rgb(c, &l).data().iter().zip(dy.data()).map(|(a, b)| a * b).sum()
        };
        let h = 1e-6;
        for i in 0..chroma.len() {
            let mut cp = chroma.clone();
            cp.data_mut()[i] += h;
            let mut cm = chroma.clone();
            cm.data_mut()[i] -= h;
            let fd = (loss(&cp) - loss(&cm)) / (2.0 * h);
            let an = grad.data()[i];
            assert!((fd - an).abs() < 1e-5 * (1.0 + fd.abs()), "i={i} fd={fd} an={an}");
        }
    }
}
