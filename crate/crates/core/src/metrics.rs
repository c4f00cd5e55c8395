//! Image quality metrics: reference-based PSNR / SSIM and the two
//! no-reference underwater measures (UIQM, UCIQE).
//!
//! UIQM follows its original formulation: a colorfulness term over
//! asymmetrically trimmed RG/YB statistics, a sharpness term (Sobel-weighted
//! EME) and a contrast term (block Michelson statistic), combined with the
//! published coefficients on 8-bit-scaled values with 10x10 blocks and
//! remainder pixels dropped. UCIQE combines Lab chroma deviation, luminance
//! contrast and mean HSV saturation with its published coefficients; L and
//! chroma are normalized by 100.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec::Vec;

use crate::color::pixel_rgb_to_lab;
use crate::error::{CoreError, Result};
use crate::image::RgbImage;
use crate::losses::ssim_loss;
use crate::scalar::Scalar;

/// PSNR reported for identical images (zero MSE).
pub const PSNR_CAP_DB: f64 = 100.0;

const UIQM_C: [f64; 3] = [0.0282, 0.2953, 3.5753];
const UICM_C: (f64, f64) = (-0.0268, 0.1586);
const UISM_LAMBDA: [f64; 3] = [0.299, 0.587, 0.114];
const BLOCK: usize = 10;
const TRIM_ALPHA: f64 = 0.1;

const UCIQE_C: [f64; 3] = [0.4680, 0.2745, 0.2576];

/// Peak signal-to-noise ratio in dB over all three channels, capped at
/// [`PSNR_CAP_DB`] for identical images.
pub fn psnr<T: Scalar>(pred: &RgbImage<T>, reference: &RgbImage<T>) -> Result<f64> {
    if (pred.height(), pred.width()) != (reference.height(), reference.width()) {
        return Err(CoreError::shape("psnr operands must share dimensions"));
    }
    let mut acc = 0.0f64;
    for (a, b) in pred.tensor().data().iter().zip(reference.tensor().data()) {
        let d = a.as_f64() - b.as_f64();
        acc += d * d;
    }
    let mse = acc / pred.tensor().len() as f64;
    if mse <= 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (1.0 / mse).log10()).min(PSNR_CAP_DB))
}

/// Mean windowed SSIM; exactly `1 - ssim_loss`.
pub fn ssim_index<T: Scalar>(pred: &RgbImage<T>, reference: &RgbImage<T>) -> Result<f64> {
    Ok(1.0 - ssim_loss(pred, reference)?.as_f64())
}

fn plane_255<T: Scalar>(img: &RgbImage<T>, c: usize) -> Vec<f64> {
    img.tensor().channel(c).iter().map(|v| v.as_f64() * 255.0).collect()
}

/// Asymmetric alpha-trimmed mean (10% from each end).
fn trimmed_mean(values: &[f64]) -> f64 {
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite metric values"));
    let k = sorted.len();
    let t_l = (TRIM_ALPHA * k as f64).ceil() as usize;
    let t_r = (TRIM_ALPHA * k as f64).floor() as usize;
    let kept = &sorted[t_l..k - t_r];
    if kept.is_empty() {
        return sorted.iter().sum::<f64>() / k as f64;
    }
    kept.iter().sum::<f64>() / kept.len() as f64
}

fn variance_about(values: &[f64], mu: f64) -> f64 {
    values.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / values.len() as f64
}

fn uicm(r: &[f64], g: &[f64], b: &[f64]) -> f64 {
    let rg: Vec<f64> = r.iter().zip(g).map(|(x, y)| x - y).collect();
    let yb: Vec<f64> = r.iter().zip(g).zip(b).map(|((x, y), z)| (x + y) / 2.0 - z).collect();
    let mu_rg = trimmed_mean(&rg);
    let mu_yb = trimmed_mean(&yb);
    let var_rg = variance_about(&rg, mu_rg);
    let var_yb = variance_about(&yb, mu_yb);
    UICM_C.0 * (mu_rg * mu_rg + mu_yb * mu_yb).sqrt() + UICM_C.1 * (var_rg + var_yb).sqrt()
}

/// Sobel gradient magnitude with reflected borders.
fn sobel_magnitude(plane: &[f64], h: usize, w: usize) -> Vec<f64> {
    let reflect = |v: isize, n: usize| -> usize {
        if v < 0 {
            (-v - 1) as usize
        } else if v >= n as isize {
            (2 * n as isize - 1 - v) as usize
        } else {
            v as usize
        }
    };
    let at = |y: isize, x: isize| plane[reflect(y, h) * w + reflect(x, w)];
    let mut out = alloc::vec![0.0f64; h * w];
    for y in 0..h as isize {
        for x in 0..w as isize {
            // grouped as differences so flat regions are exactly zero
            let gx = (at(y - 1, x + 1) - at(y - 1, x - 1))
                + 2.0 * (at(y, x + 1) - at(y, x - 1))
                + (at(y + 1, x + 1) - at(y + 1, x - 1));
            let gy = (at(y + 1, x - 1) - at(y - 1, x - 1))
                + 2.0 * (at(y + 1, x) - at(y - 1, x))
                + (at(y + 1, x + 1) - at(y - 1, x + 1));
            out[y as usize * w + x as usize] = (gx * gx + gy * gy).sqrt();
        }
    }
    out
}

/// Enhancement measure over 10x10 blocks: (2 / (k1 k2)) * sum ln(max/min),
/// blocks with a zero extreme contribute nothing.
fn eme(plane: &[f64], h: usize, w: usize) -> f64 {
    let k1 = w / BLOCK;
    let k2 = h / BLOCK;
    if k1 == 0 || k2 == 0 {
        return 0.0;
    }
    let mut total = 0.0;
    for by in 0..k2 {
        for bx in 0..k1 {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for y in by * BLOCK..(by + 1) * BLOCK {
                for x in bx * BLOCK..(bx + 1) * BLOCK {
                    let v = plane[y * w + x];
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
            if lo > 0.0 && hi > 0.0 {
                total += (hi / lo).ln();
            }
        }
    }
    2.0 * total / (k1 * k2) as f64
}

fn uism(r: &[f64], g: &[f64], b: &[f64], h: usize, w: usize) -> f64 {
    let mut total = 0.0;
    for (lambda, plane) in UISM_LAMBDA.iter().zip([r, g, b]) {
        let mag = sobel_magnitude(plane, h, w);
        let edge_map: Vec<f64> = mag.iter().zip(plane).map(|(m, p)| m * p).collect();
        total += lambda * eme(&edge_map, h, w);
    }
    total
}

/// Block Michelson contrast statistic over joint RGB blocks:
/// mean of (top/bot) * ln(top/bot) with top = max - min, bot = max + min.
fn uiconm(r: &[f64], g: &[f64], b: &[f64], h: usize, w: usize) -> f64 {
    let k1 = w / BLOCK;
    let k2 = h / BLOCK;
    if k1 == 0 || k2 == 0 {
        return 0.0;
    }
    let mut total = 0.0;
    for by in 0..k2 {
        for bx in 0..k1 {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for plane in [r, g, b] {
                for y in by * BLOCK..(by + 1) * BLOCK {
                    for x in bx * BLOCK..(bx + 1) * BLOCK {
                        let v = plane[y * w + x];
                        lo = lo.min(v);
                        hi = hi.max(v);
                    }
                }
            }
            let top = hi - lo;
            let bot = hi + lo;
            if top > 0.0 && bot > 0.0 {
                total += (top / bot) * (top / bot).ln();
            }
        }
    }
    total / (k1 * k2) as f64
}

/// Underwater image quality measure: weighted colorfulness, sharpness and
/// contrast. Defined (finite) on degenerate constant images.
pub fn uiqm<T: Scalar>(img: &RgbImage<T>) -> f64 {
    let (h, w) = (img.height(), img.width());
    let r = plane_255(img, 0);
    let g = plane_255(img, 1);
    let b = plane_255(img, 2);
    UIQM_C[0] * uicm(&r, &g, &b) + UIQM_C[1] * uism(&r, &g, &b, h, w) + UIQM_C[2] * uiconm(&r, &g, &b, h, w)
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let idx = (q * (sorted.len() - 1) as f64).round() as usize;
    sorted[idx]
}

/// Underwater color image quality: std of Lab chroma, luminance contrast
/// (1%..99% range of L) and mean HSV saturation. L and chroma are taken on a
/// 0..1 scale (Lab values divided by 100).
pub fn uciqe<T: Scalar>(img: &RgbImage<T>) -> f64 {
    let (h, w) = (img.height(), img.width());
    let n = h * w;
    let mut chroma = Vec::with_capacity(n);
    let mut luma = Vec::with_capacity(n);
    let mut sat_sum = 0.0f64;
    for y in 0..h {
        for x in 0..w {
            let (r, g, b) = (img.at(0, y, x).as_f64(), img.at(1, y, x).as_f64(), img.at(2, y, x).as_f64());
            let (l, a, bb) = pixel_rgb_to_lab(r, g, b);
            chroma.push((a * a + bb * bb).sqrt() / 100.0);
            luma.push(l / 100.0);
            let max = r.max(g).max(b);
            let min = r.min(g).min(b);
            if max > 0.0 {
                sat_sum += (max - min) / max;
            }
        }
    }
    let mu_c = chroma.iter().sum::<f64>() / n as f64;
    let sigma_c = (chroma.iter().map(|c| (c - mu_c) * (c - mu_c)).sum::<f64>() / n as f64).sqrt();
    luma.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite L"));
    let con_l = percentile(&luma, 0.99) - percentile(&luma, 0.01);
    let mu_s = sat_sum / n as f64;
    UCIQE_C[0] * sigma_c + UCIQE_C[1] * con_l + UCIQE_C[2] * mu_s
}
