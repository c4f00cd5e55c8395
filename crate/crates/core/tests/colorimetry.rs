//! Color space properties checked against an independent straight-line
//! implementation of the CIE formulas (the oracle below shares no code with
//! the library path it verifies).

use ccl_core::color::{lab_to_rgb, merge_lab, rgb_to_lab, split_lab};
use ccl_core::image::{LabImage, RgbImage};
use ccl_core::rng::Rng;
use ccl_core::tensor::{Shape, Tensor};

/// Independent oracle: sRGB (D65) -> CIELAB in double precision, written
/// directly from the CIE definition.
fn oracle_rgb_to_lab(r: f64, g: f64, b: f64) -> (f64, f64, f64) {
    fn linearize(c: f64) -> f64 {
        if c <= 0.04045 {
            c / 12.92
        } else {
            ((c + 0.055) / 1.055).powf(2.4)
        }
    }
    let (rl, gl, bl) = (linearize(r), linearize(g), linearize(b));
    let x = 0.4124564 * rl + 0.3575761 * gl + 0.1804375 * bl;
    let y = 0.2126729 * rl + 0.7151522 * gl + 0.0721750 * bl;
    let z = 0.0193339 * rl + 0.1191920 * gl + 0.9503041 * bl;

    fn f(t: f64) -> f64 {
        let d = 6.0f64 / 29.0;
        if t > d * d * d {
            t.powf(1.0 / 3.0)
        } else {
            t / (3.0 * d * d) + 4.0 / 29.0
        }
    }
    let (fx, fy, fz) = (f(x / 0.95047), f(y / 1.0), f(z / 1.08883));
    (116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz))
}

fn image_of(pixels: &[(f64, f64, f64)], h: usize, w: usize) -> RgbImage<f64> {
    let mut t = Tensor::zeros(Shape::new(3, h, w));
    for (i, &(r, g, b)) in pixels.iter().enumerate() {
        let (y, x) = (i / w, i % w);
        *t.at_mut(0, y, x) = r;
        *t.at_mut(1, y, x) = g;
        *t.at_mut(2, y, x) = b;
    }
    RgbImage::new(t).unwrap()
}

#[test]
fn pure_red_matches_oracle() {
    let img = image_of(&[(1.0, 0.0, 0.0)], 1, 1);
    let lab = rgb_to_lab(&img).unwrap();
    let (ol, oa, ob) = oracle_rgb_to_lab(1.0, 0.0, 0.0);
    assert!((lab.luma().data()[0] - ol).abs() < 1e-9);
    assert!((lab.chroma_raw().data()[0] - oa).abs() < 1e-9);
    assert!((lab.chroma_raw().data()[1] - ob).abs() < 1e-9);
    // published reference values for sRGB red
    assert!((ol - 53.24).abs() < 0.01, "{ol}");
    assert!((oa - 80.09).abs() < 0.01, "{oa}");
    assert!((ob - 67.20).abs() < 0.01, "{ob}");
}

#[test]
fn library_conversion_matches_oracle_on_random_pixels() {
    let mut rng = Rng::new(123);
    for _ in 0..500 {
        let (r, g, b) = (rng.next_f64(), rng.next_f64(), rng.next_f64());
        let img = image_of(&[(r, g, b)], 1, 1);
        let lab = rgb_to_lab(&img).unwrap();
        let (ol, oa, ob) = oracle_rgb_to_lab(r, g, b);
        assert!((lab.luma().data()[0] - ol).abs() < 1e-9);
        assert!((lab.chroma_raw().data()[0] - oa).abs() < 1e-9);
        assert!((lab.chroma_raw().data()[1] - ob).abs() < 1e-9);
    }
}

#[test]
fn roundtrip_within_2_over_255_on_1000_random_images() {
    let mut rng = Rng::new(7);
    let tol = 2.0 / 255.0;
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let h = 2 + rng.next_index(7);
        let w = 2 + rng.next_index(7);
        let img = RgbImage::new(Tensor::<f64>::uniform(Shape::new(3, h, w), 0.0, 1.0, &mut rng)).unwrap();
        let back = lab_to_rgb(&rgb_to_lab(&img).unwrap()).unwrap();
        worst = worst.max(img.tensor().max_abs_diff(back.tensor()));
    }
    assert!(worst <= tol, "max roundtrip error {worst} > {tol}");
}

#[test]
fn roundtrip_in_f32_still_within_tolerance() {
    let mut rng = Rng::new(8);
    let tol = 2.0 / 255.0;
    for _ in 0..200 {
        let img = RgbImage::new(Tensor::<f32>::uniform(Shape::new(3, 8, 8), 0.0, 1.0, &mut rng)).unwrap();
        let back = lab_to_rgb(&rgb_to_lab(&img).unwrap()).unwrap();
        assert!(img.tensor().max_abs_diff(back.tensor()) <= tol as f32);
    }
}

#[test]
fn gray_images_are_achromatic() {
    let mut rng = Rng::new(9);
    for _ in 0..200 {
        let v = rng.next_f64();
        let mut t = Tensor::<f64>::zeros(Shape::new(3, 4, 4));
        for c in 0..3 {
            for p in t.channel_mut(c) {
                *p = v;
            }
        }
        let lab = rgb_to_lab(&RgbImage::new(t).unwrap()).unwrap();
        for &a in lab.chroma_raw().data() {
            assert!(a.abs() <= 1e-3, "gray {v} gave chroma {a}");
        }
    }
}

#[test]
fn split_merge_is_bit_faithful_within_1e6() {
    let mut rng = Rng::new(10);
    for _ in 0..200 {
        let l = Tensor::<f64>::uniform(Shape::new(1, 6, 6), 0.0, 100.0, &mut rng);
        let ab = Tensor::<f64>::uniform(Shape::new(2, 6, 6), -128.0, 127.0, &mut rng);
        let lab = LabImage::new(l, ab).unwrap();
        let (chroma, luma) = split_lab(&lab).unwrap();
        let back = merge_lab(&chroma, &luma).unwrap();
        assert!(back.chroma_raw().max_abs_diff(lab.chroma_raw()) <= 1e-6);
        assert_eq!(back.luma(), lab.luma());
    }
}

#[test]
fn out_of_gamut_lab_clamps_instead_of_erroring() {
    // extreme chroma at high L pushes sRGB far out of gamut
    let l = Tensor::<f64>::full(Shape::new(1, 2, 2), 95.0);
    let mut ab = Tensor::<f64>::zeros(Shape::new(2, 2, 2));
    for v in ab.channel_mut(0) {
        *v = 120.0;
    }
    for v in ab.channel_mut(1) {
        *v = -120.0;
    }
    let rgb = lab_to_rgb(&LabImage::new(l, ab).unwrap()).unwrap();
    assert!(rgb.tensor().data().iter().all(|v| (0.0..=1.0).contains(v)));
}
