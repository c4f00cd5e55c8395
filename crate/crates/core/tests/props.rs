//! Property tests over the pipeline's algebraic invariants.

use ccl_core::color::{lab_to_rgb, merge_lab, rgb_to_lab, split_lab};
use ccl_core::data::{synth_degrade, DegradeParams};
use ccl_core::image::{LabImage, RgbImage};
use ccl_core::metrics::psnr;
use ccl_core::tensor::{Shape, Tensor};
use proptest::prelude::*;

fn rgb_strategy(h: usize, w: usize) -> impl Strategy<Value = RgbImage<f64>> {
    proptest::collection::vec(0.0f64..=1.0, 3 * h * w).prop_map(move |data| {
        RgbImage::new(Tensor::from_vec(Shape::new(3, h, w), data).unwrap()).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rgb_lab_roundtrip(img in rgb_strategy(4, 5)) {
        let back = lab_to_rgb(&rgb_to_lab(&img).unwrap()).unwrap();
        let err = img.tensor().max_abs_diff(back.tensor());
        prop_assert!(err <= 2.0 / 255.0, "roundtrip error {err}");
    }

    #[test]
    fn split_merge_roundtrip(
        l in proptest::collection::vec(0.0f64..=100.0, 12),
        ab in proptest::collection::vec(-128.0f64..=127.0, 24),
    ) {
        let lab = LabImage::new(
            Tensor::from_vec(Shape::new(1, 3, 4), l).unwrap(),
            Tensor::from_vec(Shape::new(2, 3, 4), ab).unwrap(),
        ).unwrap();
        let (chroma, luma) = split_lab(&lab).unwrap();
        prop_assert!(chroma.tensor().data().iter().all(|v| v.abs() <= 1.0));
        let back = merge_lab(&chroma, &luma).unwrap();
        prop_assert!(back.chroma_raw().max_abs_diff(lab.chroma_raw()) <= 1e-6);
        prop_assert_eq!(back.luma(), lab.luma());
    }

    #[test]
    fn degrade_stays_in_range_and_is_monotone(
        img in rgb_strategy(4, 4),
        t1 in 0.05f64..=0.95,
        t2 in 0.05f64..=0.95,
        veil in proptest::collection::vec(0.0f64..=1.0, 3),
    ) {
        let params = |t: f64| DegradeParams {
            attenuation: [0.6, 0.2, 0.3],
            veil: [veil[0], veil[1], veil[2]],
            transmission: t,
        };
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let a = synth_degrade(&img, &params(lo)).unwrap();
        let b = synth_degrade(&img, &params(hi)).unwrap();
        prop_assert!(a.tensor().data().iter().all(|v| (0.0..=1.0).contains(v)));
        // pixelwise between the veil (t -> 0) and the attenuated clean (t = 1)
        let attenuated = synth_degrade(&img, &params(1.0 - 1e-12)).unwrap();
        for c in 0..3 {
            for i in 0..16 {
                let (va, vb) = (a.tensor().channel(c)[i], b.tensor().channel(c)[i]);
                let (end0, end1) = (veil[c], attenuated.tensor().channel(c)[i]);
                let (lo_end, hi_end) = if end0 <= end1 { (end0, end1) } else { (end1, end0) };
                prop_assert!(va >= lo_end - 1e-9 && va <= hi_end + 1e-9);
                // monotone: b (higher transmission) is no farther from the clean side
                if end1 >= end0 {
                    prop_assert!(vb + 1e-12 >= va);
                } else {
                    prop_assert!(vb <= va + 1e-12);
                }
            }
        }
    }

    #[test]
    fn psnr_symmetric(a in rgb_strategy(4, 4), b in rgb_strategy(4, 4)) {
        prop_assert_eq!(psnr(&a, &b).unwrap(), psnr(&b, &a).unwrap());
    }
}
