//! Training-data machinery that is pure computation: paired samples, the
//! resize+flip augmentation, and a simple parametric underwater degradation
//! used to synthesize desk-scale test corpora. The degradation is plumbing
//! for tests, not a physical scattering model.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::string::String;

use crate::error::{CoreError, Result};
use crate::image::RgbImage;
use crate::rng::Rng;
use crate::scalar::Scalar;

/// Side length images are brought to before training.
pub const TRAIN_SIZE: usize = 256;

/// A (raw, reference) image pair; reference is absent for no-reference sets.
#[derive(Debug, Clone)]
pub struct PairedSample<T> {
    pub id: String,
    pub raw: RgbImage<T>,
    pub reference: Option<RgbImage<T>>,
}

impl<T: Scalar> PairedSample<T> {
    pub fn new(id: impl Into<String>, raw: RgbImage<T>, reference: Option<RgbImage<T>>) -> Result<Self> {
        if let Some(r) = &reference {
            if (r.height(), r.width()) != (raw.height(), raw.width()) {
                return Err(CoreError::shape(format_args!(
                    "raw {}x{} vs reference {}x{}",
                    raw.height(),
                    raw.width(),
                    r.height(),
                    r.width()
                )));
            }
        }
        Ok(PairedSample { id: id.into(), raw, reference })
    }
}

/// Resize both images of a pair to `size` x `size` and flip horizontally with
/// probability 1/2; raw and reference always receive the identical transform.
/// The stream should be derived per sample, e.g. `Rng::derive(seed, &id)`.
pub fn augment<T: Scalar>(sample: &PairedSample<T>, size: usize, rng: &mut Rng) -> Result<PairedSample<T>> {
    let flip = rng.next_bool(0.5);
    let tx = |img: &RgbImage<T>| -> Result<RgbImage<T>> {
        let r = img.resize(size, size)?;
        Ok(if flip { r.hflip() } else { r })
    };
    Ok(PairedSample {
        id: sample.id.clone(),
        raw: tx(&sample.raw)?,
        reference: sample.reference.as_ref().map(&tx).transpose()?,
    })
}

/// Parameters of the synthetic underwater degradation:
/// `out_c = clean_c * exp(-attenuation_c) * transmission
///        + veil_c * (1 - transmission)`, clamped to [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DegradeParams {
    /// Per-channel attenuation exponents (red usually decays fastest).
    pub attenuation: [f64; 3],
    /// Veiling light color.
    pub veil: [f64; 3],
    /// Scalar transmission in (0, 1].
    pub transmission: f64,
}

impl DegradeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.transmission > 0.0 && self.transmission <= 1.0) {
            return Err(CoreError::invalid(format_args!(
                "transmission must be in (0, 1], got {}",
                self.transmission
            )));
        }
        if self.attenuation.iter().any(|a| *a < 0.0 || !a.is_finite()) {
            return Err(CoreError::invalid("attenuation must be non-negative"));
        }
        if self.veil.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(CoreError::invalid("veil color must be in [0, 1]"));
        }
        Ok(())
    }
}

/// Named degradation presets. Each draws per-image parameters from a seeded
/// range so a corpus covers some variety.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum DegradePreset {
    /// Strong red absorption, green veil.
    Greenish,
    /// Strong red/green absorption, blue veil.
    Bluish,
    /// Mild cast, low transmission.
    Hazy,
}

impl DegradePreset {
    pub fn name(&self) -> &'static str {
        match self {
            DegradePreset::Greenish => "greenish",
            DegradePreset::Bluish => "bluish",
            DegradePreset::Hazy => "hazy",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "greenish" => Ok(DegradePreset::Greenish),
            "bluish" => Ok(DegradePreset::Bluish),
            "hazy" => Ok(DegradePreset::Hazy),
            other => Err(CoreError::invalid(format_args!("unknown preset `{other}`"))),
        }
    }

    /// Draw concrete parameters for one image.
    pub fn sample(&self, rng: &mut Rng) -> DegradeParams {
        match self {
            DegradePreset::Greenish => DegradeParams {
                attenuation: [rng.uniform(0.8, 1.4), rng.uniform(0.1, 0.3), rng.uniform(0.3, 0.6)],
                veil: [rng.uniform(0.05, 0.15), rng.uniform(0.45, 0.65), rng.uniform(0.25, 0.4)],
                transmission: rng.uniform(0.55, 0.8),
            },
            DegradePreset::Bluish => DegradeParams {
                attenuation: [rng.uniform(1.0, 1.6), rng.uniform(0.4, 0.7), rng.uniform(0.05, 0.2)],
                veil: [rng.uniform(0.05, 0.15), rng.uniform(0.25, 0.4), rng.uniform(0.5, 0.7)],
                transmission: rng.uniform(0.55, 0.8),
            },
            DegradePreset::Hazy => DegradeParams {
                attenuation: [rng.uniform(0.3, 0.6), rng.uniform(0.15, 0.3), rng.uniform(0.15, 0.3)],
                veil: [rng.uniform(0.55, 0.7), rng.uniform(0.6, 0.75), rng.uniform(0.6, 0.75)],
                transmission: rng.uniform(0.3, 0.5),
            },
        }
    }
}

/// Apply the degradation. Deterministic: all randomness lives in parameter
/// sampling, not here.
pub fn synth_degrade<T: Scalar>(clean: &RgbImage<T>, params: &DegradeParams) -> Result<RgbImage<T>> {
    params.validate()?;
    let (h, w) = (clean.height(), clean.width());
    let mut out = clean.tensor().clone();
    for c in 0..3 {
        let atten = T::from_f64((-params.attenuation[c]).exp() * params.transmission);
        let veil = T::from_f64(params.veil[c] * (1.0 - params.transmission));
        for v in out.channel_mut(c) {
            *v = *v * atten + veil;
        }
    }
    debug_assert_eq!(out.shape().spatial(), (h, w));
    RgbImage::from_unclamped(out)
}
