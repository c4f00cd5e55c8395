//! Perceptual backbone weight loading.
//!
//! Two sources are supported:
//! - `.cclw` archives with tensors named `conv0.w` .. `conv12.b` (the
//!   checkpoint format of this project), and
//! - `.npz` archives exported from a pretrained 19-layer VGG classifier,
//!   with either `features.N.weight`-style keys (torchvision numbering) or
//!   `conv{stage}_{idx}.weight` keys. Conv tensors must be `[out, in, 3, 3]`.
//!
//! Without a weight file the pipeline falls back to a seeded random frozen
//! backbone: a valid feature space for tests and smoke training, just without
//! pretrained perceptual semantics.

use std::io::Read;
use std::path::Path;

use anyhow::{bail, Context, Result};
use ccl_core::backbone::{BackboneConfig, FeatureExtractor};
use ccl_core::nn::load_params;
use ccl_core::tensor::{Shape, Tensor};

use crate::BACKBONE_ENV;

/// torchvision `features` indices of the first 13 convolutions of VGG-19.
const TORCHVISION_IDX: [usize; 13] = [0, 2, 5, 7, 10, 12, 14, 16, 19, 21, 23, 25, 28];
/// (stage, index-within-stage) naming for the same convolutions.
const STAGE_NAMES: [(usize, usize); 13] = [
    (1, 1), (1, 2),
    (2, 1), (2, 2),
    (3, 1), (3, 2), (3, 3), (3, 4),
    (4, 1), (4, 2), (4, 3), (4, 4),
    (5, 1),
];

/// How the backbone should be constructed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackboneSource {
    /// Seeded random fallback with a width divisor.
    Random { divisor: usize, seed: u64 },
    /// Pretrained weight file.
    File(std::path::PathBuf),
}

impl BackboneSource {
    /// Parse a CLI spec: `random`, `random:<divisor>`, `random:<divisor>:<seed>`
    /// or a file path.
    pub fn parse(spec: &str) -> Result<Self> {
        if spec == "random" {
            return Ok(BackboneSource::Random { divisor: 4, seed: 0 });
        }
        if let Some(rest) = spec.strip_prefix("random:") {
            let mut parts = rest.split(':');
            let divisor: usize = parts.next().unwrap_or("4").parse().context("backbone divisor")?;
            let seed: u64 = parts.next().map(|s| s.parse()).transpose().context("backbone seed")?.unwrap_or(0);
            if divisor == 0 {
                bail!("backbone divisor must be >= 1");
            }
            return Ok(BackboneSource::Random { divisor, seed });
        }
        Ok(BackboneSource::File(spec.into()))
    }

    /// Default source: the `CCL_BACKBONE_WEIGHTS` file when set, else the
    /// random fallback.
    pub fn default_from_env() -> Self {
        match std::env::var(BACKBONE_ENV) {
            Ok(path) if !path.is_empty() => BackboneSource::File(path.into()),
            _ => BackboneSource::Random { divisor: 4, seed: 0 },
        }
    }

    pub fn describe(&self) -> String {
        match self {
            BackboneSource::Random { divisor, seed } => {
                format!("random frozen backbone (widths / {divisor}, seed {seed})")
            }
            BackboneSource::File(p) => format!("pretrained backbone from {}", p.display()),
        }
    }

    pub fn load(&self) -> Result<FeatureExtractor<f32>> {
        match self {
            BackboneSource::Random { divisor, seed } => {
                FeatureExtractor::seeded_random(BackboneConfig { width_divisor: *divisor }, *seed)
                    .map_err(|e| anyhow::anyhow!("{e}"))
            }
            BackboneSource::File(path) => load_backbone_file(path),
        }
    }
}

pub fn load_backbone_file(path: &Path) -> Result<FeatureExtractor<f32>> {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    match ext {
        "npz" => load_from_npz(path),
        "cclw" => load_from_archive(path),
        other => bail!("unsupported backbone weight format `.{other}` (expected .npz or .cclw)"),
    }
}

fn load_from_archive(path: &Path) -> Result<FeatureExtractor<f32>> {
    let mut fe = FeatureExtractor::for_pretrained();
    let mut tensors: std::collections::BTreeMap<String, Tensor<f32>> =
        crate::checkpoint::read_archive(path)?.into_iter().collect();
    load_params(fe.params_mut(), |name| tensors.remove(name)).map_err(|e| anyhow::anyhow!("{e}"))?;
    Ok(fe)
}

/// Save a backbone as a `.cclw` archive (used to convert npz once and load
/// fast afterwards).
pub fn save_backbone_archive(path: &Path, fe: &FeatureExtractor<f32>) -> Result<()> {
    let tensors: Vec<(String, &Tensor<f32>)> =
        fe.params().into_iter().map(|(n, t)| (n, &**t)).collect();
    crate::checkpoint::write_archive(path, &tensors)
}

/// Minimal NPZ (zip of npy) reader: walks the central directory, supports
/// stored and deflated entries, C-order f32/f64 arrays.
fn load_from_npz(path: &Path) -> Result<FeatureExtractor<f32>> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let entries = zip_entries(&bytes)?;
    let mut fe = FeatureExtractor::for_pretrained();
    let lookup = |name_candidates: &[String]| -> Result<Tensor<f32>> {
        for cand in name_candidates {
            let keys = [cand.clone(), format!("{cand}.npy")];
            for key in keys {
                if let Some(raw) = entries.iter().find(|(n, _)| *n == key) {
                    return parse_npy(&raw.1);
                }
            }
        }
        bail!("no tensor named {:?} in {}", name_candidates, path.display())
    };

    for i in 0..fe.num_convs() {
        let (c_out, c_in) = fe.conv_dims(i);
        let tv = TORCHVISION_IDX[i];
        let (stage, idx) = STAGE_NAMES[i];
        let w = lookup(&[
            format!("features.{tv}.weight"),
            format!("conv{stage}_{idx}.weight"),
        ])?;
        let b = lookup(&[
            format!("features.{tv}.bias"),
            format!("conv{stage}_{idx}.bias"),
        ])?;
        if w.len() != c_out * c_in * 9 || b.len() != c_out {
            bail!(
                "conv {i}: got {} weight / {} bias values, expected {}x{}x3x3",
                w.len(),
                b.len(),
                c_out,
                c_in
            );
        }
        let w = Tensor::from_vec(Shape::new(c_out, c_in, 9), w.into_vec()).expect("checked size");
        let b = Tensor::from_vec(Shape::new(c_out, 1, 1), b.into_vec()).expect("checked size");
        let mut source = vec![(format!("conv{i}.w"), w), (format!("conv{i}.b"), b)]
            .into_iter()
            .collect::<std::collections::BTreeMap<_, _>>();
        let params: Vec<_> = fe
            .params_mut()
            .into_iter()
            .filter(|(n, _)| n.starts_with(&format!("conv{i}.")))
            .collect();
        load_params(params, |n| source.remove(n)).map_err(|e| anyhow::anyhow!("{e}"))?;
    }
    Ok(fe)
}

/// (name, raw npy bytes) for every entry of a zip archive.
fn zip_entries(bytes: &[u8]) -> Result<Vec<(String, Vec<u8>)>> {
    // locate the end-of-central-directory record
    let eocd_sig = [0x50u8, 0x4b, 0x05, 0x06];
    let start = bytes.len().saturating_sub(66 * 1024).max(0);
    let eocd = (start..bytes.len().saturating_sub(21))
        .rev()
        .find(|&i| bytes[i..i + 4] == eocd_sig)
        .context("not a zip archive (no end-of-central-directory)")?;
    let count = u16::from_le_bytes([bytes[eocd + 10], bytes[eocd + 11]]) as usize;
    let cd_offset = u32::from_le_bytes(bytes[eocd + 16..eocd + 20].try_into().unwrap()) as usize;

    let mut entries = Vec::with_capacity(count);
    let mut p = cd_offset;
    for _ in 0..count {
        if bytes[p..p + 4] != [0x50, 0x4b, 0x01, 0x02] {
            bail!("corrupt zip central directory");
        }
        let method = u16::from_le_bytes([bytes[p + 10], bytes[p + 11]]);
        let csize = u32::from_le_bytes(bytes[p + 20..p + 24].try_into().unwrap()) as usize;
        let name_len = u16::from_le_bytes([bytes[p + 28], bytes[p + 29]]) as usize;
        let extra_len = u16::from_le_bytes([bytes[p + 30], bytes[p + 31]]) as usize;
        let comment_len = u16::from_le_bytes([bytes[p + 32], bytes[p + 33]]) as usize;
        let local_offset = u32::from_le_bytes(bytes[p + 42..p + 46].try_into().unwrap()) as usize;
        let name = String::from_utf8_lossy(&bytes[p + 46..p + 46 + name_len]).to_string();

        // local header: skip its (possibly different) name/extra lengths
        let lh = local_offset;
        if bytes[lh..lh + 4] != [0x50, 0x4b, 0x03, 0x04] {
            bail!("corrupt zip local header for {name}");
        }
        let l_name = u16::from_le_bytes([bytes[lh + 26], bytes[lh + 27]]) as usize;
        let l_extra = u16::from_le_bytes([bytes[lh + 28], bytes[lh + 29]]) as usize;
        let data_start = lh + 30 + l_name + l_extra;
        let data = &bytes[data_start..data_start + csize];
        let raw = match method {
            0 => data.to_vec(),
            8 => {
                let mut out = Vec::new();
                flate2::read::DeflateDecoder::new(data).read_to_end(&mut out)?;
                out
            }
            m => bail!("unsupported zip compression method {m} for {name}"),
        };
        entries.push((name, raw));
        p += 46 + name_len + extra_len + comment_len;
    }
    Ok(entries)
}

/// Parse a v1/v2 npy buffer holding a C-order f32/f64 array; returns a flat
/// tensor `[1, 1, len]` (callers reshape).
fn parse_npy(bytes: &[u8]) -> Result<Tensor<f32>> {
    if bytes.len() < 10 || &bytes[..6] != b"\x93NUMPY" {
        bail!("not an npy payload");
    }
    let major = bytes[6];
    let (header_len, header_start) = match major {
        1 => (u16::from_le_bytes([bytes[8], bytes[9]]) as usize, 10),
        2 | 3 => (u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize, 12),
        v => bail!("unsupported npy version {v}"),
    };
    let header = std::str::from_utf8(&bytes[header_start..header_start + header_len])?;
    if header.contains("'fortran_order': True") {
        bail!("fortran-order arrays are not supported");
    }
    let descr = header
        .split("'descr':")
        .nth(1)
        .and_then(|s| s.split('\'').nth(1))
        .context("npy header lacks descr")?;
    let data = &bytes[header_start + header_len..];
    let values: Vec<f32> = match descr {
        "<f4" => data
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect(),
        "<f8" => data
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()) as f32)
            .collect(),
        d => bail!("unsupported npy dtype {d}"),
    };
    let len = values.len();
    Ok(Tensor::from_vec(Shape::new(1, 1, len), values).expect("flat tensor"))
}
