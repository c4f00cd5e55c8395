//! Checkpoint persistence: a little-endian tensor archive (`.cclw`) plus a
//! JSON manifest side-car (`.json`) holding config, seed, parameter count and
//! provenance. Tensor bytes round-trip bit-exactly.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use ccl_core::ccnet::{build_ccnet, CcNet, CcNetConfig};
use ccl_core::hrnet::{build_hrnet, HrNet, HrNetConfig};
use ccl_core::nn::load_params;
use ccl_core::tensor::{Shape, Tensor};
use serde::{Deserialize, Serialize};

const MAGIC: &[u8; 4] = b"CCLW";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Cc,
    Hr,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub kind: ModelKind,
    pub epoch: usize,
    pub param_count: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cc_config: Option<CcNetConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hr_config: Option<HrNetConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_config: Option<ccl_core::train::TrainConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub git_hash: Option<String>,
    #[serde(default)]
    pub notes: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(kind: ModelKind, param_count: usize, seed: u64) -> Self {
        Manifest {
            kind,
            epoch: 0,
            param_count,
            seed,
            cc_config: None,
            hr_config: None,
            train_config: None,
            final_loss: None,
            git_hash: git_hash(),
            notes: BTreeMap::new(),
        }
    }
}

/// Current commit, when running inside a git checkout.
pub fn git_hash() -> Option<String> {
    let out = std::process::Command::new("git").args(["rev-parse", "HEAD"]).output().ok()?;
    if !out.status.success() {
        return None;
    }
    Some(String::from_utf8_lossy(&out.stdout).trim().to_string())
}

fn archive_path(base: &Path) -> PathBuf {
    base.with_extension("cclw")
}

fn manifest_path(base: &Path) -> PathBuf {
    base.with_extension("json")
}

pub(crate) fn write_archive(path: &Path, tensors: &[(String, &Tensor<f32>)]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(MAGIC)?;
    f.write_all(&VERSION.to_le_bytes())?;
    f.write_all(&(tensors.len() as u32).to_le_bytes())?;
    for (name, t) in tensors {
        let bytes = name.as_bytes();
        f.write_all(&(bytes.len() as u32).to_le_bytes())?;
        f.write_all(bytes)?;
        let s = t.shape();
        for d in [s.c, s.h, s.w] {
            f.write_all(&(d as u32).to_le_bytes())?;
        }
        for v in t.data() {
            f.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub(crate) fn read_archive(path: &Path) -> Result<Vec<(String, Tensor<f32>)>> {
    let mut f = std::io::BufReader::new(
        std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?,
    );
    let mut magic = [0u8; 4];
    f.read_exact(&mut magic)?;
    if &magic != MAGIC {
        bail!("{} is not a checkpoint archive", path.display());
    }
    let mut u32buf = [0u8; 4];
    f.read_exact(&mut u32buf)?;
    let version = u32::from_le_bytes(u32buf);
    if version != VERSION {
        bail!("unsupported archive version {version}");
    }
    f.read_exact(&mut u32buf)?;
    let count = u32::from_le_bytes(u32buf) as usize;
    let mut tensors = Vec::with_capacity(count);
    for _ in 0..count {
        f.read_exact(&mut u32buf)?;
        let name_len = u32::from_le_bytes(u32buf) as usize;
        let mut name = vec![0u8; name_len];
        f.read_exact(&mut name)?;
        let name = String::from_utf8(name).context("tensor name is not utf8")?;
        let mut dims = [0usize; 3];
        for d in dims.iter_mut() {
            f.read_exact(&mut u32buf)?;
            *d = u32::from_le_bytes(u32buf) as usize;
        }
        let shape = Shape::new(dims[0], dims[1], dims[2]);
        let mut data = vec![0f32; shape.len()];
        for v in data.iter_mut() {
            f.read_exact(&mut u32buf)?;
            *v = f32::from_le_bytes(u32buf);
        }
        tensors.push((name, Tensor::from_vec(shape, data).expect("shape matches data")));
    }
    Ok(tensors)
}

/// Write `<base>.cclw` and `<base>.json`.
pub fn save_ccnet(base: &Path, model: &CcNet<f32>, mut manifest: Manifest) -> Result<()> {
    manifest.cc_config = Some(model.config);
    manifest.param_count = model.param_count();
    manifest
        .notes
        .entry("head_channels".into())
        .or_insert_with(|| "2->width at the first conv, width->width at the second".into());
    let tensors: Vec<(String, &Tensor<f32>)> =
        model.params().into_iter().map(|(n, t)| (n, &**t)).collect();
    write_archive(&archive_path(base), &tensors)?;
    let json = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(manifest_path(base), json)?;
    Ok(())
}

pub fn save_hrnet(base: &Path, model: &HrNet<f32>, mut manifest: Manifest) -> Result<()> {
    manifest.hr_config = Some(model.config);
    manifest.param_count = model.param_count();
    let tensors: Vec<(String, &Tensor<f32>)> =
        model.params().into_iter().map(|(n, t)| (n, &**t)).collect();
    write_archive(&archive_path(base), &tensors)?;
    let json = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(manifest_path(base), json)?;
    Ok(())
}

pub fn read_manifest(base: &Path) -> Result<Manifest> {
    let path = manifest_path(base);
    let json = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    Ok(serde_json::from_str(&json)?)
}

pub fn load_ccnet(base: &Path) -> Result<(CcNet<f32>, Manifest)> {
    let manifest = read_manifest(base)?;
    if manifest.kind != ModelKind::Cc {
        bail!("{} is not a color correction checkpoint", base.display());
    }
    let config = manifest.cc_config.context("manifest lacks the model config")?;
    let mut model = build_ccnet::<f32>(config, manifest.seed).map_err(|e| anyhow::anyhow!("{e}"))?;
    let mut tensors: BTreeMap<String, Tensor<f32>> =
        read_archive(&archive_path(base))?.into_iter().collect();
    load_params(model.params_mut(), |name| tensors.remove(name)).map_err(|e| anyhow::anyhow!("{e}"))?;
    if !tensors.is_empty() {
        bail!("archive holds {} unexpected tensors", tensors.len());
    }
    Ok((model, manifest))
}

pub fn load_hrnet(base: &Path) -> Result<(HrNet<f32>, Manifest)> {
    let manifest = read_manifest(base)?;
    if manifest.kind != ModelKind::Hr {
        bail!("{} is not a haze removal checkpoint", base.display());
    }
    let config = manifest.hr_config.context("manifest lacks the model config")?;
    let mut model = build_hrnet::<f32>(config, manifest.seed).map_err(|e| anyhow::anyhow!("{e}"))?;
    let mut tensors: BTreeMap<String, Tensor<f32>> =
        read_archive(&archive_path(base))?.into_iter().collect();
    load_params(model.params_mut(), |name| tensors.remove(name)).map_err(|e| anyhow::anyhow!("{e}"))?;
    if !tensors.is_empty() {
        bail!("archive holds {} unexpected tensors", tensors.len());
    }
    Ok((model, manifest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ccl_core::ccnet::ccnet_forward;
    use ccl_core::image::NormalizedChroma;
    use ccl_core::rng::Rng;

    #[test]
    fn ccnet_checkpoint_roundtrip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("ckpt_cc");
        let config = CcNetConfig { base_width: 8, num_fab: 2, kernel_size: 3 };
        let model = build_ccnet::<f32>(config, 7).unwrap();
        let manifest = Manifest::new(ModelKind::Cc, model.param_count(), 7);
        save_ccnet(&base, &model, manifest).unwrap();

        let (loaded, m) = load_ccnet(&base).unwrap();
        assert_eq!(m.param_count, model.param_count());

        let mut rng = Rng::new(3);
        let probe = NormalizedChroma::new(Tensor::uniform(Shape::new(2, 8, 8), -1.0, 1.0, &mut rng)).unwrap();
        let a = ccnet_forward(&model, &probe).unwrap();
        let b = ccnet_forward(&loaded, &probe).unwrap();
        assert_eq!(a.tensor().data(), b.tensor().data());
    }

    #[test]
    fn kind_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("ckpt");
        let config = CcNetConfig { base_width: 8, num_fab: 1, kernel_size: 3 };
        let model = build_ccnet::<f32>(config, 7).unwrap();
        save_ccnet(&base, &model, Manifest::new(ModelKind::Cc, 0, 7)).unwrap();
        assert!(load_hrnet(&base).is_err());
    }

    #[test]
    fn hrnet_checkpoint_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("ckpt_hr");
        let config = HrNetConfig { scale_widths: [8, 8, 8], kernel_size: 3 };
        let model = build_hrnet::<f32>(config, 9).unwrap();
        save_hrnet(&base, &model, Manifest::new(ModelKind::Hr, model.param_count(), 9)).unwrap();
        let (loaded, _) = load_hrnet(&base).unwrap();
        let mut rng = Rng::new(4);
        let probe = Tensor::<f32>::uniform(Shape::new(3, 8, 8), -1.0, 1.0, &mut rng);
        assert_eq!(
            ccl_core::hrnet::hrnet_forward(&model, &probe).unwrap().data(),
            ccl_core::hrnet::hrnet_forward(&loaded, &probe).unwrap().data()
        );
    }
}
