//! Dataset evaluation: per-image metrics plus dataset means, emitted as CSV
//! (`id,psnr,ssim,uiqm,uciqe` with a final `mean` row; the reference-based
//! columns are omitted entirely in no-reference mode).

use std::path::Path;

use anyhow::{bail, Result};
use ccl_core::metrics::{psnr, ssim_index, uciqe, uiqm};

use crate::io;

#[derive(Debug, Clone)]
pub struct MetricRow {
    pub id: String,
    pub psnr: Option<f64>,
    pub ssim: Option<f64>,
    pub uiqm: f64,
    pub uciqe: f64,
}

#[derive(Debug, Clone)]
pub struct MetricReport {
    pub rows: Vec<MetricRow>,
    pub with_reference: bool,
}

impl MetricReport {
    fn mean_of(&self, get: impl Fn(&MetricRow) -> Option<f64>) -> Option<f64> {
        let values: Vec<f64> = self.rows.iter().filter_map(&get).collect();
        if values.is_empty() {
            return None;
        }
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }

    pub fn mean_psnr(&self) -> Option<f64> {
        self.mean_of(|r| r.psnr)
    }

    pub fn mean_ssim(&self) -> Option<f64> {
        self.mean_of(|r| r.ssim)
    }

    pub fn mean_uiqm(&self) -> f64 {
        self.mean_of(|r| Some(r.uiqm)).unwrap_or(f64::NAN)
    }

    pub fn mean_uciqe(&self) -> f64 {
        self.mean_of(|r| Some(r.uciqe)).unwrap_or(f64::NAN)
    }

    pub fn to_csv(&self) -> String {
        let fmt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        let mut out = String::new();
        if self.with_reference {
            out.push_str("id,psnr,ssim,uiqm,uciqe\n");
            for r in &self.rows {
                out.push_str(&format!(
                    "{},{},{},{:.6},{:.6}\n",
                    r.id,
                    fmt(r.psnr),
                    fmt(r.ssim),
                    r.uiqm,
                    r.uciqe
                ));
            }
            out.push_str(&format!(
                "mean,{},{},{:.6},{:.6}\n",
                fmt(self.mean_psnr()),
                fmt(self.mean_ssim()),
                self.mean_uiqm(),
                self.mean_uciqe()
            ));
        } else {
            out.push_str("id,uiqm,uciqe\n");
            for r in &self.rows {
                out.push_str(&format!("{},{:.6},{:.6}\n", r.id, r.uiqm, r.uciqe));
            }
            out.push_str(&format!("mean,{:.6},{:.6}\n", self.mean_uiqm(), self.mean_uciqe()));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Score every image in `pred_dir`; with `ref_dir` the reference-based
/// metrics are included and images lacking a reference are skipped with a
/// warning (an error if nothing is left).
pub fn evaluate_dataset(pred_dir: &Path, ref_dir: Option<&Path>) -> Result<MetricReport> {
    let preds = io::list_images(pred_dir)?;
    if preds.is_empty() {
        bail!("no images found in {}", pred_dir.display());
    }
    let mut rows = Vec::new();
    let mut skipped = 0usize;
    for path in preds {
        let Some(id) = io::id_of(&path) else { continue };
        let img = io::load_rgb(&path)?;
        let (mut psnr_v, mut ssim_v) = (None, None);
        if let Some(ref_dir) = ref_dir {
            let ref_path = io::IMAGE_EXTENSIONS
                .iter()
                .map(|ext| ref_dir.join(format!("{id}.{ext}")))
                .find(|p| p.is_file());
            let Some(ref_path) = ref_path else {
                eprintln!("warning: no reference for {id}; skipped");
                skipped += 1;
                continue;
            };
            let reference = io::load_rgb(&ref_path)?;
            psnr_v = Some(psnr(&img, &reference).map_err(|e| anyhow::anyhow!("{id}: {e}"))?);
            ssim_v = Some(ssim_index(&img, &reference).map_err(|e| anyhow::anyhow!("{id}: {e}"))?);
        }
        rows.push(MetricRow { id, psnr: psnr_v, ssim: ssim_v, uiqm: uiqm(&img), uciqe: uciqe(&img) });
    }
    if rows.is_empty() {
        bail!("all {skipped} prediction(s) were skipped (no matching references)");
    }
    rows.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(MetricReport { rows, with_reference: ref_dir.is_some() })
}
