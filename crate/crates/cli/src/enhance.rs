//! Batch inference: raw image -> color corrected intermediate -> dehazed
//! final image, at native resolution.

use std::path::Path;

use anyhow::{bail, Context, Result};
use ccl_core::ccnet::CcNet;
use ccl_core::color::{chroma_to_rgb, rgb_to_lab, split_lab};
use ccl_core::graph::Graph;
use ccl_core::hrnet::HrNet;
use ccl_core::image::RgbImage;

use crate::checkpoint;
use crate::io;

/// Stage 1: correct chroma in Lab space, keep the raw lightness.
pub fn enhance_cc(model: &CcNet<f32>, img: &RgbImage<f32>) -> Result<RgbImage<f32>> {
    let lab = rgb_to_lab(img).map_err(|e| anyhow::anyhow!("{e}"))?;
    let (chroma, luma) = split_lab(&lab).map_err(|e| anyhow::anyhow!("{e}"))?;
    let mut g = Graph::inference();
    let x = g.input(chroma.into_tensor(), false);
    let corrected = model.forward(&mut g, &x);
    let rgb = chroma_to_rgb(corrected.tensor(), luma.tensor());
    RgbImage::new(rgb).map_err(|e| anyhow::anyhow!("{e}"))
}

/// Stage 2: dehaze an RGB image.
pub fn enhance_hr(model: &HrNet<f32>, img: &RgbImage<f32>) -> Result<RgbImage<f32>> {
    let mut g = Graph::inference();
    let x = g.input(img.to_network(), false);
    let y = model.forward(&mut g, &x).map_err(|e| anyhow::anyhow!("{e}"))?;
    RgbImage::from_network(y.tensor()).map_err(|e| anyhow::anyhow!("{e}"))
}

/// Full cascade over a directory. Writes `<out>/<id>.png` for every input
/// (and `<out>/<id>_cc.png` when `emit_intermediate`). Returns the number of
/// images written.
pub fn enhance_dir(
    input_dir: &Path,
    cc_ckpt: &Path,
    hr_ckpt: &Path,
    out_dir: &Path,
    emit_intermediate: bool,
) -> Result<usize> {
    let (cc, _) = checkpoint::load_ccnet(cc_ckpt).context("loading the color correction checkpoint")?;
    let (hr, _) = checkpoint::load_hrnet(hr_ckpt).context("loading the haze removal checkpoint")?;
    let inputs = io::list_images(input_dir)?;
    if inputs.is_empty() {
        bail!("no images found in {}", input_dir.display());
    }
    std::fs::create_dir_all(out_dir)?;
    let mut written = 0usize;
    for path in inputs {
        let Some(id) = io::id_of(&path) else { continue };
        let raw = io::load_rgb(&path)?;
        let corrected = enhance_cc(&cc, &raw)?;
        if emit_intermediate {
            io::save_rgb_png(&out_dir.join(format!("{id}_cc.png")), &corrected)?;
        }
        let final_img = enhance_hr(&hr, &corrected)?;
        io::save_rgb_png(&out_dir.join(format!("{id}.png")), &final_img)?;
        written += 1;
    }
    Ok(written)
}
