//! Image file IO: 8-bit PNG/JPEG in, 8-bit PNG out, planar f32 in between.

use std::path::Path;

use anyhow::{Context, Result};
use ccl_core::image::RgbImage;
use ccl_core::tensor::{Shape, Tensor};

pub const IMAGE_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

pub fn is_image_path(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        .unwrap_or(false)
}

/// Decode an 8-bit image into a planar [0, 1] float image.
pub fn load_rgb(path: &Path) -> Result<RgbImage<f32>> {
    let decoded = image::open(path).with_context(|| format!("decoding {}", path.display()))?;
    let rgb = decoded.to_rgb8();
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    let mut t = Tensor::zeros(Shape::new(3, h, w));
    for (x, y, px) in rgb.enumerate_pixels() {
        let (x, y) = (x as usize, y as usize);
        for c in 0..3 {
            *t.at_mut(c, y, x) = px.0[c] as f32 / 255.0;
        }
    }
    RgbImage::new(t).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
}

/// Encode a [0, 1] float image as 8-bit PNG.
pub fn save_rgb_png(path: &Path, img: &RgbImage<f32>) -> Result<()> {
    let (h, w) = (img.height(), img.width());
    let mut buf = image::RgbImage::new(w as u32, h as u32);
    for (x, y, px) in buf.enumerate_pixels_mut() {
        let (x, y) = (x as usize, y as usize);
        for c in 0..3 {
            px.0[c] = (img.at(c, y, x).clamp(0.0, 1.0) * 255.0).round() as u8;
        }
    }
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    buf.save(path).with_context(|| format!("writing {}", path.display()))
}

/// Filename stem used as the sample id.
pub fn id_of(path: &Path) -> Option<String> {
    path.file_stem().and_then(|s| s.to_str()).map(|s| s.to_string())
}

/// Sorted image paths directly inside a directory.
pub fn list_images(dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let path = entry?.path();
        if path.is_file() && is_image_path(&path) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ccl_core::rng::Rng;

    #[test]
    fn png_roundtrip_is_exact_for_8bit_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.png");
        let mut rng = Rng::new(5);
        // quantized values survive the u8 roundtrip exactly
        let t = Tensor::<f32>::zeros(Shape::new(3, 9, 7)).map(|_| {
            (rng.next_index(256) as f32) / 255.0
        });
        let img = RgbImage::new(t).unwrap();
        save_rgb_png(&path, &img).unwrap();
        let back = load_rgb(&path).unwrap();
        assert_eq!(img.tensor().data(), back.tensor().data());
    }

    #[test]
    fn list_images_sorted_and_filtered() {
        let dir = tempfile::tempdir().unwrap();
        for name in ["b.png", "a.png", "notes.txt", "c.jpg"] {
            std::fs::write(dir.path().join(name), b"x").unwrap();
        }
        let found = list_images(dir.path()).unwrap();
        let names: Vec<_> = found.iter().map(|p| p.file_name().unwrap().to_str().unwrap()).collect();
        assert_eq!(names, ["a.png", "b.png", "c.jpg"]);
    }
}
