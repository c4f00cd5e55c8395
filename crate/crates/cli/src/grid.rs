//! Labeled comparison grids: one row per image id, one column per input
//! directory, with a tiny built-in bitmap font for the labels.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use ccl_core::image::{resize_bilinear, RgbImage};
use ccl_core::tensor::{Shape, Tensor};

use crate::io;

const GLYPH_W: usize = 5;

/// 5x7 glyphs, one byte per row, low 5 bits used (MSB-left).
fn glyph(c: char) -> [u8; 7] {
    match c.to_ascii_uppercase() {
        'A' => [0x0e, 0x11, 0x11, 0x1f, 0x11, 0x11, 0x11],
        'B' => [0x1e, 0x11, 0x11, 0x1e, 0x11, 0x11, 0x1e],
        'C' => [0x0e, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0e],
        'D' => [0x1e, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1e],
        'E' => [0x1f, 0x10, 0x10, 0x1e, 0x10, 0x10, 0x1f],
        'F' => [0x1f, 0x10, 0x10, 0x1e, 0x10, 0x10, 0x10],
        'G' => [0x0e, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0f],
        'H' => [0x11, 0x11, 0x11, 0x1f, 0x11, 0x11, 0x11],
        'I' => [0x0e, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0e],
        'J' => [0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0c],
        'K' => [0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11],
        'L' => [0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1f],
        'M' => [0x11, 0x1b, 0x15, 0x15, 0x11, 0x11, 0x11],
        'N' => [0x11, 0x19, 0x15, 0x13, 0x11, 0x11, 0x11],
        'O' => [0x0e, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0e],
        'P' => [0x1e, 0x11, 0x11, 0x1e, 0x10, 0x10, 0x10],
        'Q' => [0x0e, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0d],
        'R' => [0x1e, 0x11, 0x11, 0x1e, 0x14, 0x12, 0x11],
        'S' => [0x0f, 0x10, 0x10, 0x0e, 0x01, 0x01, 0x1e],
        'T' => [0x1f, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04],
        'U' => [0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0e],
        'V' => [0x11, 0x11, 0x11, 0x11, 0x11, 0x0a, 0x04],
        'W' => [0x11, 0x11, 0x11, 0x15, 0x15, 0x1b, 0x11],
        'X' => [0x11, 0x11, 0x0a, 0x04, 0x0a, 0x11, 0x11],
        'Y' => [0x11, 0x11, 0x0a, 0x04, 0x04, 0x04, 0x04],
        'Z' => [0x1f, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1f],
        '0' => [0x0e, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0e],
        '1' => [0x04, 0x0c, 0x04, 0x04, 0x04, 0x04, 0x0e],
        '2' => [0x0e, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1f],
        '3' => [0x1e, 0x01, 0x01, 0x0e, 0x01, 0x01, 0x1e],
        '4' => [0x02, 0x06, 0x0a, 0x12, 0x1f, 0x02, 0x02],
        '5' => [0x1f, 0x10, 0x1e, 0x01, 0x01, 0x11, 0x0e],
        '6' => [0x06, 0x08, 0x10, 0x1e, 0x11, 0x11, 0x0e],
        '7' => [0x1f, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08],
        '8' => [0x0e, 0x11, 0x11, 0x0e, 0x11, 0x11, 0x0e],
        '9' => [0x0e, 0x11, 0x11, 0x0f, 0x01, 0x02, 0x0c],
        '-' => [0x00, 0x00, 0x00, 0x1f, 0x00, 0x00, 0x00],
        '_' => [0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1f],
        '.' => [0x00, 0x00, 0x00, 0x00, 0x00, 0x0c, 0x0c],
        '/' => [0x01, 0x01, 0x02, 0x04, 0x08, 0x10, 0x10],
        ' ' => [0x00; 7],
        _ => [0x00, 0x0a, 0x15, 0x0a, 0x15, 0x0a, 0x00], // unknown: checker
    }
}

/// Stamp white text onto a tensor at (x0, y0) with integer scaling.
fn draw_text(canvas: &mut Tensor<f32>, text: &str, x0: usize, y0: usize, scale: usize) {
    let Shape { c: _, h, w } = canvas.shape();
    for (ci, ch) in text.chars().enumerate() {
        let pattern = glyph(ch);
        for (gy, row) in pattern.iter().enumerate() {
            for gx in 0..GLYPH_W {
                if row & (1 << (GLYPH_W - 1 - gx)) == 0 {
                    continue;
                }
                for sy in 0..scale {
                    for sx in 0..scale {
                        let y = y0 + gy * scale + sy;
                        let x = x0 + (ci * (GLYPH_W + 1) + gx) * scale + sx;
                        if y < h && x < w {
                            for c in 0..3 {
                                *canvas.at_mut(c, y, x) = 1.0;
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Ids (file stems) found in a directory.
fn ids_of_dir(dir: &Path) -> Result<BTreeSet<String>> {
    Ok(io::list_images(dir)?.iter().filter_map(|p| io::id_of(p)).collect())
}

/// Compose the comparison grid and write it as one PNG. Every directory must
/// contain exactly the same ids; cells are `cell` x `cell` pixels.
pub fn make_grid(dirs: &[PathBuf], out: &Path, cell: usize) -> Result<()> {
    if dirs.len() < 2 {
        bail!("a grid needs at least two directories");
    }
    let id_sets: Vec<BTreeSet<String>> = dirs.iter().map(|d| ids_of_dir(d)).collect::<Result<_>>()?;
    let union: BTreeSet<String> = id_sets.iter().flatten().cloned().collect();
    let mut problems = Vec::new();
    for (dir, set) in dirs.iter().zip(&id_sets) {
        let missing: Vec<&String> = union.difference(set).collect();
        if !missing.is_empty() {
            problems.push(format!("{} lacks {:?}", dir.display(), missing));
        }
    }
    if !problems.is_empty() {
        bail!("directories disagree on image ids:\n  {}", problems.join("\n  "));
    }
    if union.is_empty() {
        bail!("no images to compose");
    }

    let label_h = 18usize;
    let margin_w = 110usize;
    let rows = union.len();
    let cols = dirs.len();
    let height = label_h + rows * cell;
    let width = margin_w + cols * cell;
    let mut canvas = Tensor::<f32>::full(Shape::new(3, height, width), 0.08);

    for (col, dir) in dirs.iter().enumerate() {
        let label = dir
            .file_name()
            .and_then(|s| s.to_str())
            .unwrap_or("dir")
            .chars()
            .take(cell / 12)
            .collect::<String>();
        draw_text(&mut canvas, &label, margin_w + col * cell + 4, 4, 2);
    }

    for (row, id) in union.iter().enumerate() {
        let y0 = label_h + row * cell;
        draw_text(&mut canvas, &id.chars().take(17).collect::<String>(), 2, y0 + 4, 1);
        for (col, dir) in dirs.iter().enumerate() {
            let path = io::IMAGE_EXTENSIONS
                .iter()
                .map(|ext| dir.join(format!("{id}.{ext}")))
                .find(|p| p.is_file())
                .expect("id verified present");
            let img = io::load_rgb(&path)?;
            let resized = resize_bilinear(img.tensor(), cell, cell).map_err(|e| anyhow::anyhow!("{e}"))?;
            let x0 = margin_w + col * cell;
            for c in 0..3 {
                for y in 0..cell {
                    for x in 0..cell {
                        *canvas.at_mut(c, y0 + y, x0 + x) = resized.at(c, y, x);
                    }
                }
            }
        }
    }

    let img = RgbImage::from_unclamped(canvas).map_err(|e| anyhow::anyhow!("{e}"))?;
    io::save_rgb_png(out, &img)?;
    Ok(())
}
