//! Paired dataset discovery over the `root/raw` + `root/reference` layout.
//! Matching is by filename; a raw image without a reference counterpart is
//! kept as a no-reference sample (with a warning).

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use ccl_core::data::PairedSample;

use crate::io;

#[derive(Debug, Clone)]
pub struct DatasetEntry {
    pub id: String,
    pub raw_path: PathBuf,
    pub reference_path: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct DatasetManifest {
    pub root: PathBuf,
    pub split: String,
    pub entries: Vec<DatasetEntry>,
}

impl DatasetManifest {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn paired_entries(&self) -> impl Iterator<Item = &DatasetEntry> {
        self.entries.iter().filter(|e| e.reference_path.is_some())
    }

    pub fn load_sample(&self, entry: &DatasetEntry) -> Result<PairedSample<f32>> {
        let raw = io::load_rgb(&entry.raw_path)?;
        let reference = entry
            .reference_path
            .as_ref()
            .map(|p| io::load_rgb(p))
            .transpose()?;
        PairedSample::new(entry.id.clone(), raw, reference)
            .with_context(|| format!("sample {}", entry.id))
    }
}

/// Scan `root/raw` (and `root/reference`) into a manifest with deterministic
/// lexicographic id ordering.
pub fn load_paired_dataset(root: &Path, split: &str) -> Result<DatasetManifest> {
    let raw_dir = root.join("raw");
    if !raw_dir.is_dir() {
        bail!("dataset root {} has no raw/ directory", root.display());
    }
    let raw_files = io::list_images(&raw_dir)?;
    if raw_files.is_empty() {
        bail!("no images found in {}", raw_dir.display());
    }
    let ref_dir = root.join("reference");
    let mut entries = Vec::with_capacity(raw_files.len());
    for raw_path in raw_files {
        let Some(id) = io::id_of(&raw_path) else { continue };
        let reference_path = io::IMAGE_EXTENSIONS
            .iter()
            .map(|ext| ref_dir.join(format!("{id}.{ext}")))
            .find(|p| p.is_file());
        if reference_path.is_none() {
            eprintln!("warning: {id} has no reference image; kept as no-reference sample");
        }
        entries.push(DatasetEntry { id, raw_path, reference_path });
    }
    entries.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(DatasetManifest { root: root.to_path_buf(), split: split.to_string(), entries })
}
