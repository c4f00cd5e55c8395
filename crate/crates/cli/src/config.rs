//! Optional JSON config file for `ccl train`. Every field mirrors a CLI flag;
//! explicit flags take precedence over file values, which take precedence
//! over built-in defaults. The merged result is echoed to the run log.

use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub lr_cc: Option<f64>,
    pub lr_hr: Option<f64>,
    pub beta1: Option<f64>,
    pub decay_start_epoch: Option<usize>,
    pub seed: Option<u64>,
    pub use_contrastive: Option<bool>,
    pub negative_source: Option<String>,
    pub cc_width: Option<usize>,
    pub num_fab: Option<usize>,
    pub hr_widths: Option<[usize; 3]>,
    pub train_size: Option<usize>,
    pub jobs: Option<usize>,
    pub backbone: Option<String>,
    pub checkpoint_every: Option<usize>,
    pub lambda_cc: Option<f64>,
    pub lambda_hr: Option<f64>,
    pub s_cc: Option<f64>,
    pub s_hr: Option<f64>,
}

pub fn load(path: &Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// flag > file > default
pub fn pick<T: Clone>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}
