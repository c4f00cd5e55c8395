//! IO, file formats, training harness and CLI plumbing for the `ccl`
//! enhancement pipeline. All numerics live in `ccl-core`; this crate owns
//! everything that touches the filesystem.

pub mod checkpoint;
pub mod config;
pub mod dataset;
pub mod enhance;
pub mod evaluate;
pub mod grid;
pub mod io;
pub mod synth;
pub mod trainer;
pub mod weights;

/// Environment variable pointing at a pretrained perceptual backbone file.
pub const BACKBONE_ENV: &str = "CCL_BACKBONE_WEIGHTS";
