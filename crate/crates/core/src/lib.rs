//! Core of the `ccl` underwater image enhancement pipeline.
//!
//! Everything in this crate is pure computation over owned buffers: color
//! space conversion, the two enhancement sub-networks (a chroma corrector and
//! a multi-scale dehazer), the training losses, and the image quality
//! metrics. File formats, dataset handling and the CLI live in the companion
//! `ccl` crate.
//!
//! The crate is `no_std`-compatible (`alloc` required); disable the default
//! `std` feature for embedded use. The `std` feature only enables faster GEMM
//! kernels and `std::error::Error` impls.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod backbone;
pub mod ccnet;
pub mod color;
pub mod data;
pub mod error;
pub mod graph;
pub mod hrnet;
pub mod image;
pub mod losses;
pub mod metrics;
pub mod nn;
pub mod ops;
pub mod rng;
pub mod scalar;
pub mod tensor;
pub mod train;

pub use error::{CoreError, Result};
pub use scalar::Scalar;
pub use tensor::{Shape, Tensor};
