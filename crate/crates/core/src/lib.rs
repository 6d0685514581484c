//! Benthic habitat segmentation with a U-shaped shifted-window transformer
//! (sand, coral, algae, rock), built on a small from-scratch autodiff
//! tensor engine.
//!
//! Module map:
//! - [`tensor`]: tensors, reverse-mode autodiff, parameters, SGD, RNG
//! - [`swin`]: window partitioning, shifted-window masks, attention blocks,
//!   patch merging and splitting
//! - [`model`]: the encoder/bottleneck/decoder network and checkpoints
//! - [`metrics`]: Dice loss, confusion matrices, IOU, border/interior accuracy
//! - [`data`]: tiles, rasters, synthetic generator, augmentation, sampling
//! - [`run`]: synth/train/eval/predict/ablate commands behind the CLI

pub mod data;
pub mod error;
pub(crate) mod kv;
pub mod metrics;
pub mod model;
pub mod run;
pub mod swin;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{no_grad, ParamStore, Rng, Sgd, Tensor};
