//! The full segmentation network, its configuration and checkpoints.

mod checkpoint;
mod config;
mod net;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, LoadOptions, TensorRecord, CHECKPOINT_VERSION};
pub use config::{ModelConfig, Upsampling, Variant};
pub use net::{BenthiqNet, ForwardOptions, Logits, StageShape};
