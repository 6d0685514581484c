//! Windowed-attention building blocks.
//!
//! Token grids travel as [`FeatureMap`]s: a `[batch·height·width, channels]`
//! tensor in row-major token order. Attention runs on [`WindowSet`]s of
//! non-overlapping `M×M` windows; the shifted variant cyclically rolls the
//! grid by `⌊M/2⌋` and blocks attention across the seams with a
//! [`ShiftMask`].

mod attention;
mod block;
mod layers;
mod resample;
mod window;

pub use attention::{relative_position_index, RelativePositionBias, WindowAttention};
pub use block::SwinBlock;
pub use layers::{LayerNorm, Linear, INIT_STD, LN_EPS};
pub use resample::{
    bicubic_weights, cubic_kernel, split_rearrange, BicubicUpsample, PatchEmbed, PatchMerge, PatchSplit, Upsample,
};
pub use window::{build_shift_mask, cyclic_shift, window_partition, window_reverse, ShiftMask, WindowSet, NEG_LARGE};

use crate::error::{dim_err, Result};
use crate::tensor::Tensor;

/// Grid of tokens, `data` shaped `[batch·height·width, channels]`.
#[derive(Debug, Clone)]
pub struct FeatureMap {
    pub batch: usize,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Tensor,
}

impl FeatureMap {
    pub fn new(batch: usize, height: usize, width: usize, channels: usize, data: Tensor) -> Result<Self> {
        if data.shape() != [batch * height * width, channels] {
            return Err(dim_err!(
                "feature map {batch}x{height}x{width}x{channels} cannot hold tensor {:?}",
                data.shape()
            ));
        }
        Ok(FeatureMap {
            batch,
            height,
            width,
            channels,
            data,
        })
    }

    pub fn with_data(&self, data: Tensor) -> Result<Self> {
        let channels = *data.shape().last().unwrap_or(&0);
        FeatureMap::new(self.batch, self.height, self.width, channels, data)
    }

    pub fn tokens(&self) -> usize {
        self.batch * self.height * self.width
    }

    /// `(height, width, channels)`.
    pub fn extents(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }
}
