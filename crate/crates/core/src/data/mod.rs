//! Tiles, raster I/O, the synthetic generator, augmentation, stratified
//! batching and dataset splits.

mod augment;
mod manifest;
mod raster;
mod sampler;
mod synth;
mod tile;

pub use augment::{
    augment_pair, contrast_brightness, flip_image, flip_mask, rotate90_image, rotate90_mask, rotate_image, rotate_mask,
    shift_rgb, AugmentPlan, AugmentationConfig, FlipAxis, Interp,
};
pub use manifest::{split_assignments, split_counts, split_dataset, DatasetManifest, ManifestEntry, Split, TileSet};
pub use raster::{
    decode_image, decode_mask, encode_image, encode_mask, read_image, read_mask, write_image, write_mask,
};
pub use sampler::{batch_counts, stratified_batches, AbundanceBand, BatchPlan};
pub use synth::{generate_synthetic_tile, validate_fractions, TileGenerator, SURVEY_FRACTIONS};
pub use tile::{ImageTile, MaskTile, CLASS_NAMES, PIXEL_MEAN, PIXEL_STD};

use crate::error::{dim_err, Result};

pub const NUM_CLASSES: usize = 4;

/// Render colors: sand tan, coral red, algae green, rock gray.
pub const PALETTE: [[u8; 3]; NUM_CLASSES] = [[210, 180, 140], [200, 40, 40], [40, 160, 60], [128, 128, 128]];
pub const PALETTE_NAMES: [&str; NUM_CLASSES] = ["tan", "red", "green", "gray"];

pub fn class_name(c: usize) -> String {
    CLASS_NAMES
        .get(c)
        .map_or_else(|| format!("class{c}"), |s| s.to_string())
}

pub fn check_pair(img: &ImageTile, mask: &MaskTile) -> Result<()> {
    if (img.height, img.width) != (mask.height, mask.width) {
        return Err(dim_err!(
            "image {}x{} and mask {}x{} differ",
            img.height,
            img.width,
            mask.height,
            mask.width
        ));
    }
    Ok(())
}

/// Color rendering of a class mask; ids beyond the palette render black.
pub fn render_mask(mask: &MaskTile) -> ImageTile {
    ImageTile {
        height: mask.height,
        width: mask.width,
        pixels: mask
            .labels
            .iter()
            .flat_map(|&l| PALETTE.get(l as usize).copied().unwrap_or([0; 3]))
            .collect(),
    }
}

/// Resamples a pair to `size×size`: bilinear (half-pixel centers) for the
/// image, nearest for the mask.
pub fn resize_pair(img: &ImageTile, mask: &MaskTile, size: usize) -> Result<(ImageTile, MaskTile)> {
    check_pair(img, mask)?;
    if (img.height, img.width) == (size, size) {
        return Ok((img.clone(), mask.clone()));
    }
    let (h, w) = (img.height, img.width);
    let src =
        |o: usize, n_in: usize| ((o as f32 + 0.5) * n_in as f32 / size as f32 - 0.5).clamp(0.0, (n_in - 1) as f32);
    let mut pixels = Vec::with_capacity(size * size * 3);
    let mut labels = Vec::with_capacity(size * size);
    for y in 0..size {
        let sy = src(y, h);
        let (y0, ty) = (sy.floor() as usize, sy - sy.floor());
        let y1 = (y0 + 1).min(h - 1);
        for x in 0..size {
            let sx = src(x, w);
            let (x0, tx) = (sx.floor() as usize, sx - sx.floor());
            let x1 = (x0 + 1).min(w - 1);
            let (a, b, c, d) = (img.rgb(y0, x0), img.rgb(y0, x1), img.rgb(y1, x0), img.rgb(y1, x1));
            for ch in 0..3 {
                let top = a[ch] as f32 * (1.0 - tx) + b[ch] as f32 * tx;
                let bot = c[ch] as f32 * (1.0 - tx) + d[ch] as f32 * tx;
                pixels.push((top * (1.0 - ty) + bot * ty).round().clamp(0.0, 255.0) as u8);
            }
            let ny = (((y as f32 + 0.5) * h as f32 / size as f32) as usize).min(h - 1);
            let nx = (((x as f32 + 0.5) * w as f32 / size as f32) as usize).min(w - 1);
            labels.push(mask.at(ny, nx));
        }
    }
    Ok((
        ImageTile {
            height: size,
            width: size,
            pixels,
        },
        MaskTile {
            height: size,
            width: size,
            labels,
        },
    ))
}
