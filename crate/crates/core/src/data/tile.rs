use crate::error::{dim_err, Error, Result};
use crate::tensor::Tensor;

/// Class ids used throughout: 0 sand, 1 coral, 2 algae, 3 rock.
pub const CLASS_NAMES: [&str; 4] = ["sand", "coral", "algae", "rock"];

/// Per-channel normalization applied before the network.
pub const PIXEL_MEAN: [f32; 3] = [0.485, 0.456, 0.406];
pub const PIXEL_STD: [f32; 3] = [0.229, 0.224, 0.225];

/// RGB raster, 8 bits per channel, interleaved row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageTile {
    pub height: usize,
    pub width: usize,
    pub pixels: Vec<u8>,
}

impl ImageTile {
    pub fn new(height: usize, width: usize, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != height * width * 3 {
            return Err(dim_err!(
                "image {height}x{width} needs {} bytes, got {}",
                height * width * 3,
                pixels.len()
            ));
        }
        Ok(ImageTile { height, width, pixels })
    }

    pub fn filled(height: usize, width: usize, rgb: [u8; 3]) -> Self {
        ImageTile {
            height,
            width,
            pixels: rgb.iter().copied().cycle().take(height * width * 3).collect(),
        }
    }

    pub fn rgb(&self, y: usize, x: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn set_rgb(&mut self, y: usize, x: usize, v: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.pixels[i..i + 3].copy_from_slice(&v);
    }

    /// Normalized float tensor `[batch, H, W, 3]` for a batch of equally
    /// sized tiles.
    pub fn batch_tensor(tiles: &[&ImageTile]) -> Result<Tensor> {
        let first = tiles
            .first()
            .ok_or_else(|| Error::Contract("empty image batch".into()))?;
        let (h, w) = (first.height, first.width);
        let mut data = Vec::with_capacity(tiles.len() * h * w * 3);
        for t in tiles {
            if (t.height, t.width) != (h, w) {
                return Err(dim_err!("batch mixes {h}x{w} and {}x{} images", t.height, t.width));
            }
            data.extend(t.pixels.iter().enumerate().map(|(i, &p)| {
                let c = i % 3;
                (p as f32 / 255.0 - PIXEL_MEAN[c]) / PIXEL_STD[c]
            }));
        }
        Tensor::new(&[tiles.len(), h, w, 3], data)
    }
}

/// Per-pixel class-id raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskTile {
    pub height: usize,
    pub width: usize,
    pub labels: Vec<u8>,
}

impl MaskTile {
    pub fn new(height: usize, width: usize, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != height * width {
            return Err(dim_err!(
                "mask {height}x{width} needs {} labels, got {}",
                height * width,
                labels.len()
            ));
        }
        Ok(MaskTile { height, width, labels })
    }

    pub fn filled(height: usize, width: usize, label: u8) -> Self {
        MaskTile {
            height,
            width,
            labels: vec![label; height * width],
        }
    }

    pub fn at(&self, y: usize, x: usize) -> u8 {
        self.labels[y * self.width + x]
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Errors when any label is `>= num_classes`.
    pub fn validate(&self, num_classes: usize) -> Result<()> {
        match self.labels.iter().position(|&l| l as usize >= num_classes) {
            Some(i) => Err(Error::Validation(format!(
                "label {} at pixel {i} is not below {num_classes} classes",
                self.labels[i]
            ))),
            None => Ok(()),
        }
    }

    pub fn class_counts(&self, num_classes: usize) -> Vec<u64> {
        let mut counts = vec![0u64; num_classes];
        for &l in &self.labels {
            if (l as usize) < num_classes {
                counts[l as usize] += 1;
            }
        }
        counts
    }

    pub fn class_fractions(&self, num_classes: usize) -> Vec<f64> {
        let n = self.labels.len() as f64;
        self.class_counts(num_classes)
            .into_iter()
            .map(|c| c as f64 / n)
            .collect()
    }

    pub fn same_extents(&self, other: &MaskTile) -> Result<()> {
        if (self.height, self.width) != (other.height, other.width) {
            return Err(dim_err!(
                "mask extents differ: {}x{} vs {}x{}",
                self.height,
                self.width,
                other.height,
                other.width
            ));
        }
        Ok(())
    }
}
