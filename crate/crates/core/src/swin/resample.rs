use std::rc::Rc;

use super::{FeatureMap, LayerNorm, Linear};
use crate::error::{dim_err, Result};
use crate::tensor::{ParamStore, Rng, Tensor};

/// Splits an image into non-overlapping `p×p` patches, flattens each to
/// `p·p·3` values and projects to `C` channels, then layer-norms.
#[derive(Debug, Clone)]
pub struct PatchEmbed {
    pub proj: Linear,
    pub norm: LayerNorm,
    pub patch_size: usize,
}

impl PatchEmbed {
    pub fn new(store: &mut ParamStore, rng: &mut Rng, name: &str, patch_size: usize, dim: usize) -> Result<Self> {
        let d_in = patch_size * patch_size * 3;
        Ok(PatchEmbed {
            proj: Linear::new(store, rng, &format!("{name}.proj"), d_in, dim, true)?,
            norm: LayerNorm::new(store, &format!("{name}.norm"), dim)?,
            patch_size,
        })
    }

    /// `images`: `[batch, H, W, 3]`.
    pub fn forward(&self, store: &ParamStore, images: &Tensor) -> Result<FeatureMap> {
        let s = images.shape();
        if s.len() != 4 || s[3] != 3 {
            return Err(dim_err!("patch embed expects [batch, H, W, 3], got {s:?}"));
        }
        let (b, h, w) = (s[0], s[1], s[2]);
        let p = self.patch_size;
        if h % p != 0 || w % p != 0 {
            return Err(dim_err!("image {h}x{w} is not divisible by patch size {p}"));
        }
        let (gh, gw) = (h / p, w / p);
        let patches = images
            .reshape(&[b, gh, p, gw, p, 3])?
            .permute(&[0, 1, 3, 2, 4, 5])?
            .reshape(&[b * gh * gw, p * p * 3])?;
        let x = self.proj.forward(store, &patches)?;
        let x = self.norm.forward(store, &x)?;
        FeatureMap::new(b, gh, gw, self.proj.d_out, x)
    }
}

/// Concatenates each 2×2 token group (`4c`), layer-norms and projects to
/// `2c`: half the resolution, twice the channels.
#[derive(Debug, Clone)]
pub struct PatchMerge {
    pub norm: LayerNorm,
    pub reduction: Linear,
}

impl PatchMerge {
    pub fn new(store: &mut ParamStore, rng: &mut Rng, name: &str, dim: usize) -> Result<Self> {
        Ok(PatchMerge {
            norm: LayerNorm::new(store, &format!("{name}.norm"), 4 * dim)?,
            reduction: Linear::new(store, rng, &format!("{name}.reduction"), 4 * dim, 2 * dim, false)?,
        })
    }

    pub fn forward(&self, store: &ParamStore, f: &FeatureMap) -> Result<FeatureMap> {
        let (h, w, c) = f.extents();
        if h % 2 != 0 || w % 2 != 0 {
            return Err(dim_err!("patch merge needs even extents, got {h}x{w}"));
        }
        // group order (0,0), (1,0), (0,1), (1,1)
        let x = f
            .data
            .reshape(&[f.batch, h / 2, 2, w / 2, 2, c])?
            .permute(&[0, 1, 3, 4, 2, 5])?
            .reshape(&[f.batch * (h / 2) * (w / 2), 4 * c])?;
        let x = self.norm.forward(store, &x)?;
        let x = self.reduction.forward(store, &x)?;
        FeatureMap::new(f.batch, h / 2, w / 2, 2 * c, x)
    }
}

/// Rearranges each token's `4·c_out` vector into a 2×2 block of `c_out`
/// channels: `[b·h·w, 4·c_out]` → `[b·2h·2w, c_out]`.
pub fn split_rearrange(x: &Tensor, batch: usize, h: usize, w: usize) -> Result<Tensor> {
    let c4 = x.shape()[1];
    if !c4.is_multiple_of(4) {
        return Err(dim_err!("patch split needs channels divisible by 4, got {c4}"));
    }
    let c = c4 / 4;
    x.reshape(&[batch, h, w, 2, 2, c])?
        .permute(&[0, 1, 3, 2, 4, 5])?
        .reshape(&[batch * 2 * h * 2 * w, c])
}

/// Linear `c → 2c`, then each token becomes a 2×2 block of `c/2`
/// channels, followed by layer norm.
#[derive(Debug, Clone)]
pub struct PatchSplit {
    pub expand: Linear,
    pub norm: LayerNorm,
}

impl PatchSplit {
    pub fn new(store: &mut ParamStore, rng: &mut Rng, name: &str, dim: usize) -> Result<Self> {
        if !dim.is_multiple_of(2) {
            return Err(dim_err!("{name}: patch split needs an even channel count, got {dim}"));
        }
        Ok(PatchSplit {
            expand: Linear::new(store, rng, &format!("{name}.expand"), dim, 2 * dim, false)?,
            norm: LayerNorm::new(store, &format!("{name}.norm"), dim / 2)?,
        })
    }

    pub fn forward(&self, store: &ParamStore, f: &FeatureMap) -> Result<FeatureMap> {
        let (h, w, c) = f.extents();
        if c % 2 != 0 {
            return Err(dim_err!("patch split needs an even channel count, got {c}"));
        }
        let x = self.expand.forward(store, &f.data)?;
        let x = split_rearrange(&x, f.batch, h, w)?;
        let x = self.norm.forward(store, &x)?;
        FeatureMap::new(f.batch, 2 * h, 2 * w, c / 2, x)
    }
}

/// Bicubic convolution kernel with `a = −0.75`.
pub fn cubic_kernel(x: f32) -> f32 {
    const A: f32 = -0.75;
    let x = x.abs();
    if x <= 1.0 {
        ((A + 2.0) * x - (A + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((A * x - 5.0 * A) * x + 8.0 * A) * x - 4.0 * A
    } else {
        0.0
    }
}

/// `[n_out, n_in]` half-pixel-centred bicubic resampling matrix with edge
/// clamping.
pub fn bicubic_weights(n_in: usize, n_out: usize) -> Vec<f32> {
    let mut wts = vec![0.0; n_out * n_in];
    let scale = n_in as f32 / n_out as f32;
    for o in 0..n_out {
        let src = (o as f32 + 0.5) * scale - 0.5;
        let base = src.floor();
        let t = src - base;
        for k in -1..=2i32 {
            let wv = cubic_kernel(t - k as f32);
            let i = (base as i32 + k).clamp(0, n_in as i32 - 1) as usize;
            wts[o * n_in + i] += wv;
        }
    }
    wts
}

/// Bicubic 2× interpolation per channel, then a linear `c → c/2` and
/// layer norm so shapes match [`PatchSplit`].
#[derive(Debug, Clone)]
pub struct BicubicUpsample {
    pub proj: Linear,
    pub norm: LayerNorm,
}

impl BicubicUpsample {
    pub fn new(store: &mut ParamStore, rng: &mut Rng, name: &str, dim: usize) -> Result<Self> {
        if !dim.is_multiple_of(2) {
            return Err(dim_err!(
                "{name}: bicubic upsample needs an even channel count, got {dim}"
            ));
        }
        Ok(BicubicUpsample {
            proj: Linear::new(store, rng, &format!("{name}.proj"), dim, dim / 2, false)?,
            norm: LayerNorm::new(store, &format!("{name}.norm"), dim / 2)?,
        })
    }

    /// Interpolation step alone: `[b, h, w, c]` grid to `[b, 2h, 2w, c]`.
    pub fn interpolate(f: &FeatureMap) -> Result<FeatureMap> {
        let (h, w, c) = f.extents();
        let x = f.data.reshape(&[f.batch, h, w, c])?;
        let x = x.resample_axis(1, Rc::new(bicubic_weights(h, 2 * h)), 2 * h)?;
        let x = x.resample_axis(2, Rc::new(bicubic_weights(w, 2 * w)), 2 * w)?;
        let x = x.reshape(&[f.batch * 4 * h * w, c])?;
        FeatureMap::new(f.batch, 2 * h, 2 * w, c, x)
    }

    pub fn forward(&self, store: &ParamStore, f: &FeatureMap) -> Result<FeatureMap> {
        if !f.channels.is_multiple_of(2) {
            return Err(dim_err!(
                "bicubic upsample needs an even channel count, got {}",
                f.channels
            ));
        }
        let up = Self::interpolate(f)?;
        let x = self.proj.forward(store, &up.data)?;
        let x = self.norm.forward(store, &x)?;
        up.with_data(x)
    }
}

/// Decoder upsampling step: `[h, w, c]` → `[2h, 2w, c/2]`.
#[derive(Debug, Clone)]
pub enum Upsample {
    PatchSplit(PatchSplit),
    Bicubic(BicubicUpsample),
}

impl Upsample {
    pub fn forward(&self, store: &ParamStore, f: &FeatureMap) -> Result<FeatureMap> {
        match self {
            Upsample::PatchSplit(p) => p.forward(store, f),
            Upsample::Bicubic(b) => b.forward(store, f),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_weights_sum_to_one() {
        let w = bicubic_weights(5, 10);
        for row in w.chunks(5) {
            assert!((row.iter().sum::<f32>() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn odd_channels_rejected() {
        let mut s = ParamStore::new();
        let mut r = Rng::new(0);
        assert!(PatchSplit::new(&mut s, &mut r, "u", 3).is_err());
        assert!(BicubicUpsample::new(&mut s, &mut r, "b", 5).is_err());
    }
}
