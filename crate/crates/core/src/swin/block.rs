use super::{
    build_shift_mask, cyclic_shift, window_partition, window_reverse, FeatureMap, LayerNorm, Linear, ShiftMask,
    WindowAttention,
};
use crate::error::{dim_err, Result};
use crate::tensor::{ParamStore, Rng};

/// Pre-norm transformer block over windows:
/// `x + Attn(LN(x))`, then `+ MLP(LN(·))` with a GELU hidden layer.
#[derive(Debug, Clone)]
pub struct SwinBlock {
    pub norm1: LayerNorm,
    pub attn: WindowAttention,
    pub norm2: LayerNorm,
    pub fc1: Linear,
    pub fc2: Linear,
    pub window_size: usize,
    /// Cyclic shift applied around attention; 0 for plain W-MSA.
    pub shift: usize,
    pub resolution: (usize, usize),
    mask: Option<ShiftMask>,
}

impl SwinBlock {
    /// Shift used by an SW-MSA block: `⌊M/2⌋`, or none when the whole grid
    /// is a single window.
    pub fn default_shift(shifted: bool, window_size: usize, resolution: (usize, usize)) -> usize {
        if shifted && (resolution.0 > window_size || resolution.1 > window_size) {
            window_size / 2
        } else {
            0
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn new(
        store: &mut ParamStore,
        rng: &mut Rng,
        name: &str,
        dim: usize,
        heads: usize,
        window_size: usize,
        resolution: (usize, usize),
        shift: usize,
        mlp_ratio: usize,
        position_bias: bool,
    ) -> Result<Self> {
        let (h, w) = resolution;
        if window_size == 0 || h % window_size != 0 || w % window_size != 0 {
            return Err(dim_err!(
                "{name}: resolution {h}x{w} is not divisible by window size {window_size}"
            ));
        }
        let mask = if shift > 0 {
            Some(build_shift_mask(h, w, window_size, shift)?)
        } else {
            None
        };
        let hidden = mlp_ratio * dim;
        Ok(SwinBlock {
            norm1: LayerNorm::new(store, &format!("{name}.norm1"), dim)?,
            attn: WindowAttention::new(
                store,
                rng,
                &format!("{name}.attn"),
                dim,
                heads,
                window_size,
                position_bias,
            )?,
            norm2: LayerNorm::new(store, &format!("{name}.norm2"), dim)?,
            fc1: Linear::new(store, rng, &format!("{name}.mlp.fc1"), dim, hidden, true)?,
            fc2: Linear::new(store, rng, &format!("{name}.mlp.fc2"), hidden, dim, true)?,
            window_size,
            shift,
            resolution,
            mask,
        })
    }

    pub fn forward(&self, store: &ParamStore, f: &FeatureMap) -> Result<FeatureMap> {
        if (f.height, f.width) != self.resolution {
            return Err(dim_err!(
                "block built for {:?} got grid {}x{}",
                self.resolution,
                f.height,
                f.width
            ));
        }
        let shortcut = &f.data;
        let mut g = f.with_data(self.norm1.forward(store, shortcut)?)?;
        let s = self.shift as isize;
        if s > 0 {
            g = cyclic_shift(&g, s)?;
        }
        let ws = window_partition(&g, self.window_size)?;
        let ws = self.attn.forward(store, &ws, self.mask.as_ref())?;
        let mut g = window_reverse(&ws)?;
        if s > 0 {
            g = cyclic_shift(&g, -s)?;
        }
        let x = shortcut.add(&g.data)?;
        let h = self.norm2.forward(store, &x)?;
        let h = self.fc1.forward(store, &h)?.gelu();
        let h = self.fc2.forward(store, &h)?;
        f.with_data(x.add(&h)?)
    }
}
