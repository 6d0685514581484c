use std::rc::Rc;

use super::FeatureMap;
use crate::error::{dim_err, Result};
use crate::tensor::Tensor;

/// Additive logit bias for attention pairs that straddle a shift seam.
pub const NEG_LARGE: f32 = -1e4;

/// Non-overlapping `M×M` windows of a token grid.
#[derive(Debug, Clone)]
pub struct WindowSet {
    pub batch: usize,
    /// Windows per image, `(height/M)·(width/M)`.
    pub num_windows: usize,
    pub window_size: usize,
    /// `[batch·num_windows, M², channels]`, images outermost.
    pub tokens: Tensor,
    /// Grid extents `(height, width)` the windows were cut from.
    pub origin: (usize, usize),
}

impl WindowSet {
    pub fn channels(&self) -> usize {
        self.tokens.shape()[2]
    }

    pub fn with_tokens(&self, tokens: Tensor) -> WindowSet {
        WindowSet { tokens, ..self.clone() }
    }
}

/// Per-window additive attention bias `[num_windows, M², M²]`, entries 0
/// (same pre-shift region) or [`NEG_LARGE`].
#[derive(Debug, Clone)]
pub struct ShiftMask {
    pub num_windows: usize,
    pub window_size: usize,
    pub bias: Tensor,
}

/// Expands a token-level index map to an element-level one.
fn expand_tokens(token_index: &[usize], channels: usize) -> Rc<Vec<usize>> {
    let mut idx = Vec::with_capacity(token_index.len() * channels);
    for &t in token_index {
        idx.extend(t * channels..(t + 1) * channels);
    }
    Rc::new(idx)
}

/// Token index (within one image's grid) of each window slot, in window
/// order then row-major within the window.
fn window_order(height: usize, width: usize, m: usize) -> Vec<usize> {
    let mut order = Vec::with_capacity(height * width);
    for wy in 0..height / m {
        for wx in 0..width / m {
            for ty in 0..m {
                for tx in 0..m {
                    order.push((wy * m + ty) * width + wx * m + tx);
                }
            }
        }
    }
    order
}

pub fn window_partition(f: &FeatureMap, m: usize) -> Result<WindowSet> {
    let (h, w, c) = f.extents();
    if m == 0 || h % m != 0 || w % m != 0 {
        return Err(dim_err!(
            "window partition: grid {h}x{w} is not divisible by window size {m}"
        ));
    }
    let per_image = window_order(h, w, m);
    let mut token_index = Vec::with_capacity(f.tokens());
    for b in 0..f.batch {
        token_index.extend(per_image.iter().map(|&t| b * h * w + t));
    }
    let nw = (h / m) * (w / m);
    let tokens = f
        .data
        .gather(&[f.batch * nw, m * m, c], expand_tokens(&token_index, c))?;
    Ok(WindowSet {
        batch: f.batch,
        num_windows: nw,
        window_size: m,
        tokens,
        origin: (h, w),
    })
}

pub fn window_reverse(ws: &WindowSet) -> Result<FeatureMap> {
    let (h, w) = ws.origin;
    let m = ws.window_size;
    let shape = ws.tokens.shape();
    let consistent = m > 0
        && h % m == 0
        && w % m == 0
        && (h / m) * (w / m) == ws.num_windows
        && shape.len() == 3
        && shape[0] == ws.batch * ws.num_windows
        && shape[1] == m * m;
    if !consistent {
        return Err(dim_err!(
            "window reverse: origin {h}x{w} with M={m} is inconsistent with {} windows of tokens {shape:?}",
            ws.num_windows
        ));
    }
    let c = shape[2];
    let per_image = window_order(h, w, m);
    let mut inverse = vec![0usize; h * w];
    for (slot, &t) in per_image.iter().enumerate() {
        inverse[t] = slot;
    }
    let mut token_index = Vec::with_capacity(ws.batch * h * w);
    for b in 0..ws.batch {
        token_index.extend(inverse.iter().map(|&s| b * h * w + s));
    }
    let data = ws
        .tokens
        .gather(&[ws.batch * h * w, c], expand_tokens(&token_index, c))?;
    FeatureMap::new(ws.batch, h, w, c, data)
}

/// Toroidal roll of the grid: output token `(i, j)` takes input token
/// `((i + offset) mod h, (j + offset) mod w)`. `cyclic_shift(·, -o)`
/// inverts `cyclic_shift(·, o)`.
pub fn cyclic_shift(f: &FeatureMap, offset: isize) -> Result<FeatureMap> {
    let (h, w, c) = f.extents();
    if offset.unsigned_abs() >= h.min(w) {
        return Err(dim_err!("shift offset {offset} too large for grid {h}x{w}"));
    }
    if offset == 0 {
        return Ok(f.clone());
    }
    let wrap = |v: usize, n: usize| ((v as isize + offset).rem_euclid(n as isize)) as usize;
    let mut token_index = Vec::with_capacity(f.tokens());
    for b in 0..f.batch {
        for i in 0..h {
            for j in 0..w {
                token_index.push(b * h * w + wrap(i, h) * w + wrap(j, w));
            }
        }
    }
    let data = f.data.gather(f.data.shape(), expand_tokens(&token_index, c))?;
    f.with_data(data)
}

/// Attention mask for windows of a grid rolled by `offset`. Tokens are
/// labeled by the band they fall in along each axis of the rolled grid
/// (`[0, n−M)`, `[n−M, n−offset)`, `[n−offset, n)`); pairs with different
/// labels receive [`NEG_LARGE`].
pub fn build_shift_mask(height: usize, width: usize, m: usize, offset: usize) -> Result<ShiftMask> {
    if m == 0 || !height.is_multiple_of(m) || !width.is_multiple_of(m) {
        return Err(dim_err!(
            "shift mask: grid {height}x{width} is not divisible by window size {m}"
        ));
    }
    if offset >= m {
        return Err(dim_err!("shift mask: offset {offset} must be below window size {m}"));
    }
    let band = |v: usize, n: usize| {
        if offset == 0 || v < n - m {
            0
        } else if v < n - offset {
            1
        } else {
            2
        }
    };
    let mut label = vec![0usize; height * width];
    for i in 0..height {
        for j in 0..width {
            label[i * width + j] = band(i, height) * 3 + band(j, width);
        }
    }
    let order = window_order(height, width, m);
    let n = m * m;
    let nw = (height / m) * (width / m);
    let mut bias = vec![0.0f32; nw * n * n];
    for wi in 0..nw {
        let slots = &order[wi * n..(wi + 1) * n];
        for (a, &ta) in slots.iter().enumerate() {
            for (b, &tb) in slots.iter().enumerate() {
                if label[ta] != label[tb] {
                    bias[(wi * n + a) * n + b] = NEG_LARGE;
                }
            }
        }
    }
    Ok(ShiftMask {
        num_windows: nw,
        window_size: m,
        bias: Tensor::new(&[nw, n, n], bias)?,
    })
}
