use std::rc::Rc;

use super::{Linear, ShiftMask, WindowSet};
use crate::error::{dim_err, Error, Result};
use crate::tensor::{ParamId, ParamStore, Rng, Tensor};

/// Table index of every token pair of an `M×M` window, `M²·M²` entries into
/// a `(2M−1)²` table.
pub fn relative_position_index(m: usize) -> Vec<usize> {
    let n = m * m;
    let span = 2 * m - 1;
    let mut idx = Vec::with_capacity(n * n);
    for a in 0..n {
        let (ya, xa) = (a / m, a % m);
        for b in 0..n {
            let (yb, xb) = (b / m, b % m);
            let dy = ya + m - 1 - yb;
            let dx = xa + m - 1 - xb;
            idx.push(dy * span + dx);
        }
    }
    idx
}

/// Learnable per-head bias indexed by the relative offset of two tokens.
#[derive(Debug, Clone)]
pub struct RelativePositionBias {
    /// `[(2M−1)², heads]`, zero-initialized.
    pub table: ParamId,
    pub heads: usize,
    pub window_size: usize,
    gather_index: Rc<Vec<usize>>,
}

impl RelativePositionBias {
    pub fn new(store: &mut ParamStore, name: &str, m: usize, heads: usize) -> Result<Self> {
        let span = 2 * m - 1;
        let table = store.add(
            format!("{name}.relative_position_bias_table"),
            &[span * span, heads],
            vec![0.0; span * span * heads],
        )?;
        let pair = relative_position_index(m);
        let mut gather_index = Vec::with_capacity(heads * pair.len());
        for h in 0..heads {
            gather_index.extend(pair.iter().map(|&p| p * heads + h));
        }
        Ok(RelativePositionBias {
            table,
            heads,
            window_size: m,
            gather_index: Rc::new(gather_index),
        })
    }

    /// Bias matrix `[heads, M², M²]`.
    pub fn bias(&self, store: &ParamStore) -> Result<Tensor> {
        let n = self.window_size * self.window_size;
        store
            .tensor(self.table)
            .gather(&[self.heads, n, n], self.gather_index.clone())
    }
}

/// Multi-head scaled dot-product attention inside each window.
#[derive(Debug, Clone)]
pub struct WindowAttention {
    pub qkv: Linear,
    pub proj: Linear,
    pub heads: usize,
    pub dim: usize,
    pub position_bias: Option<RelativePositionBias>,
}

impl WindowAttention {
    pub fn new(
        store: &mut ParamStore,
        rng: &mut Rng,
        name: &str,
        dim: usize,
        heads: usize,
        window_size: usize,
        position_bias: bool,
    ) -> Result<Self> {
        if heads == 0 || !dim.is_multiple_of(heads) {
            return Err(Error::Config(format!(
                "{name}: {dim} channels are not divisible by {heads} heads"
            )));
        }
        let position_bias = if position_bias {
            Some(RelativePositionBias::new(store, name, window_size, heads)?)
        } else {
            None
        };
        Ok(WindowAttention {
            qkv: Linear::new(store, rng, &format!("{name}.qkv"), dim, 3 * dim, true)?,
            proj: Linear::new(store, rng, &format!("{name}.proj"), dim, dim, true)?,
            heads,
            dim,
            position_bias,
        })
    }

    pub fn forward(&self, store: &ParamStore, ws: &WindowSet, mask: Option<&ShiftMask>) -> Result<WindowSet> {
        Ok(self.forward_with_weights(store, ws, mask)?.0)
    }

    /// Also returns the post-softmax weights `[batch·windows, heads, M², M²]`.
    pub fn forward_with_weights(
        &self,
        store: &ParamStore,
        ws: &WindowSet,
        mask: Option<&ShiftMask>,
    ) -> Result<(WindowSet, Tensor)> {
        let c = ws.channels();
        if c != self.dim {
            return Err(dim_err!("attention built for {} channels, got {c}", self.dim));
        }
        let heads = self.heads;
        let d = c / heads;
        let n = ws.window_size * ws.window_size;
        let bw = ws.batch * ws.num_windows;

        let qkv = self.qkv.forward(store, &ws.tokens)?;
        let qkv = qkv.reshape(&[bw, n, 3, heads, d])?.permute(&[2, 0, 3, 1, 4])?;
        let part = |i: usize| -> Result<Tensor> { qkv.narrow(0, i, 1)?.reshape(&[bw, heads, n, d]) };
        let q = part(0)?.scale(1.0 / (d as f32).sqrt());
        let k = part(1)?;
        let v = part(2)?;

        let mut logits = q.matmul(&k.permute(&[0, 1, 3, 2])?)?;
        if let Some(pb) = &self.position_bias {
            logits = logits.add(&pb.bias(store)?)?;
        }
        if let Some(mask) = mask {
            if mask.num_windows != ws.num_windows || mask.window_size != ws.window_size {
                return Err(dim_err!(
                    "mask for {} windows of size {} applied to {} windows of size {}",
                    mask.num_windows,
                    mask.window_size,
                    ws.num_windows,
                    ws.window_size
                ));
            }
            let per_head = expand_heads(&mask.bias, heads)?;
            logits = logits
                .reshape(&[ws.batch, ws.num_windows, heads, n, n])?
                .add(&per_head)?
                .reshape(&[bw, heads, n, n])?;
        }
        let weights = logits.softmax(-1)?;
        let out = weights.matmul(&v)?.permute(&[0, 2, 1, 3])?.reshape(&[bw, n, c])?;
        let out = self.proj.forward(store, &out)?;
        Ok((ws.with_tokens(out), weights))
    }
}

/// `[nw, n, n]` → `[nw, heads, n, n]` by repetition (constant).
fn expand_heads(mask: &Tensor, heads: usize) -> Result<Tensor> {
    let s = mask.shape();
    let (nw, nn) = (s[0], s[1] * s[2]);
    let src = mask.data();
    let mut out = Vec::with_capacity(nw * heads * nn);
    for w in 0..nw {
        for _ in 0..heads {
            out.extend_from_slice(&src[w * nn..(w + 1) * nn]);
        }
    }
    Tensor::new(&[nw, heads, s[1], s[2]], out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_covers_table_exactly() {
        let idx = relative_position_index(3);
        assert_eq!(idx.len(), 81);
        let mut seen = [false; 25];
        idx.iter().for_each(|&i| seen[i] = true);
        assert!(seen.iter().all(|s| *s));
        // diagonal is the zero offset cell
        assert!((0..9).all(|a| idx[a * 9 + a] == 12));
    }

    #[test]
    fn heads_must_divide_channels() {
        let mut store = ParamStore::new();
        let mut rng = Rng::new(0);
        let err = WindowAttention::new(&mut store, &mut rng, "a", 10, 3, 2, true).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }
}
