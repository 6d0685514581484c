use crate::error::Result;
use crate::tensor::{ParamId, ParamStore, Rng, Tensor};

pub const LN_EPS: f32 = 1e-5;
pub const INIT_STD: f32 = 0.02;

/// Dense layer over the last axis; weights stored `[d_in, d_out]`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    pub d_in: usize,
    pub d_out: usize,
}

impl Linear {
    /// Truncated-normal weights, zero bias.
    pub fn new(
        store: &mut ParamStore,
        rng: &mut Rng,
        name: &str,
        d_in: usize,
        d_out: usize,
        bias: bool,
    ) -> Result<Self> {
        let w: Vec<f32> = (0..d_in * d_out).map(|_| rng.trunc_normal(INIT_STD)).collect();
        let weight = store.add(format!("{name}.weight"), &[d_in, d_out], w)?;
        let bias = if bias {
            Some(store.add(format!("{name}.bias"), &[d_out], vec![0.0; d_out])?)
        } else {
            None
        };
        Ok(Linear {
            weight,
            bias,
            d_in,
            d_out,
        })
    }

    pub fn forward(&self, store: &ParamStore, x: &Tensor) -> Result<Tensor> {
        x.linear(store.tensor(self.weight), self.bias.map(|b| store.tensor(b)))
    }
}

#[derive(Debug, Clone)]
pub struct LayerNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub dim: usize,
}

impl LayerNorm {
    pub fn new(store: &mut ParamStore, name: &str, dim: usize) -> Result<Self> {
        Ok(LayerNorm {
            gamma: store.add(format!("{name}.weight"), &[dim], vec![1.0; dim])?,
            beta: store.add(format!("{name}.bias"), &[dim], vec![0.0; dim])?,
            dim,
        })
    }

    pub fn forward(&self, store: &ParamStore, x: &Tensor) -> Result<Tensor> {
        x.layer_norm(store.tensor(self.gamma), store.tensor(self.beta), LN_EPS)
    }
}
