use super::{ParamStore, Tensor};
use crate::error::{Error, Result};

/// Classical SGD with momentum; weight decay is folded into the gradient
/// before it enters the momentum buffer:
///
/// ```text
/// v ← μ·v + (g + λ·θ)
/// θ ← θ − lr·v
/// ```
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sgd {
    pub lr: f32,
    pub momentum: f32,
    pub weight_decay: f32,
}

impl Sgd {
    pub fn new(lr: f32) -> Self {
        Sgd {
            lr,
            momentum: 0.9,
            weight_decay: 1e-4,
        }
    }

    /// Applies one update to every parameter and clears the gradients.
    /// Every parameter must have received a gradient.
    pub fn step(&self, params: &mut ParamStore) -> Result<()> {
        if let Some(p) = params.iter().find(|p| !p.tensor.has_grad()) {
            return Err(Error::Contract(format!("parameter `{}` has no gradient", p.name)));
        }
        for p in params.iter_mut() {
            let g = p.tensor.grad().expect("parameters require grad");
            let theta = p.tensor.data();
            let mut next = Vec::with_capacity(theta.len());
            for ((v, &gv), &t) in p.momentum.iter_mut().zip(&g).zip(theta) {
                *v = self.momentum * *v + (gv + self.weight_decay * t);
                next.push(t - self.lr * *v);
            }
            let shape = p.tensor.shape().to_vec();
            p.tensor = Tensor::leaf(&shape, next, true)?;
        }
        Ok(())
    }
}
