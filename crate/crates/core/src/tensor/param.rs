use std::collections::HashMap;

use super::Tensor;
use crate::error::{dim_err, Error, Result};

/// Index of a parameter inside a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

/// A named trainable tensor with its SGD momentum buffer.
#[derive(Debug, Clone)]
pub struct Parameter {
    pub name: String,
    pub tensor: Tensor,
    pub momentum: Vec<f32>,
}

/// Flat, ordered collection of uniquely named parameters.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    params: Vec<Parameter>,
    by_name: HashMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, shape: &[usize], data: Vec<f32>) -> Result<ParamId> {
        let name = name.into();
        if self.by_name.contains_key(&name) {
            return Err(Error::Contract(format!("duplicate parameter name `{name}`")));
        }
        let tensor = Tensor::leaf(shape, data, true)?;
        let id = self.params.len();
        self.by_name.insert(name.clone(), id);
        self.params.push(Parameter {
            name,
            momentum: vec![0.0; tensor.numel()],
            tensor,
        });
        Ok(ParamId(id))
    }

    pub fn tensor(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].tensor
    }

    pub fn get(&self, name: &str) -> Option<&Parameter> {
        self.by_name.get(name).map(|&i| &self.params[i])
    }

    pub fn id_of(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).map(|&i| ParamId(i))
    }

    pub fn param(&self, id: ParamId) -> &Parameter {
        &self.params[id.0]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter> {
        self.params.iter_mut()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total number of trainable scalars.
    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.tensor.numel()).sum()
    }

    /// Replaces a parameter's values (and optionally its momentum buffer),
    /// dropping any accumulated gradient.
    pub fn set_values(&mut self, name: &str, values: Vec<f32>, momentum: Option<Vec<f32>>) -> Result<()> {
        let i = *self
            .by_name
            .get(name)
            .ok_or_else(|| Error::Checkpoint(format!("unknown parameter name `{name}`")))?;
        let p = &mut self.params[i];
        if values.len() != p.tensor.numel() {
            return Err(dim_err!(
                "parameter `{name}` has {} values, got {}",
                p.tensor.numel(),
                values.len()
            ));
        }
        let shape = p.tensor.shape().to_vec();
        p.tensor = Tensor::leaf(&shape, values, true)?;
        if let Some(m) = momentum {
            if m.len() != p.momentum.len() {
                return Err(dim_err!("momentum for `{name}` has wrong length {}", m.len()));
            }
            p.momentum = m;
        }
        Ok(())
    }

    pub fn zero_grads(&self) {
        self.params.iter().for_each(|p| p.tensor.zero_grad());
    }
}
