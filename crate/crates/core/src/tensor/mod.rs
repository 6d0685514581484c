//! Minimal dense tensor engine with define-by-run reverse-mode autodiff.
//!
//! A [`Tensor`] is an immutable, reference-counted node of a computation
//! graph. Ops build new nodes; when any input requires a gradient the op
//! also records a backward closure. [`Tensor::backward`] walks the recorded
//! graph in reverse topological order, accumulates gradients additively and
//! tears the graph down as it goes.

mod ops;
mod optim;
mod param;
mod rng;

pub use optim::Sgd;
pub use param::{ParamId, ParamStore, Parameter};
pub use rng::{mix_seed, Rng};

use std::cell::{Cell, RefCell};
use std::collections::HashSet;
use std::fmt;
use std::rc::Rc;

use crate::error::{dim_err, Error, Result};

/// Backward closure: receives the output gradient and a per-parent
/// "needs gradient" mask, returns one optional gradient per parent.
pub(crate) type BackwardFn = Box<dyn FnOnce(&[f32], &[bool]) -> Vec<Option<Vec<f32>>>>;

thread_local! {
    static NEXT_ID: Cell<u64> = const { Cell::new(0) };
    static GRAD_ENABLED: Cell<bool> = const { Cell::new(true) };
    static ANOMALY: RefCell<Option<Option<String>>> = const { RefCell::new(None) };
}

struct Node {
    id: u64,
    op: &'static str,
    shape: Vec<usize>,
    data: Vec<f32>,
    requires_grad: bool,
    grad: RefCell<Option<Vec<f32>>>,
    parents: RefCell<Vec<Tensor>>,
    backward: RefCell<Option<BackwardFn>>,
}

/// N-dimensional row-major `f32` array, optionally tracked for gradients.
#[derive(Clone)]
pub struct Tensor(Rc<Node>);

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("op", &self.0.op)
            .field("shape", &self.0.shape)
            .field("requires_grad", &self.0.requires_grad)
            .finish()
    }
}

fn next_id() -> u64 {
    NEXT_ID.with(|c| {
        let id = c.get();
        c.set(id + 1);
        id
    })
}

pub(crate) fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

/// Runs `f` with gradient recording disabled (inference).
pub fn no_grad<T>(f: impl FnOnce() -> T) -> T {
    let prev = GRAD_ENABLED.with(|c| c.replace(false));
    let out = f();
    GRAD_ENABLED.with(|c| c.set(prev));
    out
}

pub fn grad_enabled() -> bool {
    GRAD_ENABLED.with(|c| c.get())
}

/// Runs `f` with every op checking its output for NaN/Inf. Returns the
/// result of `f` and the name of the first op that produced a non-finite
/// value, if any.
pub fn detect_anomaly<T>(f: impl FnOnce() -> T) -> (T, Option<String>) {
    let prev = ANOMALY.with(|a| a.replace(Some(None)));
    let out = f();
    let found = ANOMALY.with(|a| a.replace(prev)).flatten();
    (out, found)
}

impl Tensor {
    fn make(
        op: &'static str,
        shape: Vec<usize>,
        data: Vec<f32>,
        requires_grad: bool,
        parents: Vec<Tensor>,
        backward: Option<BackwardFn>,
    ) -> Tensor {
        debug_assert_eq!(numel(&shape), data.len(), "op {op}");
        ANOMALY.with(|a| {
            if let Some(slot) = a.borrow_mut().as_mut() {
                if slot.is_none() && data.iter().any(|v| !v.is_finite()) {
                    *slot = Some(op.to_string());
                }
            }
        });
        Tensor(Rc::new(Node {
            id: next_id(),
            op,
            shape,
            data,
            requires_grad,
            grad: RefCell::new(None),
            parents: RefCell::new(parents),
            backward: RefCell::new(backward),
        }))
    }

    /// Builds an op output. The backward closure is only kept when some
    /// parent requires a gradient and recording is enabled.
    pub(crate) fn from_op(
        op: &'static str,
        shape: Vec<usize>,
        data: Vec<f32>,
        parents: &[&Tensor],
        backward: impl FnOnce(&[f32], &[bool]) -> Vec<Option<Vec<f32>>> + 'static,
    ) -> Tensor {
        let rg = grad_enabled() && parents.iter().any(|p| p.requires_grad());
        if rg {
            let parents = parents.iter().map(|p| (*p).clone()).collect();
            Tensor::make(op, shape, data, true, parents, Some(Box::new(backward)))
        } else {
            Tensor::make(op, shape, data, false, Vec::new(), None)
        }
    }

    /// Constant tensor (no gradient).
    pub fn new(shape: &[usize], data: Vec<f32>) -> Result<Tensor> {
        Tensor::leaf(shape, data, false)
    }

    /// Leaf tensor, optionally tracked for gradients.
    pub fn leaf(shape: &[usize], data: Vec<f32>, requires_grad: bool) -> Result<Tensor> {
        if shape.contains(&0) {
            return Err(dim_err!("shape {shape:?} has a zero extent"));
        }
        if numel(shape) != data.len() {
            return Err(dim_err!(
                "shape {shape:?} holds {} values, got {}",
                numel(shape),
                data.len()
            ));
        }
        Ok(Tensor::make(
            "leaf",
            shape.to_vec(),
            data,
            requires_grad,
            Vec::new(),
            None,
        ))
    }

    pub fn zeros(shape: &[usize]) -> Tensor {
        Tensor::make("leaf", shape.to_vec(), vec![0.0; numel(shape)], false, Vec::new(), None)
    }

    pub fn full(shape: &[usize], value: f32) -> Tensor {
        Tensor::make(
            "leaf",
            shape.to_vec(),
            vec![value; numel(shape)],
            false,
            Vec::new(),
            None,
        )
    }

    pub fn scalar(value: f32) -> Tensor {
        Tensor::make("leaf", vec![1], vec![value], false, Vec::new(), None)
    }

    pub fn shape(&self) -> &[usize] {
        &self.0.shape
    }

    pub fn ndim(&self) -> usize {
        self.0.shape.len()
    }

    pub fn numel(&self) -> usize {
        self.0.data.len()
    }

    pub fn data(&self) -> &[f32] {
        &self.0.data
    }

    pub fn to_vec(&self) -> Vec<f32> {
        self.0.data.clone()
    }

    pub fn op_name(&self) -> &'static str {
        self.0.op
    }

    pub fn requires_grad(&self) -> bool {
        self.0.requires_grad
    }

    /// Value of a single-element tensor.
    pub fn item(&self) -> Result<f32> {
        if self.numel() != 1 {
            return Err(Error::Contract(format!("item() on tensor of shape {:?}", self.shape())));
        }
        Ok(self.0.data[0])
    }

    /// Accumulated gradient. Present (zeros until written) iff the tensor
    /// requires a gradient.
    pub fn grad(&self) -> Option<Vec<f32>> {
        if !self.requires_grad() {
            return None;
        }
        Some(self.0.grad.borrow().clone().unwrap_or_else(|| vec![0.0; self.numel()]))
    }

    /// True once a backward pass has written into this tensor's gradient.
    pub fn has_grad(&self) -> bool {
        self.0.grad.borrow().is_some()
    }

    pub fn zero_grad(&self) {
        *self.0.grad.borrow_mut() = None;
    }

    /// Copy of the values without graph history.
    pub fn detach(&self) -> Tensor {
        Tensor::make(
            "leaf",
            self.0.shape.clone(),
            self.0.data.clone(),
            false,
            Vec::new(),
            None,
        )
    }

    pub fn same(&self, other: &Tensor) -> bool {
        Rc::ptr_eq(&self.0, &other.0)
    }

    fn accumulate(&self, g: Vec<f32>) {
        let mut slot = self.0.grad.borrow_mut();
        match slot.as_mut() {
            Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
            None => *slot = Some(g),
        }
    }

    /// Reverse-mode sweep from a scalar loss.
    pub fn backward(&self) -> Result<()> {
        if self.numel() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape()
            )));
        }
        if !self.requires_grad() {
            return Err(Error::Contract(
                "backward on a tensor that does not require grad".into(),
            ));
        }
        let order = self.topo_order();
        self.accumulate(vec![1.0]);
        for node in order.iter().rev() {
            let Some(bw) = node.0.backward.borrow_mut().take() else {
                continue;
            };
            let parents = std::mem::take(&mut *node.0.parents.borrow_mut());
            let needs: Vec<bool> = parents.iter().map(|p| p.requires_grad()).collect();
            let g = if Rc::strong_count(&node.0) > 1 || node.same(self) {
                node.0.grad.borrow().clone()
            } else {
                node.0.grad.borrow_mut().take()
            };
            let Some(g) = g else { continue };
            let grads = bw(&g, &needs);
            debug_assert_eq!(grads.len(), parents.len(), "op {}", node.0.op);
            for (p, pg) in parents.iter().zip(grads) {
                if let Some(pg) = pg {
                    if p.requires_grad() {
                        debug_assert_eq!(pg.len(), p.numel(), "grad of {}", node.0.op);
                        p.accumulate(pg);
                    }
                }
            }
        }
        Ok(())
    }

    fn topo_order(&self) -> Vec<Tensor> {
        let mut order = Vec::new();
        let mut seen = HashSet::new();
        let mut stack: Vec<(Tensor, bool)> = vec![(self.clone(), false)];
        while let Some((t, expanded)) = stack.pop() {
            if expanded {
                order.push(t);
                continue;
            }
            if !seen.insert(t.0.id) {
                continue;
            }
            stack.push((t.clone(), true));
            for p in t.0.parents.borrow().iter() {
                if p.requires_grad() && !seen.contains(&p.0.id) {
                    stack.push((p.clone(), false));
                }
            }
        }
        order
    }
}
