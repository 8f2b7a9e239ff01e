use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

/// Handle to a parameter inside a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// A trainable tensor and its gradient accumulator.
#[derive(Debug, Clone)]
pub struct Parameter<T> {
    pub name: String,
    pub value: Tensor<T>,
    pub grad: Vec<T>,
    pub trainable: bool,
    /// Set once a backward pass (or [`ParamStore::set_grad`]) has written
    /// into `grad` since the last [`ParamStore::zero_grads`].
    pub(crate) grad_ready: bool,
}

impl<T: Real> Parameter<T> {
    pub fn grad_ready(&self) -> bool {
        self.grad_ready
    }
}

/// Ordered registry of named parameters. Ordering is the registration order
/// and is stable, which keeps optimizer state and checkpoints aligned.
#[derive(Debug, Clone, Default)]
pub struct ParamStore<T> {
    params: Vec<Parameter<T>>,
}

impl<T: Real> ParamStore<T> {
    pub fn new() -> Self {
        Self { params: Vec::new() }
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor<T>) -> ParamId {
        let grad = vec![T::zero(); value.len()];
        self.params.push(Parameter {
            name: name.into(),
            value,
            grad,
            trainable: true,
            grad_ready: false,
        });
        ParamId(self.params.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Parameter<T> {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter<T> {
        &mut self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor<T> {
        &self.params[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> &[T] {
        &self.params[id.0].grad
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter<T>> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter<T>> {
        self.params.iter_mut()
    }

    pub fn set_trainable(&mut self, id: ParamId, trainable: bool) {
        self.params[id.0].trainable = trainable;
    }

    /// Overwrites a gradient directly, marking it as populated.
    pub fn set_grad(&mut self, id: ParamId, grad: &[T]) -> Result<()> {
        let p = &mut self.params[id.0];
        if grad.len() != p.grad.len() {
            return Err(Error::ShapeMismatch {
                op: "set_grad",
                left: vec![p.grad.len()],
                right: vec![grad.len()],
            });
        }
        p.grad.copy_from_slice(grad);
        p.grad_ready = true;
        Ok(())
    }

    pub(crate) fn accumulate_grad(&mut self, id: ParamId, delta: &[T]) {
        let p = &mut self.params[id.0];
        for (g, &d) in p.grad.iter_mut().zip(delta) {
            *g += d;
        }
        p.grad_ready = true;
    }

    /// Resets every gradient accumulator to exactly zero.
    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.fill(T::zero());
            p.grad_ready = false;
        }
    }

    /// Number of scalars across trainable parameters.
    pub fn num_trainable(&self) -> usize {
        self.params.iter().filter(|p| p.trainable).map(|p| p.value.len()).sum()
    }
}
