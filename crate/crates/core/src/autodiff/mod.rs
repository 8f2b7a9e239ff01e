//! Define-by-run reverse-mode automatic differentiation.
//!
//! A [`Graph`] is built fresh for every batch. Each op appends a node holding
//! its forward value plus whatever it saved for the backward rule, so node
//! indices are already a topological order: [`Graph::backward`] walks them in
//! reverse, visiting each reachable node exactly once.
//!
//! Parameters live outside the graph in a [`ParamStore`]. [`Graph::param`]
//! snapshots a parameter into a leaf node and backward adds the gradient of
//! that leaf into the store's accumulator, so calling backward twice without
//! [`ParamStore::zero_grads`] doubles the accumulated gradients.
//!
//! ```
//! use tangma::autodiff::{Graph, ParamStore};
//! use tangma::Tensor;
//!
//! let mut store = ParamStore::<f64>::new();
//! let w = store.add("w", Tensor::from_f64([1], &[3.0]).unwrap());
//! let mut g = Graph::new();
//! let x = g.param(&store, w);
//! let sq = g.mul(x, x).unwrap();
//! let loss = g.sum(sq);
//! g.backward(loss, &mut store).unwrap();
//! assert_eq!(store.grad(w), &[6.0]);
//! ```

mod gradcheck;
mod params;

pub use gradcheck::{central_difference, grad_check};
pub use params::{ParamId, ParamStore, Parameter};

use crate::error::{Error, Result};
use crate::layers::ConvGeometry;
use crate::tensor::{gemm, Layout, Real, Tensor};

/// Index of a node in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(pub(crate) usize);

pub(crate) enum Op<T> {
    Input,
    Param(ParamId),
    MatMul(NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    AddScalar(NodeId),
    MulScalar(NodeId, T),
    Tanh(NodeId),
    Exp(NodeId),
    Log(NodeId),
    MaxScalar(NodeId, T),
    Sum(NodeId),
    Mean(NodeId),
    Reshape(NodeId),
    AddBias {
        x: NodeId,
        bias: NodeId,
    },
    Linear {
        x: NodeId,
        weight: NodeId,
        bias: NodeId,
    },
    Conv2d {
        x: NodeId,
        weight: NodeId,
        bias: NodeId,
        geom: ConvGeometry,
    },
    MaxPool2d {
        x: NodeId,
        argmax: Vec<usize>,
    },
    Dropout {
        x: NodeId,
        mask: Vec<T>,
    },
    Relu(NodeId),
    Swish(NodeId),
    Gelu(NodeId),
    Tangma {
        x: NodeId,
        alpha: NodeId,
        gamma: NodeId,
        shifted_tanh: Vec<T>,
    },
    CrossEntropy {
        logits: NodeId,
        labels: Vec<usize>,
        probs: Vec<T>,
    },
}

pub(crate) struct Node<T> {
    pub(crate) value: Tensor<T>,
    pub(crate) op: Op<T>,
    pub(crate) requires_grad: bool,
    leaf_grad: Option<Vec<T>>,
}

/// A computation tape for one forward/backward cycle.
pub struct Graph<T> {
    pub(crate) nodes: Vec<Node<T>>,
}

impl<T: Real> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Graph<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// A constant leaf; no gradient flows into it.
    pub fn input(&mut self, value: Tensor<T>) -> NodeId {
        self.push(value, Op::Input, false)
    }

    /// A leaf whose gradient is accumulated and readable via [`Graph::grad`].
    pub fn variable(&mut self, value: Tensor<T>) -> NodeId {
        self.push(value, Op::Input, true)
    }

    /// Snapshot of a stored parameter. Frozen parameters behave as constants.
    pub fn param(&mut self, store: &ParamStore<T>, id: ParamId) -> NodeId {
        let p = store.get(id);
        self.push(p.value.clone(), Op::Param(id), p.trainable)
    }

    pub fn value(&self, id: NodeId) -> &Tensor<T> {
        &self.nodes[id.0].value
    }

    pub fn requires_grad(&self, id: NodeId) -> bool {
        self.nodes[id.0].requires_grad
    }

    /// Accumulated gradient of a [`Graph::variable`] leaf.
    pub fn grad(&self, id: NodeId) -> Option<Tensor<T>> {
        let node = &self.nodes[id.0];
        node.leaf_grad
            .as_ref()
            .map(|g| Tensor::new(node.value.shape().to_vec(), g.clone()).expect("grad matches value"))
    }

    /// Which branch every piecewise op took: max-pool winners and ReLU input
    /// signs. Two forward passes with equal patterns lie on the same smooth
    /// piece of the function.
    pub fn branch_pattern(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for node in &self.nodes {
            match &node.op {
                Op::MaxPool2d { argmax, .. } => out.extend_from_slice(argmax),
                Op::Relu(x) => out.extend(self.value(*x).data().iter().map(|&v| (v > T::zero()) as usize)),
                _ => {}
            }
        }
        out
    }

    pub(crate) fn push(&mut self, value: Tensor<T>, op: Op<T>, requires_grad: bool) -> NodeId {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
            leaf_grad: None,
        });
        NodeId(self.nodes.len() - 1)
    }

    pub(crate) fn any_grad(&self, ids: &[NodeId]) -> bool {
        ids.iter().any(|&id| self.nodes[id.0].requires_grad)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let out = self.value(a).matmul(self.value(b))?;
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(out, Op::MatMul(a, b), rg))
    }

    fn binary(&mut self, a: NodeId, b: NodeId, op: &'static str, f: impl Fn(T, T) -> T) -> Result<Tensor<T>> {
        self.value(a).zip_map(self.value(b), op, f)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let out = self.binary(a, b, "add", |x, y| x + y)?;
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(out, Op::Add(a, b), rg))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let out = self.binary(a, b, "sub", |x, y| x - y)?;
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(out, Op::Sub(a, b), rg))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let out = self.binary(a, b, "mul", |x, y| x * y)?;
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(out, Op::Mul(a, b), rg))
    }

    pub fn add_scalar(&mut self, a: NodeId, s: T) -> NodeId {
        let out = self.value(a).map(|x| x + s);
        let rg = self.any_grad(&[a]);
        self.push(out, Op::AddScalar(a), rg)
    }

    pub fn mul_scalar(&mut self, a: NodeId, s: T) -> NodeId {
        let out = self.value(a).map(|x| x * s);
        let rg = self.any_grad(&[a]);
        self.push(out, Op::MulScalar(a, s), rg)
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let out = self.value(a).map(T::tanh);
        let rg = self.any_grad(&[a]);
        self.push(out, Op::Tanh(a), rg)
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        let out = self.value(a).map(T::exp);
        let rg = self.any_grad(&[a]);
        self.push(out, Op::Exp(a), rg)
    }

    pub fn log(&mut self, a: NodeId) -> Result<NodeId> {
        if let Some(bad) = self.value(a).data().iter().find(|&&v| v <= T::zero()) {
            return Err(Error::Domain {
                op: "log",
                detail: format!("non-positive input {bad}"),
            });
        }
        let out = self.value(a).map(T::ln);
        let rg = self.any_grad(&[a]);
        Ok(self.push(out, Op::Log(a), rg))
    }

    /// Elementwise `max(x, s)`; the gradient passes only where `x > s`.
    pub fn max_scalar(&mut self, a: NodeId, s: T) -> NodeId {
        let out = self.value(a).map(|x| if x > s { x } else { s });
        let rg = self.any_grad(&[a]);
        self.push(out, Op::MaxScalar(a, s), rg)
    }

    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let out = Tensor::scalar(self.value(a).sum());
        let rg = self.any_grad(&[a]);
        self.push(out, Op::Sum(a), rg)
    }

    pub fn mean(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a);
        let n = T::from_usize(v.len().max(1)).unwrap();
        let out = Tensor::scalar(v.sum() / n);
        let rg = self.any_grad(&[a]);
        self.push(out, Op::Mean(a), rg)
    }

    pub fn reshape(&mut self, a: NodeId, shape: impl Into<Vec<usize>>) -> Result<NodeId> {
        let out = self.value(a).clone().reshape(shape)?;
        let rg = self.any_grad(&[a]);
        Ok(self.push(out, Op::Reshape(a), rg))
    }

    /// Adds `bias[c]` to every element whose axis-1 index is `c`. Works for
    /// rows of a `B×m` matrix and channels of a `B×C×H×W` image batch.
    pub fn add_bias(&mut self, x: NodeId, bias: NodeId) -> Result<NodeId> {
        let xs = self.value(x).shape().to_vec();
        let b = self.value(bias);
        if xs.len() < 2 || b.ndim() != 1 || b.len() != xs[1] {
            return Err(Error::ShapeMismatch {
                op: "add_bias",
                left: xs,
                right: b.shape().to_vec(),
            });
        }
        let inner: usize = xs[2..].iter().product();
        let channels = xs[1];
        let bv = b.data().to_vec();
        let mut out = self.value(x).clone();
        for (i, v) in out.data_mut().iter_mut().enumerate() {
            *v += bv[(i / inner) % channels];
        }
        let rg = self.any_grad(&[x, bias]);
        Ok(self.push(out, Op::AddBias { x, bias }, rg))
    }

    /// Runs reverse-mode differentiation from a scalar root, adding
    /// gradients into parameter accumulators and variable leaves.
    pub fn backward(&mut self, root: NodeId, store: &mut ParamStore<T>) -> Result<()> {
        self.backward_impl(root, Some(store))
    }

    /// Like [`Graph::backward`] for graphs without parameter leaves.
    pub fn backward_leaves(&mut self, root: NodeId) -> Result<()> {
        self.backward_impl(root, None)
    }

    fn backward_impl(&mut self, root: NodeId, mut store: Option<&mut ParamStore<T>>) -> Result<()> {
        let root_len = self.value(root).len();
        if root_len != 1 {
            return Err(Error::Contract(format!(
                "backward requires a scalar root, got shape {:?}",
                self.value(root).shape()
            )));
        }
        let mut grads: Vec<Option<Vec<T>>> = (0..=root.0).map(|_| None).collect();
        grads[root.0] = Some(vec![T::one()]);

        for i in (0..=root.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            if !self.nodes[i].requires_grad {
                continue;
            }
            if matches!(self.nodes[i].op, Op::Input) {
                let leaf = self.nodes[i].leaf_grad.get_or_insert_with(|| vec![T::zero(); g.len()]);
                add_into(leaf, &g);
                continue;
            }
            if let Op::Param(pid) = self.nodes[i].op {
                match store.as_deref_mut() {
                    Some(s) => s.accumulate_grad(pid, &g),
                    None => {
                        return Err(Error::Contract(
                            "graph has parameter leaves; call backward with a ParamStore".into(),
                        ))
                    }
                }
                continue;
            }
            for (id, delta) in self.input_grads(&self.nodes[i].op, i, g) {
                if self.nodes[id.0].requires_grad {
                    accumulate(&mut grads, id, delta);
                }
            }
        }
        Ok(())
    }

    /// Gradients with respect to each differentiable input of node `i`.
    fn input_grads(&self, op: &Op<T>, i: usize, g: Vec<T>) -> Vec<(NodeId, Vec<T>)> {
        let out = &self.nodes[i].value;
        let val = |id: NodeId| &self.nodes[id.0].value;
        let rg = |id: NodeId| self.nodes[id.0].requires_grad;
        let mut res = Vec::with_capacity(3);
        match op {
            Op::Input | Op::Param(_) => unreachable!("leaves handled by caller"),
            Op::MatMul(a, b) => {
                let (m, k) = val(*a).as_matrix("matmul").unwrap();
                let n = val(*b).shape()[1];
                if rg(*a) {
                    let mut da = vec![T::zero(); m * k];
                    gemm(
                        m,
                        n,
                        k,
                        &g,
                        Layout::Normal,
                        val(*b).data(),
                        Layout::Transposed,
                        T::zero(),
                        &mut da,
                    );
                    res.push((*a, da));
                }
                if rg(*b) {
                    let mut db = vec![T::zero(); k * n];
                    gemm(
                        k,
                        m,
                        n,
                        val(*a).data(),
                        Layout::Transposed,
                        &g,
                        Layout::Normal,
                        T::zero(),
                        &mut db,
                    );
                    res.push((*b, db));
                }
            }
            Op::Add(a, b) => {
                res.push((*a, g.clone()));
                res.push((*b, g));
            }
            Op::Sub(a, b) => {
                res.push((*b, g.iter().map(|&v| -v).collect()));
                res.push((*a, g));
            }
            Op::Mul(a, b) => {
                let (va, vb) = (val(*a).data(), val(*b).data());
                if rg(*a) {
                    res.push((*a, g.iter().zip(vb).map(|(&d, &y)| d * y).collect()));
                }
                if rg(*b) {
                    res.push((*b, g.iter().zip(va).map(|(&d, &x)| d * x).collect()));
                }
            }
            Op::AddScalar(a) | Op::Reshape(a) => res.push((*a, g)),
            Op::MulScalar(a, s) => res.push((*a, g.iter().map(|&d| d * *s).collect())),
            Op::Tanh(a) => {
                let d = g
                    .iter()
                    .zip(out.data())
                    .map(|(&d, &y)| d * (T::one() - y) * (T::one() + y))
                    .collect();
                res.push((*a, d));
            }
            Op::Exp(a) => res.push((*a, g.iter().zip(out.data()).map(|(&d, &y)| d * y).collect())),
            Op::Log(a) => res.push((*a, g.iter().zip(val(*a).data()).map(|(&d, &x)| d / x).collect())),
            Op::MaxScalar(a, s) => {
                let d = g
                    .iter()
                    .zip(val(*a).data())
                    .map(|(&d, &x)| if x > *s { d } else { T::zero() })
                    .collect();
                res.push((*a, d));
            }
            Op::Sum(a) => res.push((*a, vec![g[0]; val(*a).len()])),
            Op::Mean(a) => {
                let n = val(*a).len();
                let scale = g[0] / T::from_usize(n.max(1)).unwrap();
                res.push((*a, vec![scale; n]));
            }
            Op::AddBias { x, bias } => {
                if rg(*bias) {
                    let xs = val(*x).shape();
                    let inner: usize = xs[2..].iter().product();
                    let channels = xs[1];
                    let mut db = vec![T::zero(); channels];
                    for (j, &d) in g.iter().enumerate() {
                        db[(j / inner) % channels] += d;
                    }
                    res.push((*bias, db));
                }
                res.push((*x, g));
            }
            Op::Linear { x, weight, bias } => {
                crate::layers::linear_backward(val(*x), val(*weight), &g, [rg(*x), rg(*weight), rg(*bias)])
                    .into_iter()
                    .zip([*x, *weight, *bias])
                    .for_each(|(d, id)| {
                        if let Some(d) = d {
                            res.push((id, d));
                        }
                    });
            }
            Op::Conv2d { x, weight, bias, geom } => {
                crate::layers::conv2d_backward(
                    geom,
                    val(*x).data(),
                    val(*weight),
                    &g,
                    [rg(*x), rg(*weight), rg(*bias)],
                )
                .into_iter()
                .zip([*x, *weight, *bias])
                .for_each(|(d, id)| {
                    if let Some(d) = d {
                        res.push((id, d));
                    }
                });
            }
            Op::MaxPool2d { x, argmax } => {
                let mut dx = vec![T::zero(); val(*x).len()];
                for (&src, &d) in argmax.iter().zip(&g) {
                    dx[src] += d;
                }
                res.push((*x, dx));
            }
            Op::Dropout { x, mask } => res.push((*x, g.iter().zip(mask).map(|(&d, &m)| d * m).collect())),
            Op::Relu(a) => {
                let d = g
                    .iter()
                    .zip(val(*a).data())
                    .map(|(&d, &x)| d * crate::activations::relu_derivative(x))
                    .collect();
                res.push((*a, d));
            }
            Op::Swish(a) => {
                let d = g
                    .iter()
                    .zip(val(*a).data())
                    .map(|(&d, &x)| d * crate::activations::swish_derivative(x))
                    .collect();
                res.push((*a, d));
            }
            Op::Gelu(a) => {
                let d = g
                    .iter()
                    .zip(val(*a).data())
                    .map(|(&d, &x)| d * crate::activations::gelu_derivative(x))
                    .collect();
                res.push((*a, d));
            }
            Op::Tangma {
                x,
                alpha,
                gamma,
                shifted_tanh,
            } => {
                let gamma_v = val(*gamma).data()[0];
                let (dx, dalpha, dgamma) =
                    crate::activations::tangma_backward(val(*x).data(), shifted_tanh, gamma_v, &g);
                if rg(*x) {
                    res.push((*x, dx));
                }
                res.push((*alpha, vec![dalpha]));
                res.push((*gamma, vec![dgamma]));
            }
            Op::CrossEntropy { logits, labels, probs } => {
                res.push((*logits, crate::loss::cross_entropy_backward(probs, labels, g[0])));
            }
        }
        res
    }
}

fn add_into<T: Real>(acc: &mut [T], delta: &[T]) {
    for (a, &d) in acc.iter_mut().zip(delta) {
        *a += d;
    }
}

fn accumulate<T: Real>(grads: &mut [Option<Vec<T>>], id: NodeId, delta: Vec<T>) {
    match &mut grads[id.0] {
        Some(acc) => add_into(acc, &delta),
        slot @ None => *slot = Some(delta),
    }
}
