//! Tangma and the ReLU / Swish / GELU baselines.
//!
//! `Tangma(x) = x·tanh(x + α) + γx` with two learnable scalars: `α` shifts
//! where the tanh gate switches, `γ` adds a linear path whose slope survives
//! saturation. Both default to zero, where the function is `x·tanh(x)`.

use std::fmt;
use std::str::FromStr;

use crate::autodiff::{Graph, NodeId, Op};
use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

/// Which nonlinearity a model applies at every activation site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ActivationKind {
    Relu,
    Swish,
    Gelu,
    Tangma,
}

impl ActivationKind {
    pub const ALL: [ActivationKind; 4] = [
        ActivationKind::Tangma,
        ActivationKind::Relu,
        ActivationKind::Swish,
        ActivationKind::Gelu,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ActivationKind::Relu => "relu",
            ActivationKind::Swish => "swish",
            ActivationKind::Gelu => "gelu",
            ActivationKind::Tangma => "tangma",
        }
    }

    /// Human-facing label used in summary tables.
    pub fn label(self) -> &'static str {
        match self {
            ActivationKind::Relu => "ReLU",
            ActivationKind::Swish => "Swish",
            ActivationKind::Gelu => "GELU",
            ActivationKind::Tangma => "Tangma",
        }
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ActivationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(ActivationKind::Relu),
            "swish" => Ok(ActivationKind::Swish),
            "gelu" => Ok(ActivationKind::Gelu),
            "tangma" => Ok(ActivationKind::Tangma),
            other => Err(Error::Config(format!(
                "unknown activation {other:?} (expected relu, swish, gelu or tangma)"
            ))),
        }
    }
}

/// Values of Tangma's shift `alpha` and linear coefficient `gamma`.
///
/// Inside a model these live in the parameter store as one-element tensors so
/// the optimizer treats them like any weight; this struct is the plain-value
/// view used for evaluation and logging.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TangmaParams<T> {
    pub alpha: T,
    pub gamma: T,
}

impl<T: Real> TangmaParams<T> {
    pub fn new(alpha: T, gamma: T) -> Self {
        Self { alpha, gamma }
    }
}

/// `(1 − tanh u)(1 + tanh u)`, finite for every `u`.
#[inline]
pub fn sech2_from_tanh<T: Real>(t: T) -> T {
    (T::one() - t) * (T::one() + t)
}

#[inline]
pub fn tangma_scalar<T: Real>(x: T, alpha: T, gamma: T) -> T {
    x * (x + alpha).tanh() + gamma * x
}

#[inline]
pub fn tangma_derivative_scalar<T: Real>(x: T, alpha: T, gamma: T) -> T {
    let t = (x + alpha).tanh();
    t + x * sech2_from_tanh(t) + gamma
}

#[inline]
pub fn relu_scalar<T: Real>(x: T) -> T {
    if x > T::zero() {
        x
    } else {
        T::zero()
    }
}

/// 1 for positive inputs, 0 otherwise (including exactly 0).
#[inline]
pub fn relu_derivative<T: Real>(x: T) -> T {
    if x > T::zero() {
        T::one()
    } else {
        T::zero()
    }
}

/// Logistic function without overflow for large `|x|`.
#[inline]
pub fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

#[inline]
pub fn swish_scalar<T: Real>(x: T) -> T {
    x * sigmoid(x)
}

#[inline]
pub fn swish_derivative<T: Real>(x: T) -> T {
    let s = sigmoid(x);
    s + x * s * (T::one() - s)
}

/// Standard normal CDF through the error function.
#[inline]
pub fn normal_cdf<T: Real>(x: T) -> T {
    let half = T::from_f64_lossy(0.5);
    half * (T::one() + (x * T::from_f64_lossy(std::f64::consts::FRAC_1_SQRT_2)).erf())
}

#[inline]
pub fn normal_pdf<T: Real>(x: T) -> T {
    let inv_sqrt_2pi = T::from_f64_lossy(0.398_942_280_401_432_7);
    inv_sqrt_2pi * (-(x * x) * T::from_f64_lossy(0.5)).exp()
}

#[inline]
pub fn gelu_scalar<T: Real>(x: T) -> T {
    x * normal_cdf(x)
}

#[inline]
pub fn gelu_derivative<T: Real>(x: T) -> T {
    normal_cdf(x) + x * normal_pdf(x)
}

/// Elementwise Tangma over a tensor.
pub fn tangma<T: Real>(x: &Tensor<T>, p: &TangmaParams<T>) -> Tensor<T> {
    x.map(|v| tangma_scalar(v, p.alpha, p.gamma))
}

/// Elementwise `d Tangma / dx`.
pub fn tangma_derivative<T: Real>(x: &Tensor<T>, p: &TangmaParams<T>) -> Tensor<T> {
    x.map(|v| tangma_derivative_scalar(v, p.alpha, p.gamma))
}

/// Evaluates any activation on one value. `params` is used only by Tangma.
pub fn evaluate<T: Real>(kind: ActivationKind, x: T, params: TangmaParams<T>) -> T {
    match kind {
        ActivationKind::Relu => relu_scalar(x),
        ActivationKind::Swish => swish_scalar(x),
        ActivationKind::Gelu => gelu_scalar(x),
        ActivationKind::Tangma => tangma_scalar(x, params.alpha, params.gamma),
    }
}

/// `d/dx` of any activation at one value.
pub fn derivative<T: Real>(kind: ActivationKind, x: T, params: TangmaParams<T>) -> T {
    match kind {
        ActivationKind::Relu => relu_derivative(x),
        ActivationKind::Swish => swish_derivative(x),
        ActivationKind::Gelu => gelu_derivative(x),
        ActivationKind::Tangma => tangma_derivative_scalar(x, params.alpha, params.gamma),
    }
}

/// Gradients of Tangma for upstream gradient `g`: per-element `dx`, and the
/// scalar `dα`, `dγ` summed over all elements (in f64).
pub(crate) fn tangma_backward<T: Real>(x: &[T], shifted_tanh: &[T], gamma: T, g: &[T]) -> (Vec<T>, T, T) {
    let mut dalpha = 0.0f64;
    let mut dgamma = 0.0f64;
    let dx = x
        .iter()
        .zip(shifted_tanh)
        .zip(g)
        .map(|((&x, &t), &d)| {
            let s2 = sech2_from_tanh(t);
            dalpha += (d * x * s2).to_f64_lossy();
            dgamma += (d * x).to_f64_lossy();
            d * (t + x * s2 + gamma)
        })
        .collect();
    (dx, T::from_f64_lossy(dalpha), T::from_f64_lossy(dgamma))
}

impl<T: Real> Graph<T> {
    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let out = self.value(x).map(relu_scalar);
        let rg = self.any_grad(&[x]);
        self.push(out, Op::Relu(x), rg)
    }

    pub fn swish(&mut self, x: NodeId) -> NodeId {
        let out = self.value(x).map(swish_scalar);
        let rg = self.any_grad(&[x]);
        self.push(out, Op::Swish(x), rg)
    }

    pub fn gelu(&mut self, x: NodeId) -> NodeId {
        let out = self.value(x).map(gelu_scalar);
        let rg = self.any_grad(&[x]);
        self.push(out, Op::Gelu(x), rg)
    }

    /// Tangma with `alpha` and `gamma` taken from one-element nodes, so
    /// backward produces gradients for both.
    pub fn tangma(&mut self, x: NodeId, alpha: NodeId, gamma: NodeId) -> Result<NodeId> {
        let a = self.value(alpha).item()?;
        let c = self.value(gamma).item()?;
        let xv = self.value(x);
        let shifted_tanh: Vec<T> = xv.data().iter().map(|&v| (v + a).tanh()).collect();
        let data = xv
            .data()
            .iter()
            .zip(&shifted_tanh)
            .map(|(&v, &t)| v * t + c * v)
            .collect();
        let out = Tensor::new(xv.shape().to_vec(), data)?;
        let rg = self.any_grad(&[x, alpha, gamma]);
        Ok(self.push(
            out,
            Op::Tangma {
                x,
                alpha,
                gamma,
                shifted_tanh,
            },
            rg,
        ))
    }

    /// Applies `kind`; Tangma requires its `(alpha, gamma)` nodes.
    pub fn activation(&mut self, kind: ActivationKind, x: NodeId, tangma: Option<(NodeId, NodeId)>) -> Result<NodeId> {
        match kind {
            ActivationKind::Relu => Ok(self.relu(x)),
            ActivationKind::Swish => Ok(self.swish(x)),
            ActivationKind::Gelu => Ok(self.gelu(x)),
            ActivationKind::Tangma => {
                let (a, c) =
                    tangma.ok_or_else(|| Error::Contract("tangma activation needs alpha and gamma nodes".into()))?;
                self.tangma(x, a, c)
            }
        }
    }
}
