//! A small CNN training library built around the Tangma activation,
//! `x·tanh(x + α) + γx` with learnable `α` and `γ`.
//!
//! The crate contains a define-by-run reverse-mode autodiff engine over dense
//! tensors, the layers needed for two compact image classifiers, Adam, MNIST
//! and CIFAR-10 loaders, and a training harness that records per-epoch
//! metrics and the trajectory of the activation parameters.

pub mod activations;
pub mod autodiff;
pub mod data;
pub mod error;
pub mod gradsuite;
pub mod harness;
pub mod layers;
pub mod loss;
pub mod model;
pub mod optim;
pub mod tensor;

pub use activations::{ActivationKind, TangmaParams};
pub use autodiff::{Graph, NodeId, ParamId, ParamStore};
pub use error::{Error, Result};
pub use model::{Architecture, Model, ModelSpec};
pub use tensor::{Real, Tensor};
