//! The MNIST and CIFAR-10 classifiers with a pluggable activation.
//!
//! Both networks are described by a flat layer table ([`ModelSpec::layers`])
//! that drives parameter construction, shape tracing and the forward pass.
//!
//! # Checkpoint format
//!
//! All integers are little-endian.
//!
//! ```text
//! magic       8 bytes  "TGMACKPT"
//! version     u32      1
//! arch        u32 length + UTF-8 ("mnist" | "cifar10")
//! activation  u32 length + UTF-8 ("relu" | "swish" | "gelu" | "tangma")
//! per_site    u8       0 = one shared (alpha, gamma), 1 = one pair per site
//! count       u32      number of parameter records
//! record      u32 name length + UTF-8 name,
//!             u32 rank, rank × u32 dims,
//!             prod(dims) × f32 values
//! ```

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::activations::{ActivationKind, TangmaParams};
use crate::autodiff::{Graph, NodeId, ParamId, ParamStore};
use crate::error::{Error, Result};
use crate::layers::{ConvSpec, DropoutSpec, Mode};
use crate::tensor::{Real, Tensor};

const CHECKPOINT_MAGIC: &[u8; 8] = b"TGMACKPT";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Architecture {
    Mnist,
    Cifar10,
}

impl Architecture {
    pub fn name(self) -> &'static str {
        match self {
            Architecture::Mnist => "mnist",
            Architecture::Cifar10 => "cifar10",
        }
    }

    /// `[C, H, W]` of one input image.
    pub fn input_shape(self) -> [usize; 3] {
        match self {
            Architecture::Mnist => [1, 28, 28],
            Architecture::Cifar10 => [3, 32, 32],
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mnist" => Ok(Architecture::Mnist),
            "cifar10" | "cifar" => Ok(Architecture::Cifar10),
            other => Err(Error::Config(format!(
                "unknown architecture {other:?} (expected mnist or cifar10)"
            ))),
        }
    }
}

/// One row of the layer table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LayerSpec {
    Conv(ConvSpec),
    Activation,
    MaxPool,
    Dropout(f64),
    Flatten,
    Linear { inputs: usize, outputs: usize },
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerSpec::Conv(c) => write!(
                f,
                "conv({}→{}, k{}, s{}, p{})",
                c.in_channels, c.out_channels, c.kernel, c.stride, c.padding
            ),
            LayerSpec::Activation => f.write_str("act"),
            LayerSpec::MaxPool => f.write_str("maxpool2"),
            LayerSpec::Dropout(p) => write!(f, "dropout({p})"),
            LayerSpec::Flatten => f.write_str("flatten"),
            LayerSpec::Linear { inputs, outputs } => write!(f, "linear({inputs}→{outputs})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpec {
    pub architecture: Architecture,
    pub activation: ActivationKind,
    /// Dropout after the MNIST convolution stack.
    pub conv_dropout: f64,
    /// Dropout before the final linear layer.
    pub fc_dropout: f64,
    pub init_seed: u64,
    /// Give every activation site its own `(alpha, gamma)` instead of one
    /// pair shared across the network.
    pub per_site_tangma: bool,
}

impl ModelSpec {
    pub fn new(architecture: Architecture, activation: ActivationKind) -> Self {
        Self {
            architecture,
            activation,
            conv_dropout: 0.25,
            fc_dropout: 0.5,
            init_seed: 0,
            per_site_tangma: false,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.init_seed = seed;
        self
    }

    pub fn layers(&self) -> Vec<LayerSpec> {
        use LayerSpec::*;
        match self.architecture {
            Architecture::Mnist => vec![
                Conv(ConvSpec::new(1, 32, 3, 1, 0)),
                Activation,
                Conv(ConvSpec::new(32, 64, 3, 1, 0)),
                Activation,
                MaxPool,
                Dropout(self.conv_dropout),
                Flatten,
                Linear {
                    inputs: 9216,
                    outputs: 128,
                },
                Activation,
                Dropout(self.fc_dropout),
                Linear {
                    inputs: 128,
                    outputs: 10,
                },
            ],
            Architecture::Cifar10 => vec![
                Conv(ConvSpec::new(3, 32, 3, 1, 1)),
                Activation,
                MaxPool,
                Conv(ConvSpec::new(32, 64, 3, 1, 1)),
                Activation,
                MaxPool,
                Conv(ConvSpec::new(64, 128, 3, 1, 1)),
                Activation,
                MaxPool,
                Flatten,
                Linear {
                    inputs: 2048,
                    outputs: 512,
                },
                Activation,
                Dropout(self.fc_dropout),
                Linear {
                    inputs: 512,
                    outputs: 10,
                },
            ],
        }
    }

    /// Per-sample output shape after every layer, computed from the table
    /// alone.
    pub fn shape_chain(&self) -> Result<Vec<Vec<usize>>> {
        let mut shape = self.architecture.input_shape().to_vec();
        let mut chain = Vec::new();
        for layer in self.layers() {
            shape = match (layer, shape.as_slice()) {
                (LayerSpec::Conv(c), &[ch, h, w]) if ch == c.in_channels => {
                    vec![c.out_channels, c.output_size(h)?, c.output_size(w)?]
                }
                (LayerSpec::MaxPool, &[ch, h, w]) => vec![ch, h / 2, w / 2],
                (LayerSpec::Flatten, s) => vec![s.iter().product()],
                (LayerSpec::Linear { inputs, outputs }, &[n]) if n == inputs => vec![outputs],
                (LayerSpec::Activation | LayerSpec::Dropout(_), s) => s.to_vec(),
                (layer, s) => {
                    return Err(Error::Shape {
                        op: "model",
                        detail: format!("layer {layer} cannot take input {s:?}"),
                    })
                }
            };
            chain.push(shape.clone());
        }
        Ok(chain)
    }

    fn activation_sites(&self) -> usize {
        self.layers()
            .iter()
            .filter(|l| matches!(l, LayerSpec::Activation))
            .count()
    }
}

#[derive(Debug, Clone)]
enum Layer {
    Conv {
        spec: ConvSpec,
        weight: ParamId,
        bias: ParamId,
    },
    Activation {
        site: usize,
    },
    MaxPool,
    Dropout(f64),
    Flatten,
    Linear {
        weight: ParamId,
        bias: ParamId,
    },
}

/// A built network: its spec, its parameters and the resolved layer list.
#[derive(Debug, Clone)]
pub struct Model<T> {
    spec: ModelSpec,
    params: ParamStore<T>,
    layers: Vec<Layer>,
    tangma: Vec<(ParamId, ParamId)>,
}

fn uniform_init<T: Real>(rng: &mut ChaCha8Rng, shape: &[usize], fan_in: usize) -> Tensor<T> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| T::from_f64_lossy(rng.random_range(-bound..bound)))
        .collect();
    Tensor::new(shape.to_vec(), data).expect("sizes agree")
}

impl<T: Real> Model<T> {
    /// Weights and biases are drawn uniformly from `±1/√fan_in`; Tangma's
    /// `alpha` and `gamma` start at zero.
    pub fn new(spec: ModelSpec) -> Result<Self> {
        spec.shape_chain()?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.init_seed);
        let mut params = ParamStore::new();
        let mut layers = Vec::new();
        let (mut convs, mut linears, mut sites) = (0, 0, 0);
        for layer in spec.layers() {
            layers.push(match layer {
                LayerSpec::Conv(c) => {
                    convs += 1;
                    let fan_in = c.in_channels * c.kernel * c.kernel;
                    let weight = params.add(
                        format!("conv{convs}.weight"),
                        uniform_init(&mut rng, &c.weight_shape(), fan_in),
                    );
                    let bias = params.add(
                        format!("conv{convs}.bias"),
                        uniform_init(&mut rng, &[c.out_channels], fan_in),
                    );
                    Layer::Conv { spec: c, weight, bias }
                }
                LayerSpec::Linear { inputs, outputs } => {
                    linears += 1;
                    let weight = params.add(
                        format!("fc{linears}.weight"),
                        uniform_init(&mut rng, &[outputs, inputs], inputs),
                    );
                    let bias = params.add(format!("fc{linears}.bias"), uniform_init(&mut rng, &[outputs], inputs));
                    Layer::Linear { weight, bias }
                }
                LayerSpec::Activation => {
                    sites += 1;
                    Layer::Activation { site: sites - 1 }
                }
                LayerSpec::MaxPool => Layer::MaxPool,
                LayerSpec::Dropout(p) => {
                    DropoutSpec::new(p, Mode::Train)?;
                    Layer::Dropout(p)
                }
                LayerSpec::Flatten => Layer::Flatten,
            });
        }

        let mut tangma = Vec::new();
        if spec.activation == ActivationKind::Tangma {
            let pairs = if spec.per_site_tangma {
                spec.activation_sites()
            } else {
                1
            };
            for i in 0..pairs {
                let prefix = if spec.per_site_tangma {
                    format!("tangma{}", i + 1)
                } else {
                    "tangma".to_string()
                };
                let alpha = params.add(format!("{prefix}.alpha"), Tensor::zeros([1]));
                let gamma = params.add(format!("{prefix}.gamma"), Tensor::zeros([1]));
                tangma.push((alpha, gamma));
            }
        }
        Ok(Self {
            spec,
            params,
            layers,
            tangma,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn params(&self) -> &ParamStore<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.params
    }

    /// Number of trainable scalars.
    pub fn num_params(&self) -> usize {
        self.params.num_trainable()
    }

    /// Current `(alpha, gamma)` of every Tangma site group; empty for the
    /// other activations.
    pub fn tangma_params(&self) -> Vec<TangmaParams<T>> {
        self.tangma
            .iter()
            .map(|&(a, c)| TangmaParams::new(self.params.value(a).data()[0], self.params.value(c).data()[0]))
            .collect()
    }

    /// Parameter ids of the `(alpha, gamma)` pairs.
    pub fn tangma_ids(&self) -> &[(ParamId, ParamId)] {
        &self.tangma
    }

    fn check_input(&self, shape: &[usize]) -> Result<()> {
        let want = self.spec.architecture.input_shape();
        if shape.len() != 4 || shape[1..] != want {
            let mut expected = vec![shape.first().copied().unwrap_or(0)];
            expected.extend_from_slice(&want);
            return Err(Error::ShapeMismatch {
                op: "model input",
                left: shape.to_vec(),
                right: expected,
            });
        }
        Ok(())
    }

    /// Builds the forward graph on `x: B×C×H×W` and returns the `B×10`
    /// logits node. Dropout draws from `rng` only in train mode.
    pub fn forward<R: Rng + ?Sized>(&self, g: &mut Graph<T>, x: NodeId, mode: Mode, rng: &mut R) -> Result<NodeId> {
        self.forward_traced(g, x, mode, rng).map(|(out, _)| out)
    }

    /// Like [`Model::forward`], also returning the per-sample shape after
    /// every layer.
    pub fn forward_traced<R: Rng + ?Sized>(
        &self,
        g: &mut Graph<T>,
        x: NodeId,
        mode: Mode,
        rng: &mut R,
    ) -> Result<(NodeId, Vec<Vec<usize>>)> {
        self.check_input(g.value(x).shape())?;
        let tangma: Vec<(NodeId, NodeId)> = self
            .tangma
            .iter()
            .map(|&(a, c)| (g.param(&self.params, a), g.param(&self.params, c)))
            .collect();
        let mut h = x;
        let mut trace = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            h = match *layer {
                Layer::Conv { spec, weight, bias } => {
                    let w = g.param(&self.params, weight);
                    let b = g.param(&self.params, bias);
                    g.conv2d(h, w, b, &spec)?
                }
                Layer::Activation { site } => {
                    let pair = tangma.get(site).or(tangma.first()).copied();
                    g.activation(self.spec.activation, h, pair)?
                }
                Layer::MaxPool => g.maxpool2d(h)?,
                Layer::Dropout(p) => g.dropout(h, &DropoutSpec::new(p, mode)?, rng),
                Layer::Flatten => g.flatten(h)?,
                Layer::Linear { weight, bias } => {
                    let w = g.param(&self.params, weight);
                    let b = g.param(&self.params, bias);
                    g.linear(h, w, b)?
                }
            };
            trace.push(g.value(h).shape()[1..].to_vec());
        }
        Ok((h, trace))
    }

    /// Eval-mode logits for a batch of images.
    pub fn logits(&self, images: &Tensor<T>) -> Result<Tensor<T>> {
        let mut g = Graph::new();
        let x = g.input(images.clone());
        // eval mode never draws, so any rng will do
        let out = self.forward(&mut g, x, Mode::Eval, &mut ChaCha8Rng::seed_from_u64(0))?;
        Ok(g.value(out).clone())
    }

    /// Same architecture and values in another precision.
    pub fn cast<U: Real>(&self) -> Model<U> {
        let mut params = ParamStore::new();
        for p in self.params.iter() {
            let id = params.add(p.name.clone(), p.value.cast());
            params.set_trainable(id, p.trainable);
        }
        Model {
            spec: self.spec,
            params,
            layers: self.layers.clone(),
            tangma: self.tangma.clone(),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut buf = Vec::new();
        buf.extend_from_slice(CHECKPOINT_MAGIC);
        buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        let put_str = |buf: &mut Vec<u8>, s: &str| {
            buf.extend_from_slice(&(s.len() as u32).to_le_bytes());
            buf.extend_from_slice(s.as_bytes());
        };
        put_str(&mut buf, self.spec.architecture.name());
        put_str(&mut buf, self.spec.activation.name());
        buf.push(self.spec.per_site_tangma as u8);
        buf.extend_from_slice(&(self.params.len() as u32).to_le_bytes());
        for p in self.params.iter() {
            put_str(&mut buf, &p.name);
            buf.extend_from_slice(&(p.value.ndim() as u32).to_le_bytes());
            for &d in p.value.shape() {
                buf.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for &v in p.value.data() {
                buf.extend_from_slice(&(v.to_f64_lossy() as f32).to_le_bytes());
            }
        }
        let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(&buf).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        let mut r = CheckpointReader {
            path,
            bytes: &bytes,
            pos: 0,
        };

        if r.take(8)? != CHECKPOINT_MAGIC {
            return Err(r.error("not a checkpoint (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(r.error(format!("unsupported version {version}")));
        }
        let architecture: Architecture = r.string()?.parse()?;
        let activation: ActivationKind = r.string()?.parse()?;
        let mut spec = ModelSpec::new(architecture, activation);
        spec.per_site_tangma = r.take(1)?[0] != 0;
        let mut model = Model::new(spec)?;

        let count = r.u32()? as usize;
        if count != model.params.len() {
            return Err(r.error(format!("{count} parameters, model has {}", model.params.len())));
        }
        for _ in 0..count {
            let name = r.string()?;
            let rank = r.u32()? as usize;
            let dims = (0..rank)
                .map(|_| r.u32().map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            let id = model
                .params
                .find(&name)
                .ok_or_else(|| r.error(format!("unknown parameter {name:?}")))?;
            if model.params.value(id).shape() != dims.as_slice() {
                return Err(r.error(format!(
                    "{name}: stored shape {dims:?}, expected {:?}",
                    model.params.value(id).shape()
                )));
            }
            let n: usize = dims.iter().product();
            let raw = r.take(4 * n)?;
            let values = raw
                .chunks_exact(4)
                .map(|c| T::from_f64_lossy(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64));
            for (dst, v) in model.params.get_mut(id).value.data_mut().iter_mut().zip(values) {
                *dst = v;
            }
        }
        if r.pos != bytes.len() {
            return Err(r.error(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(model)
    }
}

struct CheckpointReader<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> CheckpointReader<'a> {
    fn error(&self, msg: String) -> Error {
        Error::Format {
            path: self.path.to_path_buf(),
            msg,
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let Some(end) = end else {
            return Err(self.error(format!("truncated at byte {}", self.pos)));
        };
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        let b = self.take(n)?;
        String::from_utf8(b.to_vec()).map_err(|_| self.error("invalid UTF-8 string".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn analytic_count(arch: Architecture) -> usize {
        // weights + biases, straight from the layer dimensions
        let conv = |i: usize, o: usize| o * i * 9 + o;
        let fc = |i: usize, o: usize| o * i + o;
        match arch {
            Architecture::Mnist => conv(1, 32) + conv(32, 64) + fc(9216, 128) + fc(128, 10),
            Architecture::Cifar10 => conv(3, 32) + conv(32, 64) + conv(64, 128) + fc(2048, 512) + fc(512, 10),
        }
    }

    #[test]
    fn parameter_counts() {
        assert_eq!(analytic_count(Architecture::Mnist), 320 + 18_496 + 1_179_776 + 1_290);
        assert_eq!(
            analytic_count(Architecture::Cifar10),
            896 + 18_496 + 73_856 + 1_049_088 + 5_130
        );
        for arch in [Architecture::Mnist, Architecture::Cifar10] {
            for act in ActivationKind::ALL {
                let m = Model::<f32>::new(ModelSpec::new(arch, act)).unwrap();
                let extra = if act == ActivationKind::Tangma { 2 } else { 0 };
                assert_eq!(m.num_params(), analytic_count(arch) + extra, "{arch} {act}");
            }
        }
        assert_eq!(analytic_count(Architecture::Mnist), 1_199_882);
        assert_eq!(analytic_count(Architecture::Cifar10), 1_147_466);
    }

    #[test]
    fn per_site_tangma_adds_a_pair_per_activation() {
        let mut spec = ModelSpec::new(Architecture::Mnist, ActivationKind::Tangma);
        spec.per_site_tangma = true;
        let m = Model::<f32>::new(spec).unwrap();
        assert_eq!(m.num_params(), 1_199_882 + 6);
        assert_eq!(m.tangma_params().len(), 3);
    }

    #[test]
    fn shape_chains() {
        let mnist = ModelSpec::new(Architecture::Mnist, ActivationKind::Relu)
            .shape_chain()
            .unwrap();
        let expected: Vec<Vec<usize>> = vec![
            vec![32, 26, 26],
            vec![32, 26, 26],
            vec![64, 24, 24],
            vec![64, 24, 24],
            vec![64, 12, 12],
            vec![64, 12, 12],
            vec![9216],
            vec![128],
            vec![128],
            vec![128],
            vec![10],
        ];
        assert_eq!(mnist, expected);
        let cifar = ModelSpec::new(Architecture::Cifar10, ActivationKind::Relu)
            .shape_chain()
            .unwrap();
        let expected: Vec<Vec<usize>> = vec![
            vec![32, 32, 32],
            vec![32, 32, 32],
            vec![32, 16, 16],
            vec![64, 16, 16],
            vec![64, 16, 16],
            vec![64, 8, 8],
            vec![128, 8, 8],
            vec![128, 8, 8],
            vec![128, 4, 4],
            vec![2048],
            vec![512],
            vec![512],
            vec![512],
            vec![10],
        ];
        assert_eq!(cifar, expected);
    }

    #[test]
    fn same_seed_same_weights() {
        let spec = ModelSpec::new(Architecture::Cifar10, ActivationKind::Gelu).with_seed(11);
        let a = Model::<f32>::new(spec).unwrap();
        let b = Model::<f32>::new(spec).unwrap();
        for (p, q) in a.params().iter().zip(b.params().iter()) {
            assert_eq!(p.value, q.value);
        }
        let c = Model::<f32>::new(spec.with_seed(12)).unwrap();
        assert_ne!(
            a.params().iter().next().unwrap().value,
            c.params().iter().next().unwrap().value
        );
    }

    #[test]
    fn init_bounds_and_tangma_zero() {
        let m = Model::<f64>::new(ModelSpec::new(Architecture::Mnist, ActivationKind::Tangma)).unwrap();
        let fc1 = m.params().value(m.params().find("fc1.weight").unwrap());
        let bound = 1.0 / 9216f64.sqrt();
        assert!(fc1.data().iter().all(|v| v.abs() <= bound));
        assert_eq!(m.tangma_params(), vec![TangmaParams::new(0.0, 0.0)]);
    }

    #[test]
    fn forward_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m = Model::<f32>::new(ModelSpec::new(Architecture::Mnist, ActivationKind::Tangma)).unwrap();
        let mut g = Graph::new();
        let x = g.input(Tensor::zeros([64, 1, 28, 28]));
        let (y, trace) = m.forward_traced(&mut g, x, Mode::Train, &mut rng).unwrap();
        assert_eq!(g.value(y).shape(), &[64, 10]);
        assert_eq!(trace, m.spec().shape_chain().unwrap());

        let m = Model::<f32>::new(ModelSpec::new(Architecture::Cifar10, ActivationKind::Relu)).unwrap();
        let mut g = Graph::new();
        let x = g.input(Tensor::zeros([128, 3, 32, 32]));
        let (y, trace) = m.forward_traced(&mut g, x, Mode::Eval, &mut rng).unwrap();
        assert_eq!(g.value(y).shape(), &[128, 10]);
        assert_eq!(trace, m.spec().shape_chain().unwrap());
    }

    #[test]
    fn wrong_input_shape_is_rejected() {
        let m = Model::<f32>::new(ModelSpec::new(Architecture::Mnist, ActivationKind::Relu)).unwrap();
        assert!(matches!(
            m.logits(&Tensor::zeros([2, 3, 32, 32])),
            Err(Error::ShapeMismatch { .. })
        ));
        assert!(m.logits(&Tensor::zeros([28, 28])).is_err());
    }

    #[test]
    fn eval_forward_is_repeatable() {
        let m = Model::<f32>::new(ModelSpec::new(Architecture::Mnist, ActivationKind::Swish).with_seed(3)).unwrap();
        let x = Tensor::new([2, 1, 28, 28], (0..1568).map(|i| (i % 17) as f32 / 17.0).collect()).unwrap();
        assert_eq!(m.logits(&x).unwrap(), m.logits(&x).unwrap());
    }

    #[test]
    fn train_mode_dropout_changes_logits() {
        let m = Model::<f32>::new(ModelSpec::new(Architecture::Mnist, ActivationKind::Relu).with_seed(3)).unwrap();
        let x = Tensor::new([1, 1, 28, 28], (0..784).map(|i| (i % 13) as f32 / 13.0).collect()).unwrap();
        let mut g = Graph::new();
        let xn = g.input(x.clone());
        let y = m
            .forward(&mut g, xn, Mode::Train, &mut ChaCha8Rng::seed_from_u64(1))
            .unwrap();
        assert_ne!(g.value(y), &m.logits(&x).unwrap());
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let mut spec = ModelSpec::new(Architecture::Cifar10, ActivationKind::Tangma).with_seed(5);
        spec.per_site_tangma = true;
        let mut m = Model::<f32>::new(spec).unwrap();
        let alpha = m.tangma_ids()[2].0;
        m.params_mut().get_mut(alpha).value.data_mut()[0] = 0.28;
        m.save(&path).unwrap();
        let back = Model::<f32>::load(&path).unwrap();
        assert_eq!(back.spec().activation, ActivationKind::Tangma);
        assert!(back.spec().per_site_tangma);
        for (p, q) in m.params().iter().zip(back.params().iter()) {
            assert_eq!(p.name, q.name);
            assert_eq!(p.value, q.value);
        }

        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(Model::<f32>::load(&path), Err(Error::Format { .. })));
        std::fs::write(&path, b"NOTACKPT").unwrap();
        assert!(matches!(Model::<f32>::load(&path), Err(Error::Format { .. })));
    }

    #[test]
    fn architecture_names() {
        assert_eq!("mnist".parse::<Architecture>().unwrap(), Architecture::Mnist);
        assert_eq!("cifar10".parse::<Architecture>().unwrap(), Architecture::Cifar10);
        assert!("imagenet".parse::<Architecture>().is_err());
    }
}
