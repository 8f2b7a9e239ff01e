//! A two-hidden-layer MLP learning a three-arm spiral, small enough to train
//! interactively in a browser tab.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tangma::optim::Adam;
use tangma::{ActivationKind, Graph, NodeId, ParamId, ParamStore, Result, Tensor};

pub const ARMS: usize = 3;
const HIDDEN: usize = 24;

/// Points of a noisy three-arm spiral inside `[-1, 1]²`, labelled by arm.
pub fn spiral_points(per_arm: usize, seed: u64) -> (Vec<[f64; 2]>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(per_arm * ARMS);
    let mut labels = Vec::with_capacity(per_arm * ARMS);
    for arm in 0..ARMS {
        for i in 0..per_arm {
            let r = (i as f64 + 1.0) / per_arm as f64;
            let theta = arm as f64 * std::f64::consts::TAU / ARMS as f64 + 4.0 * r + rng.random_range(-0.2..0.2);
            points.push([r * theta.cos(), r * theta.sin()]);
            labels.push(arm);
        }
    }
    (points, labels)
}

struct Layer {
    weight: ParamId,
    bias: ParamId,
}

pub struct SpiralModel {
    activation: ActivationKind,
    store: ParamStore<f64>,
    layers: Vec<Layer>,
    alpha: ParamId,
    gamma: ParamId,
    adam: Adam<f64>,
    inputs: Tensor<f64>,
    labels: Vec<usize>,
    trajectory: Vec<(f64, f64)>,
}

impl SpiralModel {
    pub fn new(activation: ActivationKind, per_arm: usize, learning_rate: f64, seed: u64) -> Result<Self> {
        let (points, labels) = spiral_points(per_arm, seed);
        let flat: Vec<f64> = points.iter().flatten().copied().collect();
        let inputs = Tensor::new([points.len(), 2], flat)?;

        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
        let mut store = ParamStore::new();
        let mut layers = Vec::new();
        for (i, (n, m)) in [(2, HIDDEN), (HIDDEN, HIDDEN), (HIDDEN, ARMS)].into_iter().enumerate() {
            let bound = 1.0 / (n as f64).sqrt();
            let mut init = |len: usize| (0..len).map(|_| rng.random_range(-bound..bound)).collect::<Vec<_>>();
            let weight = store.add(format!("fc{}.weight", i + 1), Tensor::new([m, n], init(m * n))?);
            let bias = store.add(format!("fc{}.bias", i + 1), Tensor::new([m], init(m))?);
            layers.push(Layer { weight, bias });
        }
        let alpha = store.add("tangma.alpha", Tensor::scalar(0.0));
        let gamma = store.add("tangma.gamma", Tensor::scalar(0.0));
        if activation != ActivationKind::Tangma {
            store.set_trainable(alpha, false);
            store.set_trainable(gamma, false);
        }
        Ok(Self {
            activation,
            store,
            layers,
            alpha,
            gamma,
            adam: Adam::new(learning_rate),
            inputs,
            labels,
            trajectory: vec![(0.0, 0.0)],
        })
    }

    fn forward(&self, g: &mut Graph<f64>, x: Tensor<f64>) -> Result<NodeId> {
        let mut h = g.input(x);
        let pair = (g.param(&self.store, self.alpha), g.param(&self.store, self.gamma));
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let w = g.param(&self.store, layer.weight);
            let b = g.param(&self.store, layer.bias);
            h = g.linear(h, w, b)?;
            if i < last {
                h = g.activation(self.activation, h, Some(pair))?;
            }
        }
        Ok(h)
    }

    /// Runs `steps` full-batch Adam updates and returns the final loss.
    pub fn train(&mut self, steps: usize) -> Result<f64> {
        let mut loss = self.loss()?;
        for _ in 0..steps {
            let mut g = Graph::new();
            let logits = self.forward(&mut g, self.inputs.clone())?;
            let l = g.cross_entropy(logits, &self.labels)?;
            loss = g.value(l).item()?;
            self.store.zero_grads();
            g.backward(l, &mut self.store)?;
            self.adam.step(&mut self.store)?;
            self.trajectory.push((self.alpha(), self.gamma()));
        }
        Ok(loss)
    }

    pub fn loss(&self) -> Result<f64> {
        let mut g = Graph::new();
        let logits = self.forward(&mut g, self.inputs.clone())?;
        tangma::loss::cross_entropy(g.value(logits), &self.labels)
    }

    /// Training accuracy as a fraction.
    pub fn accuracy(&self) -> Result<f64> {
        let pred = self.predict(&self.inputs)?;
        tangma::loss::accuracy(&pred, &self.labels)
    }

    fn predict(&self, x: &Tensor<f64>) -> Result<Vec<usize>> {
        let mut g = Graph::new();
        let logits = self.forward(&mut g, x.clone())?;
        tangma::loss::predict(g.value(logits))
    }

    /// Predicted arm for each cell of a `res × res` grid over `[-1, 1]²`,
    /// row-major from the top-left corner.
    pub fn decision_grid(&self, res: usize) -> Result<Vec<u8>> {
        let step = if res > 1 { 2.0 / (res - 1) as f64 } else { 0.0 };
        let mut flat = Vec::with_capacity(res * res * 2);
        for row in 0..res {
            for col in 0..res {
                flat.push(-1.0 + col as f64 * step);
                flat.push(1.0 - row as f64 * step);
            }
        }
        let x = Tensor::new([res * res, 2], flat)?;
        Ok(self.predict(&x)?.into_iter().map(|c| c as u8).collect())
    }

    pub fn alpha(&self) -> f64 {
        self.store.value(self.alpha).data()[0]
    }

    pub fn gamma(&self) -> f64 {
        self.store.value(self.gamma).data()[0]
    }

    /// `(alpha, gamma)` after every step, starting from the initial pair.
    pub fn trajectory(&self) -> &[(f64, f64)] {
        &self.trajectory
    }

    pub fn points(&self) -> &[f64] {
        self.inputs.data()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn steps(&self) -> u64 {
        self.adam.steps()
    }
}
