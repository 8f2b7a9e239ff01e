//! Finite-difference checks of every differentiable op and of whole models.
//!
//! Each op is checked on many random small instances in `f64`. The scalar
//! fed to backward is `Σ y ⊙ r` for a fixed random projection `r`, so every
//! output element contributes a gradient of order one. Inputs to ReLU and
//! max pooling are kept well away from their kinks so the finite
//! difference never straddles one.

use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::activations::ActivationKind;
use crate::autodiff::{grad_check, Graph, NodeId};
use crate::error::Result;
use crate::layers::{ConvSpec, DropoutSpec, Mode};
use crate::model::{Architecture, Model, ModelSpec};
use crate::tensor::Tensor;

/// Step for every central difference in the suite.
pub const STEP: f64 = 1e-4;

/// Smallest step the whole-model check shrinks to near a kink.
const MIN_STEP: f64 = 1e-8;

/// Worst error seen for one op across its instances.
#[derive(Debug, Clone, PartialEq)]
pub struct OpReport {
    pub op: &'static str,
    pub instances: usize,
    pub max_error: f64,
}

impl fmt::Display for OpReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<16} {:>4} instances  max rel error {:.3e}",
            self.op, self.instances, self.max_error
        )
    }
}

fn uniform(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(lo..hi)).collect()).expect("sizes agree")
}

/// Values in `±[0.1, 2]`, never near zero.
fn away_from_zero(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            let v = rng.random_range(0.1..2.0);
            if rng.random::<bool>() {
                v
            } else {
                -v
            }
        })
        .collect();
    Tensor::new(shape.to_vec(), data).expect("sizes agree")
}

/// Distinct values with gaps of at least 0.04 in shuffled order, so every
/// pooling window has a clear winner.
fn well_separated(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    let n: usize = shape.iter().product();
    let mut data: Vec<f64> = (0..n).map(|i| i as f64 * 0.05 - n as f64 * 0.025).collect();
    data.shuffle(rng);
    for v in &mut data {
        *v += rng.random_range(0.0..0.01);
    }
    Tensor::new(shape.to_vec(), data).expect("sizes agree")
}

/// `Σ y ⊙ r` with `r` drawn from `seed` for `y`'s shape.
fn project(g: &mut Graph<f64>, y: NodeId, seed: u64) -> Result<NodeId> {
    let shape = g.value(y).shape().to_vec();
    let r = uniform(&mut ChaCha8Rng::seed_from_u64(seed), &shape, -1.0, 1.0);
    let r = g.input(r);
    let p = g.mul(y, r)?;
    Ok(g.sum(p))
}

struct Suite {
    rng: ChaCha8Rng,
    instances: usize,
    reports: Vec<OpReport>,
}

impl Suite {
    /// Runs `check` for every instance and records the worst error.
    fn op(&mut self, op: &'static str, mut check: impl FnMut(&mut ChaCha8Rng, u64) -> Result<f64>) -> Result<()> {
        let mut worst = 0.0f64;
        for _ in 0..self.instances {
            let seed = self.rng.random();
            worst = worst.max(check(&mut self.rng, seed)?);
        }
        self.reports.push(OpReport {
            op,
            instances: self.instances,
            max_error: worst,
        });
        Ok(())
    }
}

fn random_shape(rng: &mut ChaCha8Rng) -> Vec<usize> {
    vec![rng.random_range(1..4), rng.random_range(1..5), rng.random_range(1..4)]
}

fn random_conv(rng: &mut ChaCha8Rng) -> (ConvSpec, [usize; 4]) {
    let kernel = rng.random_range(1..4);
    let padding = rng.random_range(0..2);
    let stride = rng.random_range(1..3);
    let spec = ConvSpec::new(rng.random_range(1..4), rng.random_range(1..4), kernel, stride, padding);
    // pick a size whose output is an integer for this stride
    let mut size = kernel + rng.random_range(1..5);
    while (size + 2 * padding - kernel) % stride != 0 {
        size += 1;
    }
    (spec, [rng.random_range(1..3), spec.in_channels, size, size])
}

/// Checks every op on `instances` random instances each.
pub fn run_op_suite(instances: usize, seed: u64) -> Result<Vec<OpReport>> {
    let mut s = Suite {
        rng: ChaCha8Rng::seed_from_u64(seed),
        instances,
        reports: Vec::new(),
    };
    let h = STEP;

    s.op("relu", |rng, seed| {
        let shape = random_shape(rng);
        let x = away_from_zero(rng, &shape);
        grad_check(
            |g, x| {
                let y = g.relu(x);
                project(g, y, seed)
            },
            &x,
            h,
        )
    })?;
    s.op("swish", |rng, seed| {
        let shape = random_shape(rng);
        let x = uniform(rng, &shape, -5.0, 5.0);
        grad_check(
            |g, x| {
                let y = g.swish(x);
                project(g, y, seed)
            },
            &x,
            h,
        )
    })?;
    s.op("gelu", |rng, seed| {
        let shape = random_shape(rng);
        let x = uniform(rng, &shape, -5.0, 5.0);
        grad_check(
            |g, x| {
                let y = g.gelu(x);
                project(g, y, seed)
            },
            &x,
            h,
        )
    })?;

    let tangma_case = |rng: &mut ChaCha8Rng| {
        let shape = random_shape(rng);
        let x = uniform(rng, &shape, -5.0, 5.0);
        let a = uniform(rng, &[1], -1.0, 1.0);
        let c = uniform(rng, &[1], -1.0, 1.0);
        (x, a, c)
    };
    s.op("tangma.x", |rng, seed| {
        let (x, a, c) = tangma_case(rng);
        grad_check(
            |g, x| {
                let (a, c) = (g.input(a.clone()), g.input(c.clone()));
                let y = g.tangma(x, a, c)?;
                project(g, y, seed)
            },
            &x,
            h,
        )
    })?;
    s.op("tangma.alpha", |rng, seed| {
        let (x, a, c) = tangma_case(rng);
        grad_check(
            |g, a| {
                let (x, c) = (g.input(x.clone()), g.input(c.clone()));
                let y = g.tangma(x, a, c)?;
                project(g, y, seed)
            },
            &a,
            h,
        )
    })?;
    s.op("tangma.gamma", |rng, seed| {
        let (x, a, c) = tangma_case(rng);
        grad_check(
            |g, c| {
                let (x, a) = (g.input(x.clone()), g.input(a.clone()));
                let y = g.tangma(x, a, c)?;
                project(g, y, seed)
            },
            &c,
            h,
        )
    })?;

    let conv_case = |rng: &mut ChaCha8Rng| {
        let (spec, xs) = random_conv(rng);
        let x = uniform(rng, &xs, -1.0, 1.0);
        let w = uniform(rng, &spec.weight_shape(), -1.0, 1.0);
        let b = uniform(rng, &[spec.out_channels], -1.0, 1.0);
        (spec, x, w, b)
    };
    s.op("conv2d.input", |rng, seed| {
        let (spec, x, w, b) = conv_case(rng);
        grad_check(
            |g, x| {
                let (w, b) = (g.input(w.clone()), g.input(b.clone()));
                let y = g.conv2d(x, w, b, &spec)?;
                project(g, y, seed)
            },
            &x,
            h,
        )
    })?;
    s.op("conv2d.weight", |rng, seed| {
        let (spec, x, w, b) = conv_case(rng);
        grad_check(
            |g, w| {
                let (x, b) = (g.input(x.clone()), g.input(b.clone()));
                let y = g.conv2d(x, w, b, &spec)?;
                project(g, y, seed)
            },
            &w,
            h,
        )
    })?;
    s.op("conv2d.bias", |rng, seed| {
        let (spec, x, w, b) = conv_case(rng);
        grad_check(
            |g, b| {
                let (x, w) = (g.input(x.clone()), g.input(w.clone()));
                let y = g.conv2d(x, w, b, &spec)?;
                project(g, y, seed)
            },
            &b,
            h,
        )
    })?;

    s.op("maxpool2d", |rng, seed| {
        let shape = [
            rng.random_range(1..3),
            rng.random_range(1..4),
            2 * rng.random_range(1..4),
            2 * rng.random_range(1..4),
        ];
        let x = well_separated(rng, &shape);
        grad_check(
            |g, x| {
                let y = g.maxpool2d(x)?;
                project(g, y, seed)
            },
            &x,
            h,
        )
    })?;

    let linear_case = |rng: &mut ChaCha8Rng| {
        let (batch, n, m) = (rng.random_range(1..4), rng.random_range(1..7), rng.random_range(1..6));
        (
            uniform(rng, &[batch, n], -1.0, 1.0),
            uniform(rng, &[m, n], -1.0, 1.0),
            uniform(rng, &[m], -1.0, 1.0),
        )
    };
    s.op("linear.input", |rng, seed| {
        let (x, w, b) = linear_case(rng);
        grad_check(
            |g, x| {
                let (w, b) = (g.input(w.clone()), g.input(b.clone()));
                let y = g.linear(x, w, b)?;
                project(g, y, seed)
            },
            &x,
            h,
        )
    })?;
    s.op("linear.weight", |rng, seed| {
        let (x, w, b) = linear_case(rng);
        grad_check(
            |g, w| {
                let (x, b) = (g.input(x.clone()), g.input(b.clone()));
                let y = g.linear(x, w, b)?;
                project(g, y, seed)
            },
            &w,
            h,
        )
    })?;
    s.op("linear.bias", |rng, seed| {
        let (x, w, b) = linear_case(rng);
        grad_check(
            |g, b| {
                let (x, w) = (g.input(x.clone()), g.input(w.clone()));
                let y = g.linear(x, w, b)?;
                project(g, y, seed)
            },
            &b,
            h,
        )
    })?;

    s.op("dropout", |rng, seed| {
        let shape = random_shape(rng);
        let x = uniform(rng, &shape, -2.0, 2.0);
        let spec = DropoutSpec::new(0.3, Mode::Train)?;
        grad_check(
            |g, x| {
                // same mask on every evaluation
                let y = g.dropout(x, &spec, &mut ChaCha8Rng::seed_from_u64(seed));
                project(g, y, seed)
            },
            &x,
            h,
        )
    })?;
    s.op("flatten", |rng, seed| {
        let channels = rng.random_range(1..4);
        let x = uniform(rng, &[2, channels, 3, 2], -2.0, 2.0);
        grad_check(
            |g, x| {
                let y = g.flatten(x)?;
                project(g, y, seed)
            },
            &x,
            h,
        )
    })?;

    s.op("cross_entropy", |rng, _| {
        let (batch, classes) = (rng.random_range(1..6), rng.random_range(2..11));
        let z = uniform(rng, &[batch, classes], -4.0, 4.0);
        let labels: Vec<usize> = (0..batch).map(|_| rng.random_range(0..classes)).collect();
        grad_check(|g, z| g.cross_entropy(z, &labels), &z, h)
    })?;

    s.op("matmul", |rng, seed| {
        let (m, k, n) = (rng.random_range(1..5), rng.random_range(1..5), rng.random_range(1..5));
        let a = uniform(rng, &[m, k], -1.0, 1.0);
        let b = uniform(rng, &[k, n], -1.0, 1.0);
        let ea = grad_check(
            |g, a| {
                let b = g.input(b.clone());
                let y = g.matmul(a, b)?;
                project(g, y, seed)
            },
            &a,
            h,
        )?;
        let eb = grad_check(
            |g, b| {
                let a = g.input(a.clone());
                let y = g.matmul(a, b)?;
                project(g, y, seed)
            },
            &b,
            h,
        )?;
        Ok(ea.max(eb))
    })?;
    s.op("elementwise", |rng, seed| {
        // mul, sub, add, tanh, exp, log and the scalar ops composed
        let shape = random_shape(rng);
        let x = uniform(rng, &shape, 0.2, 2.0);
        let c = uniform(rng, &shape, -1.0, 1.0);
        grad_check(
            |g, x| {
                let c = g.input(c.clone());
                let p = g.mul(x, c)?;
                let t = g.tanh(p);
                let e = g.exp(t);
                let l = g.log(x)?;
                let d = g.sub(e, l)?;
                let s = g.add(d, x)?;
                let s = g.mul_scalar(s, 0.7);
                let s = g.add_scalar(s, 0.1);
                project(g, s, seed)
            },
            &x,
            h,
        )
    })?;
    s.op("mean/reshape", |rng, _| {
        let x = uniform(rng, &[2, 3, 2], -1.0, 1.0);
        grad_check(
            |g, x| {
                let r = g.reshape(x, [3, 4])?;
                let sq = g.mul(r, r)?;
                Ok(g.mean(sq))
            },
            &x,
            h,
        )
    })?;
    s.op("add_bias", |rng, seed| {
        let x = uniform(rng, &[2, 3, 2, 2], -1.0, 1.0);
        let b = uniform(rng, &[3], -1.0, 1.0);
        grad_check(
            |g, b| {
                let x = g.input(x.clone());
                let y = g.add_bias(x, b)?;
                project(g, y, seed)
            },
            &b,
            h,
        )
    })?;

    Ok(s.reports)
}

/// Result of checking a whole model's parameter gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGradReport {
    pub architecture: Architecture,
    pub activation: ActivationKind,
    /// Number of individual parameter coordinates compared.
    pub coordinates: usize,
    /// Worst `|a − n| / max(|a|, |n|, 1e-6)` over those coordinates.
    pub max_error: f64,
    /// Parameter name where the worst error occurred.
    pub worst_param: String,
    /// Coordinates whose step had to shrink below [`STEP`] to stay clear of
    /// a max-pool or ReLU switch.
    pub refined: usize,
}

/// Backward of the mean cross-entropy of a 2-sample batch versus central
/// differences, in `f64` with dropout disabled. Every `(alpha, gamma)`
/// coordinate is compared, plus `per_tensor` random coordinates of every
/// other parameter tensor.
pub fn model_grad_check(
    architecture: Architecture,
    activation: ActivationKind,
    per_tensor: usize,
    seed: u64,
) -> Result<ModelGradReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = Model::<f64>::new(ModelSpec::new(architecture, activation).with_seed(seed))?;
    // move alpha and gamma off zero so their gradients are not trivially tied
    for &(a, c) in model.tangma_ids().to_vec().iter() {
        model.params_mut().get_mut(a).value.data_mut()[0] = rng.random_range(-0.5..0.5);
        model.params_mut().get_mut(c).value.data_mut()[0] = rng.random_range(-0.5..0.5);
    }
    let [ch, hgt, wid] = architecture.input_shape();
    let x = uniform(&mut rng, &[2, ch, hgt, wid], 0.0, 1.0);
    let labels = [rng.random_range(0..10), rng.random_range(0..10)];

    let loss = |m: &Model<f64>| -> Result<(f64, Vec<usize>)> {
        let mut g = Graph::new();
        let xi = g.input(x.clone());
        let z = m.forward(&mut g, xi, Mode::Eval, &mut ChaCha8Rng::seed_from_u64(0))?;
        let l = g.cross_entropy(z, &labels)?;
        Ok((g.value(l).item()?, g.branch_pattern()))
    };
    let (_, base_pattern) = loss(&model)?;

    model.params_mut().zero_grads();
    {
        let mut g = Graph::new();
        let xi = g.input(x.clone());
        let z = model.forward(&mut g, xi, Mode::Eval, &mut rng)?;
        let l = g.cross_entropy(z, &labels)?;
        g.backward(l, model.params_mut())?;
    }

    let tangma: Vec<usize> = model
        .tangma_ids()
        .iter()
        .flat_map(|&(a, c)| [a.index(), c.index()])
        .collect();
    let mut coordinates = 0;
    let mut refined = 0;
    let mut worst = (0.0f64, String::new());
    let ids: Vec<_> = model.params().ids().collect();
    for id in ids {
        let len = model.params().value(id).len();
        let picks: Vec<usize> = if tangma.contains(&id.index()) {
            (0..len).collect()
        } else {
            (0..per_tensor.min(len)).map(|_| rng.random_range(0..len)).collect()
        };
        for i in picks {
            let analytic = model.params().grad(id)[i];
            let orig = model.params().value(id).data()[i];
            let at = |v: f64| {
                let mut m = model.clone();
                m.params_mut().get_mut(id).value.data_mut()[i] = v;
                loss(&m)
            };
            // Shrink the step until neither probe crosses a max-pool or ReLU
            // switch, so the difference quotient sees one smooth piece.
            let mut h = STEP;
            let numeric = loop {
                let (plus, p_pattern) = at(orig + h)?;
                let (minus, m_pattern) = at(orig - h)?;
                if (p_pattern == base_pattern && m_pattern == base_pattern) || h <= MIN_STEP {
                    refined += (h < STEP) as usize;
                    break (plus - minus) / (2.0 * h);
                }
                h /= 10.0;
            };
            let err = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
            coordinates += 1;
            if err > worst.0 {
                worst = (err, model.params().get(id).name.clone());
            }
        }
    }
    Ok(ModelGradReport {
        architecture,
        activation,
        coordinates,
        max_error: worst.0,
        worst_param: worst.1,
        refined,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn op_suite_passes_on_a_few_instances() {
        let reports = run_op_suite(5, 1).unwrap();
        assert!(reports.len() >= 18);
        for r in &reports {
            assert!(r.max_error < 1e-5, "{r}");
        }
    }

    #[test]
    fn well_separated_values_have_gaps() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let t = well_separated(&mut rng, &[1, 1, 4, 4]);
        let mut v = t.data().to_vec();
        v.sort_by(f64::total_cmp);
        assert!(v.windows(2).all(|w| w[1] - w[0] > 0.03));
    }
}
