use super::{Graph, NodeId};
use crate::error::Result;
use crate::tensor::Tensor;

/// Central-difference estimate of `∇f(x)`, one coordinate at a time.
pub fn central_difference<F>(f: F, x: &Tensor<f64>, h: f64) -> Result<Vec<f64>>
where
    F: Fn(&Tensor<f64>) -> Result<f64>,
{
    let mut probe = x.clone();
    let mut out = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + h;
        let plus = f(&probe)?;
        probe.data_mut()[i] = orig - h;
        let minus = f(&probe)?;
        probe.data_mut()[i] = orig;
        out.push((plus - minus) / (2.0 * h));
    }
    Ok(out)
}

/// Compares the backward pass of a scalar graph against central differences.
///
/// `build` receives a fresh graph and the node holding `x`, and must return a
/// scalar node. The result is `max_i |analytic_i − numeric_i| / max(1, |analytic_i|)`.
pub fn grad_check<F>(build: F, x: &Tensor<f64>, h: f64) -> Result<f64>
where
    F: Fn(&mut Graph<f64>, NodeId) -> Result<NodeId>,
{
    let mut g = Graph::new();
    let xi = g.variable(x.clone());
    let root = build(&mut g, xi)?;
    g.backward_leaves(root)?;
    let analytic = g.grad(xi).map(Tensor::into_data).unwrap_or_else(|| vec![0.0; x.len()]);

    let numeric = central_difference(
        |probe| {
            let mut g = Graph::new();
            let xi = g.input(probe.clone());
            let root = build(&mut g, xi)?;
            g.value(root).item()
        },
        x,
        h,
    )?;

    Ok(analytic
        .iter()
        .zip(&numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(1.0))
        .fold(0.0, f64::max))
}
