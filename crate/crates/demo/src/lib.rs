//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Three operations are exposed: sampling an activation and its derivative,
//! training a small spiral classifier step by step, and running the
//! finite-difference gradient suite.

pub mod spiral;

use std::cmp::Ordering;
use std::fmt::Write as _;

use tangma::activations::{self, ActivationKind, TangmaParams};
use tangma::{gradsuite, Error, Result};
use wasm_bindgen::prelude::*;

/// `points` samples of `x`, the activation and its derivative over
/// `[lo, hi]`, interleaved as `x0, y0, dy0, x1, ...`.
pub fn curve(kind: ActivationKind, alpha: f64, gamma: f64, lo: f64, hi: f64, points: usize) -> Result<Vec<f64>> {
    if points < 2 || lo.partial_cmp(&hi) != Some(Ordering::Less) {
        return Err(Error::Config(format!(
            "need at least 2 points on a non-empty range, got {points} on [{lo}, {hi}]"
        )));
    }
    let p = TangmaParams::new(alpha, gamma);
    let step = (hi - lo) / (points - 1) as f64;
    let mut out = Vec::with_capacity(points * 3);
    for i in 0..points {
        let x = lo + i as f64 * step;
        out.extend([
            x,
            activations::evaluate(kind, x, p),
            activations::derivative(kind, x, p),
        ]);
    }
    Ok(out)
}

/// Text report of the op-level gradient suite.
pub fn gradient_report(instances: usize, seed: u64) -> Result<String> {
    let reports = gradsuite::run_op_suite(instances, seed)?;
    let worst = reports.iter().map(|r| r.max_error).fold(0.0, f64::max);
    let mut out = String::new();
    for r in &reports {
        let _ = writeln!(out, "{r}");
    }
    let _ = writeln!(out, "worst {worst:.3e}");
    Ok(out)
}

fn js(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

fn parse_kind(name: &str) -> std::result::Result<ActivationKind, JsError> {
    name.parse().map_err(js)
}

#[wasm_bindgen(js_name = activationCurve)]
pub fn activation_curve(
    kind: &str,
    alpha: f64,
    gamma: f64,
    lo: f64,
    hi: f64,
    points: usize,
) -> std::result::Result<Vec<f64>, JsError> {
    curve(parse_kind(kind)?, alpha, gamma, lo, hi, points).map_err(js)
}

#[wasm_bindgen(js_name = gradientReport)]
pub fn gradient_report_js(instances: usize, seed: u32) -> std::result::Result<String, JsError> {
    gradient_report(instances, seed.into()).map_err(js)
}

/// Spiral classifier handle for the page.
#[wasm_bindgen]
pub struct Spiral(spiral::SpiralModel);

#[wasm_bindgen]
impl Spiral {
    #[wasm_bindgen(constructor)]
    pub fn new(kind: &str, per_arm: usize, learning_rate: f64, seed: u32) -> std::result::Result<Spiral, JsError> {
        spiral::SpiralModel::new(parse_kind(kind)?, per_arm, learning_rate, seed.into())
            .map(Spiral)
            .map_err(js)
    }

    /// Trains for `steps` updates and returns the loss.
    pub fn train(&mut self, steps: usize) -> std::result::Result<f64, JsError> {
        self.0.train(steps).map_err(js)
    }

    pub fn accuracy(&self) -> std::result::Result<f64, JsError> {
        self.0.accuracy().map_err(js)
    }

    #[wasm_bindgen(js_name = decisionGrid)]
    pub fn decision_grid(&self, res: usize) -> std::result::Result<Vec<u8>, JsError> {
        self.0.decision_grid(res).map_err(js)
    }

    pub fn points(&self) -> Vec<f64> {
        self.0.points().to_vec()
    }

    pub fn labels(&self) -> Vec<u8> {
        self.0.labels().iter().map(|&c| c as u8).collect()
    }

    pub fn alpha(&self) -> f64 {
        self.0.alpha()
    }

    pub fn gamma(&self) -> f64 {
        self.0.gamma()
    }

    /// Flattened `(alpha, gamma)` history.
    pub fn trajectory(&self) -> Vec<f64> {
        self.0.trajectory().iter().flat_map(|&(a, c)| [a, c]).collect()
    }

    pub fn steps(&self) -> f64 {
        self.0.steps() as f64
    }
}
