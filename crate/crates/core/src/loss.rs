//! Cross-entropy from raw logits, argmax prediction and accuracy.

use crate::autodiff::{Graph, NodeId, Op};
use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

fn logits_shape<T: Real>(z: &Tensor<T>) -> Result<(usize, usize)> {
    let (rows, classes) = z.as_matrix("cross_entropy")?;
    if classes < 2 {
        return Err(Error::Shape {
            op: "cross_entropy",
            detail: format!("need at least 2 classes, got {classes}"),
        });
    }
    Ok((rows, classes))
}

/// Mean over rows of `−z_y + log Σ_j exp(z_j)`, with the row max subtracted
/// before exponentiating. Also returns the softmax of every row.
fn cross_entropy_with_probs<T: Real>(z: &Tensor<T>, labels: &[usize]) -> Result<(T, Vec<T>)> {
    let (rows, classes) = logits_shape(z)?;
    if labels.len() != rows {
        return Err(Error::ShapeMismatch {
            op: "cross_entropy",
            left: z.shape().to_vec(),
            right: vec![labels.len()],
        });
    }
    let mut probs = vec![T::zero(); rows * classes];
    let mut total = 0.0f64;
    for (r, (row, &y)) in z.data().chunks_exact(classes).zip(labels).enumerate() {
        if y >= classes {
            return Err(Error::Index {
                op: "cross_entropy",
                index: y,
                bound: classes,
            });
        }
        let m = row.iter().copied().fold(T::neg_infinity(), T::max);
        let p = &mut probs[r * classes..(r + 1) * classes];
        let mut denom = T::zero();
        for (pj, &zj) in p.iter_mut().zip(row) {
            *pj = (zj - m).exp();
            denom += *pj;
        }
        for pj in p.iter_mut() {
            *pj = *pj / denom;
        }
        total += (m - row[y] + denom.ln()).to_f64_lossy();
    }
    let mean = if rows == 0 { 0.0 } else { total / rows as f64 };
    Ok((T::from_f64_lossy(mean), probs))
}

/// Mean cross-entropy of a `B×C` logit batch against class labels.
pub fn cross_entropy<T: Real>(z: &Tensor<T>, labels: &[usize]) -> Result<T> {
    cross_entropy_with_probs(z, labels).map(|(l, _)| l)
}

/// Row-wise softmax, computed with the max shift.
pub fn softmax<T: Real>(z: &Tensor<T>) -> Result<Tensor<T>> {
    let (rows, _) = logits_shape(z)?;
    let (_, probs) = cross_entropy_with_probs(z, &vec![0; rows])?;
    Tensor::new(z.shape().to_vec(), probs)
}

/// Index of the largest logit per row; ties go to the lowest index.
pub fn predict<T: Real>(z: &Tensor<T>) -> Result<Vec<usize>> {
    let (_, classes) = logits_shape(z)?;
    Ok(z.data()
        .chunks_exact(classes)
        .map(|row| {
            row.iter()
                .enumerate()
                .fold(0, |best, (j, &v)| if v > row[best] { j } else { best })
        })
        .collect())
}

/// Fraction of matching labels, in `[0, 1]`.
pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::ShapeMismatch {
            op: "accuracy",
            left: vec![pred.len()],
            right: vec![truth.len()],
        });
    }
    if pred.is_empty() {
        return Ok(0.0);
    }
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / pred.len() as f64)
}

/// `(softmax − onehot) · upstream / B`.
pub(crate) fn cross_entropy_backward<T: Real>(probs: &[T], labels: &[usize], upstream: T) -> Vec<T> {
    let rows = labels.len();
    let classes = probs.len() / rows.max(1);
    let scale = upstream / T::from_usize(rows.max(1)).unwrap();
    let mut d = probs.to_vec();
    for (r, &y) in labels.iter().enumerate() {
        d[r * classes + y] = d[r * classes + y] - T::one();
    }
    for v in &mut d {
        *v *= scale;
    }
    d
}

impl<T: Real> Graph<T> {
    /// Scalar mean cross-entropy node over a `B×C` logits node.
    pub fn cross_entropy(&mut self, logits: NodeId, labels: &[usize]) -> Result<NodeId> {
        let (loss, probs) = cross_entropy_with_probs(self.value(logits), labels)?;
        let rg = self.any_grad(&[logits]);
        Ok(self.push(
            Tensor::scalar(loss),
            Op::CrossEntropy {
                logits,
                labels: labels.to_vec(),
                probs,
            },
            rg,
        ))
    }
}
