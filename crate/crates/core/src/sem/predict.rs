use super::{sigmoid, Dataset, SemModel};
use crate::error::{Error, Result};
use crate::graph::NodeId;

pub const CLASSIFICATION_THRESHOLD: f64 = 0.5;

/// Per-row `intercept + sum(coef * parent)` for `node`.
pub fn linear_predictor(model: &SemModel, node: NodeId, data: &Dataset) -> Result<Vec<f64>> {
    let graph = model.graph();
    let eq = model.equation(node);
    let cols: Vec<&[f64]> = eq
        .parents
        .iter()
        .map(|&p| data.require(graph.name(p)))
        .collect::<Result<_>>()?;
    Ok((0..data.n_rows())
        .map(|r| {
            let mut acc = eq.intercept;
            for (col, &c) in cols.iter().zip(&eq.coefficients) {
                acc += c * col[r];
            }
            acc
        })
        .collect())
}

/// Outcome predictions: probabilities for a binary outcome, the linear
/// predictor otherwise.
pub fn predict_outcome(model: &SemModel, data: &Dataset) -> Result<Vec<f64>> {
    let y = model.graph().outcome();
    let lin = linear_predictor(model, y, data)?;
    Ok(if model.equation(y).binary {
        lin.into_iter().map(sigmoid).collect()
    } else {
        lin
    })
}

/// Fraction of rows where `(prediction >= threshold) == label`.
pub fn accuracy(predictions: &[f64], labels: &[f64], threshold: f64) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: predictions.len(),
            right: labels.len(),
        });
    }
    if predictions.is_empty() {
        return Ok(f64::NAN);
    }
    let hits = predictions
        .iter()
        .zip(labels)
        .filter(|(&p, &l)| (p >= threshold) == (l == 1.0))
        .count();
    Ok(hits as f64 / predictions.len() as f64)
}
