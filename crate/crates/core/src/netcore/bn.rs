use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::{Layer, Network};
use crate::error::{check_dim, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BnMode {
    /// Stored running statistics.
    Eval,
    /// Statistics of the current batch.
    Train,
}

/// Per-channel batch mean and (population) standard deviation, the latter
/// clamped below at `epsilon`. Single-pass Welford accumulation.
pub fn batch_stats(z: ArrayView2<'_, f64>, epsilon: f64) -> Result<(Array1<f64>, Array1<f64>)> {
    let n = z.nrows();
    if n < 2 {
        return Err(Error::invalid(
            "batch",
            format!("batch-norm statistics need at least 2 rows, got {n}"),
        ));
    }
    let d = z.ncols();
    let mut mean = Array1::<f64>::zeros(d);
    let mut m2 = Array1::<f64>::zeros(d);
    for (count, row) in z.rows().into_iter().enumerate() {
        let c = (count + 1) as f64;
        for j in 0..d {
            let delta = row[j] - mean[j];
            mean[j] += delta / c;
            m2[j] += delta * (row[j] - mean[j]);
        }
    }
    let sigma = m2.mapv(|s| (s / n as f64).sqrt().max(epsilon));
    Ok((mean, sigma))
}

pub(crate) fn apply_bn_with(
    z: &mut Array2<f64>,
    mu: &Array1<f64>,
    sigma: &Array1<f64>,
    gamma: &Array1<f64>,
    beta: &Array1<f64>,
) {
    for mut row in z.rows_mut() {
        for j in 0..row.len() {
            row[j] = gamma[j] * (row[j] - mu[j]) / sigma[j] + beta[j];
        }
    }
}

/// Applies the layer's batch norm to raw pre-activations `W x + b`.
pub fn bn_apply(layer: &Layer, preact_raw: ArrayView2<'_, f64>, mode: BnMode) -> Result<Array2<f64>> {
    let bn = layer
        .bn
        .as_ref()
        .ok_or_else(|| Error::invalid("layer.bn", "layer has no batch-norm parameters"))?;
    check_dim("bn input width", bn.width(), preact_raw.ncols())?;
    let (mu, sigma) = match mode {
        BnMode::Eval => (bn.mu.clone(), bn.sigma.clone()),
        BnMode::Train => batch_stats(preact_raw, bn.epsilon)?,
    };
    let mut out = preact_raw.to_owned();
    apply_bn_with(&mut out, &mu, &sigma, &bn.gamma, &bn.beta);
    Ok(out)
}

/// Average squared distance from `points` (rows, in the input space of
/// `layer_index`) to neuron `neuron`'s hyperplane `<w, v> = mu`, with `mu`
/// the batch mean of `<w, v>`; returned alongside `sigma² / ||w||²`.
pub fn bn_distance_check(
    net: &Network,
    layer_index: usize,
    neuron: usize,
    points: ArrayView2<'_, f64>,
) -> Result<(f64, f64)> {
    let layer = net
        .layers()
        .get(layer_index)
        .ok_or_else(|| Error::invalid("layer_index", format!("{layer_index} out of range")))?;
    if neuron >= layer.out_dim() {
        return Err(Error::invalid("neuron", format!("{neuron} out of range")));
    }
    check_dim("bn_distance_check points", layer.in_dim(), points.ncols())?;
    let w = layer.weight.row(neuron);
    let norm_sq = w.dot(&w);
    if norm_sq == 0.0 {
        return Err(Error::ZeroNormWeight {
            layer: layer_index,
            neuron,
        });
    }
    let proj = points.dot(&w).insert_axis(Axis(1));
    let (mu, sigma) = batch_stats(proj.view(), 0.0)?;
    let (mu, sigma) = (mu[0], sigma[0]);
    let norm = norm_sq.sqrt();
    let lhs = proj.iter().map(|p| ((p - mu).abs() / norm).powi(2)).sum::<f64>() / points.nrows() as f64;
    let rhs = sigma * sigma / norm_sq;
    Ok((lhs, rhs))
}
