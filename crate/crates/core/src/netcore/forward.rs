use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use super::bn::{apply_bn_with, batch_stats, BnMode};
use super::{Layer, Network};
use crate::error::{check_dim, Error, Result};

/// Per-layer pre-activations (after BN, before the non-linearity) and the
/// network output for a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub preacts: Vec<Array2<f64>>,
    pub output: Array2<f64>,
    /// BN statistics `(mu, sigma)` actually used per layer (`None` without BN).
    pub bn_stats: Vec<Option<(Array1<f64>, Array1<f64>)>>,
}

/// Eval-mode forward pass over a `batch × input_dim` matrix.
pub fn forward(net: &Network, batch: ArrayView2<'_, f64>) -> Result<ForwardTrace> {
    forward_with_mode(net, batch, BnMode::Eval)
}

pub fn forward_with_mode(
    net: &Network,
    batch: ArrayView2<'_, f64>,
    mode: BnMode,
) -> Result<ForwardTrace> {
    check_input(net, batch)?;
    let mut preacts = Vec::with_capacity(net.depth());
    let mut bn_stats = Vec::with_capacity(net.depth());
    let mut h = batch.to_owned();
    for layer in net.layers() {
        let (z, stats) = layer_preact(layer, h.view(), mode)?;
        h = z.mapv(|v| layer.activation.apply(v));
        preacts.push(z);
        bn_stats.push(stats);
    }
    Ok(ForwardTrace {
        preacts,
        output: h,
        bn_stats,
    })
}

pub(crate) fn check_input(net: &Network, batch: ArrayView2<'_, f64>) -> Result<()> {
    check_dim("forward input", net.input_dim(), batch.ncols())?;
    if batch.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: "forward input",
            layer: 0,
        });
    }
    Ok(())
}

/// Raw affine map followed by BN when present.
pub(crate) fn layer_preact(
    layer: &Layer,
    input: ArrayView2<'_, f64>,
    mode: BnMode,
) -> Result<(Array2<f64>, Option<(Array1<f64>, Array1<f64>)>)> {
    let mut z = input.dot(&layer.weight.t());
    z += &layer.bias;
    match &layer.bn {
        None => Ok((z, None)),
        Some(bn) => {
            let (mu, sigma) = match mode {
                BnMode::Eval => (bn.mu.clone(), bn.sigma.clone()),
                BnMode::Train => batch_stats(z.view(), bn.epsilon)?,
            };
            apply_bn_with(&mut z, &mu, &sigma, &bn.gamma, &bn.beta);
            Ok((z, Some((mu, sigma))))
        }
    }
}

impl Network {
    /// Eval-mode outputs only.
    pub fn predict(&self, batch: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        check_input(self, batch)?;
        let mut h = batch.to_owned();
        for layer in self.layers() {
            let (z, _) = layer_preact(layer, h.view(), BnMode::Eval)?;
            h = z.mapv_into(|v| layer.activation.apply(v));
        }
        Ok(h)
    }

    pub fn eval_point(&self, x: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        let batch = x.insert_axis(Axis(0));
        Ok(self.predict(batch)?.row(0).to_owned())
    }

    /// Arg-max class per row (first index on ties).
    pub fn classify(&self, batch: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
        Ok(self.predict(batch)?.rows().into_iter().map(|r| argmax(r)).collect())
    }
}

pub(crate) fn argmax(row: ArrayView1<'_, f64>) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}
