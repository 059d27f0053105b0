use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use super::bn::{batch_stats, BnMode};
use super::forward::check_input;
use super::Network;
use crate::error::{check_dim, Result};

/// Gradients of one layer's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub gamma: Option<Array1<f64>>,
    pub beta: Option<Array1<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    /// Gradient with respect to each input row.
    pub input: Array2<f64>,
    /// Parameter gradients summed over the batch.
    pub layers: Vec<LayerGrads>,
}

impl Gradients {
    /// Parameter gradients in [`Network::params`] order.
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for g in &self.layers {
            out.extend(g.weight.iter());
            out.extend(g.bias.iter());
            if let (Some(gm), Some(bt)) = (&g.gamma, &g.beta) {
                out.extend(gm.iter());
                out.extend(bt.iter());
            }
        }
        out
    }

    /// Per-tensor slices matching [`Network::param_slices_mut`].
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for g in &self.layers {
            out.push(g.weight.as_slice().expect("standard layout"));
            out.push(g.bias.as_slice().expect("standard layout"));
            if let (Some(gm), Some(bt)) = (&g.gamma, &g.beta) {
                out.push(gm.as_slice().expect("standard layout"));
                out.push(bt.as_slice().expect("standard layout"));
            }
        }
        out
    }
}

struct Tape {
    input: Array2<f64>,
    /// Post-BN pre-activation.
    preact: Array2<f64>,
    /// BN layers: normalised raw pre-activation, the sigma used, and whether
    /// the statistics were fixed (eval mode).
    bn: Option<(Array2<f64>, Array1<f64>, bool)>,
}

/// Reverse-mode gradient of `<output_cotangent, f(x)>` for a single input.
pub fn backward(
    net: &Network,
    x: ArrayView1<'_, f64>,
    output_cotangent: ArrayView1<'_, f64>,
) -> Result<Gradients> {
    backward_batch(
        net,
        x.insert_axis(Axis(0)),
        output_cotangent.insert_axis(Axis(0)),
        BnMode::Eval,
    )
}

/// Reverse-mode gradient of `Σ_rows <cotangent_row, f(x_row)>`.
///
/// In [`BnMode::Train`] the batch statistics are differentiated through.
pub fn backward_batch(
    net: &Network,
    batch: ArrayView2<'_, f64>,
    cotangents: ArrayView2<'_, f64>,
    mode: BnMode,
) -> Result<Gradients> {
    check_dim("cotangent width", net.output_dim(), cotangents.ncols())?;
    check_dim("cotangent rows", batch.nrows(), cotangents.nrows())?;
    let (_, grads) = value_and_grad(net, batch, mode, |_| Ok(cotangents.to_owned()))?;
    Ok(grads)
}

/// One forward pass, then reverse mode with cotangents chosen from the
/// output by `cotangent_of` (typically a loss gradient).
pub fn value_and_grad(
    net: &Network,
    batch: ArrayView2<'_, f64>,
    mode: BnMode,
    cotangent_of: impl FnOnce(ArrayView2<'_, f64>) -> Result<Array2<f64>>,
) -> Result<(Array2<f64>, Gradients)> {
    check_input(net, batch)?;

    let mut tapes = Vec::with_capacity(net.depth());
    let mut h = batch.to_owned();
    for layer in net.layers() {
        let mut z = h.dot(&layer.weight.t());
        z += &layer.bias;
        let bn = match &layer.bn {
            None => None,
            Some(bn) => {
                let (mu, sigma) = match mode {
                    BnMode::Eval => (bn.mu.clone(), bn.sigma.clone()),
                    BnMode::Train => batch_stats(z.view(), bn.epsilon)?,
                };
                let mut xhat = z;
                for mut row in xhat.rows_mut() {
                    for j in 0..row.len() {
                        row[j] = (row[j] - mu[j]) / sigma[j];
                    }
                }
                z = &xhat * &bn.gamma + &bn.beta;
                Some((xhat, sigma, mode == BnMode::Eval))
            }
        };
        let next = z.mapv(|v| layer.activation.apply(v));
        tapes.push(Tape {
            input: std::mem::replace(&mut h, next),
            preact: z,
            bn,
        });
    }

    let n = batch.nrows() as f64;
    let mut g = cotangent_of(h.view())?;
    check_dim("cotangent width", net.output_dim(), g.ncols())?;
    check_dim("cotangent rows", batch.nrows(), g.nrows())?;
    let mut grads = Vec::with_capacity(net.depth());
    for (layer, tape) in net.layers().iter().zip(tapes.iter()).rev() {
        let act = layer.activation;
        let mut g_y = g;
        g_y.zip_mut_with(&tape.preact, |gv, &y| *gv *= act.derivative(y));
        let (g_z, gamma, beta) = match (&layer.bn, &tape.bn) {
            (Some(bn), Some((xhat, sigma, fixed_stats))) => {
                let d_gamma = (&g_y * xhat).sum_axis(Axis(0));
                let d_beta = g_y.sum_axis(Axis(0));
                let g_hat = &g_y * &bn.gamma;
                let mut g_z = g_hat.clone();
                if *fixed_stats {
                    for mut row in g_z.rows_mut() {
                        row /= sigma;
                    }
                } else {
                    let mean_g = g_hat.sum_axis(Axis(0)) / n;
                    let mean_gx = (&g_hat * xhat).sum_axis(Axis(0)) / n;
                    for (mut row, xrow) in g_z.rows_mut().into_iter().zip(xhat.rows()) {
                        for j in 0..row.len() {
                            // A clamped sigma does not depend on the batch.
                            let var_term = if sigma[j] > bn.epsilon {
                                xrow[j] * mean_gx[j]
                            } else {
                                0.0
                            };
                            row[j] = (row[j] - mean_g[j] - var_term) / sigma[j];
                        }
                    }
                }
                (g_z, Some(d_gamma), Some(d_beta))
            }
            _ => (g_y, None, None),
        };
        let weight = g_z.t().dot(&tape.input);
        let bias = g_z.sum_axis(Axis(0));
        g = g_z.dot(&layer.weight);
        grads.push(LayerGrads {
            weight,
            bias,
            gamma,
            beta,
        });
    }
    grads.reverse();
    Ok((
        h,
        Gradients {
            input: g,
            layers: grads,
        },
    ))
}
