//! L∞ projected gradient descent and robust accuracy.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::learn::Dataset;
use crate::netcore::{value_and_grad, BnMode, Network};

/// Samples attacked together in one forward/backward pass.
const ROWS_PER_CHUNK: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackConfig {
    pub epsilon: f64,
    pub alpha: f64,
    pub steps: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_true")]
    pub random_start: bool,
    /// Per-feature clamp `[lo, hi]`.
    #[serde(default = "default_range")]
    pub data_range: (f64, f64),
}

fn default_true() -> bool {
    true
}

fn default_range() -> (f64, f64) {
    (0.0, 1.0)
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig {
            epsilon: 0.06,
            alpha: 0.0156,
            steps: 100,
            seed: 0,
            random_start: true,
            data_range: default_range(),
        }
    }
}

impl AttackConfig {
    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::invalid("epsilon", "must be finite and >= 0"));
        }
        if self.steps == 0 {
            return Err(Error::invalid("steps", "must be at least 1"));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::invalid("alpha", "must be finite and > 0"));
        }
        // The step bound is vacuous for the empty ball.
        if self.epsilon > 0.0 && self.alpha > self.epsilon {
            return Err(Error::invalid("alpha", format!("{} exceeds epsilon {}", self.alpha, self.epsilon)));
        }
        let (lo, hi) = self.data_range;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::invalid("data_range", format!("[{lo}, {hi}] is not an interval")));
        }
        Ok(())
    }
}

/// Gradient of the mean-free cross-entropy on logits: `softmax(z) - e_y`.
pub fn cross_entropy_grad(logits: ArrayView2<'_, f64>, labels: &[usize]) -> Array2<f64> {
    let mut g = logits.to_owned();
    for (mut row, &y) in g.rows_mut().into_iter().zip(labels) {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|z| (z - m).exp());
        let s = row.sum();
        row /= s;
        row[y] -= 1.0;
    }
    g
}

/// Box `[max(x0 - ε, lo), min(x0 + ε, hi)]` for each feature.
fn feasible_box(x0: ArrayView2<'_, f64>, cfg: &AttackConfig) -> Result<(Array2<f64>, Array2<f64>)> {
    let (lo, hi) = cfg.data_range;
    let lower = x0.mapv(|v| (v - cfg.epsilon).max(lo));
    let upper = x0.mapv(|v| (v + cfg.epsilon).min(hi));
    if lower.iter().zip(upper.iter()).any(|(l, u)| l > u) {
        return Err(Error::invalid(
            "data_range",
            "input lies farther than epsilon outside the data range",
        ));
    }
    Ok((lower, upper))
}

/// Plain PGD iterates for rows `x0` whose global sample indices start at
/// `first_index` (these seed the random starts).
pub fn pgd_iterates(
    net: &Network,
    x0: ArrayView2<'_, f64>,
    labels: &[usize],
    cfg: &AttackConfig,
    first_index: usize,
) -> Result<Array2<f64>> {
    cfg.validate()?;
    check_dim("attack labels", x0.nrows(), labels.len())?;
    let k = net.output_dim();
    if let Some(&bad) = labels.iter().find(|&&y| y >= k) {
        return Err(Error::invalid("label", format!("{bad} outside 0..{k}")));
    }
    let (lower, upper) = feasible_box(x0, cfg)?;
    let mut x = x0.to_owned();
    if cfg.random_start && cfg.epsilon > 0.0 {
        for (i, mut row) in x.rows_mut().into_iter().enumerate() {
            let mut rng = crate::seed::rng(crate::seed::derive(cfg.seed, (first_index + i) as u64));
            for v in row.iter_mut() {
                *v += rng.random_range(-cfg.epsilon..=cfg.epsilon);
            }
        }
    }
    project(&mut x, &lower, &upper);
    for step in 0..cfg.steps {
        let (_, grads) = value_and_grad(net, x.view(), BnMode::Eval, |z| Ok(cross_entropy_grad(z, labels)))?;
        for (i, row) in grads.input.rows().into_iter().enumerate() {
            if row.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteGradient {
                    step,
                    sample: first_index + i,
                });
            }
        }
        x.zip_mut_with(&grads.input, |v, &g| *v += cfg.alpha * sign(g));
        project(&mut x, &lower, &upper);
    }
    Ok(x)
}

#[inline]
fn sign(g: f64) -> f64 {
    if g > 0.0 {
        1.0
    } else if g < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn project(x: &mut Array2<f64>, lower: &Array2<f64>, upper: &Array2<f64>) {
    ndarray::Zip::from(x).and(lower).and(upper).for_each(|v, &l, &u| *v = v.clamp(l, u));
}

/// PGD that never returns something weaker than the clean input: the final
/// iterate unless it is correctly classified while the clean point is not.
pub fn pgd_batch(
    net: &Network,
    x0: ArrayView2<'_, f64>,
    labels: &[usize],
    cfg: &AttackConfig,
    first_index: usize,
) -> Result<Array2<f64>> {
    let mut adv = pgd_iterates(net, x0, labels, cfg, first_index)?;
    let adv_pred = net.classify(adv.view())?;
    let clean_pred = net.classify(x0)?;
    for i in 0..labels.len() {
        if adv_pred[i] == labels[i] && clean_pred[i] != labels[i] {
            adv.row_mut(i).assign(&x0.row(i));
        }
    }
    Ok(adv)
}

pub fn pgd_attack(net: &Network, x: ArrayView1<'_, f64>, label: usize, cfg: &AttackConfig) -> Result<Array1<f64>> {
    let adv = pgd_batch(net, x.insert_axis(Axis(0)), &[label], cfg, 0)?;
    Ok(adv.row(0).to_owned())
}

/// Per-sample robustness flags, computed in parallel chunks.
pub fn robust_flags(net: &Network, ds: &Dataset, cfg: &AttackConfig) -> Result<Vec<bool>> {
    let labels = ds
        .labels()
        .ok_or_else(|| Error::invalid("dataset", "robust accuracy needs class labels"))?;
    if ds.is_empty() {
        return Err(Error::invalid("dataset", "empty"));
    }
    cfg.validate()?;
    let n = ds.len();
    let chunks: Vec<usize> = (0..n).step_by(ROWS_PER_CHUNK).collect();
    let parts: Vec<Vec<bool>> = chunks
        .into_par_iter()
        .map(|start| {
            let end = (start + ROWS_PER_CHUNK).min(n);
            let x0 = ds.inputs.slice(s![start..end, ..]);
            let y = &labels[start..end];
            let adv = pgd_batch(net, x0, y, cfg, start)?;
            let pred = net.classify(adv.view())?;
            Ok(pred.iter().zip(y).map(|(p, t)| p == t).collect())
        })
        .collect::<Result<_>>()?;
    Ok(parts.concat())
}

pub fn robust_accuracy(net: &Network, ds: &Dataset, cfg: &AttackConfig) -> Result<f64> {
    let flags = robust_flags(net, ds, cfg)?;
    Ok(flags.iter().filter(|&&f| f).count() as f64 / flags.len() as f64)
}

/// Robust accuracy at each ε of `epsilons` (any order). A sample only
/// counts as robust at ε if it also survived every smaller budget, since
/// those attacks are feasible at ε; the curve is therefore monotone.
pub fn robust_accuracy_curve(
    net: &Network,
    ds: &Dataset,
    base: &AttackConfig,
    epsilons: &[f64],
) -> Result<Vec<(f64, f64)>> {
    let mut order: Vec<usize> = (0..epsilons.len()).collect();
    order.sort_by(|&a, &b| epsilons[a].total_cmp(&epsilons[b]));
    let mut alive = vec![true; ds.len()];
    let mut acc = vec![0.0; epsilons.len()];
    for &k in &order {
        let mut cfg = *base;
        cfg.epsilon = epsilons[k];
        if cfg.epsilon > 0.0 {
            cfg.alpha = cfg.alpha.min(cfg.epsilon);
        }
        let flags = robust_flags(net, ds, &cfg)?;
        for (a, f) in alive.iter_mut().zip(flags) {
            *a &= f;
        }
        acc[k] = alive.iter().filter(|&&a| a).count() as f64 / ds.len() as f64;
    }
    Ok(epsilons.iter().copied().zip(acc).collect())
}

/// Fraction of correctly classified rows.
pub fn accuracy(net: &Network, ds: &Dataset) -> Result<f64> {
    let labels = ds
        .labels()
        .ok_or_else(|| Error::invalid("dataset", "accuracy needs class labels"))?;
    if ds.is_empty() {
        return Err(Error::invalid("dataset", "empty"));
    }
    let pred = net.classify(ds.inputs.view())?;
    Ok(pred.iter().zip(labels).filter(|(p, t)| p == t).count() as f64 / labels.len() as f64)
}
