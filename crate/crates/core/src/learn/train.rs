use std::time::Instant;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::data::{Dataset, Targets};
use super::optim::{Adam, AdamConfig, DecayMode};
use super::trajectory::{TrajectoryLog, TrajectoryRow};
use crate::error::{check_dim, Error, Result};
use crate::netcore::{batch_stats, value_and_grad, BnMode, Network};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    #[default]
    CrossEntropy,
    /// Mean over rows and outputs of the squared error.
    Mse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub steps: u64,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub decay_mode: DecayMode,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    /// Explicit checkpoint steps; when absent, `checkpoint_count` log-spaced
    /// steps over `[1, steps]`.
    pub checkpoints: Option<Vec<u64>>,
    pub checkpoint_count: usize,
    pub loss: Loss,
    /// Exponential-average factor for BN running statistics.
    pub bn_momentum: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            steps: 1000,
            batch_size: 200,
            lr: 1e-3,
            weight_decay: 0.0,
            decay_mode: DecayMode::Decoupled,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
            checkpoints: None,
            checkpoint_count: 60,
            loss: Loss::CrossEntropy,
            bn_momentum: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if n == 0 {
            return Err(Error::invalid("dataset", "training set is empty"));
        }
        if self.batch_size == 0 || self.batch_size > n {
            return Err(Error::invalid(
                "batch_size",
                format!("{} must be in 1..={n}", self.batch_size),
            ));
        }
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(Error::invalid("lr", "must be finite and >= 0"));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::invalid("weight_decay", "must be finite and >= 0"));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::invalid(name, "must be in [0, 1)"));
            }
        }
        if !(self.adam_eps > 0.0) {
            return Err(Error::invalid("adam_eps", "must be > 0"));
        }
        if !(0.0..=1.0).contains(&self.bn_momentum) {
            return Err(Error::invalid("bn_momentum", "must be in [0, 1]"));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.adam_eps,
            weight_decay: self.weight_decay,
            decay_mode: self.decay_mode,
        }
    }

    /// Sorted, de-duplicated checkpoint steps within `[1, steps]`.
    pub fn schedule(&self) -> Vec<u64> {
        let mut s = match &self.checkpoints {
            Some(list) => list.iter().copied().filter(|&t| t >= 1 && t <= self.steps).collect(),
            None => log_spaced(self.steps, self.checkpoint_count),
        };
        s.sort_unstable();
        s.dedup();
        s
    }
}

/// Up to `count` distinct integer steps, log-spaced over `[1, steps]` and
/// always including both ends.
pub fn log_spaced(steps: u64, count: usize) -> Vec<u64> {
    if steps == 0 || count == 0 {
        return Vec::new();
    }
    if count == 1 {
        return vec![steps];
    }
    let top = (steps as f64).ln();
    let mut out: Vec<u64> = (0..count)
        .map(|i| (top * i as f64 / (count - 1) as f64).exp().round() as u64)
        .map(|t| t.clamp(1, steps))
        .collect();
    out.push(steps);
    out.sort_unstable();
    out.dedup();
    out
}

/// Short hex digest of any serializable configuration.
pub fn config_hash<T: Serialize + ?Sized>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("config serializes");
    hex::encode(&Sha256::digest(&json)[..8])
}

/// Observer called at each checkpoint with read-only parameters.
pub trait CheckpointHook {
    fn on_checkpoint(&mut self, step: u64, net: &Network, row: &mut TrajectoryRow) -> Result<()>;
}

impl<F> CheckpointHook for F
where
    F: FnMut(u64, &Network, &mut TrajectoryRow) -> Result<()>,
{
    fn on_checkpoint(&mut self, step: u64, net: &Network, row: &mut TrajectoryRow) -> Result<()> {
        self(step, net, row)
    }
}

/// Loss value and its gradient with respect to the outputs.
pub fn loss_and_grad(
    loss: Loss,
    out: ArrayView2<'_, f64>,
    targets: &Targets,
    rows: &[usize],
) -> Result<(f64, Array2<f64>)> {
    let n = out.nrows() as f64;
    match (loss, targets) {
        (Loss::CrossEntropy, Targets::Classes { labels, .. }) => {
            let mut g = out.to_owned();
            let mut total = 0.0;
            for (mut row, &r) in g.rows_mut().into_iter().zip(rows) {
                let y = labels[r];
                let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
                let lse = m + row.iter().map(|z| (z - m).exp()).sum::<f64>().ln();
                total += lse - row[y];
                row.mapv_inplace(|z| (z - lse).exp() / n);
                row[y] -= 1.0 / n;
            }
            Ok((total / n, g))
        }
        (Loss::Mse, _) => {
            let t = match targets {
                Targets::Regression(t) => t.select(Axis(0), rows),
                Targets::Classes { labels, .. } => {
                    let mut t = Array2::zeros(out.raw_dim());
                    for (i, &r) in rows.iter().enumerate() {
                        t[[i, labels[r]]] = 1.0;
                    }
                    t
                }
            };
            check_dim("regression target width", out.ncols(), t.ncols())?;
            let diff = &out - &t;
            let k = (out.nrows() * out.ncols()) as f64;
            let total = diff.iter().map(|d| d * d).sum::<f64>() / k;
            Ok((total, diff * (2.0 / k)))
        }
        (Loss::CrossEntropy, Targets::Regression(_)) => Err(Error::invalid(
            "loss",
            "cross_entropy needs a classification dataset",
        )),
    }
}

/// Loss over the whole dataset in eval mode, chunked.
pub fn dataset_loss(net: &Network, ds: &Dataset, loss: Loss) -> Result<f64> {
    let n = ds.len();
    let mut total = 0.0;
    for start in (0..n).step_by(1024) {
        let rows: Vec<usize> = (start..(start + 1024).min(n)).collect();
        let x = ds.inputs.select(Axis(0), &rows);
        let out = net.predict(x.view())?;
        let (l, _) = loss_and_grad(loss, out.view(), &ds.targets, &rows)?;
        total += l * rows.len() as f64;
    }
    Ok(total / n as f64)
}

fn has_bn(net: &Network) -> bool {
    net.layers().iter().any(|l| l.bn.is_some())
}

/// Updates BN running statistics from a batch, layer by layer in train mode.
fn update_running_stats(net: &mut Network, batch: ArrayView2<'_, f64>, momentum: f64) -> Result<()> {
    let mut h = batch.to_owned();
    for layer in net.layers_mut() {
        let mut z = h.dot(&layer.weight.t());
        z += &layer.bias;
        if let Some(bn) = &mut layer.bn {
            let (mu, sigma) = batch_stats(z.view(), bn.epsilon)?;
            for j in 0..mu.len() {
                let var = (1.0 - momentum) * bn.sigma[j] * bn.sigma[j] + momentum * sigma[j] * sigma[j];
                bn.mu[j] = (1.0 - momentum) * bn.mu[j] + momentum * mu[j];
                bn.sigma[j] = var.sqrt().max(bn.epsilon);
            }
            let mut xhat = z;
            for mut row in xhat.rows_mut() {
                for j in 0..row.len() {
                    row[j] = (row[j] - mu[j]) / sigma[j] * bn.gamma[j] + bn.beta[j];
                }
            }
            z = xhat;
        }
        let act = layer.activation;
        h = z.mapv(|v| act.apply(v));
    }
    Ok(())
}

/// Minibatch Adam training with checkpoint hooks. Each checkpoint row gets
/// train/test accuracy (classification), train loss, then whatever the hooks
/// add. A non-finite batch loss aborts with [`Error::Diverged`] carrying the
/// rows recorded so far.
pub fn train(
    net: &mut Network,
    train_ds: &Dataset,
    test_ds: Option<&Dataset>,
    cfg: &TrainConfig,
    hooks: &mut [&mut dyn CheckpointHook],
) -> Result<TrajectoryLog> {
    let n = train_ds.len();
    cfg.validate(n)?;
    check_dim("training inputs", net.input_dim(), train_ds.dim())?;
    check_dim("training targets", net.output_dim(), train_ds.target_dim())?;
    if let Some(t) = test_ds {
        check_dim("test inputs", net.input_dim(), t.dim())?;
    }
    let mut log = TrajectoryLog::new(config_hash(cfg));
    let schedule = cfg.schedule();
    let mut next_ck = 0;
    let mut adam = Adam::new(cfg.adam());
    let mut rng = crate::seed::rng(cfg.seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut cursor = 0;
    let bn = has_bn(net);
    let mode = if bn { BnMode::Train } else { BnMode::Eval };
    let clock = Instant::now();

    for step in 1..=cfg.steps {
        if cursor + cfg.batch_size > n {
            order.shuffle(&mut rng);
            cursor = 0;
        }
        let rows = &order[cursor..cursor + cfg.batch_size];
        cursor += cfg.batch_size;
        let x = train_ds.inputs.select(Axis(0), rows);
        let mut loss = 0.0;
        let (_, grads) = value_and_grad(net, x.view(), mode, |out| {
            let (l, g) = loss_and_grad(cfg.loss, out, &train_ds.targets, rows)?;
            loss = l;
            Ok(g)
        })?;
        if !loss.is_finite() {
            return Err(Error::Diverged {
                step,
                log: Box::new(log),
            });
        }
        if bn {
            update_running_stats(net, x.view(), cfg.bn_momentum)?;
        }
        adam.step(net.param_slices_mut(), &grads.slices());

        if next_ck < schedule.len() && schedule[next_ck] == step {
            next_ck += 1;
            let row = checkpoint_row(net, train_ds, test_ds, cfg.loss, step, hooks, &clock)?;
            if !row.train_loss.is_finite() {
                return Err(Error::Diverged {
                    step,
                    log: Box::new(log),
                });
            }
            log.push(row)?;
        }
    }
    Ok(log)
}

fn checkpoint_row(
    net: &Network,
    train_ds: &Dataset,
    test_ds: Option<&Dataset>,
    loss: Loss,
    step: u64,
    hooks: &mut [&mut dyn CheckpointHook],
    clock: &Instant,
) -> Result<TrajectoryRow> {
    let mut row = TrajectoryRow {
        step,
        train_loss: dataset_loss(net, train_ds, loss)?,
        ..Default::default()
    };
    if train_ds.labels().is_some() {
        row.train_acc = Some(crate::adversarial::accuracy(net, train_ds)?);
        if let Some(t) = test_ds.filter(|t| !t.is_empty()) {
            row.test_acc = Some(crate::adversarial::accuracy(net, t)?);
        }
    }
    for h in hooks.iter_mut() {
        h.on_checkpoint(step, net, &mut row)?;
    }
    row.wall_clock_s = clock.elapsed().as_secs_f64();
    Ok(row)
}
