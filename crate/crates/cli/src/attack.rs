use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use serde::Serialize;
use splinelc::adversarial::{accuracy, robust_accuracy_curve, AttackConfig};
use splinelc::learn::{config_hash, dataset_loss, Loss, TrajectoryLog, TrajectoryRow};
use splinelc::netcore::load_weights;

use crate::output::{file_digest, write_text};
use crate::points::{load_dataset, parse_source};
use crate::Shared;

#[derive(Args)]
pub struct AttackArgs {
    /// Weights file.
    #[arg(long)]
    pub weights: PathBuf,
    /// Labelled data: mnist-train:DIR[:N], mnist-test:DIR[:N] or modular:P.
    #[arg(long)]
    pub data: String,
    /// L∞ budgets, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0.06")]
    pub eps: Vec<f64>,
    /// Step size (capped at each ε).
    #[arg(long, default_value_t = 0.0156)]
    pub alpha: f64,
    #[arg(long, default_value_t = 100)]
    pub steps: usize,
    /// Start from x instead of a uniform point in the ball.
    #[arg(long)]
    pub no_random_start: bool,
    /// Per-feature clamp range.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [0.0, 1.0])]
    pub range: Vec<f64>,
}

#[derive(Serialize)]
struct Provenance<'a> {
    command: &'static str,
    weights_sha256: String,
    data: &'a str,
    base: AttackConfig,
    epsilons: &'a [f64],
}

pub fn run(shared: &Shared, args: AttackArgs) -> Result<()> {
    if args.range.len() != 2 {
        return Err(crate::input_error("--range takes lo,hi"));
    }
    let net = load_weights(&args.weights)?;
    let ds = load_dataset(&parse_source(&args.data)?)?;
    let base = AttackConfig {
        epsilon: args.eps.iter().copied().fold(0.0, f64::max),
        alpha: args.alpha,
        steps: args.steps,
        seed: shared.seed.unwrap_or(0),
        random_start: !args.no_random_start,
        data_range: (args.range[0], args.range[1]),
    };
    for &e in &args.eps {
        let mut c = base.with_epsilon(e);
        if e > 0.0 {
            c.alpha = c.alpha.min(e);
        }
        c.validate().context("invalid attack")?;
    }
    let hash = config_hash(&Provenance {
        command: "attack",
        weights_sha256: file_digest(&args.weights)?,
        data: &args.data,
        base,
        epsilons: &args.eps,
    });
    let curve = robust_accuracy_curve(&net, &ds, &base, &args.eps)?;
    let clean = accuracy(&net, &ds)?;
    for (e, a) in &curve {
        eprintln!("eps {e}: robust accuracy {a:.4} (clean {clean:.4})");
    }
    let mut log = TrajectoryLog::new(hash);
    log.push(TrajectoryRow {
        step: 0,
        test_acc: Some(clean),
        train_loss: dataset_loss(&net, &ds, Loss::CrossEntropy)?,
        adv_acc: curve,
        ..TrajectoryRow::default()
    })?;
    let mut buf = Vec::new();
    log.write_csv_opts(&mut buf, false)?;
    write_text(shared.out.as_deref(), &String::from_utf8(buf)?)
}
