use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use splinelc::adversarial::AttackConfig;
use splinelc::learn::{
    make_modular_addition, make_piecewise_regression, randomize_labels, train, CheckpointHook, Dataset, LcHook,
    RobustHook, Split, TrajectoryLog, TrajectoryRow,
};
use splinelc::netcore::{init, save_weights};
use splinelc::seed::derive;
use splinelc::slicegeom::{compute_partition, emit, slice_through, ColorMode, EmitOptions, Format, Rect, Slice};
use splinelc::{Network, ProbeConfig};

use crate::config::{ColorName, DataSource, ExperimentConfig, SliceSpec};
use crate::output::{file_digest, Staging};
use crate::points::load_mnist;
use crate::{input_error, Shared};

#[derive(Args)]
pub struct TrainArgs {
    /// Experiment config (TOML).
    pub config: PathBuf,
    /// Override `train.steps`.
    #[arg(long)]
    pub steps: Option<u64>,
    /// Replace an existing output directory.
    #[arg(long)]
    pub force: bool,
}

// Sub-seeds of the global seed.
const SEED_INIT: u64 = 1;
const SEED_SHUFFLE: u64 = 2;
const SEED_PROBE: u64 = 3;
const SEED_RANDOM_POINTS: u64 = 4;
const SEED_ATTACK: u64 = 5;
const SEED_LABEL_NOISE: u64 = 6;
const SEED_DATA_TRAIN: u64 = 7;
const SEED_DATA_TEST: u64 = 8;

pub fn load_data(cfg: &ExperimentConfig) -> Result<(Dataset, Option<Dataset>)> {
    let d = &cfg.data;
    let (train, test) = match d.source {
        DataSource::Mnist => {
            let classes = d.classes.as_deref();
            let train = load_mnist(&d.dir, Split::Train, d.train_size, classes)?;
            let test = load_mnist(&d.dir, Split::Test, d.test_size, classes)?;
            (train, Some(test))
        }
        DataSource::Piecewise => {
            let train = make_piecewise_regression(d.train_size.unwrap_or(4096), derive(cfg.seed, SEED_DATA_TRAIN))?;
            let test = d
                .test_size
                .map(|n| make_piecewise_regression(n, derive(cfg.seed, SEED_DATA_TEST)))
                .transpose()?;
            (train, test)
        }
        DataSource::ModularAddition => (make_modular_addition(d.modulus)?, None),
    };
    let train = if d.label_noise > 0.0 {
        let k = train.num_classes().unwrap_or(0);
        randomize_labels(&train, d.label_noise, k, derive(cfg.seed, SEED_LABEL_NOISE))?
    } else {
        train
    };
    Ok((train, test))
}

pub fn build_slice(spec: &SliceSpec, train: &Dataset) -> Result<Slice> {
    let rect = spec
        .bounds
        .map(|[a, b, c, d]| Rect::new(a, b, c, d))
        .transpose()?;
    match spec.anchors {
        Some(idx) => {
            if let Some(&i) = idx.iter().find(|&&i| i >= train.len()) {
                return Err(input_error(format!(
                    "invalid slice.anchors: index {i} but the training set has {} points",
                    train.len()
                )));
            }
            let row = |i: usize| train.inputs.row(i);
            let s = slice_through(row(idx[0]), row(idx[1]), row(idx[2]), spec.margin)?;
            Ok(match rect {
                Some(r) => s.with_bounds(r),
                None => s,
            })
        }
        None => {
            if train.dim() != 2 {
                return Err(input_error(format!(
                    "invalid slice: `bounds` alone needs 2-D inputs, data has {}",
                    train.dim()
                )));
            }
            Ok(Slice::plane(rect.expect("validated: anchors or bounds")))
        }
    }
}

fn color(c: ColorName, seed: u64) -> ColorMode {
    match c {
        ColorName::Random => ColorMode::Random { seed },
        ColorName::SlopeNorm => ColorMode::SlopeNorm,
    }
}

fn progress(step: u64, _net: &Network, row: &mut TrajectoryRow) -> splinelc::Result<()> {
    let mut line = format!("step {step:>7}  loss {:.4}", row.train_loss);
    let mut add = |name: &str, v: Option<f64>| {
        if let Some(v) = v {
            line.push_str(&format!("  {name} {v:.4}"));
        }
    };
    add("train_acc", row.train_acc);
    add("test_acc", row.test_acc);
    add("lc_train", row.lc_train.map(|s| s.mean));
    add("lc_test", row.lc_test.map(|s| s.mean));
    for (eps, acc) in &row.adv_acc {
        line.push_str(&format!("  adv@{eps} {acc:.4}"));
    }
    eprintln!("{line}");
    Ok(())
}

fn write_log(staging: &Staging, log: &TrajectoryLog) -> Result<()> {
    log.save_csv(staging.path("trajectory.csv"))?;
    log.save_json(staging.path("trajectory.json"))?;
    Ok(())
}

fn write_manifest(staging: &Staging, hash: &str) -> Result<()> {
    let mut files = BTreeMap::new();
    for entry in walk(&staging.dir)? {
        let rel = entry.strip_prefix(&staging.dir)?.to_string_lossy().replace('\\', "/");
        files.insert(rel, file_digest(&entry)?);
    }
    let manifest = serde_json::json!({
        "tool": splinelc::TOOL,
        "config_hash": hash,
        "sha256": files,
    });
    std::fs::write(staging.path("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(())
}

fn walk(dir: &std::path::Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut entries: Vec<_> = std::fs::read_dir(dir)?.collect::<std::io::Result<_>>()?;
    entries.sort_by_key(|e| e.path());
    for e in entries {
        let p = e.path();
        if p.is_dir() {
            out.extend(walk(&p)?);
        } else {
            out.push(p);
        }
    }
    Ok(out)
}

pub fn run(shared: &Shared, args: TrainArgs) -> Result<()> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(s) = shared.seed {
        cfg.seed = s;
    }
    if let Some(s) = args.steps {
        cfg.train.steps = s;
    }
    if let Some(o) = &shared.out {
        cfg.out = Some(o.clone());
    }
    cfg.train.seed = derive(cfg.seed, SEED_SHUFFLE);
    cfg.validate()?;
    let out = cfg
        .out
        .clone()
        .ok_or_else(|| input_error("no output directory: set `out` in the config or pass --out"))?;
    let hash = cfg.hash();

    let (train_ds, test_ds) = load_data(&cfg)?;
    cfg.train.validate(train_ds.len())?;
    let mut arch = vec![train_ds.dim()];
    arch.extend(&cfg.arch.hidden);
    arch.push(train_ds.target_dim());
    let mut net = init(&arch, cfg.arch.activation(), derive(cfg.seed, SEED_INIT), cfg.arch.init_scale)?;

    let mut lc_hook = match &cfg.probe {
        Some(p) => {
            let probe = ProbeConfig {
                p: p.p,
                r: p.r,
                seed: derive(cfg.seed, SEED_PROBE),
            };
            probe.validate(train_ds.dim())?;
            let mut h = LcHook::standard(
                probe,
                &train_ds,
                test_ds.as_ref(),
                p.points,
                derive(cfg.seed, SEED_RANDOM_POINTS),
            );
            h.layerwise = p.layerwise;
            Some(h)
        }
        None => None,
    };
    let mut robust_hook = match &cfg.attack {
        Some(a) => {
            let base = AttackConfig {
                epsilon: a.epsilons.iter().copied().fold(0.0, f64::max),
                alpha: a.alpha,
                steps: a.steps,
                seed: derive(cfg.seed, SEED_ATTACK),
                random_start: a.random_start,
                data_range: a.data_range,
            };
            for &e in &a.epsilons {
                let mut c = base.with_epsilon(e);
                if e > 0.0 {
                    c.alpha = c.alpha.min(e);
                }
                c.validate().context("invalid attack")?;
            }
            let pool = test_ds.as_ref().unwrap_or(&train_ds);
            Some(RobustHook {
                data: pool.take(a.points),
                base,
                epsilons: a.epsilons.clone(),
            })
        }
        None => None,
    };
    let slice = cfg.slice.as_ref().map(|s| build_slice(s, &train_ds)).transpose()?;

    let staging = Staging::new(&out, args.force)?;
    std::fs::write(staging.path("config.toml"), cfg.to_toml()?)?;
    save_weights(&net, staging.path("weights_init.spln"))?;

    let snapshot_dir = staging.path("slices");
    let snapshot_steps: Option<BTreeSet<u64>> = cfg
        .slice
        .as_ref()
        .and_then(|s| s.at.as_ref())
        .map(|v| v.iter().copied().collect());
    let emit_opts = EmitOptions {
        color: color(cfg.slice.as_ref().map_or(ColorName::Random, |s| s.color), cfg.seed),
        config_hash: Some(hash.clone()),
        ..EmitOptions::default()
    };
    let mut snapshot = |step: u64, net: &Network, row: &mut TrajectoryRow| -> splinelc::Result<()> {
        let Some(slice) = &slice else { return Ok(()) };
        if snapshot_steps.as_ref().is_some_and(|s| !s.contains(&step)) {
            return Ok(());
        }
        std::fs::create_dir_all(&snapshot_dir)?;
        let part = compute_partition(net, slice, None)?;
        row.extra.insert("slice_regions".into(), part.regions.len() as f64);
        let stem = snapshot_dir.join(format!("step_{step:07}"));
        emit(&part, stem.with_extension("json"), Format::Json, &emit_opts)?;
        emit(&part, stem.with_extension("svg"), Format::Svg, &emit_opts)?;
        Ok(())
    };
    let mut show = progress;

    let mut hooks: Vec<&mut dyn CheckpointHook> = Vec::new();
    if let Some(h) = lc_hook.as_mut() {
        hooks.push(h);
    }
    if let Some(h) = robust_hook.as_mut() {
        hooks.push(h);
    }
    hooks.push(&mut snapshot);
    hooks.push(&mut show);

    let result = train(&mut net, &train_ds, test_ds.as_ref(), &cfg.train, &mut hooks);
    let mut log = match result {
        Ok(log) => log,
        Err(splinelc::Error::Diverged { step, mut log }) => {
            log.config_hash = hash.clone();
            write_log(&staging, &log)?;
            write_manifest(&staging, &hash)?;
            let dir = staging.finish()?;
            anyhow::bail!(
                "training diverged at step {step}; partial trajectory in {}",
                dir.display()
            );
        }
        Err(e) => return Err(e.into()),
    };
    log.config_hash = hash.clone();
    write_log(&staging, &log)?;
    save_weights(&net, staging.path("weights_final.spln"))?;
    write_manifest(&staging, &hash)?;
    let dir = staging.finish()?;
    println!("run: {} (config_hash {hash})", dir.display());
    if let Some(last) = log.rows.last() {
        println!("final step {}: train loss {:.5}", last.step, last.train_loss);
    }
    Ok(())
}
