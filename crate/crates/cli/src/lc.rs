use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use serde::Serialize;
use splinelc::lcprobe::{aggregate_csv, batch_lc};
use splinelc::learn::config_hash;
use splinelc::netcore::load_weights;
use splinelc::seed::derive;
use splinelc::ProbeConfig;

use crate::output::{file_digest, provenance, write_text};
use crate::points::{load_points, parse_spec};
use crate::{input_error, Shared};

#[derive(Args)]
pub struct LcArgs {
    /// Weights file.
    #[arg(long)]
    pub weights: PathBuf,
    /// Probe centres, `[CLASS=]SOURCE`; repeat for several classes.
    /// Sources: zeros:N, csv:PATH, box:N:LO:HI, mnist-train:DIR[:N],
    /// mnist-test:DIR[:N], modular:P.
    #[arg(long = "points", required = true)]
    pub points: Vec<String>,
    /// Neighbourhood dimensionality.
    #[arg(short = 'P', long = "p", default_value_t = 25)]
    pub p: usize,
    /// Neighbourhood radius.
    #[arg(short = 'r', long, default_value_t = 0.005)]
    pub r: f64,
    /// Write JSON (per-point counts included) instead of CSV.
    #[arg(long)]
    pub json: bool,
}

#[derive(Serialize)]
struct Provenance<'a> {
    command: &'static str,
    weights_sha256: String,
    points: &'a [String],
    probe: ProbeConfig,
}

pub fn run(shared: &Shared, args: LcArgs) -> Result<()> {
    let net = load_weights(&args.weights)?;
    let seed = shared.seed.unwrap_or(0);
    let probe = ProbeConfig {
        p: args.p,
        r: args.r,
        seed,
    };
    probe.validate(net.input_dim())?;
    let specs = args.points.iter().map(|s| parse_spec(s)).collect::<Result<Vec<_>>>()?;
    let mut classes = std::collections::HashSet::new();
    if let Some(dup) = specs.iter().find(|s| !classes.insert(s.class)) {
        return Err(input_error(format!("point class `{}` given twice", dup.class.as_str())));
    }
    let hash = config_hash(&Provenance {
        command: "lc",
        weights_sha256: file_digest(&args.weights)?,
        points: &args.points,
        probe,
    });
    let mut aggs = Vec::new();
    for (k, spec) in specs.iter().enumerate() {
        let pts = load_points(&spec.source, net.input_dim(), derive(seed, 100 + k as u64))?;
        aggs.push(batch_lc(&net, pts.view(), &probe, spec.class)?);
    }
    let text = if args.json {
        let v = serde_json::json!({
            "tool": splinelc::TOOL,
            "config_hash": hash,
            "aggregates": aggs,
        });
        serde_json::to_string_pretty(&v)? + "\n"
    } else {
        let mut buf = Vec::new();
        aggregate_csv(&mut buf, &aggs, Some(&provenance(&hash)))?;
        String::from_utf8(buf)?
    };
    write_text(shared.out.as_deref(), &text)
}
