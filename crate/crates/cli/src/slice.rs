use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, ValueEnum};
use serde::Serialize;
use splinelc::learn::config_hash;
use splinelc::netcore::load_weights;
use splinelc::slicegeom::{compute_partition, emit, polygon, slice_through, ColorMode, EmitOptions, Format, Rect, Slice};
use splinelc::SlicePartition;

use crate::output::file_digest;
use crate::points::{load_points, parse_source};
use crate::{input_error, Shared};

#[derive(Clone, Copy, ValueEnum, Serialize)]
pub enum Color {
    Random,
    SlopeNorm,
}

#[derive(Args, Serialize)]
pub struct SliceArgs {
    /// Weights file.
    #[arg(long)]
    pub weights: PathBuf,
    /// Point source holding the three anchors (see `lc --help`).
    #[arg(long)]
    pub anchors: Option<String>,
    /// Rows of the anchor source spanning the slice.
    #[arg(long, value_delimiter = ',', default_values_t = [0, 1, 2])]
    pub indices: Vec<usize>,
    /// Slice bounds `u_min,u_max,v_min,v_max`. Without anchors the network
    /// must take 2-D input and the slice is the input plane.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub bounds: Option<Vec<f64>>,
    /// Margin around the anchors when bounds are not given.
    #[arg(long, default_value_t = 0.1)]
    pub margin: f64,
    /// Partition through the first K layers only.
    #[arg(long)]
    pub up_to_layer: Option<usize>,
    #[arg(long, value_enum, default_value = "random")]
    pub color: Color,
    /// Include activation patterns in the JSON.
    #[arg(long)]
    pub patterns: bool,
}

#[derive(Serialize)]
struct Provenance<'a> {
    command: &'static str,
    weights_sha256: String,
    args: &'a SliceArgs,
    seed: u64,
}

/// Regions meeting the decision boundary and the rest: (count, area) each.
pub fn near_far(part: &SlicePartition) -> ((usize, f64), (usize, f64)) {
    let mut near = (0, 0.0);
    let mut far = (0, 0.0);
    for r in &part.regions {
        let hit = part
            .boundary_segments
            .iter()
            .any(|s| polygon::segment_meets_polygon(s, &r.polygon));
        let slot = if hit { &mut near } else { &mut far };
        slot.0 += 1;
        slot.1 += r.area();
    }
    (near, far)
}

pub fn run(shared: &Shared, args: SliceArgs) -> Result<()> {
    let net = load_weights(&args.weights)?;
    let seed = shared.seed.unwrap_or(0);
    if args.indices.len() != 3 {
        return Err(input_error("--indices takes exactly three rows"));
    }
    if args.bounds.as_ref().is_some_and(|b| b.len() != 4) {
        return Err(input_error("--bounds takes u_min,u_max,v_min,v_max"));
    }
    let rect = args
        .bounds
        .as_ref()
        .map(|b| Rect::new(b[0], b[1], b[2], b[3]))
        .transpose()?;
    let slice = match &args.anchors {
        Some(src) => {
            let pts = load_points(&parse_source(src)?, net.input_dim(), seed)?;
            if let Some(&i) = args.indices.iter().find(|&&i| i >= pts.nrows()) {
                return Err(input_error(format!("anchor index {i} but the source has {} rows", pts.nrows())));
            }
            let row = |k: usize| pts.row(args.indices[k]);
            let s = slice_through(row(0), row(1), row(2), args.margin)?;
            match rect {
                Some(r) => s.with_bounds(r),
                None => s,
            }
        }
        None => {
            if net.input_dim() != 2 {
                return Err(input_error(format!(
                    "the network takes {} inputs; give --anchors to pick a slice",
                    net.input_dim()
                )));
            }
            Slice::plane(rect.ok_or_else(|| input_error("give --bounds or --anchors"))?)
        }
    };
    let part = compute_partition(&net, &slice, args.up_to_layer)?;

    let hash = config_hash(&Provenance {
        command: "slice",
        weights_sha256: file_digest(&args.weights)?,
        args: &args,
        seed,
    });
    let opts = EmitOptions {
        color: match args.color {
            Color::Random => ColorMode::Random { seed },
            Color::SlopeNorm => ColorMode::SlopeNorm,
        },
        include_patterns: args.patterns,
        config_hash: Some(hash),
        ..EmitOptions::default()
    };
    let out = shared.out.clone().unwrap_or_else(|| PathBuf::from("slice"));
    let stem = match out.extension().and_then(|e| e.to_str()) {
        Some("json" | "svg") => out.with_extension(""),
        _ => out,
    };
    if let Some(parent) = stem.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    emit(&part, stem.with_extension("json"), Format::Json, &opts)?;
    emit(&part, stem.with_extension("svg"), Format::Svg, &opts)?;

    println!("regions: {}", part.regions.len());
    println!("layers: {}", part.layer_count_used);
    println!("boundary segments: {}", part.boundary_segments.len());
    if part.boundary_segments.is_empty() {
        println!("near-boundary density: n/a (no decision boundary in the slice)");
        println!("slice density: {:.6} regions per unit area", part.regions.len() as f64 / part.total_area());
    } else {
        let ((nn, na), (fnn, fa)) = near_far(&part);
        let dens = |n: usize, a: f64| if a > 0.0 { n as f64 / a } else { 0.0 };
        println!("near-boundary density: {:.6} regions per unit area ({nn} regions)", dens(nn, na));
        println!("far density: {:.6} regions per unit area ({fnn} regions)", dens(fnn, fa));
    }
    println!("wrote {} and {}", stem.with_extension("json").display(), stem.with_extension("svg").display());
    Ok(())
}
