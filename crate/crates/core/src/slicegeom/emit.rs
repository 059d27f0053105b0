use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::partition::SlicePartition;
use super::polygon::{Point, Segment};
use super::slice::Rect;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Svg,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ColorMode {
    Random { seed: u64 },
    SlopeNorm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmitOptions {
    pub color: ColorMode,
    pub include_patterns: bool,
    /// Region edge stroke as a fraction of the longer bounds side; 0 hides
    /// edges.
    pub edge_width: f64,
    /// Hash of the run configuration, recorded in both formats.
    pub config_hash: Option<String>,
}

impl Default for EmitOptions {
    fn default() -> Self {
        EmitOptions {
            color: ColorMode::Random { seed: 0 },
            include_patterns: false,
            edge_width: 0.001,
            config_hash: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionJson {
    pub polygon: Vec<Point>,
    pub slope_fro: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern: Option<Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionJson {
    #[serde(default)]
    pub tool: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    pub bounds: Rect,
    /// The two basis vectors.
    pub basis: [Vec<f64>; 2],
    pub origin: Vec<f64>,
    pub regions: Vec<RegionJson>,
    pub boundary: Vec<Segment>,
    #[serde(default)]
    pub layer_count_used: usize,
}

impl PartitionJson {
    pub fn from_partition(part: &SlicePartition, include_patterns: bool) -> Self {
        PartitionJson {
            tool: crate::TOOL.to_string(),
            config_hash: None,
            bounds: part.slice.bounds,
            basis: [
                part.slice.basis.column(0).to_vec(),
                part.slice.basis.column(1).to_vec(),
            ],
            origin: part.slice.origin.to_vec(),
            regions: part
                .regions
                .iter()
                .map(|r| RegionJson {
                    polygon: r.polygon.clone(),
                    slope_fro: r.slope_fro(),
                    pattern: include_patterns.then(|| r.pattern.clone()),
                })
                .collect(),
            boundary: part.boundary_segments.clone(),
            layer_count_used: part.layer_count_used,
        }
    }
}

pub fn emit(part: &SlicePartition, path: impl AsRef<Path>, format: Format, opts: &EmitOptions) -> Result<()> {
    let path = path.as_ref();
    let text = match format {
        Format::Json => {
            let mut json = PartitionJson::from_partition(part, opts.include_patterns);
            json.config_hash = opts.config_hash.clone();
            serde_json::to_string(&json)?
        }
        Format::Svg => render_svg(part, opts),
    };
    fs::write(path, text).map_err(|e| Error::file(path, e))
}

pub fn load_json(path: impl AsRef<Path>) -> Result<PartitionJson> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

const VIRIDIS: [[f64; 3]; 9] = [
    [68.0, 1.0, 84.0],
    [71.0, 44.0, 122.0],
    [59.0, 81.0, 139.0],
    [44.0, 113.0, 142.0],
    [33.0, 144.0, 141.0],
    [39.0, 173.0, 129.0],
    [92.0, 200.0, 99.0],
    [170.0, 220.0, 50.0],
    [253.0, 231.0, 37.0],
];

fn viridis(t: f64) -> [u8; 3] {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let x = t * (VIRIDIS.len() - 1) as f64;
    let i = (x.floor() as usize).min(VIRIDIS.len() - 2);
    let f = x - i as f64;
    let mut rgb = [0u8; 3];
    for k in 0..3 {
        rgb[k] = (VIRIDIS[i][k] + f * (VIRIDIS[i + 1][k] - VIRIDIS[i][k])).round() as u8;
    }
    rgb
}

fn region_colors(part: &SlicePartition, mode: ColorMode) -> Vec<[u8; 3]> {
    match mode {
        ColorMode::Random { seed } => {
            let mut rng = crate::seed::rng(seed);
            part.regions
                .iter()
                .map(|_| [rng.random_range(40..=255), rng.random_range(40..=255), rng.random_range(40..=255)])
                .collect()
        }
        ColorMode::SlopeNorm => {
            let norms: Vec<f64> = part.regions.iter().map(|r| r.slope_fro()).collect();
            let lo = norms.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = norms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let span = hi - lo;
            norms
                .iter()
                .map(|n| viridis(if span > 0.0 { (n - lo) / span } else { 0.5 }))
                .collect()
        }
    }
}

pub fn render_svg(part: &SlicePartition, opts: &EmitOptions) -> String {
    let b = part.slice.bounds;
    let (w, h) = (b.width(), b.height());
    let stroke = opts.edge_width * w.max(h);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{} {} {} {}" width="800" height="{}">"#,
        b.u_min,
        b.v_min,
        w,
        h,
        (800.0 * h / w).round().max(1.0)
    );
    let _ = writeln!(
        s,
        "<!-- {}{} -->",
        crate::TOOL,
        opts.config_hash.as_deref().map(|h| format!(" config_hash={h}")).unwrap_or_default()
    );
    // SVG y grows downward; mirror about the bounds' horizontal midline.
    let _ = writeln!(s, r#"<g transform="matrix(1 0 0 -1 0 {})">"#, b.v_min + b.v_max);
    let colors = region_colors(part, opts.color);
    for (r, c) in part.regions.iter().zip(colors) {
        let pts: Vec<String> = r.polygon.iter().map(|p| format!("{},{}", p[0], p[1])).collect();
        let edge = if stroke > 0.0 {
            format!(r#" stroke="black" stroke-width="{stroke}""#)
        } else {
            String::new()
        };
        let _ = writeln!(
            s,
            r#"<polygon points="{}" fill="rgb({},{},{})"{edge}/>"#,
            pts.join(" "),
            c[0],
            c[1],
            c[2]
        );
    }
    let mut d = String::new();
    for seg in &part.boundary_segments {
        let _ = write!(d, "M{},{} L{},{} ", seg[0][0], seg[0][1], seg[1][0], seg[1][1]);
    }
    let _ = writeln!(
        s,
        r#"<path d="{}" fill="none" stroke="red" stroke-width="{}"/>"#,
        d.trim_end(),
        4.0 * opts.edge_width.max(0.001) * w.max(h)
    );
    s.push_str("</g>\n</svg>\n");
    s
}
