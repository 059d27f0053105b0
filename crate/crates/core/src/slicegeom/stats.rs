use std::collections::BTreeSet;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::partition::SlicePartition;
use super::polygon::{self, Point, Segment};
use super::slice::Rect;
use crate::error::{Error, Result};
use crate::netcore::Network;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionStats {
    pub region_count: usize,
    pub areas: Vec<f64>,
    pub slope_norms: Vec<f64>,
    pub total_area: f64,
    /// `ny × nx` grid of region density (fractional regions per unit area),
    /// row 0 at `v_min`.
    pub density: Option<Array2<f64>>,
}

pub fn region_stats(part: &SlicePartition, grid: Option<(usize, usize)>) -> Result<RegionStats> {
    let areas: Vec<f64> = part.regions.iter().map(|r| r.area()).collect();
    let density = match grid {
        Some((nx, ny)) => Some(density_grid(part, nx, ny)?),
        None => None,
    };
    Ok(RegionStats {
        region_count: part.regions.len(),
        total_area: areas.iter().sum(),
        areas,
        slope_norms: part.regions.iter().map(|r| r.slope_fro()).collect(),
        density,
    })
}

/// Area-weighted region count per unit area inside `rect`: each region
/// contributes the fraction of its area that falls in `rect`.
pub fn region_density(part: &SlicePartition, rect: &Rect) -> f64 {
    let mut count = 0.0;
    for r in &part.regions {
        let clipped = polygon::clip_to_rect(&r.polygon, rect);
        if clipped.len() >= 3 {
            count += polygon::area(&clipped) / r.area();
        }
    }
    count / rect.area()
}

pub fn density_grid(part: &SlicePartition, nx: usize, ny: usize) -> Result<Array2<f64>> {
    if nx == 0 || ny == 0 {
        return Err(Error::invalid("grid", "needs at least one cell per axis"));
    }
    let b = part.slice.bounds;
    let (du, dv) = (b.width() / nx as f64, b.height() / ny as f64);
    let mut out = Array2::zeros((ny, nx));
    for r in &part.regions {
        let area = r.area();
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in &r.polygon {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let ix0 = (((lo[0] - b.u_min) / du).floor().max(0.0) as usize).min(nx - 1);
        let ix1 = (((hi[0] - b.u_min) / du).floor().max(0.0) as usize).min(nx - 1);
        let iy0 = (((lo[1] - b.v_min) / dv).floor().max(0.0) as usize).min(ny - 1);
        let iy1 = (((hi[1] - b.v_min) / dv).floor().max(0.0) as usize).min(ny - 1);
        for iy in iy0..=iy1 {
            for ix in ix0..=ix1 {
                let cell = Rect {
                    u_min: b.u_min + ix as f64 * du,
                    u_max: b.u_min + (ix + 1) as f64 * du,
                    v_min: b.v_min + iy as f64 * dv,
                    v_max: b.v_min + (iy + 1) as f64 * dv,
                };
                let clipped = polygon::clip_to_rect(&r.polygon, &cell);
                if clipped.len() >= 3 {
                    out[[iy, ix]] += polygon::area(&clipped) / area;
                }
            }
        }
    }
    out /= du * dv;
    Ok(out)
}

/// Decision boundary between two logits, clipped region by region.
pub fn decision_boundary(
    net: &Network,
    part: &SlicePartition,
    class_a: usize,
    class_b: usize,
) -> Result<Vec<Segment>> {
    let out = net.output_dim();
    if out < 2 {
        return Err(Error::invalid("network", "decision boundary needs at least two outputs"));
    }
    for (name, c) in [("class_a", class_a), ("class_b", class_b)] {
        if c >= out {
            return Err(Error::invalid(name, format!("class {c} out of range for {out} outputs")));
        }
    }
    if class_a == class_b {
        return Err(Error::invalid("class_b", "must differ from class_a"));
    }
    if part.layer_count_used != net.depth() {
        return Err(Error::invalid(
            "partition",
            "decision boundary needs a partition through all layers",
        ));
    }
    let b = part.slice.bounds;
    let eps = 1e-12 * b.width().max(b.height());
    let mut segs = Vec::new();
    for r in &part.regions {
        let a = [r.a[[class_a, 0]] - r.a[[class_b, 0]], r.a[[class_a, 1]] - r.a[[class_b, 1]]];
        let c = r.c[class_a] - r.c[class_b];
        if let Some(s) = polygon::clip_line(&r.polygon, a, c, eps) {
            segs.push(s);
        }
    }
    Ok(segs)
}

/// Boundary between the top two logits wherever they meet, for multi-class
/// renders: for each pair `(a, b)` a segment is kept where `a` and `b` tie
/// and both dominate every other logit.
pub fn argmax_boundary(net: &Network, part: &SlicePartition) -> Result<Vec<Segment>> {
    let out = net.output_dim();
    if out == 1 {
        return Ok(Vec::new());
    }
    if part.layer_count_used != net.depth() {
        return Err(Error::invalid(
            "partition",
            "decision boundary needs a partition through all layers",
        ));
    }
    let bnd = part.slice.bounds;
    let eps = 1e-12 * bnd.width().max(bnd.height());
    let mut segs = Vec::new();
    for r in &part.regions {
        for ca in 0..out {
            for cb in (ca + 1)..out {
                let mut poly = r.polygon.clone();
                for k in 0..out {
                    if k == ca || k == cb {
                        continue;
                    }
                    // keep logit_a - logit_k >= 0
                    let a = [r.a[[ca, 0]] - r.a[[k, 0]], r.a[[ca, 1]] - r.a[[k, 1]]];
                    poly = polygon::clip_keep_positive(&poly, a, r.c[ca] - r.c[k], 0.0);
                    if poly.len() < 3 {
                        break;
                    }
                }
                if poly.len() < 3 {
                    continue;
                }
                let a = [r.a[[ca, 0]] - r.a[[cb, 0]], r.a[[ca, 1]] - r.a[[cb, 1]]];
                if let Some(s) = polygon::clip_line(&poly, a, r.c[ca] - r.c[cb], eps) {
                    segs.push(s);
                }
            }
        }
    }
    Ok(segs)
}

fn count_distinct(
    part: &SlicePartition,
    mut hit: impl FnMut(&Segment) -> bool,
) -> Vec<usize> {
    let mut seen: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); part.layer_count_used];
    for p in &part.neuron_pieces {
        if !seen[p.layer].contains(&p.neuron) && hit(&p.segment) {
            seen[p.layer].insert(p.neuron);
        }
    }
    seen.iter().map(BTreeSet::len).collect()
}

/// Per-layer count of distinct neurons whose boundary meets the closed disk.
pub fn crossings_in_disk_by_layer(part: &SlicePartition, center: Point, radius: f64) -> Vec<usize> {
    count_distinct(part, |s| polygon::point_segment_distance(center, s) <= radius)
}

pub fn crossing_count_in_disk(part: &SlicePartition, center: Point, radius: f64) -> usize {
    crossings_in_disk_by_layer(part, center, radius).iter().sum()
}

/// Per-layer count of distinct neurons whose boundary meets the closed
/// convex polygon.
pub fn crossings_in_polygon_by_layer(part: &SlicePartition, poly: &[Point]) -> Vec<usize> {
    count_distinct(part, |s| polygon::segment_meets_polygon(s, poly))
}

pub fn crossing_count_in_polygon(part: &SlicePartition, poly: &[Point]) -> usize {
    crossings_in_polygon_by_layer(part, poly).iter().sum()
}
