use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::polygon::{self, Point, Segment, SplitOutcome};
use super::slice::Slice;
use crate::error::{Error, Result};
use crate::netcore::{Activation, Layer, Network};

/// One linear region of the network restricted to the slice.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    /// Counter-clockwise convex polygon in slice coordinates.
    pub polygon: Vec<Point>,
    /// Activation bits (pre-activation > 0) for every kinked neuron, packed
    /// in layer order; see [`SlicePartition::pattern_layout`].
    pub pattern: Vec<u64>,
    /// `out_dim × 2` slope of the restricted map on this region.
    pub a: Array2<f64>,
    pub c: Array1<f64>,
}

impl Region {
    pub fn area(&self) -> f64 {
        polygon::area(&self.polygon)
    }

    pub fn slope_fro(&self) -> f64 {
        self.a.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn eval(&self, u: Point) -> Array1<f64> {
        &self.a.column(0) * u[0] + &self.a.column(1) * u[1] + &self.c
    }

    pub fn bit(&self, index: usize) -> bool {
        self.pattern[index / 64] >> (index % 64) & 1 == 1
    }
}

/// A boundary piece of one neuron inside the region of the previous layer's
/// partition it was cut from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeuronPiece {
    pub layer: usize,
    pub neuron: usize,
    pub segment: Segment,
}

/// Where each kinked layer's bits live inside [`Region::pattern`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternBlock {
    pub layer: usize,
    pub offset: usize,
    pub width: usize,
}

#[derive(Debug, Clone)]
pub struct SlicePartition {
    pub slice: Slice,
    pub regions: Vec<Region>,
    pub layer_count_used: usize,
    pub pattern_layout: Vec<PatternBlock>,
    /// Decision boundary; empty unless every layer was used.
    pub boundary_segments: Vec<Segment>,
    pub neuron_pieces: Vec<NeuronPiece>,
}

impl SlicePartition {
    pub fn total_area(&self) -> f64 {
        self.regions.iter().map(Region::area).sum()
    }

    /// Index of the first region whose closed polygon contains `u`.
    pub fn locate(&self, u: Point) -> Option<usize> {
        self.regions.iter().position(|r| polygon::contains(&r.polygon, u))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionOptions {
    /// Relative to the bounds area.
    pub area_eps: f64,
    /// Relative to the longer side of the bounds.
    pub dist_eps: f64,
}

impl Default for PartitionOptions {
    fn default() -> Self {
        PartitionOptions {
            area_eps: 1e-12,
            dist_eps: 1e-12,
        }
    }
}

/// Affine map `u ↦ rows[i]·u + c[i]` into some layer's coordinates.
#[derive(Clone)]
struct Affine {
    rows: Vec<[f64; 2]>,
    c: Vec<f64>,
}

struct Ctx<'a> {
    layers: Vec<FoldedLayer<'a>>,
    layout: Vec<Option<PatternBlock>>,
    words: usize,
    area_eps: f64,
    dist_eps: f64,
}

struct FoldedLayer<'a> {
    layer: &'a Layer,
    scale: Option<(Array1<f64>, Array1<f64>)>,
}

impl FoldedLayer<'_> {
    /// Pre-activation map of this layer, BN folded in.
    fn preact(&self, input: &Affine) -> Affine {
        let w = &self.layer.weight;
        let (out, inp) = w.dim();
        let mut rows = Vec::with_capacity(out);
        let mut c = Vec::with_capacity(out);
        for i in 0..out {
            let wi = w.row(i);
            let (mut a0, mut a1, mut ci) = (0.0, 0.0, self.layer.bias[i]);
            for j in 0..inp {
                let wij = wi[j];
                if wij != 0.0 {
                    a0 += wij * input.rows[j][0];
                    a1 += wij * input.rows[j][1];
                    ci += wij * input.c[j];
                }
            }
            if let Some((scale, shift)) = &self.scale {
                a0 *= scale[i];
                a1 *= scale[i];
                ci = scale[i] * ci + shift[i];
            }
            rows.push([a0, a1]);
            c.push(ci);
        }
        Affine { rows, c }
    }
}

fn slope_of(act: &Activation, z: f64) -> f64 {
    match *act {
        Activation::Relu => {
            if z > 0.0 {
                1.0
            } else {
                0.0
            }
        }
        Activation::LeakyRelu { slope } => {
            if z > 0.0 {
                1.0
            } else {
                slope
            }
        }
        _ => 1.0,
    }
}

type Leaves = (Vec<Region>, Vec<NeuronPiece>);

impl Ctx<'_> {
    fn subdivide(&self, poly: Vec<Point>, map: Affine, layer: usize, pattern: Vec<u64>) -> Leaves {
        if layer == self.layers.len() {
            let out = map.rows.len();
            let mut a = Array2::zeros((out, 2));
            for (i, r) in map.rows.iter().enumerate() {
                a[[i, 0]] = r[0];
                a[[i, 1]] = r[1];
            }
            let region = Region {
                polygon: poly,
                pattern,
                a,
                c: Array1::from(map.c),
            };
            return (vec![region], Vec::new());
        }
        let fl = &self.layers[layer];
        let act = fl.layer.activation;
        let pre = fl.preact(&map);
        let mut pieces_here = Vec::new();
        let parent = poly.clone();
        let mut cells = vec![poly];
        if act.has_kink() {
            for (i, (row, &ci)) in pre.rows.iter().zip(&pre.c).enumerate() {
                // Lines that miss the parent miss every child too.
                let Some(seg) = polygon::clip_line(&parent, *row, ci, self.dist_eps) else {
                    continue;
                };
                pieces_here.push(NeuronPiece {
                    layer,
                    neuron: i,
                    segment: seg,
                });
                let mut next = Vec::with_capacity(cells.len() + 1);
                for cell in cells {
                    match polygon::split(&cell, *row, ci, self.dist_eps) {
                        SplitOutcome::Split { positive, negative } => {
                            let (ap, an) = (polygon::area(&positive), polygon::area(&negative));
                            if ap < self.area_eps || an < self.area_eps {
                                next.push(cell);
                            } else {
                                next.push(positive);
                                next.push(negative);
                            }
                        }
                        _ => next.push(cell),
                    }
                }
                cells = next;
            }
        }
        let block = self.layout[layer];
        let children: Vec<(Vec<Point>, Affine, Vec<u64>)> = cells
            .into_iter()
            .map(|cell| {
                let u = polygon::vertex_centroid(&cell);
                let mut child_pattern = pattern.clone();
                let mut next = pre.clone();
                for i in 0..next.rows.len() {
                    let z = next.rows[i][0] * u[0] + next.rows[i][1] * u[1] + next.c[i];
                    if let Some(b) = block {
                        if z > 0.0 {
                            let k = b.offset + i;
                            child_pattern[k / 64] |= 1 << (k % 64);
                        }
                    }
                    let s = slope_of(&act, z);
                    if s != 1.0 {
                        next.rows[i][0] *= s;
                        next.rows[i][1] *= s;
                        next.c[i] *= s;
                    }
                }
                (cell, next, child_pattern)
            })
            .collect();
        let results: Vec<Leaves> = if children.len() > 1 {
            children
                .into_par_iter()
                .map(|(cell, m, p)| self.subdivide(cell, m, layer + 1, p))
                .collect()
        } else {
            children
                .into_iter()
                .map(|(cell, m, p)| self.subdivide(cell, m, layer + 1, p))
                .collect()
        };
        let mut regions = Vec::new();
        let mut pieces = pieces_here;
        for (r, p) in results {
            regions.extend(r);
            pieces.extend(p);
        }
        (regions, pieces)
    }
}

/// Exact partition of the slice. `up_to_layer = Some(k)` stops after the
/// first `k` layers, leaving each region's map into layer `k`'s output.
pub fn compute_partition(net: &Network, slice: &Slice, up_to_layer: Option<usize>) -> Result<SlicePartition> {
    compute_partition_with(net, slice, up_to_layer, PartitionOptions::default())
}

pub fn compute_partition_with(
    net: &Network,
    slice: &Slice,
    up_to_layer: Option<usize>,
    opts: PartitionOptions,
) -> Result<SlicePartition> {
    crate::error::check_dim("slice dimension", net.input_dim(), slice.dim())?;
    let depth = net.depth();
    let used = match up_to_layer {
        None => depth,
        Some(k) if (1..=depth).contains(&k) => k,
        Some(k) => {
            return Err(Error::invalid(
                "up_to_layer",
                format!("{k} outside 1..={depth}"),
            ))
        }
    };
    let mut layers = Vec::with_capacity(used);
    let mut layout = Vec::with_capacity(used);
    let mut offset = 0;
    for (l, layer) in net.layers()[..used].iter().enumerate() {
        if !layer.activation.is_piecewise_linear() {
            return Err(Error::UnsupportedActivation {
                layer: l,
                activation: layer.activation.to_string(),
                reason: "exact partitions need piecewise-linear activations",
            });
        }
        if layer.activation.has_kink() {
            layout.push(Some(PatternBlock {
                layer: l,
                offset,
                width: layer.out_dim(),
            }));
            offset += layer.out_dim();
        } else {
            layout.push(None);
        }
        layers.push(FoldedLayer {
            layer,
            scale: layer.bn.as_ref().map(|bn| bn.fold()),
        });
    }
    let b = slice.bounds;
    let ctx = Ctx {
        layers,
        layout: layout.clone(),
        words: offset.div_ceil(64),
        area_eps: opts.area_eps * b.area(),
        dist_eps: opts.dist_eps * b.width().max(b.height()),
    };
    let input = Affine {
        rows: (0..slice.dim())
            .map(|j| [slice.basis[[j, 0]], slice.basis[[j, 1]]])
            .collect(),
        c: slice.origin.to_vec(),
    };
    let (regions, neuron_pieces) = ctx.subdivide(b.polygon(), input, 0, vec![0; ctx.words]);
    let mut part = SlicePartition {
        slice: slice.clone(),
        regions,
        layer_count_used: used,
        pattern_layout: layout.into_iter().flatten().collect(),
        boundary_segments: Vec::new(),
        neuron_pieces,
    };
    // The decision boundary is only defined through the logits.
    if used == depth {
        part.boundary_segments = super::stats::argmax_boundary(net, &part)?;
    }
    Ok(part)
}
