use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::neighborhood::{make_neighborhood, Neighborhood, ProbeConfig};
use crate::error::{Error, Result};
use crate::netcore::{BnMode, Network};

/// Images of the probe vertices at the input of every layer; entry 0 is the
/// input-space frame itself.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedNeighborhood {
    pub layers: Vec<Array2<f64>>,
}

pub fn embed(net: &Network, nb: &Neighborhood) -> Result<EmbeddedNeighborhood> {
    let mut layers = Vec::with_capacity(net.depth());
    let mut h = nb.vertices.clone();
    for (k, layer) in net.layers().iter().enumerate() {
        let (z, _) = crate::netcore::forward::layer_preact(layer, h.view(), BnMode::Eval)?;
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "neighborhood embedding",
                layer: k,
            });
        }
        layers.push(std::mem::replace(&mut h, z.mapv_into(|v| layer.activation.apply(v))));
    }
    Ok(EmbeddedNeighborhood { layers })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerDeformation {
    pub mean_eccentricity: f64,
    pub diameter: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeformationReport {
    /// Entry `k` describes the frame at the input of layer `k`.
    pub layers: Vec<LayerDeformation>,
}

/// Eccentricity statistics of the embedded cross-polytope graph: every pair
/// of vertices is joined except antipodes `(2p, 2p + 1)`, weighted by
/// Euclidean distance.
pub fn graph_eccentricity(vertices: ArrayView2<'_, f64>) -> LayerDeformation {
    let n = vertices.nrows();
    let mut dist = vec![f64::INFINITY; n * n];
    for i in 0..n {
        dist[i * n + i] = 0.0;
        for j in (i + 1)..n {
            if i / 2 == j / 2 {
                continue;
            }
            let d = euclid(vertices.row(i), vertices.row(j));
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    // Floyd-Warshall; n = 2P is small.
    for k in 0..n {
        for i in 0..n {
            let dik = dist[i * n + k];
            if !dik.is_finite() {
                continue;
            }
            for j in 0..n {
                let alt = dik + dist[k * n + j];
                if alt < dist[i * n + j] {
                    dist[i * n + j] = alt;
                }
            }
        }
    }
    let ecc: Vec<f64> = (0..n)
        .map(|i| {
            dist[i * n..(i + 1) * n]
                .iter()
                .copied()
                .filter(|d| d.is_finite())
                .fold(0.0, f64::max)
        })
        .collect();
    LayerDeformation {
        mean_eccentricity: ecc.iter().sum::<f64>() / n.max(1) as f64,
        diameter: ecc.iter().copied().fold(0.0, f64::max),
    }
}

fn euclid(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn deformation(net: &Network, x: ArrayView1<'_, f64>, cfg: &ProbeConfig) -> Result<DeformationReport> {
    let nb = make_neighborhood(x, cfg)?;
    let emb = embed(net, &nb)?;
    Ok(DeformationReport {
        layers: emb.layers.iter().map(|v| graph_eccentricity(v.view())).collect(),
    })
}
