use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::crossings::{column_extrema, straddles_zero, CrossingPredicate};
use super::neighborhood::{orthonormal_directions, Neighborhood, ProbeConfig};
use crate::error::{check_dim, Error, Result};
use crate::netcore::{BnMode, Network};

/// Two-sided 99% normal quantile.
pub const CI_Z: f64 = 2.576;

/// Rows pushed through the network per work item in batched probes.
const ROWS_PER_CHUNK: usize = 2048;

/// Crossing counts of one probe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LcReport {
    /// `N` per probed layer (every layer but a final Identity logit layer).
    pub per_layer: Vec<usize>,
    pub total: usize,
    pub config: ProbeConfig,
    pub center: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointClass {
    Train,
    Test,
    Random,
}

impl PointClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            PointClass::Train => "train",
            PointClass::Test => "test",
            PointClass::Random => "random",
        }
    }
}

/// Mean with a normal-approximation 99% confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub stderr: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

impl Summary {
    pub fn from_samples(xs: &[f64]) -> Summary {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let stderr = if xs.len() > 1 {
            let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        Summary {
            mean,
            stderr,
            ci_lo: mean - CI_Z * stderr,
            ci_hi: mean + CI_Z * stderr,
        }
    }

    pub fn half_width(&self) -> f64 {
        CI_Z * self.stderr
    }
}

/// LC over a batch of probe centres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LcAggregate {
    pub class: PointClass,
    pub config: ProbeConfig,
    pub total: Summary,
    pub per_layer: Vec<Summary>,
    pub per_point: Vec<usize>,
    pub per_point_layers: Vec<Vec<usize>>,
}

/// Counts crossings for `vertices.nrows() / group` stacked neighbourhoods of
/// `group` vertices each. Returns a `neighbourhoods × probed layers` matrix.
pub fn probe_neighborhood(
    net: &Network,
    vertices: ArrayView2<'_, f64>,
    group: usize,
    predicate: CrossingPredicate,
) -> Result<Array2<usize>> {
    check_dim("probe vertices", net.input_dim(), vertices.ncols())?;
    if group == 0 || vertices.nrows() % group != 0 {
        return Err(Error::invalid("group", "vertex rows must split into equal groups"));
    }
    let groups = vertices.nrows() / group;
    let probed = net.probed_layers();
    let mut counts = Array2::zeros((groups, probed.len()));
    let mut h = vertices.to_owned();
    for (k, layer) in net.layers()[..probed.end].iter().enumerate() {
        let (z, _) = crate::netcore::forward::layer_preact(layer, h.view(), BnMode::Eval)?;
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "local complexity",
                layer: k,
            });
        }
        for g in 0..groups {
            let block = z.slice(s![g * group..(g + 1) * group, ..]);
            let (mins, maxs) = column_extrema(block);
            counts[[g, k]] = mins.iter().zip(&maxs).filter(|(&lo, &hi)| predicate(lo, hi)).count();
        }
        if k + 1 < probed.end {
            h = z.mapv_into(|v| layer.activation.apply(v));
        }
    }
    Ok(counts)
}

/// Per-layer crossing counts for an explicit neighbourhood.
pub fn local_complexity_with(
    net: &Network,
    nb: &Neighborhood,
    predicate: CrossingPredicate,
) -> Result<Vec<usize>> {
    let counts = probe_neighborhood(net, nb.vertices.view(), nb.vertices.nrows(), predicate)?;
    Ok(counts.row(0).to_vec())
}

pub fn local_complexity(net: &Network, x: ArrayView1<'_, f64>, cfg: &ProbeConfig) -> Result<LcReport> {
    check_dim("probe center", net.input_dim(), x.len())?;
    let nb = super::make_neighborhood(x, cfg)?;
    let per_layer = local_complexity_with(net, &nb, straddles_zero)?;
    Ok(LcReport {
        total: per_layer.iter().sum(),
        per_layer,
        config: *cfg,
        center: x.to_vec(),
    })
}

pub fn batch_lc(
    net: &Network,
    points: ArrayView2<'_, f64>,
    cfg: &ProbeConfig,
    class: PointClass,
) -> Result<LcAggregate> {
    batch_lc_with(net, points, cfg, class, straddles_zero)
}

/// One independent neighbourhood per point, seeded by
/// `derive(cfg.seed, point index)`; chunks run in parallel and are reduced in
/// point order.
pub fn batch_lc_with(
    net: &Network,
    points: ArrayView2<'_, f64>,
    cfg: &ProbeConfig,
    class: PointClass,
    predicate: CrossingPredicate,
) -> Result<LcAggregate> {
    let n = points.nrows();
    if n < 2 {
        return Err(Error::invalid("points", format!("batch LC needs at least 2 points, got {n}")));
    }
    check_dim("probe points", net.input_dim(), points.ncols())?;
    cfg.validate(net.input_dim())?;
    let group = 2 * cfg.p;
    let per_chunk = (ROWS_PER_CHUNK / group).max(1);
    let ranges: Vec<(usize, usize)> = (0..n)
        .step_by(per_chunk)
        .map(|a| (a, (a + per_chunk).min(n)))
        .collect();
    let blocks = ranges
        .par_iter()
        .map(|&(a, b)| {
            let d = net.input_dim();
            let mut verts = Array2::zeros(((b - a) * group, d));
            for i in a..b {
                let seed = crate::seed::derive(cfg.seed, i as u64);
                let dirs = orthonormal_directions(cfg.p, d, seed);
                let x = points.row(i);
                for (p, v) in dirs.rows().into_iter().enumerate() {
                    let base = (i - a) * group + 2 * p;
                    verts.row_mut(base).assign(&(&x + &(cfg.r * &v)));
                    verts.row_mut(base + 1).assign(&(&x - &(cfg.r * &v)));
                }
            }
            probe_neighborhood(net, verts.view(), group, predicate)
        })
        .collect::<Vec<_>>();

    let mut per_point_layers = Vec::with_capacity(n);
    for block in blocks {
        for row in block?.rows() {
            per_point_layers.push(row.to_vec());
        }
    }
    Ok(aggregate(class, *cfg, per_point_layers))
}

fn aggregate(class: PointClass, config: ProbeConfig, per_point_layers: Vec<Vec<usize>>) -> LcAggregate {
    let per_point: Vec<usize> = per_point_layers.iter().map(|r| r.iter().sum()).collect();
    let totals: Vec<f64> = per_point.iter().map(|&t| t as f64).collect();
    let layers = per_point_layers.first().map_or(0, Vec::len);
    let per_layer = (0..layers)
        .map(|k| {
            let xs: Vec<f64> = per_point_layers.iter().map(|r| r[k] as f64).collect();
            Summary::from_samples(&xs)
        })
        .collect();
    LcAggregate {
        class,
        config,
        total: Summary::from_samples(&totals),
        per_layer,
        per_point,
        per_point_layers,
    }
}

/// LC along the segment `(1 - t) start + t end`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub t: f64,
    pub lc: Summary,
}

/// Probes `repeats` independent neighbourhoods at each of `steps` evenly
/// spaced centres. The same direction seeds are reused at every centre.
pub fn shift_sweep(
    net: &Network,
    start: ArrayView1<'_, f64>,
    end: ArrayView1<'_, f64>,
    steps: usize,
    cfg: &ProbeConfig,
    repeats: usize,
) -> Result<Vec<SweepPoint>> {
    if steps < 2 {
        return Err(Error::invalid("steps", "a sweep needs at least 2 steps"));
    }
    check_dim("sweep start", net.input_dim(), start.len())?;
    check_dim("sweep end", net.input_dim(), end.len())?;
    let repeats = repeats.max(2);
    (0..steps)
        .map(|i| {
            let t = i as f64 / (steps - 1) as f64;
            let center = &start * (1.0 - t) + &end * t;
            let mut pts = Array2::zeros((repeats, center.len()));
            for mut row in pts.rows_mut() {
                row.assign(&center);
            }
            let agg = batch_lc(net, pts.view(), cfg, PointClass::Random)?;
            Ok(SweepPoint { t, lc: agg.total })
        })
        .collect()
}

/// `n` points uniform in the axis-aligned box `[lo, hi]`.
pub fn box_sample(lo: ArrayView1<'_, f64>, hi: ArrayView1<'_, f64>, n: usize, seed: u64) -> Array2<f64> {
    let mut rng = crate::seed::rng(seed);
    let d = lo.len();
    let mut out = Array2::zeros((n, d));
    for mut row in out.rows_mut() {
        for j in 0..d {
            row[j] = if hi[j] > lo[j] {
                rng.random_range(lo[j]..hi[j])
            } else {
                lo[j]
            };
        }
    }
    out
}

impl LcAggregate {
    pub fn layer_means(&self) -> Array1<f64> {
        self.per_layer.iter().map(|s| s.mean).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netcore::{init, Activation, Layer};
    use ndarray::{array, Array1, Array2};

    fn zero_bias_linear(d: usize, width: usize, depth: usize, seed: u64) -> Network {
        let mut arch = vec![d];
        arch.extend(std::iter::repeat_n(width, depth));
        arch.push(3);
        let mut net = init(&arch, Activation::Identity, seed, 1.0).unwrap();
        for l in net.layers_mut() {
            l.bias.fill(0.0);
        }
        net
    }

    #[test]
    fn zero_bias_recovers_every_hyperplane() {
        let net = zero_bias_linear(20, 16, 5, 1);
        for &(p, r) in &[(2, 1e-4), (5, 1.0), (20, 10.0)] {
            let rep = local_complexity(&net, Array1::zeros(20).view(), &ProbeConfig { p, r, seed: 3 }).unwrap();
            assert_eq!(rep.per_layer, vec![16; 5]);
            assert_eq!(rep.total, 80);
        }
    }

    #[test]
    fn single_neuron_outside_ball() {
        let mut w = Array2::zeros((1, 3));
        w[[0, 0]] = 1.0;
        let net = Network::new(3, vec![Layer::new(w, array![0.0], Activation::Relu).unwrap()]).unwrap();
        let rep = local_complexity(&net, array![2.0, 0.0, 0.0].view(), &ProbeConfig { p: 3, r: 1.0, seed: 0 }).unwrap();
        assert_eq!(rep.total, 0);
        let rep = local_complexity(&net, array![0.5, 0.0, 0.0].view(), &ProbeConfig { p: 3, r: 1.0, seed: 0 }).unwrap();
        assert_eq!(rep.total, 1);
    }

    #[test]
    fn first_layer_matches_exact_polytope_test() {
        // Affine functions attain extrema over conv(V) at vertices, so the
        // first-layer decision equals |w.x + b| <= r * max_p |w.v_p|.
        let net = init(&[6, 40, 3], Activation::Relu, 8, 1.0).unwrap();
        let x = array![0.1, -0.3, 0.2, 0.0, 0.4, -0.1];
        let cfg = ProbeConfig { p: 3, r: 0.2, seed: 4 };
        let nb = super::super::make_neighborhood(x.view(), &cfg).unwrap();
        let got = local_complexity_with(&net, &nb, straddles_zero).unwrap()[0];
        let layer = &net.layers()[0];
        let exact = (0..layer.out_dim())
            .filter(|&i| {
                let w = layer.weight.row(i);
                let c = w.dot(&x) + layer.bias[i];
                let reach = nb.directions.rows().into_iter().map(|v| w.dot(&v).abs()).fold(0.0, f64::max);
                c.abs() <= cfg.r * reach
            })
            .count();
        assert_eq!(got, exact);
    }

    #[test]
    fn batch_mean_matches_recomputation() {
        let net = init(&[5, 12, 12, 2], Activation::Relu, 2, 1.0).unwrap();
        let pts = box_sample(Array1::from_elem(5, -1.0).view(), Array1::from_elem(5, 1.0).view(), 30, 6);
        let cfg = ProbeConfig { p: 4, r: 0.3, seed: 10 };
        let agg = batch_lc(&net, pts.view(), &cfg, PointClass::Random).unwrap();
        let mean = agg.per_point.iter().sum::<usize>() as f64 / 30.0;
        assert!((agg.total.mean - mean).abs() < 1e-12);
        // Each point equals a standalone probe with the derived seed.
        for i in [0usize, 13, 29] {
            let c = ProbeConfig {
                seed: crate::seed::derive(cfg.seed, i as u64),
                ..cfg
            };
            assert_eq!(local_complexity(&net, pts.row(i), &c).unwrap().total, agg.per_point[i]);
        }
        assert!((agg.total.ci_hi - agg.total.mean - CI_Z * agg.total.stderr).abs() < 1e-12);
    }

    #[test]
    fn degenerate_batch_has_zero_stderr() {
        let net = zero_bias_linear(8, 6, 3, 0);
        let pts = Array2::zeros((10, 8));
        let agg = batch_lc(&net, pts.view(), &ProbeConfig { p: 3, r: 0.1, seed: 1 }, PointClass::Test).unwrap();
        assert_eq!(agg.total.stderr, 0.0);
        assert_eq!(agg.total.mean, 18.0);
        assert!(batch_lc(&net, pts.slice(s![..1, ..]), &ProbeConfig { p: 3, r: 0.1, seed: 1 }, PointClass::Test).is_err());
    }

    #[test]
    fn sweep_of_linear_net_without_kinks() {
        // A single Identity layer has nothing to count.
        let net = init(&[4, 2], Activation::Relu, 0, 1.0).unwrap();
        let sweep = shift_sweep(
            &net,
            Array1::zeros(4).view(),
            Array1::from_elem(4, 10.0).view(),
            5,
            &ProbeConfig { p: 2, r: 0.5, seed: 0 },
            3,
        )
        .unwrap();
        assert_eq!(sweep.len(), 5);
        assert!(sweep.iter().all(|s| s.lc.mean == 0.0));
        assert_eq!(sweep[4].t, 1.0);
    }

    #[test]
    fn sweep_from_origin_is_maximal_for_hyperplanes_through_origin() {
        let mut net = init(&[6, 30, 2], Activation::Relu, 5, 1.0).unwrap();
        net.layers_mut()[0].bias.fill(0.0);
        let sweep = shift_sweep(
            &net,
            Array1::zeros(6).view(),
            Array1::from_elem(6, 3.0).view(),
            6,
            &ProbeConfig { p: 3, r: 0.2, seed: 2 },
            4,
        )
        .unwrap();
        assert_eq!(sweep[0].lc.mean, 30.0);
        assert!(sweep.iter().all(|s| s.lc.mean <= sweep[0].lc.mean));
    }
}
