//! Built-in self-check battery. Each check builds its own fixture, compares
//! against an independent closed form or brute-force oracle and reports a
//! pass/fail entry.

use std::collections::HashSet;
use std::time::Instant;

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::lcprobe::{
    deformation, graph_eccentricity, local_complexity_with, make_neighborhood, shift_sweep, straddles_zero,
    CrossingPredicate, Neighborhood, ProbeConfig,
};
use crate::netcore::{bn_distance_check, init, Activation, Layer, Network};
use crate::slicegeom::{compute_partition, crossings_in_polygon_by_layer, polygon, Rect, Slice};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub tool: String,
    pub config_hash: String,
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Sizes for the battery; the defaults finish in seconds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatteryConfig {
    pub seed: u64,
    pub zero_bias: ZeroBiasSpec,
    pub shift: ShiftSpec,
    pub partition_nets: usize,
    pub partition_grid: usize,
    /// Crossing predicate under test; replaced only to check that the
    /// battery catches a broken one.
    #[serde(skip, default = "default_predicate")]
    pub predicate: CrossingPredicate,
}

fn default_predicate() -> CrossingPredicate {
    straddles_zero
}

impl Default for BatteryConfig {
    fn default() -> Self {
        BatteryConfig {
            seed: 0,
            zero_bias: ZeroBiasSpec {
                width: 100,
                depth: 10,
                input_dim: 784,
                radii: vec![1e-4, 1e-2, 1.0, 10.0],
                ps: vec![2, 25, 100],
            },
            shift: ShiftSpec {
                width: 50,
                depth: 8,
                input_dim: 784,
                radii: vec![0.1, 5.0],
                ps: vec![10, 20],
                repeats: 20,
            },
            partition_nets: 4,
            partition_grid: 600,
            predicate: straddles_zero,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroBiasSpec {
    pub width: usize,
    pub depth: usize,
    pub input_dim: usize,
    pub radii: Vec<f64>,
    pub ps: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftSpec {
    pub width: usize,
    pub depth: usize,
    pub input_dim: usize,
    pub radii: Vec<f64>,
    pub ps: Vec<usize>,
    pub repeats: usize,
}

fn timed(name: &str, f: impl FnOnce() -> Result<(bool, String)>) -> CheckResult {
    let t = Instant::now();
    let (passed, detail) = match f() {
        Ok(v) => v,
        Err(e) => (false, format!("error: {e}")),
    };
    CheckResult {
        name: name.into(),
        passed,
        detail,
        seconds: t.elapsed().as_secs_f64(),
    }
}

/// `depth` hidden Identity layers of `width` with zero bias, then a
/// 10-wide Identity output layer (not probed).
pub fn zero_bias_net(width: usize, depth: usize, input_dim: usize, seed: u64) -> Result<Network> {
    let mut arch = vec![input_dim];
    arch.extend(std::iter::repeat_n(width, depth));
    arch.push(10);
    let mut net = init(&arch, Activation::Identity, seed, 1.0)?;
    for layer in net.layers_mut() {
        layer.bias.fill(0.0);
    }
    Ok(net)
}

/// Every hidden layer of the zero-bias linear net must report exactly its
/// width at the origin, for every radius and direction count.
pub fn zero_bias_recovery(spec: &ZeroBiasSpec, seed: u64, predicate: CrossingPredicate) -> Result<(bool, String)> {
    let net = zero_bias_net(spec.width, spec.depth, spec.input_dim, seed)?;
    let origin = Array1::zeros(spec.input_dim);
    for &r in &spec.radii {
        for &p in &spec.ps {
            let cfg = ProbeConfig { p, r, seed };
            let nb = make_neighborhood(origin.view(), &cfg)?;
            let counts = local_complexity_with(&net, &nb, predicate)?;
            if let Some((k, &c)) = counts.iter().enumerate().find(|(_, &c)| c != spec.width) {
                return Ok((false, format!("r={r} P={p}: layer {k} reported {c}, expected {}", spec.width)));
            }
        }
    }
    Ok((
        true,
        format!(
            "{} layers x {} neurons recovered for {} radii x {} P values",
            spec.depth,
            spec.width,
            spec.radii.len(),
            spec.ps.len()
        ),
    ))
}

/// Mean LC at the origin must exceed mean LC at `[10]^d`.
pub fn shift_decreases_lc(spec: &ShiftSpec, seed: u64) -> Result<(bool, String)> {
    let mut arch = vec![spec.input_dim];
    arch.extend(std::iter::repeat_n(spec.width, spec.depth));
    arch.push(10);
    let net = init(&arch, Activation::leaky(0.01), seed, 1.0)?;
    let start = Array1::zeros(spec.input_dim);
    let end = Array1::from_elem(spec.input_dim, 10.0);
    let mut lines = Vec::new();
    let mut ok = true;
    for &r in &spec.radii {
        for &p in &spec.ps {
            let cfg = ProbeConfig { p, r, seed };
            let sweep = shift_sweep(&net, start.view(), end.view(), 2, &cfg, spec.repeats)?;
            let (a, b) = (sweep[0].lc.mean, sweep[1].lc.mean);
            ok &= a > b;
            lines.push(format!("r={r} P={p}: {a:.2} -> {b:.2}"));
        }
    }
    Ok((ok, lines.join("; ")))
}

/// Layer-0 eccentricity and diameter equal `2√2 r`, and an Identity
/// network keeps them at every layer.
pub fn eccentricity_closed_form(seed: u64) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for (d, p, r) in [(8usize, 2usize, 0.5), (20, 7, 0.01), (50, 25, 3.0)] {
        let cfg = ProbeConfig { p, r, seed };
        let x = Array1::from_elem(d, 0.3);
        let expect = 2.0 * std::f64::consts::SQRT_2 * r;
        let nb = make_neighborhood(x.view(), &cfg)?;
        let l0 = graph_eccentricity(nb.vertices.view());
        worst = worst.max((l0.mean_eccentricity - expect).abs()).max((l0.diameter - expect).abs());
        // Orthogonal Identity layers preserve every pairwise distance.
        let mut net_layers = Vec::new();
        let mut rng = crate::seed::rng(seed ^ 0x5eed);
        for _ in 0..3 {
            let q = random_orthogonal(d, &mut rng);
            net_layers.push(Layer::new(q, Array1::from_elem(d, 0.1), Activation::Identity)?);
        }
        let net = Network::new(d, net_layers)?;
        for l in deformation(&net, x.view(), &cfg)?.layers {
            worst = worst.max((l.mean_eccentricity - expect).abs()).max((l.diameter - expect).abs());
        }
    }
    Ok((worst < 1e-10, format!("max deviation {worst:.3e}")))
}

fn random_orthogonal(d: usize, rng: &mut impl Rng) -> Array2<f64> {
    let mut q = Array2::<f64>::zeros((d, d));
    for i in 0..d {
        let mut v: Array1<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        for _ in 0..2 {
            for j in 0..i {
                let proj = q.row(j).dot(&v);
                v.scaled_add(-proj, &q.row(j));
            }
        }
        let n = v.dot(&v).sqrt();
        q.row_mut(i).assign(&(v / n));
    }
    q
}

/// Mean squared point-to-hyperplane distance, measured by explicit
/// orthogonal projection, against `σ²/||w||²`.
pub fn bn_identity(instances: usize, seed: u64) -> Result<(bool, String)> {
    let mut rng = crate::seed::rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let d = rng.random_range(2..40);
        let n = rng.random_range(2..200);
        let w: Array1<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let offset = rng.random_range(-3.0..3.0);
        let batch = Array2::from_shape_fn((n, d), |_| rng.random_range(-1.0..1.0) + offset);
        let layer = Layer::new(w.clone().insert_axis(Axis(0)), Array1::zeros(1), Activation::Relu)?;
        let net = Network::new(d, vec![layer])?;
        let (_, rhs) = bn_distance_check(&net, 0, 0, batch.view())?;
        let proj: Vec<f64> = batch.rows().into_iter().map(|v| v.dot(&w)).collect();
        let mu = proj.iter().sum::<f64>() / n as f64;
        let wn = w.dot(&w);
        let mut lhs = 0.0;
        for (v, p) in batch.rows().into_iter().zip(&proj) {
            let foot = &v - &(&w * ((p - mu) / wn));
            let diff = &v - &foot;
            lhs += diff.dot(&diff);
        }
        lhs /= n as f64;
        worst = worst.max((lhs - rhs).abs() / rhs);
    }
    Ok((worst < 1e-10, format!("max relative error {worst:.3e} over {instances} instances")))
}

/// Random 2-layer ReLU net on 2-D input with `neurons` hidden units split
/// over two layers.
pub fn small_partition_net(seed: u64) -> Result<Network> {
    let mut rng = crate::seed::rng(seed);
    let h1 = rng.random_range(4..=16);
    let h2 = rng.random_range(4..=16);
    init(&[2, h1, h2, 2], Activation::Relu, seed, 1.0)
}

/// Distinct activation patterns over a `grid × grid` lattice of cell centres.
pub fn grid_patterns(net: &Network, bounds: &Rect, grid: usize) -> Result<HashSet<Vec<u64>>> {
    let mut seen: HashSet<Vec<u64>> = HashSet::new();
    let kinked: Vec<usize> = (0..net.depth()).filter(|&l| net.layers()[l].activation.has_kink()).collect();
    for j in 0..grid {
        let v = bounds.v_min + (j as f64 + 0.5) * bounds.height() / grid as f64;
        let pts = Array2::from_shape_fn((grid, 2), |(i, k)| {
            if k == 0 {
                bounds.u_min + (i as f64 + 0.5) * bounds.width() / grid as f64
            } else {
                v
            }
        });
        let trace = crate::netcore::forward(net, pts.view())?;
        for i in 0..grid {
            let mut key = Vec::new();
            let mut bit = 0usize;
            for &l in &kinked {
                for &z in trace.preacts[l].row(i) {
                    if bit % 64 == 0 {
                        key.push(0u64);
                    }
                    if z > 0.0 {
                        *key.last_mut().expect("pushed") |= 1 << (bit % 64);
                    }
                    bit += 1;
                }
            }
            seen.insert(key);
        }
    }
    Ok(seen)
}

/// Minimum over edges of the farthest vertex distance to that edge's line.
pub fn polygon_width(poly: &[[f64; 2]]) -> f64 {
    let m = poly.len();
    (0..m)
        .map(|e| {
            let (a, b) = (poly[e], poly[(e + 1) % m]);
            let len = polygon::dist2(a, b).sqrt();
            poly.iter()
                .map(|q| ((b[0] - a[0]) * (q[1] - a[1]) - (b[1] - a[1]) * (q[0] - a[0])).abs() / len)
                .fold(0.0, f64::max)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Exact partition of one net compared with the grid oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleComparison {
    pub exact: usize,
    pub grid: usize,
    /// Every grid pattern is an exact region's pattern.
    pub grid_subset: bool,
    /// Regions wide enough to hold a grid point that the grid missed.
    pub wide_missed: usize,
    /// Width of the narrowest region the grid missed.
    pub missed_min_width: Option<f64>,
    pub max_map_error: f64,
}

impl OracleComparison {
    pub fn relative_deviation(&self) -> f64 {
        (self.exact as f64 - self.grid as f64).abs() / self.grid as f64
    }
}

/// Compares the exact partition of `net` on `bounds` with a grid oracle and
/// checks every region's affine map at `samples` random interior points.
pub fn compare_with_grid(
    net: &Network,
    bounds: &Rect,
    grid: usize,
    samples: usize,
    rng: &mut impl Rng,
) -> Result<OracleComparison> {
    let slice = Slice::plane(*bounds);
    let part = compute_partition(net, &slice, None)?;
    let seen = grid_patterns(net, bounds, grid)?;
    let spacing = (bounds.width() / grid as f64).max(bounds.height() / grid as f64);
    let mut exact_patterns = HashSet::new();
    let mut wide_missed = 0;
    let mut missed_min_width: Option<f64> = None;
    let mut max_map_error: f64 = 0.0;
    for r in &part.regions {
        exact_patterns.insert(r.pattern.clone());
        if !seen.contains(&r.pattern) {
            let w = polygon_width(&r.polygon);
            missed_min_width = Some(missed_min_width.map_or(w, |m| m.min(w)));
            // A convex polygon of width w holds a disk of radius w/3, which
            // contains a lattice point once w/3 exceeds the spacing.
            if w > 3.0 * spacing {
                wide_missed += 1;
            }
        }
        for _ in 0..samples {
            let wts: Vec<f64> = r.polygon.iter().map(|_| rng.random::<f64>() + 1e-3).collect();
            let s: f64 = wts.iter().sum();
            let mut u = [0.0, 0.0];
            for (q, wi) in r.polygon.iter().zip(&wts) {
                u[0] += q[0] * wi / s;
                u[1] += q[1] * wi / s;
            }
            let direct = net.eval_point(slice.lift(u).view())?;
            let local = r.eval(u);
            max_map_error = (&direct - &local).iter().fold(max_map_error, |m, e| m.max(e.abs()));
        }
    }
    Ok(OracleComparison {
        exact: part.regions.len(),
        grid: seen.len(),
        grid_subset: seen.is_subset(&exact_patterns),
        wide_missed,
        missed_min_width,
        max_map_error,
    })
}

/// Resolution-aware oracle check: the grid may only miss regions too thin
/// to hold a lattice point, never report a pattern the partition lacks, and
/// every affine map must match direct evaluation to 1e-8.
pub fn partition_oracle(nets: usize, grid: usize, seed: u64) -> Result<(bool, String)> {
    let bounds = Rect::new(-2.0, 2.0, -2.0, 2.0)?;
    let mut rng = crate::seed::rng(seed ^ 0xfeed);
    let mut ok = true;
    let mut worst_rel: f64 = 0.0;
    let mut worst_map: f64 = 0.0;
    for k in 0..nets {
        let net = small_partition_net(crate::seed::derive(seed, k as u64))?;
        let c = compare_with_grid(&net, &bounds, grid, 20, &mut rng)?;
        ok &= c.grid_subset && c.wide_missed == 0 && c.max_map_error < 1e-8;
        worst_rel = worst_rel.max(c.relative_deviation());
        worst_map = worst_map.max(c.max_map_error);
    }
    Ok((
        ok,
        format!(
            "max region-count deviation {:.2}% (thin regions only), max map error {worst_map:.2e}",
            100.0 * worst_rel
        ),
    ))
}

/// Layer-1 LC with in-slice directions equals the exact count of layer-1
/// boundaries meeting the probed cross-polytope.
pub fn lc_matches_slice(nets: usize, seed: u64, predicate: CrossingPredicate) -> Result<(bool, String)> {
    let bounds = Rect::new(-2.0, 2.0, -2.0, 2.0)?;
    let slice = Slice::plane(bounds);
    let mut rng = crate::seed::rng(seed ^ 0xd15c);
    let mut mismatches = 0;
    let mut probes = 0;
    for k in 0..nets {
        let net = small_partition_net(crate::seed::derive(seed, k as u64))?;
        let part = compute_partition(&net, &slice, None)?;
        for _ in 0..50 {
            let c = [rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)];
            let r = rng.random_range(0.01..0.4);
            let theta: f64 = rng.random_range(0.0..std::f64::consts::PI);
            let dirs = ndarray::array![[theta.cos(), theta.sin()], [-theta.sin(), theta.cos()]];
            let nb = Neighborhood::from_directions(ndarray::array![c[0], c[1]].view(), dirs.view(), r)?;
            let lc = local_complexity_with(&net, &nb, predicate)?;
            let diamond: Vec<[f64; 2]> = [0usize, 2, 1, 3]
                .iter()
                .map(|&i| [nb.vertices[[i, 0]], nb.vertices[[i, 1]]])
                .collect();
            let diamond = if polygon::signed_area(&diamond) < 0.0 {
                diamond.into_iter().rev().collect()
            } else {
                diamond
            };
            let exact = crossings_in_polygon_by_layer(&part, &diamond);
            probes += 1;
            if lc[0] != exact[0] {
                mismatches += 1;
            }
        }
    }
    Ok((mismatches == 0, format!("{mismatches} mismatches over {probes} probes")))
}

pub fn run_battery(cfg: &BatteryConfig) -> ValidationReport {
    let s = cfg.seed;
    let checks = vec![
        timed("zero_bias_recovery", || zero_bias_recovery(&cfg.zero_bias, s, cfg.predicate)),
        timed("shift_sweep_endpoints", || shift_decreases_lc(&cfg.shift, s)),
        timed("eccentricity_closed_form", || eccentricity_closed_form(s)),
        timed("bn_distance_identity", || bn_identity(100, s)),
        timed("partition_grid_oracle", || partition_oracle(cfg.partition_nets, cfg.partition_grid, s)),
        timed("lc_slice_cross_check", || lc_matches_slice(cfg.partition_nets, s, cfg.predicate)),
    ];
    ValidationReport {
        tool: crate::TOOL.into(),
        config_hash: crate::learn::config_hash(cfg),
        checks,
    }
}
