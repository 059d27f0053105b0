use ndarray::{array, Array1, Array2};
use rand::Rng;
use splinelc::netcore::{init, Activation, BnParams, Layer, Network};
use splinelc::slicegeom::{
    self, compute_partition, crossing_count_in_disk, decision_boundary, emit, load_json, polygon, region_stats, ColorMode,
    EmitOptions, Format, Rect, Slice,
};
use std::collections::HashSet;

fn box2(h: f64) -> Rect {
    Rect::new(-h, h, -h, h).unwrap()
}

/// Activation bits of every kinked neuron at `x`, by direct forward pass.
fn pattern_at(net: &Network, x: &Array1<f64>) -> Vec<bool> {
    let mut bits = Vec::new();
    let mut h = x.clone();
    for layer in net.layers() {
        let mut z = layer.weight.dot(&h) + &layer.bias;
        if let Some(bn) = &layer.bn {
            let (s, t) = bn.fold();
            z = &z * &s + &t;
        }
        if layer.activation.has_kink() {
            bits.extend(z.iter().map(|&v| v > 0.0));
        }
        h = z.mapv(|v| layer.activation.apply(v));
    }
    bits
}

#[test]
fn three_lines_in_general_position_give_seven_regions() {
    let w = array![[1.0, 0.2], [-0.3, 1.0], [1.0, 1.1]];
    let b = array![0.1, -0.2, 0.35];
    let net = Network::new(2, vec![Layer::new(w, b, Activation::Relu).unwrap()]).unwrap();
    let slice = Slice::plane(box2(2.0));
    let part = compute_partition(&net, &slice, None).unwrap();
    assert_eq!(part.regions.len(), 7);
    // Brute-force grid oracle.
    let mut seen = HashSet::new();
    for i in 0..400 {
        for j in 0..400 {
            let u = array![-2.0 + (i as f64 + 0.5) / 100.0, -2.0 + (j as f64 + 0.5) / 100.0];
            seen.insert(pattern_at(&net, &u));
        }
    }
    assert_eq!(seen.len(), 7);
}

#[test]
fn identity_network_single_region() {
    let net = init(&[5, 4, 3], Activation::Identity, 2, 1.0).unwrap();
    let mut rng = splinelc::seed::rng(1);
    let pts: Vec<Array1<f64>> = (0..3).map(|_| Array1::from_shape_simple_fn(5, || rng.random::<f64>())).collect();
    let slice = slicegeom::slice_through(pts[0].view(), pts[1].view(), pts[2].view(), 0.2).unwrap();
    let part = compute_partition(&net, &slice, None).unwrap();
    assert_eq!(part.regions.len(), 1);
    let lin = net.layers()[1].weight.dot(&net.layers()[0].weight).dot(&slice.basis);
    let r = &part.regions[0];
    assert!((&r.a - &lin).iter().all(|e| e.abs() < 1e-12));
    let stats = region_stats(&part, None).unwrap();
    assert_eq!(stats.region_count, 1);
    let fro = lin.iter().map(|x| x * x).sum::<f64>().sqrt();
    assert!((stats.slope_norms[0] - fro).abs() < 1e-12);
}

#[test]
fn gelu_is_rejected() {
    let net = init(&[2, 4, 2], Activation::Gelu, 0, 1.0).unwrap();
    let err = compute_partition(&net, &Slice::plane(box2(1.0)), None).unwrap_err();
    assert!(matches!(err, splinelc::Error::UnsupportedActivation { layer: 0, .. }));
}

fn random_point_in(poly: &[[f64; 2]], rng: &mut impl Rng) -> [f64; 2] {
    // Convex combination with random weights lands in the interior.
    let w: Vec<f64> = poly.iter().map(|_| rng.random::<f64>() + 1e-3).collect();
    let s: f64 = w.iter().sum();
    let mut p = [0.0, 0.0];
    for (q, wi) in poly.iter().zip(&w) {
        p[0] += q[0] * wi / s;
        p[1] += q[1] * wi / s;
    }
    p
}

#[test]
fn tiling_affine_maps_and_refinement() {
    let mut rng = splinelc::seed::rng(11);
    for (seed, act) in [(1, Activation::Relu), (2, Activation::leaky(0.1)), (3, Activation::Relu)] {
        let mut net = init(&[2, 8, 8, 6, 3], act, seed, 1.0).unwrap();
        if seed == 3 {
            let bn = BnParams {
                mu: Array1::from_elem(8, 0.1),
                sigma: Array1::from_elem(8, 0.7),
                gamma: Array1::from_elem(8, 1.3),
                beta: Array1::from_elem(8, -0.05),
                epsilon: 1e-5,
            };
            let l = net.layers_mut()[1].clone().with_bn(bn).unwrap();
            net.layers_mut()[1] = l;
        }
        let slice = Slice::plane(box2(3.0));
        let part = compute_partition(&net, &slice, None).unwrap();
        let total = part.total_area();
        assert!((total - 36.0).abs() / 36.0 < 1e-6);
        for r in &part.regions {
            assert!(polygon::signed_area(&r.polygon) > 0.0);
            for _ in 0..10 {
                let u = random_point_in(&r.polygon, &mut rng);
                let direct = net.eval_point(slice.lift(u).view()).unwrap();
                let local = r.eval(u);
                assert!((&direct - &local).iter().all(|e| e.abs() < 1e-8));
            }
        }
        // Interiors are disjoint: random points fall strictly inside exactly
        // one region.
        for _ in 0..500 {
            let u = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
            let inside = part
                .regions
                .iter()
                .filter(|r| {
                    let n = r.polygon.len();
                    (0..n).all(|i| {
                        let a = r.polygon[i];
                        let b = r.polygon[(i + 1) % n];
                        (b[0] - a[0]) * (u[1] - a[1]) - (b[1] - a[1]) * (u[0] - a[0]) > 1e-12
                    })
                })
                .count();
            assert!(inside <= 1);
        }
        // Layer k refines layer k-1.
        for k in 2..=net.depth() {
            let coarse = compute_partition(&net, &slice, Some(k - 1)).unwrap();
            let fine = compute_partition(&net, &slice, Some(k)).unwrap();
            assert!(fine.regions.len() >= coarse.regions.len());
            let mut covered = vec![0.0; coarse.regions.len()];
            for r in &fine.regions {
                let c = polygon::vertex_centroid(&r.polygon);
                let parent = coarse.locate(c).unwrap();
                covered[parent] += r.area();
            }
            for (r, a) in coarse.regions.iter().zip(covered) {
                assert!((r.area() - a).abs() < 1e-9 * 36.0, "layer {k}");
            }
        }
    }
}

#[test]
fn disk_counts_match_dense_sampling() {
    let net = init(&[2, 12, 10, 2], Activation::Relu, 4, 1.0).unwrap();
    let slice = Slice::plane(box2(2.0));
    let part = compute_partition(&net, &slice, None).unwrap();
    let mut rng = splinelc::seed::rng(6);
    for _ in 0..20 {
        let c = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let r = rng.random_range(0.05..0.6);
        let exact = crossing_count_in_disk(&part, c, r);
        // Dense polar sample of the disk: a neuron crosses it iff its
        // pre-activation changes sign over the sample.
        let mut lo = vec![f64::INFINITY; 22];
        let mut hi = vec![f64::NEG_INFINITY; 22];
        for ri in 0..=60 {
            for ti in 0..720 {
                let rad = r * ri as f64 / 60.0;
                let th = ti as f64 * std::f64::consts::TAU / 720.0;
                let x = array![c[0] + rad * th.cos(), c[1] + rad * th.sin()];
                let trace = splinelc::netcore::forward(&net, x.view().insert_axis(ndarray::Axis(0))).unwrap();
                let mut k = 0;
                for z in &trace.preacts[..2] {
                    for &v in z.row(0) {
                        lo[k] = f64::min(lo[k], v);
                        hi[k] = f64::max(hi[k], v);
                        k += 1;
                    }
                }
            }
        }
        let sampled = lo.iter().zip(&hi).filter(|(l, h)| **l < 0.0 && **h > 0.0).count();
        // Sampling can only miss crossings that graze the disk.
        assert!(sampled <= exact && exact <= sampled + 1, "exact {exact} sampled {sampled}");
    }
}

#[test]
fn disk_inside_one_region_and_single_line() {
    let w = array![[1.0, 0.0]];
    let net = Network::new(2, vec![Layer::new(w, array![0.0], Activation::Relu).unwrap()]).unwrap();
    let part = compute_partition(&net, &Slice::plane(box2(1.0)), None).unwrap();
    assert_eq!(crossing_count_in_disk(&part, [0.5, 0.0], 0.2), 0);
    assert_eq!(crossing_count_in_disk(&part, [0.1, 0.0], 0.2), 1);
}

#[test]
fn decision_boundary_lies_on_logit_ties() {
    let net = init(&[2, 16, 16, 3], Activation::Relu, 9, 2.0).unwrap();
    let part = compute_partition(&net, &Slice::plane(box2(2.0)), None).unwrap();
    let segs = decision_boundary(&net, &part, 0, 1).unwrap();
    assert!(!segs.is_empty());
    for s in &segs {
        for t in [0.0, 0.5, 1.0] {
            let u = array![s[0][0] + t * (s[1][0] - s[0][0]), s[0][1] + t * (s[1][1] - s[0][1])];
            let out = net.eval_point(u.view()).unwrap();
            assert!((out[0] - out[1]).abs() < 1e-8);
        }
    }
    // Continuity: every interior endpoint is shared with another segment.
    let b = part.slice.bounds;
    let on_edge = |p: [f64; 2]| {
        (p[0] - b.u_min).abs() < 1e-9 || (p[0] - b.u_max).abs() < 1e-9 || (p[1] - b.v_min).abs() < 1e-9 || (p[1] - b.v_max).abs() < 1e-9
    };
    for (i, s) in segs.iter().enumerate() {
        for p in s {
            if on_edge(*p) {
                continue;
            }
            let shared = segs
                .iter()
                .enumerate()
                .any(|(j, t)| j != i && t.iter().any(|q| polygon::dist2(*p, *q).sqrt() < 1e-8));
            assert!(shared, "dangling endpoint {p:?}");
        }
    }
    assert!(decision_boundary(&net, &part, 0, 3).is_err());
}

#[test]
fn linear_two_class_boundary_is_one_segment() {
    let w = array![[1.0, -1.0], [0.0, 0.5]];
    let net = Network::new(2, vec![Layer::new(w, array![0.0, 0.1], Activation::Identity).unwrap()]).unwrap();
    let part = compute_partition(&net, &Slice::plane(box2(1.0)), None).unwrap();
    assert_eq!(decision_boundary(&net, &part, 0, 1).unwrap().len(), 1);
}

#[test]
fn xor_boundary_separates_clusters() {
    use splinelc::learn::{train, Dataset, Split, TrainConfig};
    let centers = [([0.0, 0.0], 0), ([1.0, 1.0], 0), ([0.0, 1.0], 1), ([1.0, 0.0], 1)];
    let mut rng = splinelc::seed::rng(5);
    let mut x = Array2::zeros((200, 2));
    let mut y = Vec::new();
    for i in 0..200 {
        let (c, l) = centers[i % 4];
        x[[i, 0]] = c[0] + rng.random_range(-0.1..0.1);
        x[[i, 1]] = c[1] + rng.random_range(-0.1..0.1);
        y.push(l);
    }
    let ds = Dataset::classification(x, y, 2, Split::Train).unwrap();
    let mut net = init(&[2, 16, 16, 2], Activation::Relu, 1, 1.0).unwrap();
    let cfg = TrainConfig {
        steps: 800,
        batch_size: 50,
        lr: 1e-2,
        checkpoint_count: 2,
        ..TrainConfig::default()
    };
    let log = train(&mut net, &ds, None, &cfg, &mut []).unwrap();
    assert_eq!(log.rows.last().unwrap().train_acc, Some(1.0));
    let slice = Slice::plane(Rect::new(-0.5, 1.5, -0.5, 1.5).unwrap());
    let mut part = compute_partition(&net, &slice, None).unwrap();
    part.boundary_segments = decision_boundary(&net, &part, 0, 1).unwrap();
    assert!(!part.boundary_segments.is_empty());
    for (c, l) in centers {
        let pred = net.classify(array![[c[0], c[1]]].view()).unwrap()[0];
        assert_eq!(pred, l);
    }
}

#[test]
fn json_round_trip_and_svg() {
    let net = init(&[2, 10, 10, 2], Activation::Relu, 3, 1.0).unwrap();
    let mut part = compute_partition(&net, &Slice::plane(box2(1.5)), None).unwrap();
    part.boundary_segments = decision_boundary(&net, &part, 0, 1).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.json");
    emit(&part, &path, Format::Json, &EmitOptions::default()).unwrap();
    let back = load_json(&path).unwrap();
    assert_eq!(back.regions.len(), region_stats(&part, None).unwrap().region_count);
    for (a, b) in back.regions.iter().zip(&part.regions) {
        assert_eq!(a.polygon, b.polygon);
        assert!(a.pattern.is_none());
    }
    assert_eq!(back.boundary, part.boundary_segments);
    let text = std::fs::read_to_string(&path).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    for key in ["bounds", "basis", "origin", "regions", "boundary"] {
        assert!(v.get(key).is_some(), "{key}");
    }
    let opts = EmitOptions {
        color: ColorMode::SlopeNorm,
        ..EmitOptions::default()
    };
    let svg = slicegeom::render_svg(&part, &opts);
    assert_eq!(svg.matches("<polygon").count(), part.regions.len());
    assert_eq!(svg.matches("<path").count(), 1);
    assert!(svg.contains("viewBox=\"-1.5 -1.5 3 3\""));
    // Colours depend only on the seed.
    let r1 = slicegeom::render_svg(&part, &EmitOptions::default());
    let r2 = slicegeom::render_svg(&part, &EmitOptions::default());
    assert_eq!(r1, r2);

    let id = init(&[2, 3, 2], Activation::Identity, 0, 1.0).unwrap();
    let one = compute_partition(&id, &Slice::plane(box2(1.0)), None).unwrap();
    assert_eq!(slicegeom::render_svg(&one, &EmitOptions::default()).matches("<polygon").count(), 1);
}

#[test]
fn density_grid_totals_region_count() {
    let net = init(&[2, 12, 12, 2], Activation::Relu, 8, 1.0).unwrap();
    let part = compute_partition(&net, &Slice::plane(box2(2.0)), None).unwrap();
    let stats = region_stats(&part, Some((7, 5))).unwrap();
    let grid = stats.density.unwrap();
    let cell = (4.0 / 7.0) * (4.0 / 5.0);
    let total: f64 = grid.iter().sum::<f64>() * cell;
    assert!((total - part.regions.len() as f64).abs() < 1e-8);
    let whole = slicegeom::region_density(&part, &box2(2.0));
    assert!((whole * 16.0 - part.regions.len() as f64).abs() < 1e-8);
}
