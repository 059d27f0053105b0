//! Property tests over randomly generated networks and inputs.

use ndarray::{Array1, Array2, Axis};
use proptest::prelude::*;
use splinelc::adversarial::{pgd_batch, AttackConfig};
use splinelc::lcprobe::{local_complexity, make_neighborhood};
use splinelc::learn::{log_spaced, parse_idx};
use splinelc::netcore::{forward, init, read_weights, write_weights};
use splinelc::slicegeom::{compute_partition, polygon, Rect, Slice};
use splinelc::{Activation, BnParams, Network, ProbeConfig};

fn activation() -> impl Strategy<Value = Activation> {
    prop_oneof![
        Just(Activation::Relu),
        (0.0..0.5f64).prop_map(Activation::leaky),
        Just(Activation::Gelu),
        Just(Activation::Identity),
    ]
}

fn piecewise_activation() -> impl Strategy<Value = Activation> {
    prop_oneof![Just(Activation::Relu), (0.01..0.5f64).prop_map(Activation::leaky)]
}

fn arch(input: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1usize..9, 1..4).prop_map(move |hidden| {
        let mut a = vec![input];
        a.extend(hidden);
        a.push(3);
        a
    })
}

fn with_random_bn(mut net: Network, seed: u64) -> Network {
    use rand::Rng;
    let mut rng = splinelc::seed::rng(seed);
    for l in net.layers_mut() {
        let w = l.out_dim();
        let bn = BnParams {
            mu: Array1::from_shape_fn(w, |_| rng.random_range(-1.0..1.0)),
            sigma: Array1::from_shape_fn(w, |_| rng.random_range(0.2..2.0)),
            gamma: Array1::from_shape_fn(w, |_| rng.random_range(-2.0..2.0)),
            beta: Array1::from_shape_fn(w, |_| rng.random_range(-1.0..1.0)),
            epsilon: 1e-5,
        };
        *l = l.clone().with_bn(bn).unwrap();
    }
    net
}

/// Reverses the neuron order of hidden layer `k`, fixing up the next layer.
fn permute_hidden(net: &Network, k: usize) -> Network {
    let mut out = net.clone();
    let layers = out.layers_mut();
    let w = layers[k].out_dim();
    let perm: Vec<usize> = (0..w).rev().collect();
    layers[k].weight = layers[k].weight.select(Axis(0), &perm);
    layers[k].bias = layers[k].bias.select(Axis(0), &perm);
    if let Some(bn) = &mut layers[k].bn {
        bn.mu = bn.mu.select(Axis(0), &perm);
        bn.sigma = bn.sigma.select(Axis(0), &perm);
        bn.gamma = bn.gamma.select(Axis(0), &perm);
        bn.beta = bn.beta.select(Axis(0), &perm);
    }
    layers[k + 1].weight = layers[k + 1].weight.select(Axis(1), &perm);
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn weights_round_trip(arch in arch(4), act in activation(), seed in any::<u64>(), bn in any::<bool>()) {
        let mut net = init(&arch, act, seed, 1.0).unwrap();
        if bn {
            net = with_random_bn(net, seed ^ 1);
        }
        let mut buf = Vec::new();
        write_weights(&net, &mut buf).unwrap();
        let back = read_weights(buf.as_slice()).unwrap();
        prop_assert_eq!(&back, &net);
        let x = Array2::from_shape_fn((5, 4), |(i, j)| (i as f64 - 2.0) * 0.3 + j as f64 * 0.1);
        prop_assert_eq!(forward(&back, x.view()).unwrap().output, forward(&net, x.view()).unwrap().output);
    }

    #[test]
    fn truncated_weights_never_panic(arch in arch(3), seed in any::<u64>(), cut in 0.0..1.0f64) {
        let net = init(&arch, Activation::Relu, seed, 1.0).unwrap();
        let mut buf = Vec::new();
        write_weights(&net, &mut buf).unwrap();
        let n = (buf.len() as f64 * cut) as usize;
        prop_assert!(read_weights(&buf[..n]).is_err());
    }

    #[test]
    fn lc_invariant_under_neuron_permutation(
        arch in arch(6), act in piecewise_activation(), seed in any::<u64>(), bn in any::<bool>(),
        p in 1usize..6, r in 0.01..2.0f64,
    ) {
        let mut net = init(&arch, act, seed, 1.0).unwrap();
        if bn {
            net = with_random_bn(net, seed ^ 2);
        }
        let x = Array1::from_shape_fn(6, |i| (i as f64 * 0.7).sin());
        let cfg = ProbeConfig { p, r, seed: seed ^ 3 };
        let base = local_complexity(&net, x.view(), &cfg).unwrap();
        for k in 0..net.depth() - 1 {
            let permuted = permute_hidden(&net, k);
            let y = permuted.eval_point(x.view()).unwrap();
            let y0 = net.eval_point(x.view()).unwrap();
            prop_assert!((&y - &y0).iter().all(|e| e.abs() < 1e-9));
            prop_assert_eq!(&local_complexity(&permuted, x.view(), &cfg).unwrap().per_layer, &base.per_layer);
        }
    }

    #[test]
    fn first_layer_lc_grows_with_radius(
        arch in arch(5), act in piecewise_activation(), seed in any::<u64>(), p in 1usize..6,
        r in 0.001..1.0f64, grow in 1.0..10.0f64,
    ) {
        // Same directions, nested cross-polytopes; layer one is affine in the input.
        let net = init(&arch, act, seed, 1.0).unwrap();
        let x = Array1::from_shape_fn(5, |i| i as f64 * 0.2 - 0.4);
        let small = local_complexity(&net, x.view(), &ProbeConfig { p, r, seed: 7 }).unwrap();
        let big = local_complexity(&net, x.view(), &ProbeConfig { p, r: r * grow, seed: 7 }).unwrap();
        prop_assert!(small.per_layer[0] <= big.per_layer[0]);
    }

    #[test]
    fn neighborhood_is_a_scaled_cross_polytope(d in 2usize..40, p_frac in 0.0..1.0f64, r in 1e-4..10.0f64, seed in any::<u64>()) {
        let p = 1 + ((d - 1) as f64 * p_frac) as usize;
        let x = Array1::from_shape_fn(d, |i| i as f64);
        let nb = make_neighborhood(x.view(), &ProbeConfig { p, r, seed }).unwrap();
        prop_assert_eq!(nb.vertices.nrows(), 2 * p);
        for k in 0..p {
            let a = nb.vertices.row(2 * k).to_owned() - &x;
            let b = nb.vertices.row(2 * k + 1).to_owned() - &x;
            prop_assert!(((&a + &b).iter().map(|v| v.abs()).fold(0.0, f64::max)) < 1e-9 * (1.0 + r));
            prop_assert!((a.dot(&a).sqrt() - r).abs() < 1e-9 * r.max(1.0));
            for j in 0..k {
                let c = nb.vertices.row(2 * j).to_owned() - &x;
                prop_assert!(a.dot(&c).abs() < 1e-9 * r * r.max(1.0));
            }
        }
    }

    #[test]
    fn partition_tiles_bounds_with_exact_maps(
        w1 in 1usize..10, w2 in 1usize..10, act in piecewise_activation(), seed in any::<u64>(),
        cx in -1.0..1.0f64, cy in -1.0..1.0f64, side in 0.1..5.0f64,
    ) {
        let net = init(&[2, w1, w2, 2], act, seed, 1.0).unwrap();
        let bounds = Rect::square([cx, cy], side).unwrap();
        let part = compute_partition(&net, &Slice::plane(bounds), None).unwrap();
        prop_assert!((part.total_area() - bounds.area()).abs() <= 1e-9 * bounds.area());
        for r in &part.regions {
            prop_assert!(polygon::signed_area(&r.polygon) > 0.0);
            let c = polygon::vertex_centroid(&r.polygon);
            prop_assert_eq!(part.locate(c).map(|i| &part.regions[i].pattern), Some(&r.pattern));
            let direct = net.eval_point(ndarray::array![c[0], c[1]].view()).unwrap();
            let local = r.eval(c);
            prop_assert!((&direct - &local).iter().all(|e| e.abs() < 1e-9));
        }
    }

    #[test]
    fn deeper_partitions_refine_shallower(w in 2usize..8, seed in any::<u64>()) {
        let net = init(&[2, w, w, w, 2], Activation::Relu, seed, 1.0).unwrap();
        let slice = Slice::plane(Rect::square([0.0, 0.0], 3.0).unwrap());
        let mut prev = 1;
        for k in 1..=net.depth() {
            let n = compute_partition(&net, &slice, Some(k)).unwrap().regions.len();
            prop_assert!(n >= prev);
            prev = n;
        }
    }

    #[test]
    fn pgd_stays_feasible(seed in any::<u64>(), eps in 0.0..0.5f64, steps in 1usize..8, lo in -1.0..0.0f64, span in 0.5..2.0f64) {
        let net = init(&[6, 8, 4], Activation::Relu, seed, 1.0).unwrap();
        let hi = lo + span;
        let x0 = Array2::from_shape_fn((9, 6), |(i, j)| lo + span * (((i * 7 + j * 3) % 11) as f64 / 10.0));
        let labels: Vec<usize> = (0..9).map(|i| i % 4).collect();
        let cfg = AttackConfig {
            epsilon: eps,
            alpha: if eps > 0.0 { eps / 3.0 } else { 0.1 },
            steps,
            seed,
            random_start: true,
            data_range: (lo, hi),
        };
        let adv = pgd_batch(&net, x0.view(), &labels, &cfg, 0).unwrap();
        for (a, o) in adv.iter().zip(x0.iter()) {
            prop_assert!((o - eps).max(lo) <= *a && *a <= (o + eps).min(hi));
        }
    }

    #[test]
    fn log_spaced_checkpoints(steps in 1u64..1_000_000, count in 1usize..200) {
        let s = log_spaced(steps, count);
        prop_assert!(s.len() <= count.max(1) + 1);
        prop_assert_eq!(*s.last().unwrap(), steps);
        prop_assert!(s[0] >= 1);
        prop_assert!(s.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn idx_round_trip(n in 1usize..20, rows in 1usize..5, cols in 1usize..5, seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = splinelc::seed::rng(seed);
        let pixels: Vec<u8> = (0..n * rows * cols).map(|_| rng.random()).collect();
        let labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..10)).collect();
        let mut img = vec![0, 0, 8, 3];
        for v in [n as u32, rows as u32, cols as u32] {
            img.extend(v.to_be_bytes());
        }
        img.extend(&pixels);
        let mut lbl = vec![0, 0, 8, 1];
        lbl.extend((n as u32).to_be_bytes());
        lbl.extend(&labels);
        let ds = parse_idx(&img, &lbl, None, None).unwrap();
        prop_assert_eq!(ds.inputs.dim(), (n, rows * cols));
        for (v, &p) in ds.inputs.iter().zip(&pixels) {
            prop_assert_eq!(*v, p as f64 / 255.0);
        }
        let got: Vec<usize> = ds.labels().unwrap().to_vec();
        prop_assert_eq!(got, labels.iter().map(|&l| l as usize).collect::<Vec<_>>());
        prop_assert!(parse_idx(&img[..img.len() - 1], &lbl, None, None).is_err());
    }
}
