use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::geom::shapes;

fn random_cloud(rng: &mut ChaCha8Rng, n: usize) -> PointCloud {
    PointCloud {
        points: (0..n)
            .map(|_| Vec3::new(rng.random(), rng.random(), rng.random()))
            .collect(),
    }
}

fn random_flow(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> FlowField {
    FlowField {
        delta: (0..n)
            .map(|_| Vec3::new(rng.random_range(-scale..scale), rng.random_range(-scale..scale), rng.random_range(-scale..scale)))
            .collect(),
    }
}

/// Brute-force neighbour lists and double loop.
fn smooth_oracle(src: &PointCloud, flow: &FlowField, k: usize) -> f64 {
    let n = src.len();
    let mut total = 0.0;
    for i in 0..n {
        let mut others: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| ((src.points[i] - src.points[j]).norm(), j))
            .collect();
        others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(_, j) in others.iter().take(k) {
            total += (flow.delta[i] - flow.delta[j]).norm_squared();
        }
    }
    total / (3.0 * n as f64 * k as f64)
}

#[test]
fn neighbors_exclude_self() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let src = random_cloud(&mut rng, 100);
    let nb = SmoothNeighbors::new(&src, 8).unwrap();
    for (i, list) in nb.lists.iter().enumerate() {
        assert_eq!(list.len(), 8);
        assert!(!list.contains(&i));
    }
    assert!(SmoothNeighbors::new(&random_cloud(&mut rng, 8), 8).is_err());
    assert!(SmoothNeighbors::new(&random_cloud(&mut rng, 9), 8).is_ok());
}

#[test]
fn constant_and_zero_flows_are_free() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let src = random_cloud(&mut rng, 50);
    let nb = SmoothNeighbors::new(&src, 8).unwrap();
    assert_eq!(flow_smooth_reg(&nb, &FlowField::zeros(50)), 0.0);
    let constant = FlowField {
        delta: vec![Vec3::new(0.3, -0.2, 0.1); 50],
    };
    assert_eq!(flow_smooth_reg(&nb, &constant), 0.0);
}

#[test]
fn smoothness_matches_double_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..10 {
        let src = random_cloud(&mut rng, 60);
        let flow = random_flow(&mut rng, 60, 0.2);
        for k in [1, 4, 8] {
            let nb = SmoothNeighbors::new(&src, k).unwrap();
            let got = flow_smooth_reg(&nb, &flow);
            let want = smooth_oracle(&src, &flow, k);
            assert!((got - want).abs() < 1e-14 * want.max(1.0), "{got} vs {want}");
        }
    }
}

#[test]
fn smoothness_gradient_matches_fd() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let src = random_cloud(&mut rng, 30);
        let flow = random_flow(&mut rng, 30, 0.2);
        let nb = SmoothNeighbors::new(&src, 8).unwrap();
        let (_, g) = flow_smooth_reg_grad(&nb, &flow);
        let x: Vec<f64> = flow.delta.iter().flat_map(|d| d.iter().copied()).collect();
        let scale = g.iter().map(|v| v.amax()).fold(0.0, f64::max);
        for i in 0..x.len() {
            let h = 1e-6;
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let fd = (flow_smooth_reg(&nb, &unflatten(&xp)) - flow_smooth_reg(&nb, &unflatten(&xm))) / (2.0 * h);
            assert!((fd - g[i / 3][i % 3]).abs() < 1e-4 * scale);
        }
    }
}

#[test]
fn objective_gradient_matches_fd() {
    // distance-only field with K = 1: the fixed-neighbour derivative is exact
    // away from Voronoi boundaries, which central differences at 1e-6 do not
    // cross on these instances
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for trial in 0..20 {
        let src = random_cloud(&mut rng, 30);
        let tgt = PointCloud {
            points: src.points.iter().map(|p| p + Vec3::new(0.03, 0.0, -0.02)).collect(),
        };
        let cfg = FlowConfig {
            metric: MetricConfig {
                beta: 2.0,
                ddf: DdfConfig {
                    k: 1,
                    distance_only: true,
                },
                reduction: Reduction::Mean,
            },
            refgen: RefGenConfig {
                count: 200,
                seed: trial,
                ..Default::default()
            },
            smooth_neighbors: 4,
            lambda_smooth: 0.5,
            ..Default::default()
        };
        let obj = FlowObjective::new(&src, &tgt, &cfg).unwrap();
        let x: Vec<f64> = (0..90).map(|_| rng.random_range(-0.02..0.02)).collect();
        let (_, g) = obj.evaluate(&x).unwrap();
        let scale = g.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        for i in 0..x.len() {
            let h = 1e-6;
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let fd = (obj.evaluate(&xp).unwrap().0 - obj.evaluate(&xm).unwrap().0) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-4 * scale, "trial {trial} coord {i}: {fd} vs {}", g[i]);
        }
    }
}

#[test]
fn zero_flow_is_stationary() {
    let src = shapes::blob_cloud(512, 0);
    let cfg = FlowConfig {
        refgen: RefGenConfig {
            count: 5120,
            ..Default::default()
        },
        optim: OptimConfig::adam(0.01, 50),
        ..Default::default()
    };
    let (flow, trace) = estimate_scene_flow(&src, &src, &cfg).unwrap();
    let max = flow.delta.iter().map(|d| d.norm()).fold(0.0, f64::max);
    assert!(max < 1e-4, "max flow {max}");
    assert_eq!(trace.final_value, 0.0);
}

#[test]
fn rejects_bad_inputs() {
    let src = shapes::blob_cloud(64, 0);
    let cfg = FlowConfig {
        smooth_neighbors: 0,
        ..Default::default()
    };
    assert!(estimate_scene_flow(&src, &src, &cfg).is_err());
    let tiny = PointCloud {
        points: src.points[..4].to_vec(),
    };
    assert!(estimate_scene_flow(&tiny, &src, &FlowConfig::default()).is_err());
    let flow = FlowField::zeros(3);
    assert!(flow.apply(&src).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn smoothness_ignores_a_common_offset(seed in 0u64..1000, dx in -1.0f64..1.0, dy in -1.0f64..1.0, dz in -1.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let src = random_cloud(&mut rng, 40);
        let flow = random_flow(&mut rng, 40, 0.3);
        let nb = SmoothNeighbors::new(&src, 6).unwrap();
        let shifted = FlowField { delta: flow.delta.iter().map(|d| d + Vec3::new(dx, dy, dz)).collect() };
        let a = flow_smooth_reg(&nb, &flow);
        let b = flow_smooth_reg(&nb, &shifted);
        prop_assert!((a - b).abs() < 1e-12 * a.max(1.0));
    }
}

/// Moved copies of the source under a constant shift and under a 5 degree
/// turn about the vertical axis through the centroid.
fn constructed_flows(src: &PointCloud) -> [(&'static str, Vec<Vec3>); 2] {
    let shift = Vec3::new(0.05, -0.02, 0.01);
    let rot = crate::rigid::so3_exp(&Vec3::new(0.0, 0.0, 5f64.to_radians()));
    let c = src.points.iter().sum::<Vec3>() / src.len() as f64;
    [
        ("translate", src.points.iter().map(|_| shift).collect()),
        ("rotate", src.points.iter().map(|p| rot * (p - c) + c - p).collect()),
    ]
}

fn small_config(n: usize) -> FlowConfig {
    let mut cfg = FlowConfig::default();
    cfg.refgen.count = 10 * n;
    cfg.optim.schedule = crate::optim::LrSchedule::Cosine { final_factor: 0.01 };
    cfg.optim.log_every = 0;
    cfg
}

fn moved(src: &PointCloud, truth: &[Vec3]) -> PointCloud {
    PointCloud { points: src.points.iter().zip(truth).map(|(p, d)| p + d).collect() }
}

#[test]
fn recovers_constructed_flows() {
    let src = shapes::blob_cloud(512, 3);
    let cfg = small_config(src.len());
    for (name, truth) in constructed_flows(&src) {
        let (flow, _) = estimate_scene_flow(&src, &moved(&src, &truth), &cfg).unwrap();
        let m = crate::eval::flow_metrics(&flow.delta, &truth).unwrap();
        let bound = if name == "translate" { 1e-3 } else { 5e-3 };
        assert!(m.epe < bound, "{name}: epe {}", m.epe);
        assert_eq!(m.acc_strict, 1.0, "{name}");
    }
}

#[test]
fn larger_smoothness_weight_flattens_the_flow() {
    let src = shapes::blob_cloud(256, 4);
    let [_, (_, truth)] = constructed_flows(&src);
    let tgt = moved(&src, &truth);
    let mut cfg = small_config(src.len());
    cfg.optim.iterations = 200;
    let variance = |f: &FlowField| {
        let mean = f.delta.iter().sum::<Vec3>() / f.delta.len() as f64;
        f.delta.iter().map(|d| (d - mean).norm_squared()).sum::<f64>() / f.delta.len() as f64
    };
    let mut prev = f64::INFINITY;
    for lambda in [1e2, 1e4, 1e6] {
        cfg.lambda_smooth = lambda;
        let (flow, _) = estimate_scene_flow(&src, &tgt, &cfg).unwrap();
        let v = variance(&flow);
        assert!(v < prev, "lambda {lambda}: variance {v} not below {prev}");
        prev = v;
    }
}
