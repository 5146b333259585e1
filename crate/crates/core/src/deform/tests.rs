use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::ddf::DdfConfig;
use crate::geom::{geodesic_distances, shapes};
use crate::metric::Reduction;
use crate::rigid::so3_exp;

fn rand_vec(rng: &mut ChaCha8Rng, scale: f64) -> Vec3 {
    Vec3::new(
        rng.random_range(-scale..scale),
        rng.random_range(-scale..scale),
        rng.random_range(-scale..scale),
    )
}

fn perturbed_sphere(rng: &mut ChaCha8Rng, subdiv: usize, amp: f64) -> TriangleMesh {
    let mut m = shapes::icosphere(0.5, subdiv);
    for v in &mut m.vertices {
        *v += rand_vec(rng, amp);
    }
    m
}

/// Relative comparison against the largest gradient entry.
fn assert_grad_close(analytic: &[f64], fd: &[f64], what: &str) {
    let scale = analytic.iter().fold(0.0f64, |a, b| a.max(b.abs())).max(1e-12);
    for (i, (a, f)) in analytic.iter().zip(fd).enumerate() {
        assert!((a - f).abs() < 1e-4 * scale, "{what}[{i}]: analytic {a} vs fd {f}");
    }
}

fn central_diff(x: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let h = 1e-6;
    (0..x.len())
        .map(|i| {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[i] += h;
            xm[i] -= h;
            (f(&xp) - f(&xm)) / (2.0 * h)
        })
        .collect()
}

#[test]
fn huge_epsilon_gives_one_node() {
    let mesh = shapes::icosphere(1.0, 2);
    let g = build_deformation_graph(&mesh, 100.0, 5, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    assert_eq!(g.node_count(), 1);
}

#[test]
fn tiny_epsilon_makes_every_vertex_a_node() {
    let mesh = shapes::icosphere(1.0, 1);
    let g = build_deformation_graph(&mesh, 1e-9, 5, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    assert_eq!(g.node_count(), mesh.vertices.len());
    let mut idx = g.node_vertex_indices.clone();
    idx.sort_unstable();
    assert_eq!(idx, (0..mesh.vertices.len()).collect::<Vec<_>>());
    assert!(g.vertex_nodes.iter().enumerate().all(|(v, ns)| ns.len() == 1 && g.node_vertex_indices[ns[0].0] == v));
}

#[test]
fn node_net_is_separated_and_covering() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for seed in 0..5 {
        let mesh = perturbed_sphere(&mut rng, 2, 0.01);
        let eps = 3.0 * mesh.mean_edge_length();
        let g = build_deformation_graph(&mesh, eps, 4, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let dists: Vec<_> = g
            .node_vertex_indices
            .iter()
            .map(|&n| geodesic_distances(&mesh, n, f64::INFINITY))
            .collect();
        for (a, da) in dists.iter().enumerate() {
            for (b, &nb) in g.node_vertex_indices.iter().enumerate() {
                if a != b {
                    assert!(da[&nb] >= eps, "nodes {a} and {b} too close");
                }
            }
        }
        for v in 0..mesh.vertices.len() {
            assert!(dists.iter().any(|d| d[&v] < eps), "vertex {v} uncovered");
            let bound = &g.vertex_nodes[v];
            assert!(!bound.is_empty() && bound.len() <= 4);
            for &(j, w) in bound {
                let d = dists[j][&v];
                assert!((w - node_weight(d, eps)).abs() < 1e-15 && w > 0.0);
            }
            // bound nodes are the nearest ones
            let mut all: Vec<f64> = dists.iter().map(|d| d[&v]).filter(|&d| d < eps).collect();
            all.sort_by(f64::total_cmp);
            let got: Vec<f64> = bound.iter().map(|&(j, _)| dists[j][&v]).collect();
            for (g, e) in got.iter().zip(&all) {
                assert!((g - e).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn graph_is_seeded() {
    let mesh = shapes::icosphere(1.0, 2);
    let eps = 4.0 * mesh.mean_edge_length();
    let a = build_deformation_graph(&mesh, eps, 5, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    let b = build_deformation_graph(&mesh, eps, 5, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    assert_eq!(a, b);
    assert!(build_deformation_graph(&mesh, 0.0, 5, &mut ChaCha8Rng::seed_from_u64(3)).is_err());
    assert!(build_deformation_graph(&mesh, eps, 0, &mut ChaCha8Rng::seed_from_u64(3)).is_err());
}

#[test]
fn weight_falloff() {
    assert_eq!(node_weight(0.0, 1.0), 1.0);
    assert_eq!(node_weight(1.0, 1.0), 0.0);
    assert_eq!(node_weight(2.0, 1.0), 0.0);
    assert!((node_weight(0.5, 1.0) - 0.421875).abs() < 1e-15);
    // C¹ at d = ε: the slope vanishes from the left
    let h = 1e-6;
    assert!(node_weight(1.0 - h, 1.0) / h < 1e-9);
}

#[test]
fn identity_and_translation_deformations() {
    let mesh = shapes::blob_mesh(2);
    let mut g = build_deformation_graph(&mesh, 0.15, 5, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    assert_eq!(g.deform_vertices(&mesh).unwrap(), mesh.vertices);
    let t0 = Vec3::new(0.3, -0.1, 0.2);
    g.translations.iter_mut().for_each(|t| *t = t0);
    for (a, b) in g.deform_vertices(&mesh).unwrap().iter().zip(&mesh.vertices) {
        assert!((a - b - t0).norm() < 1e-14);
    }
}

#[test]
fn single_node_is_rigid_about_the_node() {
    let mesh = shapes::blob_mesh(1);
    let mut g = build_deformation_graph(&mesh, 100.0, 5, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let omega = Vec3::new(0.2, -0.4, 0.1);
    g.rotations[0] = omega;
    let r = so3_exp(&omega);
    let c = g.node_positions[0];
    for (a, v) in g.deform_vertices(&mesh).unwrap().iter().zip(&mesh.vertices) {
        assert!((a - (r * (v - c) + c)).norm() < 1e-14);
    }
}

#[test]
fn graph_errors() {
    let mesh = shapes::icosphere(1.0, 1);
    let mut g = build_deformation_graph(&mesh, 0.5, 3, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    assert!(g.set_params(&[0.0; 5]).is_err());
    g.vertex_nodes[3].iter_mut().for_each(|n| n.1 = 0.0);
    assert!(matches!(g.deform_vertices(&mesh), Err(DdmError::InvalidGraph(_))));
    let other = shapes::icosphere(1.0, 2);
    assert!(g.deform_vertices(&other).is_err());
}

#[test]
fn graph_pullback_matches_fd() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for trial in 0..20 {
        let mesh = perturbed_sphere(&mut rng, 1, 0.02);
        let eps = 2.5 * mesh.mean_edge_length();
        let mut g = build_deformation_graph(&mesh, eps, 4, &mut ChaCha8Rng::seed_from_u64(trial)).unwrap();
        let x: Vec<f64> = (0..6 * g.node_count()).map(|_| rng.random_range(-0.5..0.5)).collect();
        let upstream: Vec<Vec3> = (0..mesh.vertices.len()).map(|_| rand_vec(&mut rng, 1.0)).collect();
        g.set_params(&x).unwrap();
        let analytic = g.pullback(&mesh, &upstream);
        let fd = central_diff(&x, |y| {
            let mut h = g.clone();
            h.set_params(y).unwrap();
            h.deform_vertices(&mesh).unwrap().iter().zip(&upstream).map(|(v, u)| v.dot(u)).sum()
        });
        assert_grad_close(&analytic, &fd, "graph pullback");
    }
}

fn smooth_oracle(mesh: &TriangleMesh, deformed: &[Vec3]) -> f64 {
    let mut total = 0.0;
    for f in &mesh.faces {
        let off: Vec<Vec3> = f.iter().map(|&i| deformed[i] - mesh.vertices[i]).collect();
        total += (off[0] - off[1]).norm() + (off[0] - off[2]).norm() + (off[1] - off[2]).norm();
    }
    total / (3.0 * mesh.faces.len() as f64)
}

#[test]
fn smoothness_term() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mesh = shapes::icosphere(1.0, 1);
    assert_eq!(smooth_reg_mesh(&mesh, &mesh.vertices), 0.0);
    let shifted: Vec<Vec3> = mesh.vertices.iter().map(|v| v + Vec3::new(0.5, 0.5, 0.5)).collect();
    assert!(smooth_reg_mesh(&mesh, &shifted) < 1e-15);
    for _ in 0..10 {
        let deformed: Vec<Vec3> = mesh.vertices.iter().map(|v| v + rand_vec(&mut rng, 0.2)).collect();
        let got = smooth_reg_mesh(&mesh, &deformed);
        assert!((got - smooth_oracle(&mesh, &deformed)).abs() < 1e-14);
    }
}

#[test]
fn smoothness_gradient_matches_fd() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..20 {
        let mesh = perturbed_sphere(&mut rng, 1, 0.02);
        let deformed: Vec<Vec3> = mesh.vertices.iter().map(|v| v + rand_vec(&mut rng, 0.1)).collect();
        let (_, g) = smooth_reg_mesh_grad(&mesh, &deformed);
        let x = flatten(&deformed);
        let fd = central_diff(&x, |y| smooth_oracle(&mesh, &unflatten(y)));
        assert_grad_close(&flatten(&g), &fd, "smoothness");
    }
}

fn regular_tetrahedron() -> TriangleMesh {
    let s = 1.0 / 2f64.sqrt();
    TriangleMesh::new(
        vec![
            Vec3::new(1.0, 0.0, -s),
            Vec3::new(-1.0, 0.0, -s),
            Vec3::new(0.0, 1.0, s),
            Vec3::new(0.0, -1.0, s),
        ],
        vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]],
    )
    .unwrap()
}

fn density_oracle(vertices: &[Vec3], mesh: &TriangleMesh, t: &DensityTargets, l1: f64, l2: f64) -> f64 {
    let n = vertices.len();
    let mut value = 0.0;
    for v in 0..n {
        let mut lens = Vec::new();
        for (a, b) in MeshTopology::new(mesh).edges() {
            if *a == v || *b == v {
                lens.push((vertices[*a] - vertices[*b]).norm());
            }
        }
        let l = lens.iter().sum::<f64>() / lens.len() as f64;
        value += l1 * (l - t.global).powi(2) + l2 * (l - t.local[v]).powi(2);
    }
    value / n as f64
}

#[test]
fn density_term_closed_forms() {
    let tet = regular_tetrahedron();
    let topo = MeshTopology::new(&tet);
    let edge = 2.0;
    let targets = DensityTargets::from_vertices(&tet.vertices, &topo);
    assert!((targets.global - edge).abs() < 1e-12);
    assert!(targets.local.iter().all(|l| (l - edge).abs() < 1e-12));
    assert!(density_adaptation_reg(&tet.vertices, &topo, &targets, 1.5, 4.5) < 1e-24);
    for s in [0.5, 1.2, 3.0] {
        let scaled: Vec<Vec3> = tet.vertices.iter().map(|v| v * s).collect();
        let got = density_adaptation_reg(&scaled, &topo, &targets, 1.5, 4.5);
        let expected = (1.5 + 4.5) * (s - 1.0) * (s - 1.0) * edge * edge;
        assert!((got - expected).abs() < 1e-12 * expected.max(1.0));
        assert!((got - density_oracle(&scaled, &tet, &targets, 1.5, 4.5)).abs() < 1e-12);
    }
}

#[test]
fn density_term_matches_loop_and_fd() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let mesh = perturbed_sphere(&mut rng, 1, 0.05);
        let topo = MeshTopology::new(&mesh);
        let targets = DensityTargets {
            global: rng.random_range(0.2..0.4),
            local: (0..mesh.vertices.len()).map(|_| rng.random_range(0.2..0.4)).collect(),
        };
        let (value, grad) = density_adaptation_reg_grad(&mesh.vertices, &topo, &targets, 1.5, 4.5);
        let oracle = density_oracle(&mesh.vertices, &mesh, &targets, 1.5, 4.5);
        assert!((value - oracle).abs() < 1e-12 * oracle);
        let fd = central_diff(&flatten(&mesh.vertices), |y| {
            density_adaptation_reg(&unflatten(y), &topo, &targets, 1.5, 4.5)
        });
        assert_grad_close(&flatten(&grad), &fd, "density");
    }
}

#[test]
fn diffusion_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mesh = perturbed_sphere(&mut rng, 3, 0.01);
    let zero = DiffusionSystem::new(&mesh, 0.0).unwrap();
    assert_eq!(zero.to_vertices(&mesh.vertices).unwrap(), mesh.vertices);
    for alpha in [0.1, 1.0, 10.0] {
        let sys = build_diffusion_system(&mesh, alpha).unwrap();
        let u = sys.to_latent(&mesh.vertices).unwrap();
        let back = sys.to_vertices(&u).unwrap();
        let vn = mesh.vertices.iter().map(|v| v.norm_squared()).sum::<f64>().sqrt();
        let err = back.iter().zip(&mesh.vertices).map(|(a, b)| (a - b).norm_squared()).sum::<f64>().sqrt();
        assert!(err < 1e-8 * vn);
        let un = u.iter().map(|v| v.norm_squared()).sum::<f64>().sqrt();
        assert!(sys.residual(&back, &u).unwrap() < 1e-8 * un);
    }
    assert!(DiffusionSystem::new(&mesh, -1.0).is_err());
    assert!(DiffusionSystem::new(&mesh, f64::NAN).is_err());
}

#[test]
fn laplacian_rows_sum_to_zero() {
    let mesh = shapes::icosphere(1.0, 1);
    let l = uniform_laplacian(&mesh);
    for row in &l.rows {
        assert_eq!(row.iter().map(|e| e.1).sum::<f64>(), 0.0);
    }
}

#[test]
fn diffusion_pullback_matches_fd() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..20 {
        let mut mesh = shapes::grid(5, 4, 1.0, 1.0);
        for v in &mut mesh.vertices {
            *v += rand_vec(&mut rng, 0.05);
        }
        assert_eq!(mesh.vertices.len(), 20);
        let sys = DiffusionSystem::new(&mesh, rng.random_range(0.1..3.0)).unwrap();
        let upstream: Vec<Vec3> = (0..20).map(|_| rand_vec(&mut rng, 1.0)).collect();
        let u = flatten(&sys.to_latent(&mesh.vertices).unwrap());
        let analytic = flatten(&sys.pullback(&upstream).unwrap());
        let fd = central_diff(&u, |y| {
            sys.to_vertices(&unflatten(y)).unwrap().iter().zip(&upstream).map(|(v, g)| v.dot(g)).sum()
        });
        assert_grad_close(&analytic, &fd, "diffusion pullback");
    }
}

fn small_metric() -> MetricConfig {
    MetricConfig {
        beta: 2.0,
        ddf: DdfConfig {
            k: 1,
            distance_only: true,
        },
        reduction: Reduction::Mean,
    }
}

#[test]
fn nonrigid_objective_gradient_matches_fd() {
    // distance-only fields: the closest-face derivative with barycentric
    // weights held fixed is exact, so no pinning is needed
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for trial in 0..20 {
        let src = perturbed_sphere(&mut rng, 1, 0.01);
        let mut tgt = src.clone();
        for v in &mut tgt.vertices {
            *v += rand_vec(&mut rng, 0.03);
        }
        let cfg = DeformRegConfig {
            metric: small_metric(),
            refgen: RefGenConfig {
                count: 300,
                sigma: 0.05,
                seed: trial,
                ..Default::default()
            },
            lambda: 0.3,
            epsilon_factor: 2.5,
            node_neighbors: 4,
            graph_seed: trial,
            ..Default::default()
        };
        let mut obj = NonrigidObjective::new(&src, &tgt, &cfg).unwrap();
        let x: Vec<f64> = (0..6 * obj.graph().node_count()).map(|_| rng.random_range(-0.05..0.05)).collect();
        let (_, g) = obj.evaluate(&x).unwrap();
        let fd = central_diff(&x, |y| obj.evaluate(y).unwrap().0);
        assert_grad_close(&g, &fd, "nonrigid objective");
    }
}

#[test]
fn template_objective_gradient_matches_fd() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..20 {
        let template = perturbed_sphere(&mut rng, 1, 0.01);
        let target = shapes::ellipsoid(Vec3::new(0.5, 0.4, 0.3), 1);
        let cfg = TemplateFitConfig {
            metric: small_metric(),
            refgen: RefGenConfig {
                count: 300,
                sigma: 0.05,
                seed: trial,
                ..Default::default()
            },
            alpha: rng.random_range(0.2..2.0),
            ..Default::default()
        };
        let obj = TemplateObjective::new(&template, &target, &cfg).unwrap();
        let x = obj.initial_params().unwrap();
        let targets = DensityTargets::from_vertices(&obj.vertices(&x).unwrap(), &MeshTopology::new(&template));
        let (_, g) = obj.evaluate_with_targets(&x, &targets).unwrap();
        let fd = central_diff(&x, |y| obj.evaluate_with_targets(y, &targets).unwrap().0);
        assert_grad_close(&g, &fd, "template objective");
    }
}

#[test]
fn identity_is_stationary_for_registration() {
    let src = shapes::blob_mesh(2);
    let cfg = DeformRegConfig {
        refgen: RefGenConfig {
            count: 2000,
            sigma: 0.05,
            ..Default::default()
        },
        optim: OptimConfig::gd(2.0, 20),
        ..Default::default()
    };
    let (_, deformed, trace) = register_nonrigid(&src, &src, &cfg).unwrap();
    let rmse = (deformed.vertices.iter().zip(&src.vertices).map(|(a, b)| (a - b).norm_squared()).sum::<f64>()
        / src.vertices.len() as f64)
        .sqrt();
    assert!(rmse < 1e-6, "rmse {rmse}");
    assert_eq!(deformed.faces, src.faces);
    assert_eq!(trace.final_value, 0.0);
}

#[test]
fn fitting_the_template_itself_stays_put() {
    let template = shapes::icosphere(0.5, 2);
    let cfg = TemplateFitConfig {
        refgen: RefGenConfig {
            count: 2000,
            sigma: 0.05,
            ..Default::default()
        },
        optim: OptimConfig::adam(0.001, 30),
        ..Default::default()
    };
    let (fitted, trace) = fit_template(&template, &template, &cfg).unwrap();
    assert_eq!(fitted.faces, template.faces);
    let drift = fitted.vertices.iter().zip(&template.vertices).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    assert!(drift < 1e-3, "drift {drift}");
    // only the global density term is nonzero at the start on an icosphere
    assert!(trace.final_value < 1e-3, "final {}", trace.final_value);
}

/// Settings that converge tightly on the small synthetic meshes used here.
fn recovery_config(seed: u64) -> DeformRegConfig {
    let base = DeformRegConfig::default();
    DeformRegConfig {
        lambda: 0.1,
        refgen: RefGenConfig { count: 5000, seed, ..base.refgen },
        optim: OptimConfig {
            schedule: crate::optim::LrSchedule::Cosine { final_factor: 0.01 },
            log_every: 0,
            ..OptimConfig::adam(0.005, 500)
        },
        ..base
    }
}

fn vertex_rmse(a: &[Vec3], b: &[Vec3]) -> f64 {
    (a.iter().zip(b).map(|(p, q)| (p - q).norm_squared()).sum::<f64>() / a.len() as f64).sqrt()
}

#[test]
fn recovers_rigid_and_single_node_targets() {
    let src = shapes::blob_mesh(2);
    let c = src.vertices.iter().sum::<Vec3>() / src.vertices.len() as f64;
    let base = DeformRegConfig::default();
    for seed in 0..2u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let axis = rand_vec(&mut rng, 1.0).normalize();
        let rot = so3_exp(&(axis * rng.random_range(0.0..5f64.to_radians())));
        let t = rand_vec(&mut rng, 0.05 / 3f64.sqrt());
        let rigid: Vec<Vec3> = src.vertices.iter().map(|v| rot * (v - c) + c + t).collect();

        // forward deformation with the same graph the registration builds
        let mut grng = ChaCha8Rng::seed_from_u64(base.graph_seed);
        let eps = base.epsilon_factor * src.mean_edge_length();
        let mut g = build_deformation_graph(&src, eps, base.node_neighbors, &mut grng).unwrap();
        let mut x = g.params();
        let j = rng.random_range(0..g.node_count());
        x[6 * j..6 * j + 3].copy_from_slice((rand_vec(&mut rng, 1.0).normalize() * 0.3).as_slice());
        g.set_params(&x).unwrap();
        let bent = g.deform_vertices(&src).unwrap();

        for (truth, bound) in [(rigid, 1e-3), (bent, 5e-3)] {
            let tgt = src.with_vertices(truth.clone());
            let (_, d, _) = register_nonrigid(&src, &tgt, &recovery_config(seed)).unwrap();
            assert_eq!(d.faces, src.faces);
            let rmse = vertex_rmse(&d.vertices, &truth);
            assert!(rmse < bound, "seed {seed}: rmse {rmse}");
        }
    }
}

#[test]
fn fits_a_sphere_to_an_ellipsoid() {
    use crate::eval::{fscore, surface_samples};
    let template = shapes::icosphere(0.5, 3);
    let target = shapes::ellipsoid(Vec3::new(0.5, 0.4, 0.3), 4);
    let mut cfg = TemplateFitConfig::default();
    cfg.refgen.count = 10_000;
    cfg.optim = OptimConfig::adam(0.01, 500);
    cfg.optim.log_every = 0;
    let (fitted, _) = fit_template(&template, &target, &cfg).unwrap();
    assert_eq!(fitted.faces, template.faces);
    let a = surface_samples(&fitted.into(), 50_000, 1).unwrap();
    let b = surface_samples(&target.into(), 50_000, 2).unwrap();
    let f = fscore(&a, &b, 0.01).unwrap();
    assert!(f > 0.99, "F-score {f}");
}
