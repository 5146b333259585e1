//! Procedural meshes used as templates and synthetic test targets.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{PointCloud, TriangleMesh, Vec3};

/// Regular icosahedron inscribed in the unit sphere.
pub fn icosahedron() -> TriangleMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let raw = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ];
    let vertices = raw
        .iter()
        .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
        .collect();
    let faces = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    TriangleMesh { vertices, faces }
}

/// Ico-sphere of the given radius after `subdivisions` rounds of 1-to-4
/// midpoint refinement (level 4: 2562 vertices, level 5: 10242).
pub fn icosphere(radius: f64, subdivisions: usize) -> TriangleMesh {
    let mut mesh = icosahedron();
    for _ in 0..subdivisions {
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut faces = Vec::with_capacity(mesh.faces.len() * 4);
        let mut mid = |a: usize, b: usize, verts: &mut Vec<Vec3>| -> usize {
            let key = (a.min(b), a.max(b));
            *midpoint.entry(key).or_insert_with(|| {
                verts.push(((verts[a] + verts[b]) * 0.5).normalize());
                verts.len() - 1
            })
        };
        for &[a, b, c] in &mesh.faces {
            let ab = mid(a, b, &mut mesh.vertices);
            let bc = mid(b, c, &mut mesh.vertices);
            let ca = mid(c, a, &mut mesh.vertices);
            faces.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        mesh.faces = faces;
    }
    for v in &mut mesh.vertices {
        *v *= radius;
    }
    mesh
}

/// Axis-aligned ellipsoid with the given semi-axes, built on an ico-sphere.
pub fn ellipsoid(semi_axes: Vec3, subdivisions: usize) -> TriangleMesh {
    let mut mesh = icosphere(1.0, subdivisions);
    for v in &mut mesh.vertices {
        *v = v.component_mul(&semi_axes);
    }
    mesh
}

/// Closed axis-aligned cube of edge length `side` centred at the origin,
/// 12 outward-facing triangles.
pub fn cube(side: f64) -> TriangleMesh {
    let h = side / 2.0;
    let vertices = (0..8)
        .map(|i| {
            Vec3::new(
                if i & 1 == 0 { -h } else { h },
                if i & 2 == 0 { -h } else { h },
                if i & 4 == 0 { -h } else { h },
            )
        })
        .collect();
    let faces = vec![
        [0, 2, 1],
        [1, 2, 3],
        [4, 5, 6],
        [5, 7, 6],
        [0, 1, 4],
        [1, 5, 4],
        [2, 6, 3],
        [3, 6, 7],
        [0, 4, 2],
        [2, 4, 6],
        [1, 3, 5],
        [3, 7, 5],
    ];
    TriangleMesh { vertices, faces }
}

/// Planar `nx` × `ny` vertex grid spanning `[0, width] × [0, height]` at z = 0.
pub fn grid(nx: usize, ny: usize, width: f64, height: f64) -> TriangleMesh {
    assert!(nx >= 2 && ny >= 2);
    let mut vertices = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            vertices.push(Vec3::new(
                width * i as f64 / (nx - 1) as f64,
                height * j as f64 / (ny - 1) as f64,
                0.0,
            ));
        }
    }
    let mut faces = Vec::with_capacity(2 * (nx - 1) * (ny - 1));
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let v = j * nx + i;
            faces.push([v, v + 1, v + nx]);
            faces.push([v + 1, v + nx + 1, v + nx]);
        }
    }
    TriangleMesh { vertices, faces }
}

/// Radius of an asymmetric star-shaped blob along unit direction `d`.
fn blob_radius(d: &Vec3) -> f64 {
    1.0 + 0.25 * (3.0 * d.x + 1.0).sin() * (2.0 * d.y).cos() + 0.15 * (4.0 * d.z + 2.0 * d.x).sin()
}

/// Centre the points and scale so the farthest one sits at radius 0.5.
fn fit_unit_diameter(points: &mut [Vec3]) {
    let c = points.iter().sum::<Vec3>() / points.len() as f64;
    let r = points.iter().map(|p| (p - c).norm()).fold(0.0, f64::max);
    for p in points.iter_mut() {
        *p = (*p - c) * (0.5 / r);
    }
}

/// `n` random points on an asymmetric blob of diameter about 1, centred at
/// the origin. No rotational symmetry, so rigid alignment is well posed.
pub fn blob_cloud(n: usize, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points: Vec<Vec3> = (0..n)
        .map(|_| {
            let d = loop {
                let v = Vec3::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal));
                if v.norm() > 1e-9 {
                    break v.normalize();
                }
            };
            d * blob_radius(&d)
        })
        .collect();
    fit_unit_diameter(&mut points);
    PointCloud { points }
}

/// The same blob as a mesh: an icosphere displaced radially.
pub fn blob_mesh(subdivisions: usize) -> TriangleMesh {
    let mut mesh = icosphere(1.0, subdivisions);
    for v in &mut mesh.vertices {
        *v *= blob_radius(v);
    }
    fit_unit_diameter(&mut mesh.vertices);
    mesh
}

/// Uniform random points in the axis-aligned box `[lo, hi]`.
pub fn uniform_box(n: usize, lo: Vec3, hi: Vec3, rng: &mut impl Rng) -> Vec<Vec3> {
    (0..n)
        .map(|_| Vec3::new(rng.random_range(lo.x..hi.x), rng.random_range(lo.y..hi.y), rng.random_range(lo.z..hi.z)))
        .collect()
}
