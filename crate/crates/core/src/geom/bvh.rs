use super::kdtree::{bounds, box_dist2};
use super::{closest_point_on_triangle, BarycentricFoot, TriangleMesh, Vec3};
use crate::error::{DdmError, Result};

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone)]
struct Node {
    lo: Vec3,
    hi: Vec3,
    kind: NodeKind,
}

#[derive(Debug, Clone)]
enum NodeKind {
    Leaf { start: usize, end: usize },
    Inner { left: usize, right: usize },
}

/// Axis-aligned bounding-volume hierarchy over mesh faces, answering
/// closest-point queries identically to a scan over all faces.
#[derive(Debug, Clone)]
pub struct Bvh {
    triangles: Vec<[Vec3; 3]>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl Bvh {
    pub fn build(mesh: &TriangleMesh) -> Result<Self> {
        if mesh.faces.is_empty() {
            return Err(DdmError::invalid("mesh has no faces"));
        }
        let triangles: Vec<[Vec3; 3]> = (0..mesh.faces.len()).map(|f| mesh.triangle(f)).collect();
        let mut bvh = Bvh {
            order: (0..triangles.len()).collect(),
            nodes: Vec::with_capacity(2 * triangles.len() / LEAF_SIZE + 1),
            triangles,
        };
        let centroids: Vec<Vec3> = bvh
            .triangles
            .iter()
            .map(|t| (t[0] + t[1] + t[2]) / 3.0)
            .collect();
        bvh.build_node(&centroids, 0, centroids.len());
        Ok(bvh)
    }

    pub fn face_count(&self) -> usize {
        self.triangles.len()
    }

    fn build_node(&mut self, centroids: &[Vec3], start: usize, end: usize) -> usize {
        let (lo, hi) = bounds(self.order[start..end].iter().flat_map(|&f| self.triangles[f].iter()));
        let id = self.nodes.len();
        self.nodes.push(Node {
            lo,
            hi,
            kind: NodeKind::Leaf { start, end },
        });
        if end - start <= LEAF_SIZE {
            return id;
        }
        let (clo, chi) = bounds(self.order[start..end].iter().map(|&f| &centroids[f]));
        let axis = (chi - clo).imax();
        let mid = start + (end - start) / 2;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            centroids[a][axis].total_cmp(&centroids[b][axis])
        });
        let left = self.build_node(centroids, start, mid);
        let right = self.build_node(centroids, mid, end);
        self.nodes[id].kind = NodeKind::Inner { left, right };
        id
    }

    /// Globally closest foot over all faces; a distance tie goes to the
    /// lower face index.
    pub fn closest_point(&self, q: &Vec3) -> BarycentricFoot {
        let mut best = (f64::INFINITY, usize::MAX, None);
        self.search(0, q, &mut best);
        let mut foot = best.2.expect("at least one face");
        foot.face_index = best.1;
        foot
    }

    fn search(&self, node: usize, q: &Vec3, best: &mut (f64, usize, Option<BarycentricFoot>)) {
        match self.nodes[node].kind {
            NodeKind::Leaf { start, end } => {
                for &f in &self.order[start..end] {
                    let [a, b, c] = &self.triangles[f];
                    let foot = closest_point_on_triangle(q, a, b, c);
                    let d2 = (foot.point - q).norm_squared();
                    if d2 < best.0 || (d2 == best.0 && f < best.1) {
                        *best = (d2, f, Some(foot));
                    }
                }
            }
            NodeKind::Inner { left, right } => {
                let dl = box_dist2(q, &self.nodes[left].lo, &self.nodes[left].hi);
                let dr = box_dist2(q, &self.nodes[right].lo, &self.nodes[right].hi);
                let (first, d1, second, d2) = if dl <= dr {
                    (left, dl, right, dr)
                } else {
                    (right, dr, left, dl)
                };
                if may_contain(d1, best.0) {
                    self.search(first, q, best);
                }
                if may_contain(d2, best.0) {
                    self.search(second, q, best);
                }
            }
        }
    }
}

// A reconstructed foot can sit an ulp outside its face's box, so pruning
// keeps a relative margin far above rounding error.
fn may_contain(box_d2: f64, best_d2: f64) -> bool {
    box_d2 <= best_d2 * (1.0 + 1e-9) + 1e-300
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::shapes;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute(mesh: &TriangleMesh, q: &Vec3) -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        for f in 0..mesh.faces.len() {
            let [a, b, c] = mesh.triangle(f);
            let d2 = (closest_point_on_triangle(q, &a, &b, &c).point - q).norm_squared();
            if d2 < best.1 {
                best = (f, d2);
            }
        }
        best
    }

    #[test]
    fn single_triangle_is_always_face_zero() {
        let mesh = TriangleMesh::new(
            vec![Vec3::zeros(), Vec3::x(), Vec3::y()],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let bvh = Bvh::build(&mesh).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..20 {
            let q = Vec3::new(rng.random_range(-3.0..3.0), rng.random(), rng.random());
            assert_eq!(bvh.closest_point(&q).face_index, 0);
        }
    }

    #[test]
    fn faceless_mesh_is_rejected() {
        let mesh = TriangleMesh::new(vec![Vec3::zeros()], vec![]).unwrap();
        assert!(matches!(Bvh::build(&mesh), Err(DdmError::InvalidInput(_))));
    }

    #[test]
    fn icosahedron_matches_brute_force() {
        let mesh = shapes::icosahedron();
        let bvh = Bvh::build(&mesh).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let q = Vec3::new(
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
            );
            let foot = bvh.closest_point(&q);
            let (f, d2) = brute(&mesh, &q);
            assert_eq!(foot.face_index, f);
            assert_eq!((foot.point - q).norm_squared(), d2);
        }
    }

    #[test]
    fn subdivided_sphere_matches_brute_force() {
        let mesh = shapes::icosphere(1.0, 2);
        let bvh = Bvh::build(&mesh).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..300 {
            let q = Vec3::new(
                rng.random_range(-1.5..1.5),
                rng.random_range(-1.5..1.5),
                rng.random_range(-1.5..1.5),
            );
            let foot = bvh.closest_point(&q);
            let (f, d2) = brute(&mesh, &q);
            assert_eq!(foot.face_index, f);
            assert_eq!((foot.point - q).norm_squared(), d2);
        }
        // vertices are shared by several faces: tie must go to the lowest
        for (vi, v) in mesh.vertices.iter().enumerate() {
            let foot = bvh.closest_point(v);
            assert_eq!(foot.face_index, brute(&mesh, v).0);
            assert_eq!((foot.point - v).norm(), 0.0, "vertex {vi}");
        }
    }

    #[test]
    fn cube_centroid_distance() {
        let mesh = shapes::cube(1.0);
        let bvh = Bvh::build(&mesh).unwrap();
        let foot = bvh.closest_point(&Vec3::zeros());
        assert!(((foot.point).norm() - 0.5).abs() < 1e-12);
    }
}
