//! Surface containers, spatial indices, exact closest-point queries and
//! surface sampling.

mod bvh;
mod index;
mod kdtree;
mod sampling;
pub mod shapes;
mod topology;
mod triangle;

pub use bvh::Bvh;
pub use index::{closest_point_on_mesh, SpatialIndex};
pub use kdtree::{KdTree, Neighbor};
pub use sampling::{sample_points_on_mesh, sample_points_on_mesh_with_faces};
pub use topology::{geodesic_distances, MeshTopology};
pub use triangle::closest_point_on_triangle;

use nalgebra::{Matrix3, Vector3};

use crate::error::{DdmError, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Unordered set of points in model units.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Result<Self> {
        let cloud = PointCloud { points };
        cloud.validate()?;
        Ok(cloud)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(DdmError::invalid("point cloud is empty"));
        }
        if let Some(i) = self.points.iter().position(|p| !is_finite(p)) {
            return Err(DdmError::invalid(format!("point {i} has a non-finite coordinate")));
        }
        Ok(())
    }
}

/// Indexed triangle mesh. Faces index into `vertices`.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[usize; 3]>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let mesh = TriangleMesh { vertices, faces };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn validate(&self) -> Result<()> {
        if self.vertices.is_empty() {
            return Err(DdmError::invalid("mesh has no vertices"));
        }
        if let Some(i) = self.vertices.iter().position(|p| !is_finite(p)) {
            return Err(DdmError::invalid(format!("vertex {i} has a non-finite coordinate")));
        }
        let n = self.vertices.len();
        for (fi, f) in self.faces.iter().enumerate() {
            if f.iter().any(|&i| i >= n) {
                return Err(DdmError::InvalidMesh(format!(
                    "face {fi} references a vertex outside [0, {n})"
                )));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(DdmError::InvalidMesh(format!("face {fi} repeats a vertex index")));
            }
        }
        Ok(())
    }

    pub fn triangle(&self, face: usize) -> [Vec3; 3] {
        let [a, b, c] = self.faces[face];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn face_area(&self, face: usize) -> f64 {
        let [a, b, c] = self.triangle(face);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    pub fn total_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    /// Unit face normal, or zero for a degenerate face.
    pub fn face_normal(&self, face: usize) -> Vec3 {
        let [a, b, c] = self.triangle(face);
        let n = (b - a).cross(&(c - a));
        let len = n.norm();
        if len > 0.0 {
            n / len
        } else {
            Vec3::zeros()
        }
    }

    /// Same connectivity, new vertex positions.
    pub fn with_vertices(&self, vertices: Vec<Vec3>) -> TriangleMesh {
        debug_assert_eq!(vertices.len(), self.vertices.len());
        TriangleMesh {
            vertices,
            faces: self.faces.clone(),
        }
    }

    pub fn mean_edge_length(&self) -> f64 {
        let topo = MeshTopology::new(self);
        let edges = topo.edges();
        if edges.is_empty() {
            return 0.0;
        }
        edges
            .iter()
            .map(|&(a, b)| (self.vertices[a] - self.vertices[b]).norm())
            .sum::<f64>()
            / edges.len() as f64
    }
}

/// Either model representation accepted by the metric.
#[derive(Debug, Clone, PartialEq)]
pub enum Surface {
    PointCloud(PointCloud),
    TriangleMesh(TriangleMesh),
}

impl Surface {
    pub fn validate(&self) -> Result<()> {
        match self {
            Surface::PointCloud(c) => c.validate(),
            Surface::TriangleMesh(m) => m.validate(),
        }
    }

    /// Points for a cloud, vertices for a mesh.
    pub fn positions(&self) -> &[Vec3] {
        match self {
            Surface::PointCloud(c) => &c.points,
            Surface::TriangleMesh(m) => &m.vertices,
        }
    }

    pub fn positions_mut(&mut self) -> &mut Vec<Vec3> {
        match self {
            Surface::PointCloud(c) => &mut c.points,
            Surface::TriangleMesh(m) => &mut m.vertices,
        }
    }

    pub fn as_mesh(&self) -> Option<&TriangleMesh> {
        match self {
            Surface::TriangleMesh(m) => Some(m),
            Surface::PointCloud(_) => None,
        }
    }

    pub fn as_cloud(&self) -> Option<&PointCloud> {
        match self {
            Surface::PointCloud(c) => Some(c),
            Surface::TriangleMesh(_) => None,
        }
    }
}

impl From<PointCloud> for Surface {
    fn from(c: PointCloud) -> Self {
        Surface::PointCloud(c)
    }
}

impl From<TriangleMesh> for Surface {
    fn from(m: TriangleMesh) -> Self {
        Surface::TriangleMesh(m)
    }
}

/// Closest point on a triangle expressed in barycentric coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarycentricFoot {
    /// Face the foot lies on; `usize::MAX` when computed against a bare triangle.
    pub face_index: usize,
    pub weights: [f64; 3],
    pub point: Vec3,
}

impl BarycentricFoot {
    pub const NO_FACE: usize = usize::MAX;
}

pub(crate) fn is_finite(p: &Vec3) -> bool {
    p.iter().all(|c| c.is_finite())
}

/// Skew-symmetric cross-product matrix: `skew(a) * b == a.cross(&b)`.
pub(crate) fn all_finite(points: &[Vec3]) -> bool {
    points.iter().all(|p| p.iter().all(|c| c.is_finite()))
}

pub fn skew(a: &Vec3) -> Mat3 {
    Mat3::new(0.0, -a.z, a.y, a.z, 0.0, -a.x, -a.y, a.x, 0.0)
}
