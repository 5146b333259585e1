use super::{BarycentricFoot, Bvh, KdTree, Neighbor, Surface, TriangleMesh, Vec3};
use crate::error::{DdmError, Result};

/// Acceleration structure for a surface: a k-d tree over cloud points or a
/// BVH over mesh faces. Read-only after construction.
#[derive(Debug, Clone)]
pub enum SpatialIndex {
    Points(KdTree),
    Faces(Bvh),
}

impl SpatialIndex {
    pub fn build(surface: &Surface) -> Result<Self> {
        match surface {
            Surface::PointCloud(c) => Ok(SpatialIndex::Points(KdTree::build(&c.points)?)),
            Surface::TriangleMesh(m) => Ok(SpatialIndex::Faces(Bvh::build(m)?)),
        }
    }

    pub fn knn(&self, q: &Vec3, k: usize) -> Result<Vec<Neighbor>> {
        match self {
            SpatialIndex::Points(t) => t.knn(q, k),
            SpatialIndex::Faces(_) => Err(DdmError::invalid("K-NN requires a point-cloud index")),
        }
    }

    pub fn closest_point_on_mesh(&self, q: &Vec3) -> Result<BarycentricFoot> {
        match self {
            SpatialIndex::Faces(b) => Ok(b.closest_point(q)),
            SpatialIndex::Points(_) => {
                Err(DdmError::invalid("closest-triangle query requires a mesh index"))
            }
        }
    }
}

/// Free-function form taking the mesh explicitly; builds nothing.
pub fn closest_point_on_mesh(index: &SpatialIndex, mesh: &TriangleMesh, q: &Vec3) -> Result<BarycentricFoot> {
    if mesh.faces.is_empty() {
        return Err(DdmError::invalid("mesh has no faces"));
    }
    index.closest_point_on_mesh(q)
}
