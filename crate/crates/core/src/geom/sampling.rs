use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use super::{PointCloud, TriangleMesh};
use crate::error::{DdmError, Result};

/// `n` points placed uniformly over the mesh area: faces drawn with
/// probability proportional to area, then a uniform barycentric point.
pub fn sample_points_on_mesh<R: Rng + ?Sized>(
    mesh: &TriangleMesh,
    n: usize,
    rng: &mut R,
) -> Result<PointCloud> {
    Ok(sample_points_on_mesh_with_faces(mesh, n, rng)?.0)
}

/// As [`sample_points_on_mesh`], also returning the face of each sample.
pub fn sample_points_on_mesh_with_faces<R: Rng + ?Sized>(
    mesh: &TriangleMesh,
    n: usize,
    rng: &mut R,
) -> Result<(PointCloud, Vec<usize>)> {
    if n == 0 {
        return Err(DdmError::invalid("sample count must be positive"));
    }
    let areas: Vec<f64> = (0..mesh.faces.len()).map(|f| mesh.face_area(f)).collect();
    let total: f64 = areas.iter().sum();
    if !(total > 0.0) {
        return Err(DdmError::invalid("mesh has zero surface area"));
    }
    let faces = WeightedIndex::new(&areas).map_err(|e| DdmError::invalid(e.to_string()))?;
    let mut points = Vec::with_capacity(n);
    let mut which = Vec::with_capacity(n);
    for _ in 0..n {
        let f = faces.sample(rng);
        let [a, b, c] = mesh.triangle(f);
        let r1: f64 = rng.random();
        let r2: f64 = rng.random();
        let s = r1.sqrt();
        points.push(a * (1.0 - s) + b * (s * (1.0 - r2)) + c * (s * r2));
        which.push(f);
    }
    Ok((PointCloud { points }, which))
}
