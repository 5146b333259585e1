use rayon::prelude::*;

use crate::error::{DdmError, Result};
use crate::geom::{Bvh, KdTree, PointCloud, TriangleMesh};

/// Chamfer distance: nearest-neighbour Euclidean distances summed in both
/// directions.
pub fn chamfer(p1: &PointCloud, p2: &PointCloud) -> Result<f64> {
    if p1.is_empty() || p2.is_empty() {
        return Err(DdmError::invalid("chamfer distance needs non-empty clouds"));
    }
    let t1 = KdTree::build(&p1.points)?;
    let t2 = KdTree::build(&p2.points)?;
    let one_way = |from: &PointCloud, to: &KdTree| -> f64 {
        let d: Vec<f64> = from.points.par_iter().map(|p| to.nearest(p).distance).collect();
        d.iter().sum()
    };
    Ok(one_way(p1, &t2) + one_way(p2, &t1))
}

/// One-sided point-to-face distance: exact point-to-mesh distances of
/// `samples` to `target`, summed.
pub fn p2f(samples: &PointCloud, target: &TriangleMesh) -> Result<f64> {
    let bvh = Bvh::build(target)?;
    let d: Vec<f64> = samples
        .points
        .par_iter()
        .map(|p| (bvh.closest_point(p).point - p).norm())
        .collect();
    Ok(d.iter().sum())
}

/// Symmetric point-to-face distance, each side sampled on its own mesh.
pub fn p2f_symmetric(
    samples1: &PointCloud,
    mesh1: &TriangleMesh,
    samples2: &PointCloud,
    mesh2: &TriangleMesh,
) -> Result<f64> {
    Ok(p2f(samples1, mesh2)? + p2f(samples2, mesh1)?)
}
