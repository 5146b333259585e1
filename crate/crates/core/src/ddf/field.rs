use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{DdmError, Result};
use crate::geom::{BarycentricFoot, KdTree, Mat3, SpatialIndex, Surface, TriangleMesh, Vec3};

/// Below this query-to-point distance the inverse-square weights are
/// treated as singular and the coincident point is returned.
pub const SINGULAR_DISTANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DdfConfig {
    /// Neighbourhood size for point clouds.
    pub k: usize,
    /// Compare the unsigned distance only, dropping the direction.
    pub distance_only: bool,
}

impl Default for DdfConfig {
    fn default() -> Self {
        DdfConfig {
            k: 5,
            distance_only: false,
        }
    }
}

/// Field value at one query: unsigned distance `f` and the vector `h` from
/// the query to its closest surface point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DdfSample {
    pub f: f64,
    pub h: Vec3,
}

impl DdfSample {
    fn from_foot(q: &Vec3, foot: &Vec3) -> Self {
        let h = foot - q;
        DdfSample { f: h.norm(), h }
    }
}

/// Derivative of `(f, h)` at one query with respect to one surface point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DdfGradEntry {
    pub index: usize,
    /// `∂f/∂x`.
    pub df: Vec3,
    /// `dh[(i, j)] = ∂h_i/∂x_j`.
    pub dh: Mat3,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DdfGradient {
    pub entries: SmallVec<[DdfGradEntry; 8]>,
}

/// Estimated closest point on a point cloud, with the normalized weight of
/// each neighbour that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct CloudFoot {
    pub point: Vec3,
    pub neighbors: SmallVec<[(usize, f64); 8]>,
}

/// Inverse-square-distance average of `neighbors` seen from `q`.
pub fn weighted_foot(points: &[Vec3], neighbors: &[usize], q: &Vec3) -> CloudFoot {
    let nn: SmallVec<[(usize, f64); 8]> = neighbors.iter().map(|&i| (i, (points[i] - q).norm_squared())).collect();
    foot_from_dist2(points, &nn)
}

fn foot_from_dist2(points: &[Vec3], nn: &[(usize, f64)]) -> CloudFoot {
    let &(nearest, d2) = nn
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .expect("at least one neighbour");
    if nn.len() == 1 || d2.sqrt() < SINGULAR_DISTANCE {
        let mut ns = SmallVec::new();
        ns.push((nearest, 1.0));
        return CloudFoot {
            point: points[nearest],
            neighbors: ns,
        };
    }
    let total: f64 = nn.iter().map(|&(_, d2)| 1.0 / d2).sum();
    let mut point = Vec3::zeros();
    for &(i, d2) in nn {
        point += points[i] * (1.0 / d2);
    }
    point /= total;
    CloudFoot {
        point,
        neighbors: nn.iter().map(|&(i, d2)| (i, (1.0 / d2) / total)).collect(),
    }
}

impl CloudFoot {
    /// `(∂q̂/∂p_k)ᵀ c` for every neighbour `p_k`.
    fn pullback(&self, points: &[Vec3], q: &Vec3, c: &Vec3) -> Pullback {
        if self.neighbors.len() == 1 {
            return smallvec::smallvec![(self.neighbors[0].0, *c)];
        }
        // ∂q̂/∂p_k = (w_k/W) I + (p_k − q̂)(∂w_k/∂p_k)ᵀ/W, ∂w_k/∂p_k = −2 w_k² (p_k − q)
        self.neighbors
            .iter()
            .map(|&(i, wn)| {
                let r = points[i] - q;
                let w = 1.0 / r.norm_squared();
                (i, c * wn - r * (2.0 * w * wn * (points[i] - self.point).dot(c)))
            })
            .collect()
    }
}

/// Per-point vector-Jacobian products of the field at one query.
pub type Pullback = SmallVec<[(usize, Vec3); 8]>;

/// DDF of a point cloud at `q`: the closest point is approximated by the
/// inverse-square-weighted mean of the K nearest points.
pub fn ddf_point_cloud(tree: &KdTree, q: &Vec3, cfg: &DdfConfig) -> Result<(DdfSample, CloudFoot)> {
    let nn = tree.knn_dist2(q, cfg.k)?;
    let foot = foot_from_dist2(tree.points(), &nn);
    Ok((DdfSample::from_foot(q, &foot.point), foot))
}

/// As [`ddf_point_cloud`], plus the derivative with respect to the
/// neighbour coordinates (the neighbour set itself is held fixed).
pub fn ddf_grad_point_cloud(tree: &KdTree, q: &Vec3, cfg: &DdfConfig) -> Result<(DdfSample, DdfGradient)> {
    let nn: SmallVec<[usize; 8]> = tree.knn_dist2(q, cfg.k)?.into_iter().map(|n| n.0).collect();
    Ok(cloud_grad(tree.points(), &nn, q))
}

fn cloud_grad(points: &[Vec3], nn: &[usize], q: &Vec3) -> (DdfSample, DdfGradient) {
    let foot = weighted_foot(points, nn, q);
    let sample = DdfSample::from_foot(q, &foot.point);
    let unit = unit_or_zero(&sample);
    let mut grad = DdfGradient::default();

    if foot.neighbors.len() == 1 {
        // single term: the foot is the point itself
        grad.entries.push(DdfGradEntry {
            index: foot.neighbors[0].0,
            df: unit,
            dh: Mat3::identity(),
        });
        return (sample, grad);
    }

    // q̂ = Σ w_k p_k / W  ⇒  ∂q̂/∂p_k = (w_k/W) I + (p_k − q̂) (∂w_k/∂p_k)ᵀ / W,
    // with w_k = 1/|p_k − q|² and ∂w_k/∂p_k = −2 w_k² (p_k − q).
    let total: f64 = nn.iter().map(|&i| 1.0 / (points[i] - q).norm_squared()).sum();
    for &i in nn {
        let r = points[i] - q;
        let w = 1.0 / r.norm_squared();
        let dw = r * (-2.0 * w * w);
        let dh = Mat3::identity() * (w / total) + (points[i] - foot.point) * dw.transpose() / total;
        grad.entries.push(DdfGradEntry {
            index: i,
            df: dh.transpose() * unit,
            dh,
        });
    }
    (sample, grad)
}

fn unit_or_zero(s: &DdfSample) -> Vec3 {
    if s.f > SINGULAR_DISTANCE {
        s.h / s.f
    } else {
        Vec3::zeros()
    }
}

/// DDF of a triangle mesh at `q` from its exact closest point.
pub fn ddf_mesh(index: &SpatialIndex, mesh: &TriangleMesh, q: &Vec3) -> Result<(DdfSample, BarycentricFoot)> {
    let foot = crate::geom::closest_point_on_mesh(index, mesh, q)?;
    Ok((DdfSample::from_foot(q, &foot.point), foot))
}

/// As [`ddf_mesh`], plus derivatives with respect to the closest face's
/// vertices. Barycentric weights are held constant.
pub fn ddf_grad_mesh(index: &SpatialIndex, mesh: &TriangleMesh, q: &Vec3) -> Result<(DdfSample, DdfGradient)> {
    let (sample, foot) = ddf_mesh(index, mesh, q)?;
    Ok((sample, mesh_grad(mesh, &sample, &foot)))
}

fn mesh_grad(mesh: &TriangleMesh, sample: &DdfSample, foot: &BarycentricFoot) -> DdfGradient {
    let unit = unit_or_zero(sample);
    let face = mesh.faces[foot.face_index];
    DdfGradient {
        entries: face
            .iter()
            .zip(foot.weights)
            .map(|(&v, w)| DdfGradEntry {
                index: v,
                df: unit * w,
                dh: Mat3::identity() * w,
            })
            .collect(),
    }
}

/// A surface together with its spatial index, ready for DDF queries.
#[derive(Debug, Clone)]
pub struct DdfField<'a> {
    surface: &'a Surface,
    index: SpatialIndex,
    cfg: DdfConfig,
}

impl<'a> DdfField<'a> {
    pub fn new(surface: &'a Surface, cfg: DdfConfig) -> Result<Self> {
        surface.validate()?;
        if cfg.k == 0 {
            return Err(DdmError::invalid("K must be positive"));
        }
        if let Surface::PointCloud(c) = surface {
            if c.len() < cfg.k {
                return Err(DdmError::invalid(format!(
                    "point cloud has {} points, fewer than K = {}",
                    c.len(),
                    cfg.k
                )));
            }
        }
        Ok(DdfField {
            surface,
            index: SpatialIndex::build(surface)?,
            cfg,
        })
    }

    pub fn surface(&self) -> &Surface {
        self.surface
    }

    pub fn config(&self) -> &DdfConfig {
        &self.cfg
    }

    pub fn sample(&self, q: &Vec3) -> Result<DdfSample> {
        match (&self.index, self.surface) {
            (SpatialIndex::Points(t), _) => Ok(ddf_point_cloud(t, q, &self.cfg)?.0),
            (idx, Surface::TriangleMesh(m)) => Ok(ddf_mesh(idx, m, q)?.0),
            _ => unreachable!("index kind follows surface kind"),
        }
    }

    pub fn sample_with_grad(&self, q: &Vec3) -> Result<(DdfSample, DdfGradient)> {
        match (&self.index, self.surface) {
            (SpatialIndex::Points(t), _) => ddf_grad_point_cloud(t, q, &self.cfg),
            (idx, Surface::TriangleMesh(m)) => ddf_grad_mesh(idx, m, q),
            _ => unreachable!("index kind follows surface kind"),
        }
    }

    /// Field value at `q` and the vector-Jacobian product for the cotangent
    /// `(a_f, a_h) = cotangent(sample)` with respect to the surface points.
    pub fn sample_with_pullback(
        &self,
        q: &Vec3,
        cotangent: impl FnOnce(&DdfSample) -> (f64, Vec3),
    ) -> Result<(DdfSample, Pullback)> {
        match (&self.index, self.surface) {
            (SpatialIndex::Points(t), _) => {
                let (sample, foot) = ddf_point_cloud(t, q, &self.cfg)?;
                let (a_f, a_h) = cotangent(&sample);
                let c = unit_or_zero(&sample) * a_f + a_h;
                Ok((sample, foot.pullback(t.points(), q, &c)))
            }
            (idx, Surface::TriangleMesh(m)) => {
                let (sample, foot) = ddf_mesh(idx, m, q)?;
                let (a_f, a_h) = cotangent(&sample);
                let c = unit_or_zero(&sample) * a_f + a_h;
                let face = m.faces[foot.face_index];
                Ok((sample, face.iter().zip(foot.weights).map(|(&v, w)| (v, c * w)).collect()))
            }
            _ => unreachable!("index kind follows surface kind"),
        }
    }

    /// Field values at every query, in query order.
    pub fn sample_all(&self, queries: &[Vec3]) -> Result<Vec<DdfSample>> {
        queries.par_iter().map(|q| self.sample(q)).collect()
    }

    pub fn sample_all_with_grad(&self, queries: &[Vec3]) -> Result<Vec<(DdfSample, DdfGradient)>> {
        queries.par_iter().map(|q| self.sample_with_grad(q)).collect()
    }
}
