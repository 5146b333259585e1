use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{DdmError, Result};
use crate::geom::{sample_points_on_mesh, KdTree, Surface, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RefSources {
    /// Base points come from the fixed surface only.
    #[default]
    FixedOnly,
    /// Base points come from both surfaces, split in proportion to their
    /// point (or vertex) counts.
    BothSurfaces,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefGenConfig {
    /// Total number of reference points.
    pub count: usize,
    /// Per-coordinate standard deviation of the Gaussian offset.
    pub sigma: f64,
    pub seed: u64,
    pub sources: RefSources,
    /// When set, each base point of a point cloud gets its own standard
    /// deviation: this factor times the distance to its nearest other point.
    /// `sigma` is ignored.
    #[serde(default)]
    pub adaptive_sigma_scale: Option<f64>,
}

impl Default for RefGenConfig {
    fn default() -> Self {
        RefGenConfig {
            count: 10_000,
            sigma: 0.05,
            seed: 0,
            sources: RefSources::FixedOnly,
            adaptive_sigma_scale: None,
        }
    }
}

impl RefGenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(DdmError::invalid("reference point count must be positive"));
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(DdmError::invalid("sigma must be finite and non-negative"));
        }
        if let Some(s) = self.adaptive_sigma_scale {
            if !(s.is_finite() && s >= 0.0) {
                return Err(DdmError::invalid("adaptive sigma scale must be finite and non-negative"));
            }
        }
        Ok(())
    }
}

/// Shared query points near the fixed surface.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferencePointSet {
    pub points: Vec<Vec3>,
    pub config: RefGenConfig,
    /// The first `from_fixed` points derive from the fixed surface, the rest
    /// from the moving one.
    pub from_fixed: usize,
}

impl ReferencePointSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Reorders points along a Morton curve, separately within the fixed and
    /// moving segments. Nearby queries then touch the same tree nodes, which
    /// speeds up repeated field evaluation; the metric value is unaffected
    /// up to summation order.
    pub fn sort_spatially(&mut self) {
        let (lo, hi) = self.points.iter().fold(
            (Vec3::repeat(f64::INFINITY), Vec3::repeat(f64::NEG_INFINITY)),
            |(lo, hi), p| (lo.inf(p), hi.sup(p)),
        );
        let extent = (hi - lo).max().max(f64::MIN_POSITIVE);
        let key = |p: &Vec3| {
            let cell = |c: f64| (((c / extent) * 1023.0) as u64).min(1023);
            let d = p - lo;
            spread(cell(d.x)) | spread(cell(d.y)) << 1 | spread(cell(d.z)) << 2
        };
        let split = self.from_fixed;
        self.points[..split].sort_by_cached_key(key);
        self.points[split..].sort_by_cached_key(key);
    }

    /// Wraps explicit points, e.g. loaded from disk.
    pub fn from_points(points: Vec<Vec3>) -> Self {
        let config = RefGenConfig {
            count: points.len(),
            sigma: 0.0,
            ..Default::default()
        };
        ReferencePointSet {
            from_fixed: points.len(),
            points,
            config,
        }
    }
}

/// Interleaves the low 10 bits of `v` with two zero bits each.
fn spread(v: u64) -> u64 {
    let mut x = v & 0x3ff;
    x = (x | x << 16) & 0x030000ff;
    x = (x | x << 8) & 0x0300f00f;
    x = (x | x << 4) & 0x030c30c3;
    (x | x << 2) & 0x09249249
}

/// Gaussian-perturbed copies of surface samples. Deterministic in
/// `(surfaces, cfg)`.
pub fn generate_reference_points(
    fixed: &Surface,
    cfg: &RefGenConfig,
    moving: Option<&Surface>,
) -> Result<ReferencePointSet> {
    cfg.validate()?;
    fixed.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let (mut base, mut sigmas, from_fixed) = match cfg.sources {
        RefSources::FixedOnly => {
            let (pts, sig) = base_points(fixed, cfg.count, cfg, &mut rng)?;
            (pts, sig, cfg.count)
        }
        RefSources::BothSurfaces => {
            let moving = moving.ok_or_else(|| {
                DdmError::invalid("both-surfaces reference generation needs the moving surface")
            })?;
            moving.validate()?;
            let b1 = fixed.positions().len();
            let b2 = moving.positions().len();
            let share = cfg.count * b1 / (b1 + b2);
            if share == 0 || share == cfg.count {
                return Err(DdmError::invalid(
                    "reference count too small to draw from both surfaces",
                ));
            }
            let (mut pts, mut sig) = base_points(fixed, share, cfg, &mut rng)?;
            let (p2, s2) = base_points(moving, cfg.count - share, cfg, &mut rng)?;
            pts.extend(p2);
            sig.extend(s2);
            (pts, sig, share)
        }
    };

    for (p, sigma) in base.iter_mut().zip(sigmas.drain(..)) {
        let nx: f64 = rng.sample(StandardNormal);
        let ny: f64 = rng.sample(StandardNormal);
        let nz: f64 = rng.sample(StandardNormal);
        *p += Vec3::new(nx, ny, nz) * sigma;
    }
    Ok(ReferencePointSet {
        points: base,
        config: cfg.clone(),
        from_fixed,
    })
}

/// `count` unperturbed base points and their noise scales.
fn base_points(
    surface: &Surface,
    count: usize,
    cfg: &RefGenConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<Vec3>, Vec<f64>)> {
    match surface {
        Surface::PointCloud(cloud) => {
            let n = cloud.points.len();
            let mut idx: Vec<usize> = Vec::with_capacity(count);
            for _ in 0..count / n {
                idx.extend(0..n);
            }
            let rem = count % n;
            if rem > 0 {
                let mut perm: Vec<usize> = (0..n).collect();
                perm.shuffle(rng);
                idx.extend_from_slice(&perm[..rem]);
            }
            let sigmas = match cfg.adaptive_sigma_scale {
                None => vec![cfg.sigma; count],
                Some(scale) => {
                    let spacing = nearest_other_distances(&cloud.points)?;
                    idx.iter().map(|&i| scale * spacing[i]).collect()
                }
            };
            Ok((idx.into_iter().map(|i| cloud.points[i]).collect(), sigmas))
        }
        Surface::TriangleMesh(mesh) => {
            if cfg.adaptive_sigma_scale.is_some() {
                return Err(DdmError::invalid(
                    "adaptive sigma is only defined for point-cloud sources",
                ));
            }
            let samples = sample_points_on_mesh(mesh, count, rng)?;
            Ok((samples.points, vec![cfg.sigma; count]))
        }
    }
}

fn nearest_other_distances(points: &[Vec3]) -> Result<Vec<f64>> {
    if points.len() < 2 {
        return Ok(vec![0.0; points.len()]);
    }
    let tree = KdTree::build(points)?;
    points
        .iter()
        .map(|p| Ok(tree.knn(p, 2)?[1].distance))
        .collect()
}
