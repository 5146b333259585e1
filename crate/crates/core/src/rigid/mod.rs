//! Rigid registration over SE(3).

mod so3;

use serde::{Deserialize, Serialize};

use crate::ddf::{generate_reference_points, DdfSample, RefGenConfig, ReferencePointSet};
use crate::error::{DdmError, Result};
use crate::geom::{all_finite, Mat3, PointCloud, Surface, Vec3};
use crate::metric::{ddm_grad_against, evaluate_fixed_field, MetricConfig};
use crate::optim::{diverged, optimize, LrSchedule, OptimConfig, OptimTrace};

pub use so3::{so3_exp, so3_left_jacobian, so3_log};

/// `x ↦ R x + t`. Serialized with the rotation as row-major rows; a
/// deserialized transform is validated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "TransformRepr", try_from = "TransformRepr")]
pub struct RigidTransform {
    pub rotation: Mat3,
    pub translation: Vec3,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransformRepr {
    rotation: [[f64; 3]; 3],
    translation: [f64; 3],
}

impl From<RigidTransform> for TransformRepr {
    fn from(t: RigidTransform) -> Self {
        let r = &t.rotation;
        TransformRepr {
            rotation: [0, 1, 2].map(|i| [r[(i, 0)], r[(i, 1)], r[(i, 2)]]),
            translation: [t.translation.x, t.translation.y, t.translation.z],
        }
    }
}

impl TryFrom<TransformRepr> for RigidTransform {
    type Error = DdmError;

    fn try_from(r: TransformRepr) -> Result<Self> {
        let m = Mat3::from_fn(|i, j| r.rotation[i][j]);
        RigidTransform::new(m, Vec3::from(r.translation))
    }
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        RigidTransform {
            rotation: Mat3::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn new(rotation: Mat3, translation: Vec3) -> Result<Self> {
        let t = RigidTransform { rotation, translation };
        t.validate()?;
        Ok(t)
    }

    pub fn from_axis_angle(omega: &Vec3, translation: Vec3) -> Self {
        RigidTransform {
            rotation: so3_exp(omega),
            translation,
        }
    }

    /// Checks RᵀR = I and det R = 1 to 1e-9.
    pub fn validate(&self) -> Result<()> {
        let r = &self.rotation;
        if !r.iter().chain(self.translation.iter()).all(|v| v.is_finite()) {
            return Err(DdmError::invalid("rigid transform has non-finite entries"));
        }
        let orth = (r.transpose() * r - Mat3::identity()).amax();
        let det = r.determinant();
        if orth > 1e-9 || (det - 1.0).abs() > 1e-9 {
            return Err(DdmError::invalid(format!(
                "not a rotation: |RᵀR − I| = {orth:.3e}, det = {det}"
            )));
        }
        Ok(())
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    pub fn axis_angle(&self) -> Vec3 {
        so3_log(&self.rotation)
    }
}

pub fn apply_rigid(cloud: &PointCloud, t: &RigidTransform) -> PointCloud {
    PointCloud {
        points: cloud.points.iter().map(|p| t.apply(p)).collect(),
    }
}

/// A preliminary pass with its own confidence sharpness, whose result seeds
/// the main optimization. A small `beta` widens the basin of attraction:
/// terms with `d > 1/beta` push surfaces apart rather than together.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoarseStage {
    pub beta: f64,
    pub optim: OptimConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RigidRegConfig {
    pub metric: MetricConfig,
    /// A `count` of 0 means ten reference points per target point.
    pub refgen: RefGenConfig,
    pub optim: OptimConfig,
    pub init: RigidTransform,
    /// Optional warm-up pass; off by default.
    pub coarse: Option<CoarseStage>,
}

impl Default for RigidRegConfig {
    fn default() -> Self {
        RigidRegConfig {
            metric: MetricConfig {
                beta: 20.0,
                ..Default::default()
            },
            refgen: RefGenConfig {
                count: 0,
                sigma: 0.05,
                ..Default::default()
            },
            optim: OptimConfig::adam(0.02, 200),
            init: RigidTransform::identity(),
            coarse: None,
        }
    }
}

impl RigidRegConfig {
    /// Default settings preceded by a 40-iteration pass at β = 0, with
    /// cosine-decayed Adam steps (0.01 coarse, 0.002 fine, 40 iterations
    /// each). Converges from starts well outside the β = 20 basin.
    pub fn coarse_to_fine() -> Self {
        let cosine = |learning_rate, iterations, final_factor| OptimConfig {
            schedule: LrSchedule::Cosine { final_factor },
            log_every: 0,
            ..OptimConfig::adam(learning_rate, iterations)
        };
        RigidRegConfig {
            optim: cosine(0.002, 40, 0.01),
            coarse: Some(CoarseStage {
                beta: 0.0,
                optim: cosine(0.01, 40, 0.05),
            }),
            ..Default::default()
        }
    }
}

/// Registration parameters: an axis-angle `ω` and a shift `τ`, acting on the
/// source about its centroid `c`: `p ↦ exp(ω)(p − c) + c + τ`. Keeping the
/// rotation centre inside the cloud decouples the two blocks.
#[derive(Debug, Clone, Copy)]
struct Chart {
    centroid: Vec3,
}

impl Chart {
    fn params(&self, t: &RigidTransform) -> [f64; 6] {
        let w = t.axis_angle();
        let tau = t.translation - self.centroid + t.rotation * self.centroid;
        [w.x, w.y, w.z, tau.x, tau.y, tau.z]
    }

    fn transform(&self, x: &[f64]) -> RigidTransform {
        let omega = Vec3::new(x[0], x[1], x[2]);
        let tau = Vec3::new(x[3], x[4], x[5]);
        let rotation = so3_exp(&omega);
        RigidTransform {
            rotation,
            translation: self.centroid + tau - rotation * self.centroid,
        }
    }
}

/// Chains per-point gradients `g_i = ∂L/∂y_i`, `y_i = R (p_i − c) + c + τ`,
/// back to `(ω, τ)`.
fn chain_rigid(omega: &Vec3, rotated: &[Vec3], grads: &[Vec3]) -> [f64; 6] {
    let mut g_tau = Vec3::zeros();
    let mut torque = Vec3::zeros();
    for (r, g) in rotated.iter().zip(grads) {
        g_tau += g;
        // (−[r]×)ᵀ g = [r]× g = r × g
        torque += r.cross(g);
    }
    let g_omega = so3_left_jacobian(omega).transpose() * torque;
    [g_omega.x, g_omega.y, g_omega.z, g_tau.x, g_tau.y, g_tau.z]
}

/// Objective and gradient in the registration chart, for a fixed target
/// field. Exposed for gradient checks.
pub struct RigidObjective<'a> {
    source: &'a PointCloud,
    fixed_field: Vec<DdfSample>,
    refs: ReferencePointSet,
    metric: MetricConfig,
    chart: Chart,
}

impl<'a> RigidObjective<'a> {
    pub fn new(source: &'a PointCloud, target: &PointCloud, cfg: &RigidRegConfig) -> Result<Self> {
        source.validate()?;
        target.validate()?;
        cfg.metric.validate()?;
        cfg.init.validate()?;
        for (name, c) in [("source", source), ("target", target)] {
            if c.len() < cfg.metric.ddf.k {
                return Err(DdmError::invalid(format!(
                    "{name} has {} points, fewer than K = {}",
                    c.len(),
                    cfg.metric.ddf.k
                )));
            }
        }
        let mut refgen = cfg.refgen.clone();
        if refgen.count == 0 {
            refgen.count = 10 * target.len();
        }
        let fixed: Surface = target.clone().into();
        let mut refs = generate_reference_points(&fixed, &refgen, None)?;
        refs.sort_spatially();
        let fixed_field = evaluate_fixed_field(&fixed, &refs, cfg.metric.ddf)?;
        let centroid = source.points.iter().sum::<Vec3>() / source.len() as f64;
        Ok(RigidObjective {
            source,
            fixed_field,
            refs,
            metric: cfg.metric,
            chart: Chart { centroid },
        })
    }

    pub fn params(&self, t: &RigidTransform) -> Vec<f64> {
        self.chart.params(t).to_vec()
    }

    pub fn transform(&self, x: &[f64]) -> RigidTransform {
        self.chart.transform(x)
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let omega = Vec3::new(x[0], x[1], x[2]);
        let t = self.chart.transform(x);
        let c = self.chart.centroid;
        let rotated: Vec<Vec3> = self.source.points.iter().map(|p| t.rotation * (p - c)).collect();
        let moved: Surface = PointCloud {
            points: self.source.points.iter().map(|p| t.apply(p)).collect(),
        }
        .into();
        if !all_finite(moved.positions()) {
            return Ok(diverged(x.len()));
        }
        let (value, grad) = ddm_grad_against(&self.fixed_field, &moved, &self.refs, &self.metric)?;
        Ok((value.value, chain_rigid(&omega, &rotated, &grad.grad).to_vec()))
    }
}

/// Aligns `source` to `target` by minimizing the discrepancy over SE(3).
pub fn register_rigid(
    source: &PointCloud,
    target: &PointCloud,
    cfg: &RigidRegConfig,
) -> Result<(RigidTransform, OptimTrace)> {
    let mut objective = RigidObjective::new(source, target, cfg)?;
    let mut x0 = objective.params(&cfg.init);
    let mut earlier = None;
    if let Some(coarse) = &cfg.coarse {
        objective.metric.beta = coarse.beta;
        objective.metric.validate()?;
        let trace = optimize(&mut |x: &[f64]| objective.evaluate(x), x0, &coarse.optim)?;
        x0 = trace.params.clone();
        objective.metric.beta = cfg.metric.beta;
        earlier = Some(trace);
    }
    let mut trace = optimize(&mut |x: &[f64]| objective.evaluate(x), x0, &cfg.optim)?;
    if let Some(first) = earlier {
        trace = first.then(trace);
    }
    Ok((objective.transform(&trace.params), trace))
}
