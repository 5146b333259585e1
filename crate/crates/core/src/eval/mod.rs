//! Accuracy scores for registration, deformation, scene flow and surface
//! reconstruction.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{DdmError, Result};
use crate::geom::{sample_points_on_mesh_with_faces, KdTree, Mat3, Surface, TriangleMesh, Vec3};
use crate::rigid::RigidTransform;

/// Geodesic angle between two rotations, in degrees.
pub fn rotation_error(r_hat: &Mat3, r_gt: &Mat3) -> f64 {
    let c = (((r_gt.transpose() * r_hat).trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    c.acos().to_degrees()
}

pub fn translation_error(t_hat: &Vec3, t_gt: &Vec3) -> f64 {
    (t_hat - t_gt).norm()
}

/// Rotation (degrees) and translation error of one registration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegistrationError {
    pub re: f64,
    pub te: f64,
}

impl RegistrationError {
    pub fn between(estimate: &RigidTransform, truth: &RigidTransform) -> Self {
        RegistrationError {
            re: rotation_error(&estimate.rotation, &truth.rotation),
            te: translation_error(&estimate.translation, &truth.translation),
        }
    }

    pub fn succeeds(&self, re_thresh: f64, te_thresh: f64) -> bool {
        self.re < re_thresh && self.te < te_thresh
    }
}

/// Success rate plus mean errors over the successful runs only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuccessSummary {
    pub rate: f64,
    pub mean_re: Option<f64>,
    pub mean_te: Option<f64>,
}

pub fn success_rate(results: &[RegistrationError], re_thresh: f64, te_thresh: f64) -> Result<SuccessSummary> {
    if results.is_empty() {
        return Err(DdmError::invalid("no registration results"));
    }
    let ok: Vec<_> = results.iter().filter(|r| r.succeeds(re_thresh, te_thresh)).collect();
    let n = ok.len() as f64;
    let mean = |f: fn(&RegistrationError) -> f64| (!ok.is_empty()).then(|| ok.iter().map(|r| f(r)).sum::<f64>() / n);
    Ok(SuccessSummary {
        rate: n / results.len() as f64,
        mean_re: mean(|r| r.re),
        mean_te: mean(|r| r.te),
    })
}

/// Fraction of successes at each `(re, te)` threshold pair.
pub fn recall_curve(results: &[RegistrationError], thresholds: &[(f64, f64)]) -> Result<Vec<(f64, f64, f64)>> {
    thresholds
        .iter()
        .map(|&(re, te)| Ok((re, te, success_rate(results, re, te)?.rate)))
        .collect()
}

fn check_pair(a: &[Vec3], b: &[Vec3]) -> Result<()> {
    if a.is_empty() || a.len() != b.len() {
        return Err(DdmError::invalid(format!(
            "vertex sets must be non-empty and of equal length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// Root mean square of per-vertex Euclidean errors.
pub fn vertex_rmse(v_hat: &[Vec3], v_gt: &[Vec3]) -> Result<f64> {
    check_pair(v_hat, v_gt)?;
    let sq: f64 = v_hat.iter().zip(v_gt).map(|(a, b)| (a - b).norm_squared()).sum();
    Ok((sq / v_hat.len() as f64).sqrt())
}

/// Mean per-vertex Euclidean error.
pub fn v2v(v_hat: &[Vec3], v_gt: &[Vec3]) -> Result<f64> {
    check_pair(v_hat, v_gt)?;
    Ok(v_hat.iter().zip(v_gt).map(|(a, b)| (a - b).norm()).sum::<f64>() / v_hat.len() as f64)
}

/// End-point error and thresholded accuracies.
///
/// A point counts toward `acc_strict` when its error is below 0.05 or below
/// 5% of the true flow magnitude, toward `acc_relax` at 0.1 or 10%, and as an
/// outlier when its error exceeds 0.3 or 10% of the magnitude. Relative
/// errors against a zero true flow are infinite unless the error is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowMetrics {
    pub epe: f64,
    pub acc_strict: f64,
    pub acc_relax: f64,
    pub outliers: f64,
}

pub const FLOW_CONVENTION: &str = "acc_strict: epe < 0.05 or rel < 5%; acc_relax: epe < 0.1 or rel < 10%; \
                                   outliers: epe > 0.3 or rel > 10%";

pub fn flow_metrics(flow_hat: &[Vec3], flow_gt: &[Vec3]) -> Result<FlowMetrics> {
    check_pair(flow_hat, flow_gt)?;
    let n = flow_hat.len() as f64;
    let (mut epe, mut strict, mut relax, mut out) = (0.0, 0usize, 0usize, 0usize);
    for (a, b) in flow_hat.iter().zip(flow_gt) {
        let e = (a - b).norm();
        let mag = b.norm();
        let rel = if e == 0.0 { 0.0 } else { e / mag };
        epe += e;
        strict += usize::from(e < 0.05 || rel < 0.05);
        relax += usize::from(e < 0.1 || rel < 0.1);
        out += usize::from(e > 0.3 || rel > 0.1);
    }
    Ok(FlowMetrics {
        epe: epe / n,
        acc_strict: strict as f64 / n,
        acc_relax: relax as f64 / n,
        outliers: out as f64 / n,
    })
}

fn nearest_distances(from: &[Vec3], to: &KdTree) -> Vec<(usize, f64)> {
    from.par_iter()
        .map(|p| {
            let n = to.nearest(p);
            (n.index, n.distance)
        })
        .collect()
}

/// Harmonic mean of precision and recall at distance `threshold`.
pub fn fscore(pred: &[Vec3], gt: &[Vec3], threshold: f64) -> Result<f64> {
    if pred.is_empty() || gt.is_empty() {
        return Err(DdmError::invalid("fscore needs non-empty sample sets"));
    }
    let within = |from: &[Vec3], to: &[Vec3]| -> Result<f64> {
        let tree = KdTree::build(to)?;
        let hits = nearest_distances(from, &tree).iter().filter(|d| d.1 <= threshold).count();
        Ok(hits as f64 / from.len() as f64)
    };
    let precision = within(pred, gt)?;
    let recall = within(gt, pred)?;
    if precision + recall == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * precision * recall / (precision + recall))
}

/// Mean `|n_a · n_b|` over nearest sample pairs in both directions, with the
/// face normal at each sample.
pub fn normal_consistency(pred: &TriangleMesh, gt: &TriangleMesh, samples: usize, seed: u64) -> Result<f64> {
    pred.validate()?;
    gt.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (sp, fp) = sample_points_on_mesh_with_faces(pred, samples, &mut rng)?;
    let (sg, fg) = sample_points_on_mesh_with_faces(gt, samples, &mut rng)?;
    let np: Vec<Vec3> = fp.iter().map(|&f| pred.face_normal(f)).collect();
    let ng: Vec<Vec3> = fg.iter().map(|&f| gt.face_normal(f)).collect();
    let one_way = |from: &[Vec3], n_from: &[Vec3], to: &[Vec3], n_to: &[Vec3]| -> Result<f64> {
        let tree = KdTree::build(to)?;
        let total: f64 = nearest_distances(from, &tree)
            .iter()
            .zip(n_from)
            .map(|(&(j, _), n)| n.dot(&n_to[j]).abs())
            .sum();
        Ok(total / from.len() as f64)
    };
    let a = one_way(&sp.points, &np, &sg.points, &ng)?;
    let b = one_way(&sg.points, &ng, &sp.points, &np)?;
    Ok(0.5 * (a + b))
}

/// Points spread over a surface for sample-based scores: `n` area-uniform
/// samples of a mesh, or a point cloud's own points.
pub fn surface_samples(surface: &Surface, n: usize, seed: u64) -> Result<Vec<Vec3>> {
    match surface {
        Surface::TriangleMesh(m) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok(sample_points_on_mesh_with_faces(m, n, &mut rng)?.0.points)
        }
        Surface::PointCloud(c) => Ok(c.points.clone()),
    }
}

/// Named scores plus threshold sweeps, printable as `key = value` lines or
/// JSON.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub notes: Vec<String>,
    pub metrics: BTreeMap<String, f64>,
    pub curves: BTreeMap<String, Vec<(f64, f64)>>,
}

impl EvalReport {
    pub fn insert(&mut self, name: &str, value: f64) {
        self.metrics.insert(name.to_string(), value);
    }

    pub fn to_key_value(&self) -> String {
        let mut out = String::new();
        for n in &self.notes {
            out.push_str(&format!("# {n}\n"));
        }
        for (k, v) in &self.metrics {
            out.push_str(&format!("{k} = {v}\n"));
        }
        for (name, curve) in &self.curves {
            for (t, r) in curve {
                out.push_str(&format!("{name}[{t}] = {r}\n"));
            }
        }
        out
    }
}
