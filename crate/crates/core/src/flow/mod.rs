//! Scene flow as direct per-point offset optimization with a K-NN
//! smoothness prior.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ddf::{generate_reference_points, DdfConfig, DdfSample, RefGenConfig, ReferencePointSet};
use crate::error::{DdmError, Result};
use crate::geom::{all_finite, KdTree, PointCloud, Surface, Vec3};
use crate::metric::{ddm_grad_against, evaluate_fixed_field, MetricConfig, Reduction};
use crate::optim::{diverged, optimize, OptimConfig, OptimTrace};

/// Per-point offsets for a source cloud.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowField {
    pub delta: Vec<Vec3>,
}

impl FlowField {
    pub fn zeros(n: usize) -> Self {
        FlowField {
            delta: vec![Vec3::zeros(); n],
        }
    }

    pub fn validate(&self, source: &PointCloud) -> Result<()> {
        if self.delta.len() != source.len() {
            return Err(DdmError::invalid(format!(
                "flow has {} vectors for {} source points",
                self.delta.len(),
                source.len()
            )));
        }
        if self.delta.iter().any(|d| !d.iter().all(|c| c.is_finite())) {
            return Err(DdmError::invalid("flow contains non-finite values"));
        }
        Ok(())
    }

    pub fn apply(&self, source: &PointCloud) -> Result<PointCloud> {
        self.validate(source)?;
        Ok(PointCloud {
            points: source.points.iter().zip(&self.delta).map(|(p, d)| p + d).collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowConfig {
    /// K = 5 neighbours. β is not given for this task; 1.0 keeps typical
    /// flow magnitudes inside the attracting range `d < 1/β`.
    pub metric: MetricConfig,
    /// M = 81920 reference points, each with its own spread.
    pub refgen: RefGenConfig,
    /// Adam, learning rate 0.01, 500 iterations.
    pub optim: OptimConfig,
    /// Smoothness weight. 100 balances the two terms under the mean
    /// reductions used here; 1 lets points slide along the surface.
    pub lambda_smooth: f64,
    /// Smoothness neighbours per point, excluding the point itself.
    pub smooth_neighbors: usize,
    /// Per-point spread as a multiple of the distance to the nearest other
    /// target point (3x).
    pub adaptive_sigma_scale: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            metric: MetricConfig {
                beta: 1.0,
                ddf: DdfConfig::default(),
                reduction: Reduction::Mean,
            },
            refgen: RefGenConfig {
                count: 81_920,
                ..Default::default()
            },
            optim: OptimConfig::adam(0.01, 500),
            lambda_smooth: 100.0,
            smooth_neighbors: 8,
            adaptive_sigma_scale: 3.0,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        self.metric.validate()?;
        self.optim.validate()?;
        if !(self.lambda_smooth.is_finite() && self.lambda_smooth >= 0.0) {
            return Err(DdmError::invalid("lambda_smooth must be finite and non-negative"));
        }
        if self.smooth_neighbors == 0 {
            return Err(DdmError::invalid("smooth_neighbors must be at least 1"));
        }
        if !(self.adaptive_sigma_scale.is_finite() && self.adaptive_sigma_scale >= 0.0) {
            return Err(DdmError::invalid("adaptive_sigma_scale must be finite and non-negative"));
        }
        Ok(())
    }
}

/// K nearest other points of every source point, fixed for the whole run.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothNeighbors {
    pub k: usize,
    pub lists: Vec<Vec<usize>>,
}

impl SmoothNeighbors {
    pub fn new(source: &PointCloud, k: usize) -> Result<Self> {
        source.validate()?;
        if k == 0 || source.len() < k + 1 {
            return Err(DdmError::invalid(format!(
                "smoothness needs at least K + 1 = {} points, got {}",
                k + 1,
                source.len()
            )));
        }
        let tree = KdTree::build(&source.points)?;
        let lists = source
            .points
            .par_iter()
            .enumerate()
            .map(|(i, p)| {
                let nn = tree.knn_dist2(p, k + 1)?;
                // drop the point itself; with duplicates it may not come first
                let mut list: Vec<usize> = nn.iter().map(|n| n.0).filter(|&j| j != i).collect();
                list.truncate(k);
                Ok(list)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SmoothNeighbors { k, lists })
    }
}

/// Mean squared flow difference over neighbour pairs, divided by 3.
pub fn flow_smooth_reg(neighbors: &SmoothNeighbors, flow: &FlowField) -> f64 {
    flow_smooth_reg_grad(neighbors, flow).0
}

pub fn flow_smooth_reg_grad(neighbors: &SmoothNeighbors, flow: &FlowField) -> (f64, Vec<Vec3>) {
    let n = flow.delta.len();
    let scale = 1.0 / (3.0 * n as f64 * neighbors.k as f64);
    let mut value = 0.0;
    let mut grad = vec![Vec3::zeros(); n];
    for (i, list) in neighbors.lists.iter().enumerate() {
        for &j in list {
            let diff = flow.delta[i] - flow.delta[j];
            value += diff.norm_squared();
            let g = 2.0 * scale * diff;
            grad[i] += g;
            grad[j] -= g;
        }
    }
    (value * scale, grad)
}

pub struct FlowObjective<'a> {
    source: &'a PointCloud,
    neighbors: SmoothNeighbors,
    fixed_field: Vec<DdfSample>,
    refs: ReferencePointSet,
    metric: MetricConfig,
    lambda: f64,
}

impl<'a> FlowObjective<'a> {
    pub fn new(source: &'a PointCloud, target: &PointCloud, cfg: &FlowConfig) -> Result<Self> {
        cfg.validate()?;
        source.validate()?;
        target.validate()?;
        for (name, c) in [("source", source), ("target", target)] {
            if c.len() < cfg.metric.ddf.k {
                return Err(DdmError::invalid(format!(
                    "{name} has {} points, fewer than K = {}",
                    c.len(),
                    cfg.metric.ddf.k
                )));
            }
        }
        let neighbors = SmoothNeighbors::new(source, cfg.smooth_neighbors)?;
        let mut refgen = cfg.refgen.clone();
        refgen.adaptive_sigma_scale = Some(cfg.adaptive_sigma_scale);
        let fixed: Surface = target.clone().into();
        let refs = generate_reference_points(&fixed, &refgen, None)?;
        let fixed_field = evaluate_fixed_field(&fixed, &refs, cfg.metric.ddf)?;
        Ok(FlowObjective {
            source,
            neighbors,
            fixed_field,
            refs,
            metric: cfg.metric,
            lambda: cfg.lambda_smooth,
        })
    }

    pub fn neighbors(&self) -> &SmoothNeighbors {
        &self.neighbors
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let flow = unflatten(x);
        let moved: Surface = flow.apply(self.source)?.into();
        if !all_finite(moved.positions()) {
            return Ok(diverged(x.len()));
        }
        let (value, grad) = ddm_grad_against(&self.fixed_field, &moved, &self.refs, &self.metric)?;
        let (smooth, smooth_grad) = flow_smooth_reg_grad(&self.neighbors, &flow);
        let mut g = Vec::with_capacity(x.len());
        for (a, b) in grad.grad.iter().zip(&smooth_grad) {
            g.extend((a + self.lambda * b).iter());
        }
        Ok((value.value + self.lambda * smooth, g))
    }
}

fn unflatten(x: &[f64]) -> FlowField {
    FlowField {
        delta: x.chunks_exact(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect(),
    }
}

/// Optimizes per-point offsets moving `source` onto `target`, from zero flow.
pub fn estimate_scene_flow(
    source: &PointCloud,
    target: &PointCloud,
    cfg: &FlowConfig,
) -> Result<(FlowField, OptimTrace)> {
    let objective = FlowObjective::new(source, target, cfg)?;
    let mut f = |x: &[f64]| objective.evaluate(x);
    let trace = optimize(&mut f, vec![0.0; 3 * source.len()], &cfg.optim)?;
    Ok((unflatten(&trace.params), trace))
}

#[cfg(test)]
mod tests;
