//! Non-rigid mesh registration with an embedded deformation graph, and
//! template fitting through a diffusion reparameterization.

mod density;
mod diffusion;
mod graph;
mod smooth;
pub mod sparse;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ddf::{generate_reference_points, DdfSample, RefGenConfig, ReferencePointSet};
use crate::error::{DdmError, Result};
use crate::geom::{all_finite, MeshTopology, Surface, TriangleMesh, Vec3};
use crate::metric::{ddm_grad_against, evaluate_fixed_field, MetricConfig};
use crate::optim::{diverged, optimize, Algorithm, OptimConfig, OptimTrace};

pub use density::{density_adaptation_reg, density_adaptation_reg_grad, mean_incident_edge_length, DensityTargets};
pub use diffusion::{build_diffusion_system, uniform_laplacian, DiffusionSystem};
pub use graph::{build_deformation_graph, deform_vertices, node_weight, DeformationGraph};
pub use smooth::{smooth_reg_mesh, smooth_reg_mesh_grad};

fn flatten(v: &[Vec3]) -> Vec<f64> {
    v.iter().flat_map(|p| [p.x, p.y, p.z]).collect()
}

fn unflatten(x: &[f64]) -> Vec<Vec3> {
    x.chunks_exact(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect()
}

fn check_weight(name: &str, w: f64) -> Result<()> {
    if !(w >= 0.0) || !w.is_finite() {
        return Err(DdmError::Config(format!("{name} must be a non-negative number, got {w}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeformRegConfig {
    pub metric: MetricConfig,
    pub refgen: RefGenConfig,
    pub optim: OptimConfig,
    /// Weight of the offset smoothness term.
    pub lambda: f64,
    /// Node spacing ε as a multiple of the source's mean edge length.
    pub epsilon_factor: f64,
    /// Nodes blended into each vertex.
    pub node_neighbors: usize,
    pub graph_seed: u64,
}

impl Default for DeformRegConfig {
    fn default() -> Self {
        DeformRegConfig {
            metric: MetricConfig {
                beta: 1.0,
                ..Default::default()
            },
            refgen: RefGenConfig {
                count: 40_000,
                sigma: 0.1,
                ..Default::default()
            },
            optim: OptimConfig {
                algorithm: Algorithm::Gd,
                ..OptimConfig::gd(2.0, 1000)
            },
            lambda: 500.0,
            epsilon_factor: 5.0,
            node_neighbors: 5,
            graph_seed: 0,
        }
    }
}

/// Registration objective over the node parameters of a fixed graph.
pub struct NonrigidObjective<'a> {
    source: &'a TriangleMesh,
    graph: DeformationGraph,
    fixed_field: Vec<DdfSample>,
    refs: ReferencePointSet,
    metric: MetricConfig,
    lambda: f64,
}

impl<'a> NonrigidObjective<'a> {
    pub fn new(source: &'a TriangleMesh, target: &TriangleMesh, cfg: &DeformRegConfig) -> Result<Self> {
        source.validate()?;
        target.validate()?;
        check_weight("lambda", cfg.lambda)?;
        check_weight("epsilon_factor", cfg.epsilon_factor)?;
        let epsilon = cfg.epsilon_factor * source.mean_edge_length();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.graph_seed);
        let graph = build_deformation_graph(source, epsilon, cfg.node_neighbors, &mut rng)?;
        Self::with_graph(source, target, graph, cfg)
    }

    pub fn with_graph(
        source: &'a TriangleMesh,
        target: &TriangleMesh,
        graph: DeformationGraph,
        cfg: &DeformRegConfig,
    ) -> Result<Self> {
        cfg.metric.validate()?;
        let fixed: Surface = target.clone().into();
        let refs = generate_reference_points(&fixed, &cfg.refgen, None)?;
        let fixed_field = evaluate_fixed_field(&fixed, &refs, cfg.metric.ddf)?;
        Ok(NonrigidObjective {
            source,
            graph,
            fixed_field,
            refs,
            metric: cfg.metric,
            lambda: cfg.lambda,
        })
    }

    pub fn graph(&self) -> &DeformationGraph {
        &self.graph
    }

    pub fn evaluate(&mut self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.graph.set_params(x)?;
        let deformed = self.graph.deform_vertices(self.source)?;
        if !all_finite(&deformed) {
            return Ok(diverged(x.len()));
        }
        let moving: Surface = self.source.with_vertices(deformed.clone()).into();
        let (value, grad) = ddm_grad_against(&self.fixed_field, &moving, &self.refs, &self.metric)?;
        let (smooth, smooth_grad) = smooth_reg_mesh_grad(self.source, &deformed);
        let total: Vec<Vec3> = grad.grad.iter().zip(&smooth_grad).map(|(a, b)| a + b * self.lambda).collect();
        Ok((value.value + self.lambda * smooth, self.graph.pullback(self.source, &total)))
    }
}

/// Deforms `source` onto `target`. Returns the optimized graph, the
/// deformed mesh (same faces as `source`) and the trace.
pub fn register_nonrigid(
    source: &TriangleMesh,
    target: &TriangleMesh,
    cfg: &DeformRegConfig,
) -> Result<(DeformationGraph, TriangleMesh, OptimTrace)> {
    let mut objective = NonrigidObjective::new(source, target, cfg)?;
    let x0 = objective.graph.params();
    let mut f = |x: &[f64]| objective.evaluate(x);
    let trace = optimize(&mut f, x0, &cfg.optim)?;
    let mut graph = objective.graph;
    graph.set_params(&trace.params)?;
    let deformed = source.with_vertices(graph.deform_vertices(source)?);
    Ok((graph, deformed, trace))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TemplateFitConfig {
    pub metric: MetricConfig,
    pub refgen: RefGenConfig,
    pub optim: OptimConfig,
    /// Diffusion weight α.
    pub alpha: f64,
    /// Weight of the global edge-length target.
    pub lambda1: f64,
    /// Weight of the local edge-length target.
    pub lambda2: f64,
}

impl Default for TemplateFitConfig {
    fn default() -> Self {
        TemplateFitConfig {
            metric: MetricConfig {
                beta: 1.0,
                ..Default::default()
            },
            refgen: RefGenConfig {
                count: 40_000,
                sigma: 0.05,
                ..Default::default()
            },
            optim: OptimConfig::adam(0.05, 500),
            alpha: 1.0,
            lambda1: 1.5,
            lambda2: 4.5,
        }
    }
}

/// Template-fitting objective over the latent `u = (I + αL) V`.
pub struct TemplateObjective<'a> {
    template: &'a TriangleMesh,
    topo: MeshTopology,
    system: DiffusionSystem,
    fixed_field: Vec<DdfSample>,
    refs: ReferencePointSet,
    metric: MetricConfig,
    lambda1: f64,
    lambda2: f64,
}

impl<'a> TemplateObjective<'a> {
    pub fn new(template: &'a TriangleMesh, target: &TriangleMesh, cfg: &TemplateFitConfig) -> Result<Self> {
        template.validate()?;
        target.validate()?;
        cfg.metric.validate()?;
        check_weight("lambda1", cfg.lambda1)?;
        check_weight("lambda2", cfg.lambda2)?;
        let system = DiffusionSystem::new(template, cfg.alpha)?;
        let fixed: Surface = target.clone().into();
        let refs = generate_reference_points(&fixed, &cfg.refgen, None)?;
        let fixed_field = evaluate_fixed_field(&fixed, &refs, cfg.metric.ddf)?;
        Ok(TemplateObjective {
            template,
            topo: MeshTopology::new(template),
            system,
            fixed_field,
            refs,
            metric: cfg.metric,
            lambda1: cfg.lambda1,
            lambda2: cfg.lambda2,
        })
    }

    pub fn system(&self) -> &DiffusionSystem {
        &self.system
    }

    pub fn initial_params(&self) -> Result<Vec<f64>> {
        Ok(flatten(&self.system.to_latent(&self.template.vertices)?))
    }

    pub fn vertices(&self, x: &[f64]) -> Result<Vec<Vec3>> {
        self.system.to_vertices(&unflatten(x))
    }

    /// Value and gradient in `u`. The edge-length targets are taken from the
    /// current vertices and held constant.
    pub fn evaluate(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let vertices = self.vertices(x)?;
        let targets = DensityTargets::from_vertices(&vertices, &self.topo);
        self.evaluate_with_targets(x, &targets)
    }

    pub fn evaluate_with_targets(&self, x: &[f64], targets: &DensityTargets) -> Result<(f64, Vec<f64>)> {
        let vertices = self.vertices(x)?;
        if !all_finite(&vertices) {
            return Ok(diverged(x.len()));
        }
        let (reg, reg_grad) = density_adaptation_reg_grad(&vertices, &self.topo, targets, self.lambda1, self.lambda2);
        let moving: Surface = self.template.with_vertices(vertices).into();
        let (value, grad) = ddm_grad_against(&self.fixed_field, &moving, &self.refs, &self.metric)?;
        let total: Vec<Vec3> = grad.grad.iter().zip(&reg_grad).map(|(a, b)| a + b).collect();
        Ok((value.value + reg, flatten(&self.system.pullback(&total)?)))
    }
}

/// Deforms `template` onto `target`, keeping its faces.
pub fn fit_template(
    template: &TriangleMesh,
    target: &TriangleMesh,
    cfg: &TemplateFitConfig,
) -> Result<(TriangleMesh, OptimTrace)> {
    let objective = TemplateObjective::new(template, target, cfg)?;
    let x0 = objective.initial_params()?;
    let mut f = |x: &[f64]| objective.evaluate(x);
    let trace = optimize(&mut f, x0, &cfg.optim)?;
    let fitted = template.with_vertices(objective.vertices(&trace.params)?);
    Ok((fitted, trace))
}

#[cfg(test)]
mod tests;
