use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{DdmError, Result};
use crate::geom::{Mat3, MeshTopology, TriangleMesh, Vec3};
use crate::rigid::{so3_exp, so3_left_jacobian};

/// Embedded deformation graph: a sparse set of mesh vertices, each carrying
/// a rigid transform, blended onto every vertex with geodesic weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeformationGraph {
    pub node_vertex_indices: Vec<usize>,
    /// Rest positions of the nodes.
    pub node_positions: Vec<Vec3>,
    /// Per-node axis-angle rotation.
    pub rotations: Vec<Vec3>,
    pub translations: Vec<Vec3>,
    pub epsilon: f64,
    pub k: usize,
    /// Per vertex: `(node, weight)` for up to `k` nodes, nearest first. All
    /// weights are positive.
    pub vertex_nodes: Vec<SmallVec<[(usize, f64); 8]>>,
}

/// `max(0, (1 − d²/ε²)³)`.
pub fn node_weight(d: f64, epsilon: f64) -> f64 {
    let x = 1.0 - (d * d) / (epsilon * epsilon);
    if x <= 0.0 {
        0.0
    } else {
        x * x * x
    }
}

/// Greedy geodesic ε-net: repeatedly pick a random remaining vertex as a
/// node and drop every remaining vertex closer than ε to it. Each vertex
/// then binds to its `k` geodesically nearest nodes.
pub fn build_deformation_graph<R: Rng + ?Sized>(
    mesh: &TriangleMesh,
    epsilon: f64,
    k: usize,
    rng: &mut R,
) -> Result<DeformationGraph> {
    mesh.validate()?;
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(DdmError::invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    if k == 0 {
        return Err(DdmError::invalid("node neighbour count must be positive"));
    }
    let n = mesh.vertices.len();
    let topo = MeshTopology::new(mesh);
    // Picking the first survivor of a random permutation is a uniform pick
    // among the remaining vertices.
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut removed = vec![false; n];
    let mut nodes = Vec::new();
    let mut reach: Vec<SmallVec<[(f64, usize); 8]>> = vec![SmallVec::new(); n];
    for &v in &order {
        if removed[v] {
            continue;
        }
        let node = nodes.len();
        nodes.push(v);
        for (u, d) in topo.geodesic_from(&mesh.vertices, v, epsilon) {
            if d < epsilon {
                removed[u] = true;
                reach[u].push((d, node));
            }
        }
    }

    let mut vertex_nodes = Vec::with_capacity(n);
    for (v, mut cands) in reach.into_iter().enumerate() {
        cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let bound: SmallVec<[(usize, f64); 8]> = cands
            .iter()
            .map(|&(d, j)| (j, node_weight(d, epsilon)))
            .filter(|&(_, w)| w > 0.0)
            .take(k)
            .collect();
        assert!(!bound.is_empty(), "vertex {v} is not covered by any node");
        vertex_nodes.push(bound);
    }

    let node_positions = nodes.iter().map(|&i| mesh.vertices[i]).collect();
    Ok(DeformationGraph {
        rotations: vec![Vec3::zeros(); nodes.len()],
        translations: vec![Vec3::zeros(); nodes.len()],
        node_vertex_indices: nodes,
        node_positions,
        epsilon,
        k,
        vertex_nodes,
    })
}

impl DeformationGraph {
    pub fn node_count(&self) -> usize {
        self.node_vertex_indices.len()
    }

    /// Node parameters as `[ω_0, t_0, ω_1, t_1, …]`.
    pub fn params(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(6 * self.node_count());
        for (w, t) in self.rotations.iter().zip(&self.translations) {
            x.extend_from_slice(w.as_slice());
            x.extend_from_slice(t.as_slice());
        }
        x
    }

    pub fn set_params(&mut self, x: &[f64]) -> Result<()> {
        if x.len() != 6 * self.node_count() {
            return Err(DdmError::invalid(format!(
                "expected {} node parameters, got {}",
                6 * self.node_count(),
                x.len()
            )));
        }
        for (j, chunk) in x.chunks_exact(6).enumerate() {
            self.rotations[j] = Vec3::new(chunk[0], chunk[1], chunk[2]);
            self.translations[j] = Vec3::new(chunk[3], chunk[4], chunk[5]);
        }
        Ok(())
    }

    fn check(&self, mesh: &TriangleMesh) -> Result<()> {
        if self.vertex_nodes.len() != mesh.vertices.len() {
            return Err(DdmError::InvalidGraph(format!(
                "graph binds {} vertices, mesh has {}",
                self.vertex_nodes.len(),
                mesh.vertices.len()
            )));
        }
        for (v, nodes) in self.vertex_nodes.iter().enumerate() {
            if nodes.iter().map(|n| n.1).sum::<f64>() <= 0.0 {
                return Err(DdmError::InvalidGraph(format!("vertex {v} has no positive node weight")));
            }
            if nodes.iter().any(|n| n.0 >= self.node_count()) {
                return Err(DdmError::InvalidGraph(format!("vertex {v} refers to a missing node")));
            }
        }
        Ok(())
    }

    /// Deformed vertex positions.
    pub fn deform_vertices(&self, mesh: &TriangleMesh) -> Result<Vec<Vec3>> {
        self.check(mesh)?;
        let rots: Vec<_> = self.rotations.iter().map(|w| so3_exp(w) - Mat3::identity()).collect();
        // Σ w̃ (R(v − g) + g + t) written as v + Σ w̃ ((R − I)(v − g) + t), which
        // is exact at the identity.
        Ok(mesh
            .vertices
            .iter()
            .zip(&self.vertex_nodes)
            .map(|(v, nodes)| {
                let total: f64 = nodes.iter().map(|n| n.1).sum();
                let mut offset = Vec3::zeros();
                for &(j, w) in nodes {
                    offset += (rots[j] * (v - self.node_positions[j]) + self.translations[j]) * w;
                }
                v + offset / total
            })
            .collect())
    }

    /// Chains `∂L/∂v̂_i` back to the node parameters, laid out as
    /// [`DeformationGraph::params`].
    pub fn pullback(&self, mesh: &TriangleMesh, grad_vertices: &[Vec3]) -> Vec<f64> {
        let rots: Vec<_> = self.rotations.iter().map(so3_exp).collect();
        let mut g_t = vec![Vec3::zeros(); self.node_count()];
        let mut torque = vec![Vec3::zeros(); self.node_count()];
        for ((v, nodes), g) in mesh.vertices.iter().zip(&self.vertex_nodes).zip(grad_vertices) {
            let total: f64 = nodes.iter().map(|n| n.1).sum();
            for &(j, w) in nodes {
                let wn = w / total;
                let r = rots[j] * (v - self.node_positions[j]);
                g_t[j] += g * wn;
                torque[j] += r.cross(g) * wn;
            }
        }
        let mut out = Vec::with_capacity(6 * self.node_count());
        for j in 0..self.node_count() {
            // ∂(R r₀)/∂ω = −[R r₀]× J_l(ω)
            let g_w = so3_left_jacobian(&self.rotations[j]).transpose() * torque[j];
            out.extend_from_slice(g_w.as_slice());
            out.extend_from_slice(g_t[j].as_slice());
        }
        out
    }
}

pub fn deform_vertices(mesh: &TriangleMesh, graph: &DeformationGraph) -> Result<Vec<Vec3>> {
    graph.deform_vertices(mesh)
}
