use crate::geom::{MeshTopology, Vec3};

/// Expected edge lengths for the density term: one global value and one
/// per vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityTargets {
    pub global: f64,
    pub local: Vec<f64>,
}

impl DensityTargets {
    /// Global mean edge length, and per vertex the mean length of the edges
    /// inside its closed 2-ring.
    pub fn from_vertices(vertices: &[Vec3], topo: &MeshTopology) -> Self {
        let len = |a: usize, b: usize| (vertices[a] - vertices[b]).norm();
        let edges = topo.edges();
        let global = if edges.is_empty() {
            0.0
        } else {
            edges.iter().map(|&(a, b)| len(a, b)).sum::<f64>() / edges.len() as f64
        };
        let local = (0..topo.vertex_count())
            .map(|v| {
                let ring = topo.two_ring(v);
                let (mut sum, mut count) = (0.0, 0usize);
                for &a in &ring {
                    for &b in topo.neighbors(a) {
                        if a < b && ring.binary_search(&b).is_ok() {
                            sum += len(a, b);
                            count += 1;
                        }
                    }
                }
                if count == 0 {
                    0.0
                } else {
                    sum / count as f64
                }
            })
            .collect();
        DensityTargets { global, local }
    }
}

/// Mean length of the edges at each vertex; 0 for isolated vertices.
pub fn mean_incident_edge_length(vertices: &[Vec3], topo: &MeshTopology) -> Vec<f64> {
    (0..topo.vertex_count())
        .map(|v| {
            let ns = topo.neighbors(v);
            if ns.is_empty() {
                0.0
            } else {
                ns.iter().map(|&u| (vertices[v] - vertices[u]).norm()).sum::<f64>() / ns.len() as f64
            }
        })
        .collect()
}

/// `λ1 E(l̄_a) + λ2 E(l̄_k)` with `E(l̄) = mean_v |l(v) − l̄_v|²`, `l(v)` the
/// mean incident edge length.
pub fn density_adaptation_reg(
    vertices: &[Vec3],
    topo: &MeshTopology,
    targets: &DensityTargets,
    lambda1: f64,
    lambda2: f64,
) -> f64 {
    density_adaptation_reg_grad(vertices, topo, targets, lambda1, lambda2).0
}

/// Value and gradient with respect to the vertices; the targets are held
/// constant.
pub fn density_adaptation_reg_grad(
    vertices: &[Vec3],
    topo: &MeshTopology,
    targets: &DensityTargets,
    lambda1: f64,
    lambda2: f64,
) -> (f64, Vec<Vec3>) {
    let n = vertices.len();
    let mut grad = vec![Vec3::zeros(); n];
    if n == 0 {
        return (0.0, grad);
    }
    let l = mean_incident_edge_length(vertices, topo);
    let mut value = 0.0;
    for v in 0..n {
        let ea = l[v] - targets.global;
        let ek = l[v] - targets.local[v];
        value += lambda1 * ea * ea + lambda2 * ek * ek;
        let ns = topo.neighbors(v);
        if ns.is_empty() {
            continue;
        }
        // ∂/∂l(v) of the two squared errors, then through the mean
        let dl = 2.0 * (lambda1 * ea + lambda2 * ek) / (n as f64 * ns.len() as f64);
        for &u in ns {
            let e = vertices[v] - vertices[u];
            let len = e.norm();
            if len > 0.0 {
                let g = e * (dl / len);
                grad[v] += g;
                grad[u] -= g;
            }
        }
    }
    (value / n as f64, grad)
}
