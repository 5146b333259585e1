use crate::error::{DdmError, Result};
use crate::geom::{MeshTopology, TriangleMesh, Vec3};

use super::sparse::{EnvelopeCholesky, SparseSym};

/// `u = (I + αL) V` with `L` the combinatorial graph Laplacian of the mesh
/// edges, factorized once.
#[derive(Debug, Clone)]
pub struct DiffusionSystem {
    pub alpha: f64,
    system: SparseSym,
    factor: Option<EnvelopeCholesky>,
}

/// `L = D − A` over the mesh edge graph.
pub fn uniform_laplacian(mesh: &TriangleMesh) -> SparseSym {
    let topo = MeshTopology::new(mesh);
    let rows = (0..mesh.vertices.len())
        .map(|v| {
            let ns = topo.neighbors(v);
            let mut row: Vec<(usize, f64)> = Vec::with_capacity(ns.len() + 1);
            row.push((v, ns.len() as f64));
            row.extend(ns.iter().map(|&u| (u, -1.0)));
            row
        })
        .collect();
    SparseSym { rows }
}

pub fn build_diffusion_system(mesh: &TriangleMesh, alpha: f64) -> Result<DiffusionSystem> {
    DiffusionSystem::new(mesh, alpha)
}

impl DiffusionSystem {
    pub fn new(mesh: &TriangleMesh, alpha: f64) -> Result<Self> {
        mesh.validate()?;
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(DdmError::invalid(format!("alpha must be non-negative, got {alpha}")));
        }
        let mut system = uniform_laplacian(mesh);
        for (v, row) in system.rows.iter_mut().enumerate() {
            for e in row.iter_mut() {
                e.1 *= alpha;
                if e.0 == v {
                    e.1 += 1.0;
                }
            }
        }
        let factor = if alpha == 0.0 {
            None
        } else {
            Some(EnvelopeCholesky::factor(&system)?)
        };
        Ok(DiffusionSystem { alpha, system, factor })
    }

    pub fn dim(&self) -> usize {
        self.system.dim()
    }

    fn check(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(DdmError::invalid(format!(
                "expected {} rows, got {len}",
                self.dim()
            )));
        }
        Ok(())
    }

    fn columnwise(&self, x: &[Vec3], f: impl Fn(&[f64]) -> Vec<f64>) -> Vec<Vec3> {
        let mut out = vec![Vec3::zeros(); x.len()];
        for c in 0..3 {
            let col: Vec<f64> = x.iter().map(|v| v[c]).collect();
            for (o, y) in out.iter_mut().zip(f(&col)) {
                o[c] = y;
            }
        }
        out
    }

    /// `(I + αL) V`.
    pub fn to_latent(&self, vertices: &[Vec3]) -> Result<Vec<Vec3>> {
        self.check(vertices.len())?;
        if self.factor.is_none() {
            return Ok(vertices.to_vec());
        }
        Ok(self.columnwise(vertices, |c| self.system.mul(c)))
    }

    /// `(I + αL)⁻¹ u`.
    pub fn to_vertices(&self, latent: &[Vec3]) -> Result<Vec<Vec3>> {
        self.check(latent.len())?;
        match &self.factor {
            None => Ok(latent.to_vec()),
            Some(f) => Ok(self.columnwise(latent, |c| f.solve(c))),
        }
    }

    /// `∂L/∂u = (I + αL)⁻ᵀ ∂L/∂V′`; the system is symmetric so this is the
    /// same solve.
    pub fn pullback(&self, grad_vertices: &[Vec3]) -> Result<Vec<Vec3>> {
        self.to_vertices(grad_vertices)
    }

    /// `‖(I + αL) V′ − u‖`.
    pub fn residual(&self, vertices: &[Vec3], latent: &[Vec3]) -> Result<f64> {
        let applied = self.to_latent(vertices)?;
        Ok(applied
            .iter()
            .zip(latent)
            .map(|(a, u)| (a - u).norm_squared())
            .sum::<f64>()
            .sqrt())
    }
}
