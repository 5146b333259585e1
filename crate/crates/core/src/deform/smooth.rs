use crate::geom::{TriangleMesh, Vec3};

/// Mean over faces of the pairwise distances between the offsets
/// `Δv = v̂ − v` of each face's corners, divided by 3: zero for any
/// translation of the whole mesh.
pub fn smooth_reg_mesh(mesh: &TriangleMesh, deformed: &[Vec3]) -> f64 {
    smooth_reg_mesh_grad(mesh, deformed).0
}

/// Value and gradient with respect to the deformed positions. Coinciding
/// offsets contribute a zero subgradient.
pub fn smooth_reg_mesh_grad(mesh: &TriangleMesh, deformed: &[Vec3]) -> (f64, Vec<Vec3>) {
    let mut grad = vec![Vec3::zeros(); deformed.len()];
    if mesh.faces.is_empty() {
        return (0.0, grad);
    }
    let scale = 1.0 / (3.0 * mesh.faces.len() as f64);
    let mut total = 0.0;
    for f in &mesh.faces {
        for (a, b) in [(f[0], f[1]), (f[0], f[2]), (f[1], f[2])] {
            let diff = (deformed[a] - mesh.vertices[a]) - (deformed[b] - mesh.vertices[b]);
            let n = diff.norm();
            total += n;
            if n > 0.0 {
                let g = diff * (scale / n);
                grad[a] += g;
                grad[b] -= g;
            }
        }
    }
    (total * scale, grad)
}
