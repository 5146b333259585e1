//! Axis-angle chart of SO(3).

use crate::geom::{skew, Mat3, Vec3};

const SMALL_ANGLE: f64 = 1e-4;

/// Rodrigues formula.
pub fn so3_exp(omega: &Vec3) -> Mat3 {
    let theta2 = omega.norm_squared();
    let theta = theta2.sqrt();
    let (a, b) = if theta < SMALL_ANGLE {
        (1.0 - theta2 / 6.0, 0.5 - theta2 / 24.0)
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / theta2)
    };
    let w = skew(omega);
    Mat3::identity() + w * a + w * w * b
}

/// Inverse of [`so3_exp`] on angles in `[0, π]`. At exactly π the axis sign
/// is ambiguous; either choice is returned.
pub fn so3_log(r: &Mat3) -> Vec3 {
    let vee = Vec3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]) * 0.5;
    let s = vee.norm();
    let c = 0.5 * (r.trace() - 1.0);
    let theta = s.atan2(c);
    if theta < SMALL_ANGLE {
        // θ / sin θ ≈ 1 + θ²/6
        return vee * (1.0 + theta * theta / 6.0);
    }
    if c > -0.5 {
        return vee * (theta / s);
    }
    // near π the skew part is tiny; read the axis off the symmetric part
    let sym = (r + r.transpose()) * 0.5;
    let outer = (sym - Mat3::identity() * c) / (1.0 - c);
    let mut best = 0;
    for i in 1..3 {
        if outer[(i, i)] > outer[(best, best)] {
            best = i;
        }
    }
    let mut axis = outer.column(best).into_owned() / outer[(best, best)].max(0.0).sqrt();
    axis.normalize_mut();
    if axis.dot(&vee) < 0.0 {
        axis = -axis;
    }
    axis * theta
}

/// Left Jacobian: exp(ω + δ) ≈ exp(J_l(ω) δ) exp(ω).
pub fn so3_left_jacobian(omega: &Vec3) -> Mat3 {
    let theta2 = omega.norm_squared();
    let theta = theta2.sqrt();
    let (b, c) = if theta < SMALL_ANGLE {
        (0.5 - theta2 / 24.0, 1.0 / 6.0 - theta2 / 120.0)
    } else {
        ((1.0 - theta.cos()) / theta2, (theta - theta.sin()) / (theta2 * theta))
    };
    let w = skew(omega);
    Mat3::identity() + w * b + w * w * c
}
