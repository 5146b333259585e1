use super::{BarycentricFoot, Vec3};

/// Closest point on triangle `(a, b, c)` to `p`, by Voronoi-region
/// classification of the query. Degenerate (collinear or coincident)
/// triangles are handled as the union of their three edges.
pub fn closest_point_on_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> BarycentricFoot {
    let ab = b - a;
    let ac = c - a;
    let n2 = ab.cross(&ac).norm_squared();
    let scale = ab.norm_squared() * ac.norm_squared();
    if n2 <= 1e-24 * scale || n2 == 0.0 {
        return closest_on_degenerate(p, a, b, c);
    }

    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return foot([1.0, 0.0, 0.0], a, b, c);
    }

    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return foot([0.0, 1.0, 0.0], a, b, c);
    }

    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return foot([1.0 - v, v, 0.0], a, b, c);
    }

    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return foot([0.0, 0.0, 1.0], a, b, c);
    }

    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return foot([1.0 - w, 0.0, w], a, b, c);
    }

    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return foot([0.0, 1.0 - w, w], a, b, c);
    }

    // Interior: va, vb, vc are all positive here.
    let denom = 1.0 / (va + vb + vc);
    foot([va * denom, vb * denom, vc * denom], a, b, c)
}

fn foot(weights: [f64; 3], a: &Vec3, b: &Vec3, c: &Vec3) -> BarycentricFoot {
    BarycentricFoot {
        face_index: BarycentricFoot::NO_FACE,
        weights,
        point: a * weights[0] + b * weights[1] + c * weights[2],
    }
}

fn closest_on_degenerate(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> BarycentricFoot {
    let segments = [(0usize, 1usize, a, b), (1, 2, b, c), (0, 2, a, c)];
    let mut best: Option<(f64, BarycentricFoot)> = None;
    for (i, j, s, e) in segments {
        let d = e - s;
        let len2 = d.norm_squared();
        let t = if len2 > 0.0 {
            ((p - s).dot(&d) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let mut w = [0.0; 3];
        w[i] = 1.0 - t;
        w[j] += t;
        let f = foot(w, a, b, c);
        let dist2 = (f.point - p).norm_squared();
        if best.as_ref().is_none_or(|(bd, _)| dist2 < *bd) {
            best = Some((dist2, f));
        }
    }
    best.expect("three segments").1
}
