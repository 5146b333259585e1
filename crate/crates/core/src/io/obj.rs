use std::fmt::Write;

use super::number;
use crate::error::{DdmError, Result};
use crate::geom::Vec3;

/// Reads `v` and `f` records; polygons are fan-triangulated and all other
/// records are skipped.
pub(super) fn read(text: &str, name: &str) -> Result<(Vec<Vec3>, Vec<[usize; 3]>)> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let loc = || format!("{name}:{}", i + 1);
        let mut toks = line.split_whitespace();
        match toks.next() {
            Some("v") => {
                let x = number(toks.next(), loc)?;
                let y = number(toks.next(), loc)?;
                let z = number(toks.next(), loc)?;
                vertices.push(Vec3::new(x, y, z));
            }
            Some("f") => {
                let idx = toks
                    .map(|t| vertex_ref(t, vertices.len(), &loc))
                    .collect::<Result<Vec<_>>>()?;
                if idx.len() < 3 {
                    return Err(DdmError::parse(loc(), "face with fewer than 3 vertices"));
                }
                for k in 1..idx.len() - 1 {
                    faces.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    if vertices.is_empty() {
        return Err(DdmError::parse(name, "no vertices"));
    }
    Ok((vertices, faces))
}

/// `i`, `i/t`, `i//n` or `i/t/n`; 1-based, negative counts from the end.
fn vertex_ref(tok: &str, count: usize, loc: &impl Fn() -> String) -> Result<usize> {
    let head = tok.split('/').next().unwrap_or("");
    let i: i64 = head
        .parse()
        .map_err(|_| DdmError::parse(loc(), format!("invalid face index '{tok}'")))?;
    let resolved = if i > 0 { i - 1 } else { count as i64 + i };
    if i == 0 || resolved < 0 || resolved >= count as i64 {
        return Err(DdmError::parse(loc(), format!("face index {i} out of range")));
    }
    Ok(resolved as usize)
}

pub(super) fn write(vertices: &[Vec3], faces: &[[usize; 3]]) -> String {
    let mut out = String::with_capacity(vertices.len() * 64 + faces.len() * 24);
    for v in vertices {
        let _ = writeln!(out, "v {} {} {}", v.x, v.y, v.z);
    }
    for f in faces {
        let _ = writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    out
}
