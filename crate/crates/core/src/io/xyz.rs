use std::fmt::Write;

use super::number;
use crate::error::{DdmError, Result};
use crate::geom::Vec3;

/// One point per line; extra columns (normals, colours) are ignored.
pub(super) fn read(text: &str, name: &str) -> Result<Vec<Vec3>> {
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let loc = || format!("{name}:{}", i + 1);
        let mut toks = line.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty());
        let x = number(toks.next(), loc)?;
        let y = number(toks.next(), loc)?;
        let z = number(toks.next(), loc)?;
        points.push(Vec3::new(x, y, z));
    }
    if points.is_empty() {
        return Err(DdmError::parse(name, "no points"));
    }
    Ok(points)
}

pub(super) fn write(points: &[Vec3]) -> String {
    let mut out = String::with_capacity(points.len() * 64);
    for p in points {
        let _ = writeln!(out, "{} {} {}", p.x, p.y, p.z);
    }
    out
}
