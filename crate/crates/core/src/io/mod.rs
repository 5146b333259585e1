//! Surface files: OBJ, PLY (ASCII and binary little-endian) and XYZ.

mod obj;
mod ply;
mod xyz;

use std::fs;
use std::path::Path;

use crate::error::{DdmError, Result};
use crate::geom::{PointCloud, Surface, TriangleMesh, Vec3};

pub use ply::PlyEncoding;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurfaceFormat {
    Obj,
    Ply(PlyEncoding),
    Xyz,
}

impl SurfaceFormat {
    /// Format implied by the file extension; PLY defaults to binary.
    pub fn from_path(path: &Path) -> Result<Self> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .unwrap_or_default();
        match ext.as_str() {
            "obj" => Ok(SurfaceFormat::Obj),
            "ply" => Ok(SurfaceFormat::Ply(PlyEncoding::BinaryLittleEndian)),
            "xyz" => Ok(SurfaceFormat::Xyz),
            _ => Err(DdmError::UnsupportedFormat(format!(
                "{}: expected .obj, .ply or .xyz",
                path.display()
            ))),
        }
    }
}

/// Vertex positions plus (possibly empty) triangle list.
fn into_surface(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Surface> {
    if faces.is_empty() {
        Ok(PointCloud::new(vertices)?.into())
    } else {
        Ok(TriangleMesh::new(vertices, faces)?.into())
    }
}

fn parts(surface: &Surface) -> (&[Vec3], &[[usize; 3]]) {
    match surface {
        Surface::TriangleMesh(m) => (&m.vertices, &m.faces),
        Surface::PointCloud(c) => (&c.points, &[]),
    }
}

pub fn load_surface(path: impl AsRef<Path>) -> Result<Surface> {
    let path = path.as_ref();
    let format = SurfaceFormat::from_path(path)?;
    let bytes = fs::read(path)?;
    decode_surface(&bytes, format, &path.display().to_string())
}

/// Parses in-memory file contents; `name` prefixes error locations.
pub fn decode_surface(bytes: &[u8], format: SurfaceFormat, name: &str) -> Result<Surface> {
    let (vertices, faces) = match format {
        SurfaceFormat::Obj => obj::read(text(bytes, name)?, name)?,
        SurfaceFormat::Xyz => (xyz::read(text(bytes, name)?, name)?, Vec::new()),
        SurfaceFormat::Ply(_) => ply::read(bytes, name)?,
    };
    into_surface(vertices, faces)
}

pub fn save_surface(surface: &Surface, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let format = SurfaceFormat::from_path(path)?;
    save_surface_as(surface, path, format)
}

pub fn save_surface_as(surface: &Surface, path: impl AsRef<Path>, format: SurfaceFormat) -> Result<()> {
    fs::write(path, encode_surface(surface, format)?)?;
    Ok(())
}

pub fn encode_surface(surface: &Surface, format: SurfaceFormat) -> Result<Vec<u8>> {
    surface.validate()?;
    let (vertices, faces) = parts(surface);
    Ok(match format {
        SurfaceFormat::Obj => obj::write(vertices, faces).into_bytes(),
        SurfaceFormat::Xyz => {
            if !faces.is_empty() {
                return Err(DdmError::UnsupportedFormat("XYZ files cannot store faces".into()));
            }
            xyz::write(vertices).into_bytes()
        }
        SurfaceFormat::Ply(enc) => ply::write(vertices, faces, enc),
    })
}

fn text<'a>(bytes: &'a [u8], name: &str) -> Result<&'a str> {
    std::str::from_utf8(bytes).map_err(|e| DdmError::parse(format!("{name}: byte {}", e.valid_up_to()), "not UTF-8 text"))
}

/// Parses one float token for a text format.
fn number(tok: Option<&str>, loc: impl Fn() -> String) -> Result<f64> {
    let tok = tok.ok_or_else(|| DdmError::parse(loc(), "missing coordinate"))?;
    let v: f64 = tok
        .parse()
        .map_err(|_| DdmError::parse(loc(), format!("invalid number '{tok}'")))?;
    if !v.is_finite() {
        return Err(DdmError::parse(loc(), format!("non-finite coordinate '{tok}'")));
    }
    Ok(v)
}

#[cfg(test)]
mod tests;
