use std::fmt::Write;

use crate::error::{DdmError, Result};
use crate::geom::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyEncoding {
    Ascii,
    BinaryLittleEndian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn is_integer(self) -> bool {
        !matches!(self, Scalar::F32 | Scalar::F64)
    }

    fn decode(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug)]
enum Property {
    Scalar(String, Scalar),
    List(String, Scalar, Scalar),
}

#[derive(Debug)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

struct Header {
    encoding: PlyEncoding,
    elements: Vec<Element>,
    /// Byte offset of the body; for ASCII also the 1-based body start line.
    body: usize,
    body_line: usize,
}

fn header(bytes: &[u8], name: &str) -> Result<Header> {
    let unsupported = |m: String| DdmError::UnsupportedFormat(format!("{name}: {m}"));
    let mut pos = 0;
    let mut line_no = 0;
    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let end = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| DdmError::parse(format!("{name}: byte {pos}"), "header not terminated by end_header"))?;
        let line = std::str::from_utf8(&bytes[pos..pos + end])
            .map_err(|_| DdmError::parse(format!("{name}: byte {pos}"), "header is not text"))?
            .trim();
        line_no += 1;
        let loc = || format!("{name}:{line_no}");
        pos += end + 1;
        let toks: Vec<&str> = line.split_whitespace().collect();
        if line_no == 1 {
            if line != "ply" {
                return Err(DdmError::parse(loc(), "missing 'ply' magic"));
            }
            continue;
        }
        match toks.as_slice() {
            ["format", fmt, _] => {
                encoding = Some(match *fmt {
                    "ascii" => PlyEncoding::Ascii,
                    "binary_little_endian" => PlyEncoding::BinaryLittleEndian,
                    other => return Err(unsupported(format!("PLY encoding '{other}'"))),
                })
            }
            ["comment", ..] | ["obj_info", ..] => {}
            ["element", el, count] => elements.push(Element {
                name: el.to_string(),
                count: count
                    .parse()
                    .map_err(|_| DdmError::parse(loc(), format!("invalid element count '{count}'")))?,
                props: Vec::new(),
            }),
            ["property", "list", ct, it, pname] => {
                let el = elements.last_mut().ok_or_else(|| DdmError::parse(loc(), "property before element"))?;
                let (c, i) = match (Scalar::parse(ct), Scalar::parse(it)) {
                    (Some(c), Some(i)) if c.is_integer() && i.is_integer() => (c, i),
                    _ => return Err(unsupported(format!("list property types '{ct} {it}'"))),
                };
                el.props.push(Property::List(pname.to_string(), c, i));
            }
            ["property", ty, pname] => {
                let el = elements.last_mut().ok_or_else(|| DdmError::parse(loc(), "property before element"))?;
                let t = Scalar::parse(ty).ok_or_else(|| unsupported(format!("property type '{ty}'")))?;
                el.props.push(Property::Scalar(pname.to_string(), t));
            }
            ["end_header"] => break,
            _ => return Err(DdmError::parse(loc(), format!("unexpected header line '{line}'"))),
        }
    }
    let encoding = encoding.ok_or_else(|| DdmError::parse(name, "missing format line"))?;
    Ok(Header {
        encoding,
        elements,
        body: pos,
        body_line: line_no + 1,
    })
}

/// Where each needed value sits within a vertex record.
struct VertexLayout {
    xyz: [usize; 3],
}

fn vertex_layout(el: &Element, name: &str) -> Result<VertexLayout> {
    let mut xyz = [usize::MAX; 3];
    for (i, p) in el.props.iter().enumerate() {
        match p {
            Property::Scalar(n, _) => {
                if let Some(k) = ["x", "y", "z"].iter().position(|a| a == n) {
                    xyz[k] = i;
                }
            }
            Property::List(n, ..) => {
                return Err(DdmError::UnsupportedFormat(format!("{name}: list property '{n}' on vertices")))
            }
        }
    }
    if xyz.contains(&usize::MAX) {
        return Err(DdmError::UnsupportedFormat(format!("{name}: vertices lack x, y or z")));
    }
    Ok(VertexLayout { xyz })
}

fn check_face_element(el: &Element, name: &str) -> Result<(Scalar, Scalar)> {
    match el.props.as_slice() {
        [Property::List(n, c, i)] if n == "vertex_indices" || n == "vertex_index" => Ok((*c, *i)),
        _ => Err(DdmError::UnsupportedFormat(format!(
            "{name}: faces must carry exactly one vertex_indices list"
        ))),
    }
}

fn push_polygon(idx: &[f64], nverts: usize, faces: &mut Vec<[usize; 3]>, loc: impl Fn() -> String) -> Result<()> {
    if idx.len() < 3 {
        return Err(DdmError::parse(loc(), "face with fewer than 3 vertices"));
    }
    let mut v = Vec::with_capacity(idx.len());
    for &x in idx {
        if x < 0.0 || x >= nverts as f64 {
            return Err(DdmError::parse(loc(), format!("face index {x} out of range")));
        }
        v.push(x as usize);
    }
    for k in 1..v.len() - 1 {
        faces.push([v[0], v[k], v[k + 1]]);
    }
    Ok(())
}

pub(super) fn read(bytes: &[u8], name: &str) -> Result<(Vec<Vec3>, Vec<[usize; 3]>)> {
    let h = header(bytes, name)?;
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let mut seen_vertex = false;
    for el in &h.elements {
        match el.name.as_str() {
            "vertex" => seen_vertex = true,
            "face" if seen_vertex => {}
            "face" => return Err(DdmError::UnsupportedFormat(format!("{name}: faces before vertices"))),
            _ if el.count == 0 => {}
            other => return Err(DdmError::UnsupportedFormat(format!("{name}: element '{other}'"))),
        }
    }
    if !seen_vertex {
        return Err(DdmError::parse(name, "no vertex element"));
    }
    match h.encoding {
        PlyEncoding::Ascii => read_ascii(bytes, &h, name, &mut vertices, &mut faces)?,
        PlyEncoding::BinaryLittleEndian => read_binary(bytes, &h, name, &mut vertices, &mut faces)?,
    }
    if vertices.is_empty() {
        return Err(DdmError::parse(name, "no vertices"));
    }
    Ok((vertices, faces))
}

fn read_ascii(bytes: &[u8], h: &Header, name: &str, vertices: &mut Vec<Vec3>, faces: &mut Vec<[usize; 3]>) -> Result<()> {
    let body = std::str::from_utf8(&bytes[h.body..])
        .map_err(|_| DdmError::parse(format!("{name}: byte {}", h.body), "ASCII body is not text"))?;
    let mut lines = body
        .lines()
        .enumerate()
        .map(|(i, l)| (h.body_line + i, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    for el in h.elements.iter().filter(|e| e.count > 0) {
        let is_vertex = el.name == "vertex";
        let layout = if is_vertex { Some(vertex_layout(el, name)?) } else { None };
        if !is_vertex {
            check_face_element(el, name)?;
        }
        for _ in 0..el.count {
            let (ln, line) = lines
                .next()
                .ok_or_else(|| DdmError::parse(format!("{name}: end of file"), format!("truncated {} element", el.name)))?;
            let loc = || format!("{name}:{ln}");
            let vals = line
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|_| DdmError::parse(loc(), format!("invalid number '{t}'"))))
                .collect::<Result<Vec<_>>>()?;
            if let Some(layout) = &layout {
                if vals.len() != el.props.len() {
                    return Err(DdmError::parse(loc(), format!("expected {} values", el.props.len())));
                }
                let p = Vec3::new(vals[layout.xyz[0]], vals[layout.xyz[1]], vals[layout.xyz[2]]);
                if !p.iter().all(|c| c.is_finite()) {
                    return Err(DdmError::parse(loc(), "non-finite coordinate"));
                }
                vertices.push(p);
            } else {
                let n = vals.first().copied().unwrap_or(-1.0);
                if n < 0.0 || vals.len() != 1 + n as usize {
                    return Err(DdmError::parse(loc(), "face list length mismatch"));
                }
                push_polygon(&vals[1..], vertices.len(), faces, loc)?;
            }
        }
    }
    Ok(())
}

fn read_binary(bytes: &[u8], h: &Header, name: &str, vertices: &mut Vec<Vec3>, faces: &mut Vec<[usize; 3]>) -> Result<()> {
    fn take<'a>(bytes: &'a [u8], n: usize, pos: &mut usize, name: &str) -> Result<&'a [u8]> {
        let start = *pos;
        let slice = bytes
            .get(start..start + n)
            .ok_or_else(|| DdmError::parse(format!("{name}: byte {start}"), "unexpected end of data"))?;
        *pos += n;
        Ok(slice)
    }
    let mut pos = h.body;
    for el in h.elements.iter().filter(|e| e.count > 0) {
        if el.name == "vertex" {
            let layout = vertex_layout(el, name)?;
            for _ in 0..el.count {
                let start = pos;
                let mut vals = [0.0; 3];
                for (i, p) in el.props.iter().enumerate() {
                    let Property::Scalar(_, t) = p else { unreachable!() };
                    let v = t.decode(take(bytes, t.size(), &mut pos, name)?);
                    if let Some(k) = layout.xyz.iter().position(|&j| j == i) {
                        vals[k] = v;
                    }
                }
                if !vals.iter().all(|c| c.is_finite()) {
                    return Err(DdmError::parse(format!("{name}: byte {start}"), "non-finite coordinate"));
                }
                vertices.push(Vec3::from(vals));
            }
        } else {
            let (ct, it) = check_face_element(el, name)?;
            for _ in 0..el.count {
                let start = pos;
                let n = ct.decode(take(bytes, ct.size(), &mut pos, name)?);
                if n < 0.0 {
                    return Err(DdmError::parse(format!("{name}: byte {start}"), "negative list length"));
                }
                let mut idx = Vec::with_capacity(n as usize);
                for _ in 0..n as usize {
                    idx.push(it.decode(take(bytes, it.size(), &mut pos, name)?));
                }
                push_polygon(&idx, vertices.len(), faces, || format!("{name}: byte {start}"))?;
            }
        }
    }
    if pos != bytes.len() {
        return Err(DdmError::parse(format!("{name}: byte {pos}"), "trailing data after last element"));
    }
    Ok(())
}

pub(super) fn write(vertices: &[Vec3], faces: &[[usize; 3]], enc: PlyEncoding) -> Vec<u8> {
    let mut head = String::from("ply\n");
    head.push_str(match enc {
        PlyEncoding::Ascii => "format ascii 1.0\n",
        PlyEncoding::BinaryLittleEndian => "format binary_little_endian 1.0\n",
    });
    let _ = writeln!(head, "element vertex {}", vertices.len());
    head.push_str("property double x\nproperty double y\nproperty double z\n");
    if !faces.is_empty() {
        let _ = writeln!(head, "element face {}", faces.len());
        head.push_str("property list uchar int vertex_indices\n");
    }
    head.push_str("end_header\n");
    let mut out = head.into_bytes();
    match enc {
        PlyEncoding::Ascii => {
            let mut body = String::new();
            for v in vertices {
                let _ = writeln!(body, "{} {} {}", v.x, v.y, v.z);
            }
            for f in faces {
                let _ = writeln!(body, "3 {} {} {}", f[0], f[1], f[2]);
            }
            out.extend(body.into_bytes());
        }
        PlyEncoding::BinaryLittleEndian => {
            out.reserve(vertices.len() * 24 + faces.len() * 13);
            for v in vertices {
                for c in v.iter() {
                    out.extend(c.to_le_bytes());
                }
            }
            for f in faces {
                out.push(3);
                for &i in f {
                    out.extend((i as i32).to_le_bytes());
                }
            }
        }
    }
    out
}
