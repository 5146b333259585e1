use proptest::prelude::*;

use super::*;
use crate::geom::shapes;

fn decode(text: &str, format: SurfaceFormat) -> Result<Surface> {
    decode_surface(text.as_bytes(), format, "test")
}

const BINARY: SurfaceFormat = SurfaceFormat::Ply(PlyEncoding::BinaryLittleEndian);
const ASCII: SurfaceFormat = SurfaceFormat::Ply(PlyEncoding::Ascii);

fn tetrahedron() -> TriangleMesh {
    TriangleMesh::new(
        vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(0.0, 0.0, 1.0),
        ],
        vec![[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]],
    )
    .unwrap()
}

#[test]
fn obj_tetrahedron_round_trip() {
    let mesh: Surface = tetrahedron().into();
    let text = encode_surface(&mesh, SurfaceFormat::Obj).unwrap();
    let back = decode_surface(&text, SurfaceFormat::Obj, "t").unwrap();
    assert_eq!(back, mesh);
}

#[test]
fn obj_variants() {
    let text = "# comment\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvn 0 0 1\nvt 0 0\ng quad\nf 1/1/1 2/2/1 3//1 -1\n";
    let s = decode(text, SurfaceFormat::Obj).unwrap();
    let m = s.as_mesh().unwrap();
    assert_eq!(m.faces, vec![[0, 1, 2], [0, 2, 3]]);
    let cloud = decode("v 1 2 3\nv 4 5 6\n", SurfaceFormat::Obj).unwrap();
    assert_eq!(cloud.as_cloud().unwrap().points.len(), 2);
}

#[test]
fn obj_errors_carry_line_numbers() {
    let err = decode("v 0 0 0\nv 1 x 0\n", SurfaceFormat::Obj).unwrap_err();
    assert!(matches!(&err, DdmError::Parse { location, .. } if location == "test:2"), "{err}");
    let err = decode("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 4\n", SurfaceFormat::Obj).unwrap_err();
    assert!(matches!(&err, DdmError::Parse { location, .. } if location == "test:4"), "{err}");
    assert!(decode("v 0 0\n", SurfaceFormat::Obj).is_err());
    assert!(decode("", SurfaceFormat::Obj).is_err());
}

#[test]
fn ascii_ply_cloud() {
    let text = "ply\nformat ascii 1.0\ncomment three points\nelement vertex 3\nproperty float x\nproperty float y\n\
                property float z\nproperty uchar red\nend_header\n0 0 0 255\n1 0.5 0 0\n-2 0 3.25 7\n";
    let s = decode(text, ASCII).unwrap();
    assert_eq!(
        s.as_cloud().unwrap().points,
        vec![Vec3::zeros(), Vec3::new(1.0, 0.5, 0.0), Vec3::new(-2.0, 0.0, 3.25)]
    );
}

#[test]
fn ascii_ply_mesh_with_quad() {
    let text = "ply\nformat ascii 1.0\nelement vertex 4\nproperty double x\nproperty double y\nproperty double z\n\
                element face 1\nproperty list uchar int vertex_index\nend_header\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n";
    let m = decode(text, ASCII).unwrap();
    assert_eq!(m.as_mesh().unwrap().faces, vec![[0, 1, 2], [0, 2, 3]]);
}

#[test]
fn ply_errors() {
    let head = "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nend_header\n";
    let err = decode(&format!("{head}0 0 0\n1 q 0\n"), ASCII).unwrap_err();
    assert!(matches!(&err, DdmError::Parse { location, .. } if location == "test:9"), "{err}");
    assert!(decode(&format!("{head}0 0 0\n"), ASCII).is_err());
    let big = "ply\nformat binary_big_endian 1.0\nelement vertex 0\nend_header\n";
    assert!(matches!(decode(big, BINARY), Err(DdmError::UnsupportedFormat(_))));
    let listy = "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nproperty float z\n\
                 property list uchar float extra\nend_header\n0 0 0 1 0\n";
    assert!(matches!(decode(listy, ASCII), Err(DdmError::UnsupportedFormat(_))));
    let mixed_face = "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\n\
                      element face 1\nproperty list uchar int vertex_indices\nproperty uchar flags\nend_header\n\
                      0 0 0\n1 0 0\n0 1 0\n3 0 1 2 9\n";
    assert!(matches!(decode(mixed_face, ASCII), Err(DdmError::UnsupportedFormat(_))));
    let edges = "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nproperty float z\n\
                 element edge 1\nproperty int vertex1\nproperty int vertex2\nend_header\n0 0 0\n0 0\n";
    assert!(matches!(decode(edges, ASCII), Err(DdmError::UnsupportedFormat(_))));
    assert!(decode("plx\n", ASCII).is_err());
}

#[test]
fn binary_ply_truncation_reports_offset() {
    let mesh: Surface = tetrahedron().into();
    let bytes = encode_surface(&mesh, BINARY).unwrap();
    let err = decode_surface(&bytes[..bytes.len() - 2], BINARY, "t").unwrap_err();
    assert!(matches!(&err, DdmError::Parse { location, .. } if location.starts_with("t: byte ")), "{err}");
    let mut extra = bytes.clone();
    extra.push(0);
    assert!(decode_surface(&extra, BINARY, "t").is_err());
}

#[test]
fn binary_ply_round_trip_is_bit_exact() {
    let mut mesh = shapes::blob_mesh(2);
    mesh.vertices[0].x = 0.1 + 0.2;
    mesh.vertices[1].y = -1e-300;
    let s: Surface = mesh.into();
    let bytes = encode_surface(&s, BINARY).unwrap();
    let back = decode_surface(&bytes, BINARY, "t").unwrap();
    let (a, b) = (s.positions(), back.positions());
    assert!(a.iter().zip(b).all(|(p, q)| p.iter().zip(q.iter()).all(|(x, y)| x.to_bits() == y.to_bits())));
    assert_eq!(back.as_mesh().unwrap().faces, s.as_mesh().unwrap().faces);
    assert_eq!(encode_surface(&back, BINARY).unwrap(), bytes);
}

#[test]
fn files_on_disk() {
    let dir = tempfile::tempdir().unwrap();
    let cloud: Surface = shapes::blob_cloud(100, 3).into();
    for ext in ["obj", "ply", "xyz", "PLY"] {
        let path = dir.path().join(format!("c.{ext}"));
        save_surface(&cloud, &path).unwrap();
        assert_eq!(load_surface(&path).unwrap(), cloud, "{ext}");
    }
    let mesh: Surface = tetrahedron().into();
    assert!(save_surface(&mesh, dir.path().join("m.xyz")).is_err());
    assert!(matches!(save_surface(&mesh, dir.path().join("m.stl")), Err(DdmError::UnsupportedFormat(_))));
    assert!(matches!(load_surface(dir.path().join("missing.obj")), Err(DdmError::Io(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn text_formats_round_trip_exactly(coords in proptest::collection::vec(-1e6f64..1e6, 3..60), fmt in 0usize..4) {
        let points: Vec<Vec3> = coords.chunks_exact(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect();
        let s: Surface = PointCloud::new(points).unwrap().into();
        let format = [SurfaceFormat::Obj, SurfaceFormat::Xyz, ASCII, BINARY][fmt];
        let back = decode_surface(&encode_surface(&s, format).unwrap(), format, "p").unwrap();
        prop_assert_eq!(back, s);
    }
}
