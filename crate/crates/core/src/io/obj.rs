use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Vector3;

use super::{read_text, write_file, IoError};
use crate::geometry::TriangleMesh;

/// Parses the `v` / `f` / `#` subset of Wavefront OBJ.
///
/// Polygons are fan-triangulated as `(v0, vi, vi+1)`. Negative indices count
/// back from the most recent vertex. Other directives are ignored.
pub fn parse_obj(text: &str) -> Result<TriangleMesh, IoError> {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let content = raw.split('#').next().unwrap_or("");
        let mut tokens = content.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let coords: Vec<f64> = tokens
                    .take(3)
                    .map(|t| t.parse::<f64>().map_err(|e| IoError::Parse(format!("line {line}: {t:?}: {e}"))))
                    .collect::<Result<_, _>>()?;
                if coords.len() != 3 {
                    return Err(IoError::Parse(format!("line {line}: vertex needs 3 coordinates")));
                }
                vertices.push(Vector3::new(coords[0], coords[1], coords[2]));
            }
            Some("f") => {
                let idx: Vec<u32> = tokens.map(|t| resolve_index(t, vertices.len(), line)).collect::<Result<_, _>>()?;
                if idx.len() < 3 {
                    return Err(IoError::NonPolygonalFace { line });
                }
                for i in 1..idx.len() - 1 {
                    triangles.push([idx[0], idx[i], idx[i + 1]]);
                }
            }
            _ => {}
        }
    }
    Ok(TriangleMesh::new(vertices, triangles, None)?)
}

fn resolve_index(token: &str, vertex_count: usize, line: usize) -> Result<u32, IoError> {
    let head = token.split('/').next().unwrap_or("");
    let raw: i64 = head.parse().map_err(|_| IoError::Parse(format!("line {line}: bad face index {token:?}")))?;
    let resolved = if raw > 0 { raw - 1 } else { vertex_count as i64 + raw };
    if raw == 0 || resolved < 0 || resolved >= vertex_count as i64 {
        return Err(IoError::IndexOutOfRange { line, index: raw, vertices: vertex_count });
    }
    Ok(resolved as u32)
}

pub fn load_obj(path: impl AsRef<Path>) -> Result<TriangleMesh, IoError> {
    parse_obj(&read_text(path.as_ref())?)
}

pub fn write_obj(mesh: &TriangleMesh) -> String {
    let mut out = String::new();
    for v in mesh.vertices() {
        writeln!(out, "v {} {} {}", v.x, v.y, v.z).unwrap();
    }
    for t in mesh.triangles() {
        writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1).unwrap();
    }
    out
}

pub fn save_obj(mesh: &TriangleMesh, path: impl AsRef<Path>) -> Result<(), IoError> {
    write_file(path.as_ref(), write_obj(mesh).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQUARE: &str = "# unit square\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3\nf 1 3 4\n";

    #[test]
    fn two_triangle_square() {
        let mesh = parse_obj(SQUARE).unwrap();
        assert_eq!(mesh.vertices().len(), 4);
        assert_eq!(mesh.triangles(), &[[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn quad_is_fanned() {
        let mesh = parse_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n").unwrap();
        assert_eq!(mesh.triangles(), &[[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn negative_and_slashed_indices() {
        let mesh = parse_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nvn 0 0 1\nf -3/1/1 -2//1 -1\nusemtl x\n").unwrap();
        assert_eq!(mesh.triangles(), &[[0, 1, 2]]);
    }

    #[test]
    fn index_errors() {
        assert!(matches!(
            parse_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nf 0 1 2\n"),
            Err(IoError::IndexOutOfRange { line: 4, index: 0, .. })
        ));
        assert!(matches!(
            parse_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nf 1 2 4\n"),
            Err(IoError::IndexOutOfRange { index: 4, .. })
        ));
        assert!(matches!(parse_obj("v 0 0 0\nv 1 0 0\nf 1 2\n"), Err(IoError::NonPolygonalFace { line: 3 })));
        assert!(matches!(parse_obj("v 0 zero 0\n"), Err(IoError::Parse(_))));
    }

    #[test]
    fn degenerate_faces_are_cleaned() {
        let mesh = parse_obj("v 0 0 0\nv 1 0 0\nv 2 0 0\nv 0 1 0\nf 1 2 3\nf 1 2 4\n").unwrap();
        assert_eq!(mesh.len(), 1);
    }

    #[test]
    fn write_then_parse() {
        let mesh = parse_obj(SQUARE).unwrap();
        assert_eq!(parse_obj(&write_obj(&mesh)).unwrap(), mesh);
    }
}
