use nalgebra::Vector3;

use super::GeometryError;

/// Triangles at or below this area are dropped when a mesh is built.
pub const MIN_TRIANGLE_AREA: f64 = 1e-12;

/// Indexed triangle mesh in world coordinates (meters).
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Vector3<f64>>,
    triangles: Vec<[u32; 3]>,
    albedo: Option<Vec<u8>>,
}

impl TriangleMesh {
    /// Validates indices and drops degenerate triangles.
    ///
    /// `albedo`, when given, holds one intensity per input triangle.
    pub fn new(
        vertices: Vec<Vector3<f64>>,
        triangles: Vec<[u32; 3]>,
        albedo: Option<Vec<u8>>,
    ) -> Result<Self, GeometryError> {
        if let Some(a) = &albedo {
            if a.len() != triangles.len() {
                return Err(GeometryError::AlbedoLength { albedo: a.len(), triangles: triangles.len() });
            }
        }
        let n = vertices.len();
        if let Some(bad) = triangles.iter().flatten().find(|&&i| i as usize >= n) {
            return Err(GeometryError::IndexOutOfRange { index: *bad as usize, vertices: n });
        }
        if vertices.iter().flat_map(|v| v.iter()).any(|c| !c.is_finite()) {
            return Err(GeometryError::NonFiniteVertex);
        }

        let keep: Vec<bool> = triangles
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|i| vertices[i as usize]);
                0.5 * (b - a).cross(&(c - a)).norm() > MIN_TRIANGLE_AREA
            })
            .collect();
        let triangles: Vec<[u32; 3]> = triangles.into_iter().zip(&keep).filter(|(_, k)| **k).map(|(t, _)| t).collect();
        let albedo = albedo.map(|a| a.into_iter().zip(&keep).filter(|(_, k)| **k).map(|(v, _)| v).collect());
        Ok(Self { vertices, triangles, albedo })
    }

    pub fn empty() -> Self {
        Self { vertices: Vec::new(), triangles: Vec::new(), albedo: None }
    }

    pub fn vertices(&self) -> &[Vector3<f64>] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn albedo(&self) -> Option<&[u8]> {
        self.albedo.as_deref()
    }

    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn triangle(&self, id: usize) -> [Vector3<f64>; 3] {
        self.triangles[id].map(|i| self.vertices[i as usize])
    }

    /// Unit normal following the right-hand winding.
    pub fn normal(&self, id: usize) -> Vector3<f64> {
        let [a, b, c] = self.triangle(id);
        (b - a).cross(&(c - a)).normalize()
    }

    /// Component-wise (min, max) over all vertices referenced by triangles.
    pub fn bounds(&self) -> Option<(Vector3<f64>, Vector3<f64>)> {
        let mut it = self.triangles.iter().flatten().map(|&i| self.vertices[i as usize]);
        let first = it.next()?;
        Some(it.fold((first, first), |(lo, hi), v| (lo.inf(&v), hi.sup(&v))))
    }

    /// Concatenates two meshes. Albedo is kept only when both sides carry it.
    pub fn merged(&self, other: &TriangleMesh) -> TriangleMesh {
        let offset = self.vertices.len() as u32;
        let mut vertices = self.vertices.clone();
        vertices.extend_from_slice(&other.vertices);
        let mut triangles = self.triangles.clone();
        triangles.extend(other.triangles.iter().map(|t| t.map(|i| i + offset)));
        let albedo = match (&self.albedo, &other.albedo) {
            (Some(a), Some(b)) => Some(a.iter().chain(b).copied().collect()),
            _ if self.is_empty() => other.albedo.clone(),
            _ if other.is_empty() => self.albedo.clone(),
            _ => None,
        };
        TriangleMesh { vertices, triangles, albedo }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn drops_degenerate_and_keeps_albedo_aligned() {
        let v = vec![
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(0.0, 1.0, 0.0),
            Vector3::new(2.0, 0.0, 0.0),
        ];
        let mesh = TriangleMesh::new(v, vec![[0, 1, 3], [0, 1, 2]], Some(vec![10, 20])).unwrap();
        assert_eq!(mesh.triangles(), &[[0, 1, 2]]);
        assert_eq!(mesh.albedo(), Some(&[20u8][..]));
    }

    #[test]
    fn rejects_bad_index() {
        let v = vec![Vector3::zeros(), Vector3::x(), Vector3::y()];
        assert!(matches!(
            TriangleMesh::new(v, vec![[0, 1, 3]], None),
            Err(GeometryError::IndexOutOfRange { index: 3, vertices: 3 })
        ));
    }

    #[test]
    fn merge_offsets_indices() {
        let v = vec![Vector3::zeros(), Vector3::x(), Vector3::y()];
        let a = TriangleMesh::new(v.clone(), vec![[0, 1, 2]], Some(vec![1])).unwrap();
        let b = TriangleMesh::new(v, vec![[0, 2, 1]], Some(vec![2])).unwrap();
        let m = a.merged(&b);
        assert_eq!(m.triangles(), &[[0, 1, 2], [3, 5, 4]]);
        assert_eq!(m.albedo(), Some(&[1u8, 2][..]));
        assert_eq!(m.bounds().unwrap().1, Vector3::new(1.0, 1.0, 0.0));
    }
}
