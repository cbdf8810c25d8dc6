use nalgebra::Vector3;

use super::{BoxObject, SceneSpec, SyntheticError};
use crate::geometry::TriangleMesh;

/// Model and survey meshes of a scene together with its changes.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    /// Room and persistent objects.
    pub model: TriangleMesh,
    /// The model plus every change.
    pub survey: TriangleMesh,
    pub change_centroids: Vec<Vector3<f64>>,
    pub changes: Vec<BoxObject>,
}

/// Corner `i` of a box: bit 0 selects +x, bit 1 +y, bit 2 +z.
fn corner(center: &Vector3<f64>, half: &Vector3<f64>, i: usize) -> Vector3<f64> {
    let s = |bit: usize| if i >> bit & 1 == 1 { 1.0 } else { -1.0 };
    center + Vector3::new(s(0) * half.x, s(1) * half.y, s(2) * half.z)
}

/// Faces in the order -x, +x, -y, +y, -z, +z, each wound outward.
const FACES: [[usize; 4]; 6] = [[0, 4, 6, 2], [1, 3, 7, 5], [0, 1, 5, 4], [2, 6, 7, 3], [0, 2, 3, 1], [4, 5, 7, 6]];

fn box_triangles(center: &Vector3<f64>, half: &Vector3<f64>, albedo: [u8; 6], inward: bool) -> TriangleMesh {
    let vertices: Vec<_> = (0..8).map(|i| corner(center, half, i)).collect();
    let mut triangles = Vec::with_capacity(12);
    let mut colors = Vec::with_capacity(12);
    for (f, q) in FACES.iter().enumerate() {
        let q = q.map(|i| i as u32);
        if inward {
            triangles.extend([[q[0], q[2], q[1]], [q[0], q[3], q[2]]]);
        } else {
            triangles.extend([[q[0], q[1], q[2]], [q[0], q[2], q[3]]]);
        }
        colors.extend([albedo[f]; 2]);
    }
    TriangleMesh::new(vertices, triangles, Some(colors)).expect("box indices are valid")
}

/// Closed box with outward-facing triangles.
pub fn box_mesh(obj: &BoxObject) -> TriangleMesh {
    box_triangles(&obj.center, &obj.half_extents, [obj.albedo; 6], false)
}

/// The six room walls, facing inward.
pub fn room_mesh(spec: &SceneSpec) -> TriangleMesh {
    box_triangles(&Vector3::zeros(), &(spec.room_size / 2.0), spec.wall_albedo, true)
}

fn check_inside(spec: &SceneSpec, index: usize, obj: &BoxObject) -> Result<(), SyntheticError> {
    let half_room = spec.room_size / 2.0;
    let fits = (0..3).all(|a| obj.half_extents[a] > 0.0 && obj.center[a].abs() + obj.half_extents[a] < half_room[a]);
    if fits {
        Ok(())
    } else {
        Err(SyntheticError::ObjectOutsideRoom { index, center: obj.center.into() })
    }
}

/// Builds the model and survey meshes. Objects are indexed model objects first, then changes.
pub fn build_scene(spec: &SceneSpec) -> Result<Scene, SyntheticError> {
    spec.validate()?;
    for (i, obj) in spec.objects.iter().chain(&spec.changes).enumerate() {
        check_inside(spec, i, obj)?;
    }
    let model = spec.objects.iter().fold(room_mesh(spec), |m, o| m.merged(&box_mesh(o)));
    let survey = spec.changes.iter().fold(model.clone(), |m, o| m.merged(&box_mesh(o)));
    Ok(Scene {
        model,
        survey,
        change_centroids: spec.changes.iter().map(|c| c.center).collect(),
        changes: spec.changes.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_changes_means_identical_meshes() {
        let spec = SceneSpec {
            objects: vec![BoxObject::cube(Vector3::new(1.0, 1.0, -1.0), 0.5, 180)],
            ..SceneSpec::default()
        };
        let scene = build_scene(&spec).unwrap();
        assert_eq!(scene.model, scene.survey);
        assert!(scene.change_centroids.is_empty());
        assert_eq!(scene.model.len(), 24);
    }

    #[test]
    fn change_centroid_is_box_center() {
        let c = Vector3::new(0.3, -1.2, 0.4);
        let spec = SceneSpec { changes: vec![BoxObject::cube(c, 0.3, 250)], ..SceneSpec::default() };
        let scene = build_scene(&spec).unwrap();
        assert_eq!(scene.change_centroids, vec![c]);
        assert_eq!(scene.survey.len(), scene.model.len() + 12);
        let (lo, hi) = box_mesh(&spec.changes[0]).bounds().unwrap();
        assert_eq!((lo + hi) / 2.0, c);
    }

    #[test]
    fn object_through_wall_is_rejected() {
        let spec =
            SceneSpec { changes: vec![BoxObject::cube(Vector3::new(2.9, 0.0, 0.0), 0.3, 250)], ..SceneSpec::default() };
        assert!(matches!(build_scene(&spec), Err(SyntheticError::ObjectOutsideRoom { index: 0, .. })));
    }

    #[test]
    fn box_normals_point_outward_and_room_inward() {
        let obj = BoxObject::cube(Vector3::new(0.5, 0.5, 0.5), 1.0, 10);
        let m = box_mesh(&obj);
        for t in 0..m.len() {
            let [a, b, c] = m.triangle(t);
            let centroid = (a + b + c) / 3.0;
            assert!(m.normal(t).dot(&(centroid - obj.center)) > 0.0);
        }
        let room = room_mesh(&SceneSpec::default());
        for t in 0..room.len() {
            let [a, b, c] = room.triangle(t);
            assert!(room.normal(t).dot(&((a + b + c) / 3.0)) < 0.0);
        }
    }
}
