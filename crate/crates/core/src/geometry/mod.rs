//! Camera models, rigid transforms, projection and ray casting against meshes.

mod bvh;
mod camera;
mod mesh;
mod pose;

pub use bvh::{
    build_bvh, intersect_triangle, ray_mesh_intersect, Aabb, Bvh, Hit, MAX_LEAF_SIZE, MIN_HIT_DISTANCE, TIE_TOLERANCE,
};
pub use camera::{back_project, project, projection_matrix, skew, CameraIntrinsics, ProjectionMatrix, Ray};
pub use mesh::{TriangleMesh, MIN_TRIANGLE_AREA};
pub use pose::{compose_pose, Pose};

pub(crate) use pose::rotation_drift;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("rotation block is not a proper rotation (drift {drift:e})")]
    NotARotation { drift: f64 },
    #[error("look-at target coincides with the eye or is parallel to up")]
    DegenerateLookAt,
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("point is behind the camera (depth {depth})")]
    PointBehindCamera { depth: f64 },
    #[error("triangle index {index} out of range for {vertices} vertices")]
    IndexOutOfRange { index: usize, vertices: usize },
    #[error("albedo has {albedo} entries for {triangles} triangles")]
    AlbedoLength { albedo: usize, triangles: usize },
    #[error("mesh has a non-finite vertex")]
    NonFiniteVertex,
    #[error("mesh has no triangles")]
    EmptyMesh,
}
