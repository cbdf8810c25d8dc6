use nalgebra::{Matrix3, Matrix4, Vector3};

use super::GeometryError;

const ORTHONORMAL_TOL: f64 = 1e-9;

/// Rigid transform placing a camera (or body) frame in the world.
///
/// A point `p` expressed in the local frame maps to `rotation * p + translation`
/// in the world frame, so `translation` is the frame origin (camera center) in
/// world coordinates. Camera frames use x right, y down, z forward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl Pose {
    /// Builds a pose, rejecting rotation blocks that are not proper rotations.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, GeometryError> {
        let drift = rotation_drift(&rotation);
        if !(drift <= ORTHONORMAL_TOL) || !translation.iter().all(|v| v.is_finite()) {
            return Err(GeometryError::NotARotation { drift });
        }
        Ok(Self { rotation, translation })
    }

    pub fn identity() -> Self {
        Self { rotation: Matrix3::identity(), translation: Vector3::zeros() }
    }

    /// Pose with origin `eye` whose optical (+z) axis points at `target`.
    ///
    /// `up` is the world direction that should appear towards the top of the image.
    pub fn look_at(eye: Vector3<f64>, target: Vector3<f64>, up: Vector3<f64>) -> Result<Self, GeometryError> {
        let forward = (target - eye).try_normalize(1e-12).ok_or(GeometryError::DegenerateLookAt)?;
        let right = (-up).cross(&forward).try_normalize(1e-12).ok_or(GeometryError::DegenerateLookAt)?;
        let down = forward.cross(&right);
        let rotation = Matrix3::from_columns(&[right, down, forward]);
        Self::new(rotation, eye)
    }

    pub fn from_homogeneous(m: &Matrix4<f64>) -> Result<Self, GeometryError> {
        let rotation = m.fixed_view::<3, 3>(0, 0).into_owned();
        let translation = m.fixed_view::<3, 1>(0, 3).into_owned();
        Self::new(rotation, translation)
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Vector3<f64> {
        self.translation
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self { rotation: rt, translation: -(rt * self.translation) }
    }

    /// `self * other` as homogeneous transforms.
    pub fn compose(&self, other: &Pose) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }
}

/// Camera pose in the world from the body pose and the body-to-camera extrinsics.
pub fn compose_pose(world_t_body: &Pose, body_t_cam: &Pose) -> Pose {
    world_t_body.compose(body_t_cam)
}

/// Largest of `|RᵀR − I|_max` and `|det R − 1|`.
pub(crate) fn rotation_drift(r: &Matrix3<f64>) -> f64 {
    let ortho = (r.transpose() * r - Matrix3::identity()).abs().max();
    let det = (r.determinant() - 1.0).abs();
    ortho.max(det)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Rotation3, Unit};
    use proptest::prelude::*;

    fn pose_strategy() -> impl Strategy<Value = Pose> {
        (prop::array::uniform3(-1.0f64..1.0), -3.0f64..3.0, prop::array::uniform3(-10.0f64..10.0)).prop_filter_map(
            "zero axis",
            |(axis, angle, t)| {
                let axis = Unit::try_new(Vector3::from(axis), 1e-3)?;
                let r = Rotation3::from_axis_angle(&axis, angle);
                Some(Pose::new(*r.matrix(), Vector3::from(t)).unwrap())
            },
        )
    }

    fn dense_product(a: &Matrix4<f64>, b: &Matrix4<f64>) -> Matrix4<f64> {
        let mut out = Matrix4::zeros();
        for i in 0..4 {
            for j in 0..4 {
                let mut s = 0.0;
                for k in 0..4 {
                    s += a[(i, k)] * b[(k, j)];
                }
                out[(i, j)] = s;
            }
        }
        out
    }

    #[test]
    fn identity_composes_to_identity() {
        let p = compose_pose(&Pose::identity(), &Pose::identity());
        assert_eq!(p, Pose::identity());
    }

    #[test]
    fn rejects_reflection() {
        let r = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        assert!(matches!(Pose::new(r, Vector3::zeros()), Err(GeometryError::NotARotation { .. })));
    }

    #[test]
    fn look_at_points_optical_axis_at_target() {
        let eye = Vector3::new(1.0, 2.0, 0.5);
        let target = Vector3::new(1.0, 5.0, 0.5);
        let p = Pose::look_at(eye, target, Vector3::z()).unwrap();
        let axis = p.rotation() * Vector3::z();
        assert!((axis - Vector3::y()).norm() < 1e-12);
        // image "down" is world -z
        assert!((p.rotation() * Vector3::y() + Vector3::z()).norm() < 1e-12);
    }

    proptest! {
        #[test]
        fn compose_matches_dense_oracle(a in pose_strategy(), b in pose_strategy()) {
            let got = compose_pose(&a, &b).to_homogeneous();
            let want = dense_product(&a.to_homogeneous(), &b.to_homogeneous());
            prop_assert!((got - want).abs().max() < 1e-12);
        }

        #[test]
        fn inverse_is_two_sided(a in pose_strategy()) {
            let left = a.compose(&a.inverse()).to_homogeneous();
            let right = a.inverse().compose(&a).to_homogeneous();
            prop_assert!((left - Matrix4::identity()).abs().max() < 1e-9);
            prop_assert!((right - Matrix4::identity()).abs().max() < 1e-9);
        }

        #[test]
        fn composition_is_associative(a in pose_strategy(), b in pose_strategy(), c in pose_strategy()) {
            let lhs = a.compose(&b).compose(&c).to_homogeneous();
            let rhs = a.compose(&b.compose(&c)).to_homogeneous();
            prop_assert!((lhs - rhs).abs().max() < 1e-12);
        }
    }
}
