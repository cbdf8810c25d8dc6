use nalgebra::{Matrix3, Matrix3x4, Vector2, Vector3, Vector4};

use super::{GeometryError, Pose};

/// Pinhole calibration with zero skew.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self, GeometryError> {
        let valid = fx.is_finite()
            && fy.is_finite()
            && fx > 0.0
            && fy > 0.0
            && cx >= 0.0
            && cy >= 0.0
            && cx < width as f64
            && cy < height as f64;
        if !valid {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "fx={fx} fy={fy} cx={cx} cy={cy} width={width} height={height}"
            )));
        }
        Ok(Self { fx, fy, cx, cy, width, height })
    }

    /// The calibration matrix `K`.
    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    pub fn inverse_matrix(&self) -> Matrix3<f64> {
        Matrix3::new(1.0 / self.fx, 0.0, -self.cx / self.fx, 0.0, 1.0 / self.fy, -self.cy / self.fy, 0.0, 0.0, 1.0)
    }

    /// Whether a sub-pixel coordinate lies on the raster (pixel centers at integers).
    pub fn contains(&self, pixel: &Vector2<f64>) -> bool {
        pixel.x >= -0.5 && pixel.y >= -0.5 && pixel.x < self.width as f64 - 0.5 && pixel.y < self.height as f64 - 0.5
    }
}

/// 3×4 camera matrix mapping homogeneous world points to homogeneous pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionMatrix(pub Matrix3x4<f64>);

impl ProjectionMatrix {
    /// `K Rᵀ [I | −c]` for a camera placed in the world by `pose`.
    pub fn new(k: &CameraIntrinsics, pose: &Pose) -> Self {
        let world_to_cam = pose.rotation().transpose();
        let kr = k.matrix() * world_to_cam;
        let mut m = Matrix3x4::zeros();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&kr);
        m.set_column(3, &(-(kr * pose.center())));
        Self(m)
    }

    pub fn matrix(&self) -> &Matrix3x4<f64> {
        &self.0
    }

    /// Signed depth of a world point along the optical axis.
    pub fn depth(&self, x: &Vector3<f64>) -> f64 {
        let m = self.0.fixed_view::<3, 3>(0, 0);
        let w = self.0.row(2).dot(&Vector4::new(x.x, x.y, x.z, 1.0).transpose());
        let scale = m.row(2).norm() * m.determinant().signum();
        w / scale
    }
}

pub fn projection_matrix(k: &CameraIntrinsics, pose: &Pose) -> ProjectionMatrix {
    ProjectionMatrix::new(k, pose)
}

/// Projects a world point, returning the pixel and the point's depth.
pub fn project(p: &ProjectionMatrix, x: &Vector3<f64>) -> Result<(Vector2<f64>, f64), GeometryError> {
    let depth = p.depth(x);
    if !(depth > 0.0) {
        return Err(GeometryError::PointBehindCamera { depth });
    }
    let h = p.0 * Vector4::new(x.x, x.y, x.z, 1.0);
    Ok((Vector2::new(h.x / h.z, h.y / h.z), depth))
}

/// Half-line with a unit direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vector3<f64>,
    pub direction: Vector3<f64>,
}

impl Ray {
    /// Normalizes `direction`; returns `None` for a zero or non-finite direction.
    pub fn new(origin: Vector3<f64>, direction: Vector3<f64>) -> Option<Self> {
        let direction = direction.try_normalize(0.0)?;
        direction.iter().all(|v| v.is_finite()).then_some(Self { origin, direction })
    }

    pub fn at(&self, t: f64) -> Vector3<f64> {
        self.origin + self.direction * t
    }
}

/// The world ray from the camera center through `pixel`.
pub fn back_project(k: &CameraIntrinsics, pose: &Pose, pixel: &Vector2<f64>) -> Ray {
    let cam = Vector3::new((pixel.x - k.cx) / k.fx, (pixel.y - k.cy) / k.fy, 1.0);
    let direction = (pose.rotation() * cam).normalize();
    Ray { origin: pose.center(), direction }
}

/// Cross-product matrix: `skew(x) * y == x × y`.
pub fn skew(x: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -x.z, x.y, x.z, 0.0, -x.x, -x.y, x.x, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Matrix4, Rotation3, Unit};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_pose(rng: &mut ChaCha8Rng) -> Pose {
        let axis = Unit::new_normalize(Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0) + 2.0,
        ));
        let r = Rotation3::from_axis_angle(&axis, rng.random_range(-3.0..3.0));
        let t = Vector3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
        Pose::new(*r.matrix(), t).unwrap()
    }

    fn random_k(rng: &mut ChaCha8Rng) -> CameraIntrinsics {
        CameraIntrinsics::new(
            rng.random_range(200.0..900.0),
            rng.random_range(200.0..900.0),
            rng.random_range(200.0..440.0),
            rng.random_range(150.0..330.0),
            640,
            480,
        )
        .unwrap()
    }

    /// P from the 4×4 world→camera matrix, independent of `ProjectionMatrix::new`.
    fn oracle_projection(k: &CameraIntrinsics, pose: &Pose) -> Matrix3x4<f64> {
        let cam_from_world: Matrix4<f64> = pose.to_homogeneous().try_inverse().unwrap();
        let mut k34 = Matrix3x4::zeros();
        k34[(0, 0)] = k.fx;
        k34[(0, 2)] = k.cx;
        k34[(1, 1)] = k.fy;
        k34[(1, 2)] = k.cy;
        k34[(2, 2)] = 1.0;
        k34 * cam_from_world
    }

    #[test]
    fn unit_k_identity_pose_gives_canonical_matrix() {
        let k = CameraIntrinsics { fx: 1.0, fy: 1.0, cx: 0.0, cy: 0.0, width: 1, height: 1 };
        let p = ProjectionMatrix::new(&k, &Pose::identity());
        assert_eq!(p.0, Matrix3x4::identity());
    }

    #[test]
    fn on_axis_point_projects_to_origin() {
        let k = CameraIntrinsics { fx: 1.0, fy: 1.0, cx: 0.0, cy: 0.0, width: 1, height: 1 };
        let pose = Pose::new(Matrix3::identity(), Vector3::new(0.0, 0.0, -1.0)).unwrap();
        let (px, depth) = project(&ProjectionMatrix::new(&k, &pose), &Vector3::zeros()).unwrap();
        assert_eq!(px, Vector2::zeros());
        assert_eq!(depth, 1.0);
    }

    #[test]
    fn principal_point_and_behind_camera() {
        let k = CameraIntrinsics::new(600.0, 600.0, 640.0, 480.0, 1280, 960).unwrap();
        let p = ProjectionMatrix::new(&k, &Pose::identity());
        let (px, depth) = project(&p, &Vector3::new(0.0, 0.0, 3.5)).unwrap();
        assert!((px - Vector2::new(640.0, 480.0)).norm() < 1e-12);
        assert_eq!(depth, 3.5);
        assert!(matches!(project(&p, &Vector3::new(0.0, 0.0, -1.0)), Err(GeometryError::PointBehindCamera { .. })));
        assert!(matches!(project(&p, &Vector3::new(1.0, 0.0, 0.0)), Err(GeometryError::PointBehindCamera { .. })));
    }

    #[test]
    fn intrinsics_validation() {
        assert!(CameraIntrinsics::new(600.0, 600.0, 640.0, 480.0, 1280, 960).is_ok());
        assert!(CameraIntrinsics::new(600.0, 600.0, 1280.0, 480.0, 1280, 960).is_err());
        assert!(CameraIntrinsics::new(0.0, 600.0, 640.0, 480.0, 1280, 960).is_err());
        assert!(CameraIntrinsics::new(600.0, 600.0, 640.0, -1.0, 1280, 960).is_err());
    }

    #[test]
    fn projection_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let k = random_k(&mut rng);
            let pose = random_pose(&mut rng);
            let p = ProjectionMatrix::new(&k, &pose);
            let oracle = oracle_projection(&k, &pose);
            let left = p.0.fixed_view::<3, 3>(0, 0).into_owned();
            assert!((left - k.matrix() * pose.rotation().transpose()).abs().max() < 1e-12);
            for _ in 0..1000 {
                let x = Vector3::new(
                    rng.random_range(-20.0..20.0),
                    rng.random_range(-20.0..20.0),
                    rng.random_range(-20.0..20.0),
                );
                let h = oracle * Vector4::new(x.x, x.y, x.z, 1.0);
                match project(&p, &x) {
                    Ok((px, depth)) => {
                        assert!((depth - h.z).abs() < 1e-9);
                        assert!((px - Vector2::new(h.x / h.z, h.y / h.z)).norm() < 1e-6 * (1.0 + px.norm()));
                    }
                    Err(_) => assert!(h.z <= 1e-9),
                }
            }
        }
    }

    #[test]
    fn corner_rays_match_closed_form() {
        let k = CameraIntrinsics::new(500.0, 400.0, 320.0, 240.0, 640, 480).unwrap();
        for &(x, y) in &[(0.0, 0.0), (639.0, 0.0), (0.0, 479.0), (639.0, 479.0)] {
            let ray = back_project(&k, &Pose::identity(), &Vector2::new(x, y));
            let d = Vector3::new((x - 320.0) / 500.0, (y - 240.0) / 400.0, 1.0);
            assert!((ray.direction - d / d.norm()).norm() < 1e-12);
            assert_eq!(ray.origin, Vector3::zeros());
        }
        let axis = back_project(&k, &Pose::identity(), &Vector2::new(320.0, 240.0));
        assert_eq!(axis.direction, Vector3::z());
    }

    #[test]
    fn back_project_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..2000 {
            let k = random_k(&mut rng);
            let pose = random_pose(&mut rng);
            let p = ProjectionMatrix::new(&k, &pose);
            let px = Vector2::new(rng.random_range(0.0..639.0), rng.random_range(0.0..479.0));
            let depth = rng.random_range(0.1..50.0);
            let ray = back_project(&k, &pose, &px);
            let along_axis = (pose.rotation() * Vector3::z()).dot(&ray.direction);
            let x = ray.at(depth / along_axis);
            let (again, d) = project(&p, &x).unwrap();
            assert!((again - px).norm() < 1e-9, "{again} vs {px}");
            assert!((d - depth).abs() < 1e-9 * depth.max(1.0));
        }
    }

    #[test]
    fn project_then_back_project_recovers_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let k = random_k(&mut rng);
        for _ in 0..500 {
            let pose = random_pose(&mut rng);
            let p = ProjectionMatrix::new(&k, &pose);
            let x = pose.transform_point(&Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(0.5..10.0),
            ));
            let (px, depth) = project(&p, &x).unwrap();
            let ray = back_project(&k, &pose, &px);
            let along_axis = (pose.rotation() * Vector3::z()).dot(&ray.direction);
            assert!((ray.at(depth / along_axis) - x).norm() < 1e-9);
        }
    }

    #[test]
    fn skew_layout_and_identities() {
        let s = skew(&Vector3::new(1.0, 0.0, 0.0));
        assert_eq!(s, Matrix3::new(0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0));
        let s = skew(&Vector3::new(2.0, 3.0, 5.0));
        assert_eq!(s, Matrix3::new(0.0, -5.0, 3.0, 5.0, 0.0, -2.0, -3.0, 2.0, 0.0));

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let x = Vector3::new(rng.random_range(-9.0..9.0), rng.random_range(-9.0..9.0), rng.random_range(-9.0..9.0));
            let y = Vector3::new(rng.random_range(-9.0..9.0), rng.random_range(-9.0..9.0), rng.random_range(-9.0..9.0));
            let s = skew(&x);
            assert!((s * x).norm() < 1e-12);
            assert_eq!(s.transpose(), -s);
            let cross = Vector3::new(x.y * y.z - x.z * y.y, x.z * y.x - x.x * y.z, x.x * y.y - x.y * y.x);
            assert!((s * y - cross).norm() < 1e-12);
            assert!(s.determinant().abs() < 1e-9);
        }
    }
}
