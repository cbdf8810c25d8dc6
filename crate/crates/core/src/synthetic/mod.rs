//! Synthetic surveys with known changes: textured box rooms, camera paths,
//! a raycast renderer and dataset writer.

mod render;
mod scene;
mod survey;

use nalgebra::Vector3;

pub use render::{render, render_depth, CHECKER_DARK};
pub use scene::{box_mesh, build_scene, room_mesh, Scene};
pub use survey::{make_survey, perturb_pose, read_ground_truth, GroundTruth, GroundTruthChange};

use crate::geometry::{CameraIntrinsics, GeometryError, Pose};
use crate::io::IoError;

#[derive(Debug, thiserror::Error)]
pub enum SyntheticError {
    #[error("object {index} at {center:?} does not fit inside the room")]
    ObjectOutsideRoom { index: usize, center: [f64; 3] },
    #[error("camera at {center:?} is outside the room")]
    CameraOutsideRoom { center: [f64; 3] },
    #[error("invalid scene: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Io(#[from] IoError),
}

/// Axis-aligned box with a single albedo.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxObject {
    pub center: Vector3<f64>,
    pub half_extents: Vector3<f64>,
    pub albedo: u8,
}

impl BoxObject {
    pub fn cube(center: Vector3<f64>, side: f64, albedo: u8) -> Self {
        Self { center, half_extents: Vector3::repeat(side / 2.0), albedo }
    }
}

/// A box room centered at the origin plus the objects inside it.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    /// Full room extents along x, y, z, m. World z points up.
    pub room_size: Vector3<f64>,
    /// Checker cell edge, m.
    pub cell_size: f64,
    /// Albedo of the walls in the order -x, +x, -y, +y, floor, ceiling.
    pub wall_albedo: [u8; 6],
    /// Present in both the model and the survey.
    pub objects: Vec<BoxObject>,
    /// Present only in the survey.
    pub changes: Vec<BoxObject>,
    /// Standard deviation of additive image noise, intensity levels.
    pub noise_sigma: f64,
    /// Standard deviation of the rotation error added to written poses, rad.
    pub rotation_sigma: f64,
    /// Standard deviation of the translation error added to written poses, m.
    pub translation_sigma: f64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            room_size: Vector3::new(6.0, 6.0, 3.0),
            cell_size: 0.25,
            wall_albedo: [100, 96, 104, 100, 92, 108],
            objects: Vec::new(),
            changes: Vec::new(),
            noise_sigma: 0.0,
            rotation_sigma: 0.0,
            translation_sigma: 0.0,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<(), SyntheticError> {
        if !(self.room_size.iter().all(|&v| v > 0.0 && v.is_finite())) {
            return Err(SyntheticError::InvalidSpec("room size must be positive".into()));
        }
        if !(self.cell_size > 0.0 && self.cell_size.is_finite()) {
            return Err(SyntheticError::InvalidSpec("cell size must be positive".into()));
        }
        for (name, v) in [
            ("noise sigma", self.noise_sigma),
            ("rotation sigma", self.rotation_sigma),
            ("translation sigma", self.translation_sigma),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(SyntheticError::InvalidSpec(format!("{name} must be non-negative")));
            }
        }
        Ok(())
    }
}

/// Camera trajectory through the room. World z is up.
#[derive(Debug, Clone, PartialEq)]
pub enum PathSpec {
    /// Evenly spaced positions on a segment, all looking along `view_direction`.
    WallScan { start: Vector3<f64>, end: Vector3<f64>, waypoints: usize, view_direction: Vector3<f64> },
    /// A fixed position turning about the vertical axis from `yaw_start` to `yaw_end` (rad, 0 = +x).
    RotateInPlace { center: Vector3<f64>, waypoints: usize, yaw_start: f64, yaw_end: f64 },
}

impl PathSpec {
    pub fn waypoints(&self) -> usize {
        match self {
            PathSpec::WallScan { waypoints, .. } | PathSpec::RotateInPlace { waypoints, .. } => *waypoints,
        }
    }

    pub fn poses(&self) -> Result<Vec<Pose>, SyntheticError> {
        let n = self.waypoints();
        if n < 2 {
            return Err(SyntheticError::InvalidSpec("a path needs at least 2 waypoints".into()));
        }
        let frac = |i: usize| i as f64 / (n - 1) as f64;
        let up = Vector3::z();
        (0..n)
            .map(|i| {
                let pose = match self {
                    PathSpec::WallScan { start, end, view_direction, .. } => {
                        let eye = start + (end - start) * frac(i);
                        Pose::look_at(eye, eye + view_direction, up)?
                    }
                    PathSpec::RotateInPlace { center, yaw_start, yaw_end, .. } => {
                        let yaw = yaw_start + (yaw_end - yaw_start) * frac(i);
                        Pose::look_at(*center, center + Vector3::new(yaw.cos(), yaw.sin(), 0.0), up)?
                    }
                };
                Ok(pose)
            })
            .collect()
    }
}

/// Ready-made survey setups.
pub mod presets {
    use super::*;

    /// 0.35 m between consecutive wall-scan poses.
    pub const WALL_SCAN_SPACING: f64 = 0.35;

    /// Camera intrinsics with a 600 px focal length at 1280×960, scaled to `width`.
    pub fn intrinsics(width: u32) -> CameraIntrinsics {
        let height = width * 3 / 4;
        let f = 600.0 * width as f64 / 1280.0;
        CameraIntrinsics::new(f, f, (width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0, width, height)
            .expect("valid preset intrinsics")
    }

    /// Seven poses 2.5 m from the +y wall, scanning along x.
    pub fn wall_scan() -> PathSpec {
        wall_scan_with(7)
    }

    /// `waypoints` wall-scan poses centered on x = 0, 0.35 m apart.
    pub fn wall_scan_with(waypoints: usize) -> PathSpec {
        let half = WALL_SCAN_SPACING * (waypoints.max(1) - 1) as f64 / 2.0;
        PathSpec::WallScan {
            start: Vector3::new(-half, 0.5, 0.0),
            end: Vector3::new(half, 0.5, 0.0),
            waypoints,
            view_direction: Vector3::y(),
        }
    }

    /// Seven headings from the room center sweeping 60°.
    pub fn rotate_in_place() -> PathSpec {
        PathSpec::RotateInPlace {
            center: Vector3::zeros(),
            waypoints: 7,
            yaw_start: 60f64.to_radians(),
            yaw_end: 120f64.to_radians(),
        }
    }

    /// 0.3 m cube 1 m in front of the wall-scan path.
    pub fn cube_change() -> BoxObject {
        BoxObject::cube(Vector3::new(0.1, 1.5, -0.15), 0.3, 250)
    }

    /// Empty room with no changes.
    pub fn empty_room() -> SceneSpec {
        SceneSpec::default()
    }

    /// Room with one cube present only in the survey.
    pub fn cube_room() -> SceneSpec {
        SceneSpec { changes: vec![cube_change()], ..SceneSpec::default() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wall_scan_spacing_and_direction() {
        let poses = presets::wall_scan().poses().unwrap();
        assert_eq!(poses.len(), 7);
        for w in poses.windows(2) {
            assert!(((w[1].center() - w[0].center()).norm() - 0.35).abs() < 1e-12);
        }
        for p in &poses {
            assert!((p.rotation() * Vector3::z() - Vector3::y()).norm() < 1e-12);
            // image down is world down
            assert!((p.rotation() * Vector3::y() + Vector3::z()).norm() < 1e-12);
        }
    }

    #[test]
    fn rotate_in_place_shares_center() {
        let poses = presets::rotate_in_place().poses().unwrap();
        for p in &poses {
            assert!((p.center() - poses[0].center()).norm() < 1e-9);
        }
    }

    #[test]
    fn path_needs_two_waypoints() {
        assert!(presets::wall_scan_with(1).poses().is_err());
    }

    #[test]
    fn preset_intrinsics() {
        let k = presets::intrinsics(1280);
        assert_eq!((k.fx, k.width, k.height), (600.0, 1280, 960));
        let k = presets::intrinsics(320);
        assert_eq!((k.fx, k.cx, k.cy, k.height), (150.0, 159.5, 119.5, 240));
    }
}
