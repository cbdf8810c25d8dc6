use std::path::Path;

use nalgebra::{Matrix3, Vector3};

use super::{read_text, write_file, IoError};
use crate::geometry::{rotation_drift, CameraIntrinsics, Pose};

/// Rotation blocks drifting further than this from orthonormal are rejected.
pub const MAX_ROTATION_DRIFT: f64 = 1e-6;

fn numbers(text: &str) -> Result<Vec<f64>, IoError> {
    text.split_whitespace().map(|t| t.parse::<f64>().map_err(|e| IoError::Parse(format!("{t:?}: {e}")))).collect()
}

/// Twelve numbers: the row-major upper 3×4 block of the world←camera transform.
pub fn parse_pose(text: &str) -> Result<Pose, IoError> {
    let v = numbers(text)?;
    if v.len() != 12 {
        return Err(IoError::WrongCount { expected: 12, found: v.len() });
    }
    let r = Matrix3::new(v[0], v[1], v[2], v[4], v[5], v[6], v[8], v[9], v[10]);
    let t = Vector3::new(v[3], v[7], v[11]);
    let drift = rotation_drift(&r);
    if !(drift <= MAX_ROTATION_DRIFT) {
        return Err(IoError::NotARotation { drift });
    }
    let r = if drift <= 1e-9 { r } else { nearest_rotation(&r) };
    Ok(Pose::new(r, t)?)
}

fn nearest_rotation(r: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = r.svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut fix = Matrix3::identity();
    fix[(2, 2)] = (u * vt).determinant().signum();
    u * fix * vt
}

pub fn format_pose(pose: &Pose) -> String {
    let r = pose.rotation();
    let t = pose.translation();
    (0..3).map(|i| format!("{} {} {} {}\n", r[(i, 0)], r[(i, 1)], r[(i, 2)], t[i])).collect()
}

pub fn load_pose_file(path: impl AsRef<Path>) -> Result<Pose, IoError> {
    parse_pose(&read_text(path.as_ref())?)
}

pub fn save_pose_file(pose: &Pose, path: impl AsRef<Path>) -> Result<(), IoError> {
    write_file(path.as_ref(), format_pose(pose).as_bytes())
}

/// `fx fy cx cy width height`.
pub fn parse_intrinsics(text: &str) -> Result<CameraIntrinsics, IoError> {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    if tokens.len() != 6 {
        return Err(IoError::WrongCount { expected: 6, found: tokens.len() });
    }
    let f = numbers(&tokens[..4].join(" "))?;
    let dim = |t: &str| t.parse::<u32>().map_err(|e| IoError::Parse(format!("{t:?}: {e}")));
    Ok(CameraIntrinsics::new(f[0], f[1], f[2], f[3], dim(tokens[4])?, dim(tokens[5])?)?)
}

pub fn format_intrinsics(k: &CameraIntrinsics) -> String {
    format!("{} {} {} {} {} {}\n", k.fx, k.fy, k.cx, k.cy, k.width, k.height)
}

pub fn load_intrinsics(path: impl AsRef<Path>) -> Result<CameraIntrinsics, IoError> {
    parse_intrinsics(&read_text(path.as_ref())?)
}

pub fn save_intrinsics(k: &CameraIntrinsics, path: impl AsRef<Path>) -> Result<(), IoError> {
    write_file(path.as_ref(), format_intrinsics(k).as_bytes())
}
