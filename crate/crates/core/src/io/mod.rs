//! On-disk artifacts: PGM images, OBJ meshes, pose and intrinsics text files,
//! JSON change reports, PLY ellipsoid clouds and survey dataset directories.

mod dataset;
mod obj;
mod pgm;
mod ply;
mod report;
mod text;

use std::path::{Path, PathBuf};

pub use dataset::{
    frame_stem, load_dataset, read_manifest, write_manifest, KeptManifest, SurveyDataset, SurveyFrame,
    GROUND_TRUTH_FILE, INTRINSICS_FILE, MODEL_FILE,
};
pub use obj::{load_obj, parse_obj, save_obj, write_obj};
pub use pgm::{decode_pgm, encode_pgm, load_pgm, save_pgm};
pub use ply::{ellipsoid_points, icosphere, write_ply_ellipsoids, ICOSPHERE_POINTS};
pub use report::{read_change_report, report_entries, write_change_report, ReportEntry};
pub use text::{
    format_intrinsics, format_pose, load_intrinsics, load_pose_file, parse_intrinsics, parse_pose, save_intrinsics,
    save_pose_file,
};

use crate::geometry::GeometryError;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed PGM header: {0}")]
    MalformedHeader(String),
    #[error("truncated image data: expected {expected} bytes, found {found}")]
    TruncatedData { expected: usize, found: usize },
    #[error("unsupported PGM maxval {0} (only 255)")]
    UnsupportedMaxval(u32),
    #[error("line {line}: face index {index} out of range for {vertices} vertices")]
    IndexOutOfRange { line: usize, index: i64, vertices: usize },
    #[error("line {line}: face needs at least 3 vertices")]
    NonPolygonalFace { line: usize },
    #[error("expected {expected} numbers, found {found}")]
    WrongCount { expected: usize, found: usize },
    #[error("rotation block is not a rotation (drift {drift:e})")]
    NotARotation { drift: f64 },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("covariance is not positive semi-definite (min eigenvalue {min_eigenvalue:e})")]
    NonPositiveDefiniteCovariance { min_eigenvalue: f64 },
    #[error("dataset: {0}")]
    Dataset(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>, IoError> {
    std::fs::read(path).map_err(|source| IoError::Io { path: path.to_path_buf(), source })
}

pub(crate) fn read_text(path: &Path) -> Result<String, IoError> {
    std::fs::read_to_string(path).map_err(|source| IoError::Io { path: path.to_path_buf(), source })
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    std::fs::write(path, bytes).map_err(|source| IoError::Io { path: path.to_path_buf(), source })
}
