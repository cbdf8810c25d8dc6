//! Triangulation of confirmed 2D change regions into 3D means and covariances.

mod estimate;
mod sigma;
mod triangulate;

use nalgebra::{Matrix3, Vector3};

pub use estimate::{estimate_change_regions, group_regions, prune_near_camera, RegionGroup};
pub use sigma::{sigma_points, unscented_moments, SIGMA_POINT_COUNT, SIGMA_WEIGHTS};
pub use triangulate::{triangulate, Triangulation, TriangulationProblem};

/// Default radius around camera centers inside which detections are discarded, m.
pub const DEFAULT_MIN_CAMERA_DISTANCE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Change3dError {
    #[error("triangulation needs at least 2 views, got {0}")]
    NotEnoughViews(usize),
    #[error("views do not constrain the point (singular value gap {gap:e})")]
    DegenerateGeometry { gap: f64 },
    #[error("triangulated point lies behind camera {view}")]
    BehindCamera { view: usize },
    #[error("covariance is not positive semi-definite")]
    NonPsd,
}

/// A change localized in the world frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ChangeRegion3D {
    /// Meters.
    pub mean: Vector3<f64>,
    /// m².
    pub covariance: Matrix3<f64>,
    /// Indices of the images whose regions support this change.
    pub support: Vec<usize>,
    /// Summed area of the supporting 2D regions, px².
    pub pixel_area: f64,
}
