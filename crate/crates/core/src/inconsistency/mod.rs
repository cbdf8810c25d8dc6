//! Model-based re-projection between views, uncertainty-gated inconsistency
//! images and multi-pair confirmation of 2D change regions.

mod confirm;
mod distance;
mod regions;
mod reproject;

use nalgebra::{Matrix2, Vector2};

pub use confirm::{
    compare_pair, confirm_regions, confirm_with_pairs, neighbors, Confirmation, PairComparison, SurveyView,
};
pub use distance::{gate_offsets, inconsistency_distance};
pub use regions::{dilate, erode, extract_regions, label_components, open, regions_from_mask, threshold};
pub use reproject::{reproject_from_surface, reproject_image, SurfaceMap, OCCLUSION_TOLERANCE};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum InconsistencyError {
    #[error("image is {found:?}, expected {expected:?}")]
    DimensionMismatch { expected: (usize, usize), found: (usize, usize) },
    #[error("need at least 2 images, got {0}")]
    NotEnoughImages(usize),
    #[error("image index {index} out of range for {len} images")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("{images} images but {poses} poses")]
    PoseCount { images: usize, poses: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

/// Content of a source image rendered at a destination pose through the model.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpedImage {
    pub image: crate::GrayImage,
    /// Row-major; `false` where the model gives no usable source pixel.
    pub valid: Vec<bool>,
}

impl WarpedImage {
    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        self.valid[y * self.image.width() + x]
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }
}

/// Pixel uncertainty of a re-projection and its chi-square gate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UncertaintyModel {
    /// px².
    pub sigma: Matrix2<f64>,
    pub tau2: f64,
}

/// 99.73% quantile of the chi-square distribution with 2 degrees of freedom.
pub const DEFAULT_TAU2: f64 = 11.82;

impl Default for UncertaintyModel {
    fn default() -> Self {
        Self { sigma: Matrix2::identity() * 4.0, tau2: DEFAULT_TAU2 }
    }
}

impl UncertaintyModel {
    pub fn new(sigma: Matrix2<f64>, tau2: f64) -> Result<Self, InconsistencyError> {
        let u = Self { sigma, tau2 };
        u.validate()?;
        Ok(u)
    }

    /// Isotropic model with standard deviation `sigma_px`.
    pub fn isotropic(sigma_px: f64, tau2: f64) -> Result<Self, InconsistencyError> {
        Self::new(Matrix2::identity() * (sigma_px * sigma_px), tau2)
    }

    pub fn validate(&self) -> Result<(), InconsistencyError> {
        let s = &self.sigma;
        let symmetric = (s[(0, 1)] - s[(1, 0)]).abs() <= 1e-12 * s.abs().max();
        let pd = s[(0, 0)] > 0.0 && s.determinant() > 0.0;
        if !(symmetric && pd && s.iter().all(|v| v.is_finite())) {
            return Err(InconsistencyError::InvalidParams(
                "pixel covariance must be symmetric positive-definite".into(),
            ));
        }
        if !(self.tau2 > 0.0 && self.tau2.is_finite()) {
            return Err(InconsistencyError::InvalidParams("gate threshold must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InconsistencyParams {
    /// Distance at or above which a pixel counts as inconsistent, 8-bit intensity units.
    pub threshold: f64,
    /// Half-size of the square opening kernel, px.
    pub kernel_radius: usize,
    /// px².
    pub min_region_area: usize,
    /// Number of neighboring images each image is compared against.
    pub max_comparisons: usize,
    pub min_confirming_pairs: usize,
}

impl Default for InconsistencyParams {
    fn default() -> Self {
        Self { threshold: 30.0, kernel_radius: 2, min_region_area: 150, max_comparisons: 4, min_confirming_pairs: 2 }
    }
}

impl InconsistencyParams {
    pub fn validate(&self) -> Result<(), InconsistencyError> {
        let bad = |m: &str| Err(InconsistencyError::InvalidParams(m.into()));
        if !(self.threshold > 0.0 && self.threshold.is_finite()) {
            return bad("threshold must be positive");
        }
        if self.kernel_radius == 0 {
            return bad("kernel radius must be positive");
        }
        if self.min_region_area == 0 {
            return bad("minimum region area must be positive");
        }
        if self.max_comparisons == 0 {
            return bad("at least one comparison is required");
        }
        if self.min_confirming_pairs == 0 {
            return bad("at least one confirming pair is required");
        }
        Ok(())
    }
}

/// A connected set of inconsistent pixels in one image.
#[derive(Debug, Clone, PartialEq)]
pub struct ChangeRegion2D {
    /// px.
    pub mean: Vector2<f64>,
    /// Population scatter of member pixel coordinates, px².
    pub covariance: Matrix2<f64>,
    /// Member pixel count, px².
    pub area: f64,
    pub image_index: usize,
    /// Member pixels `(x, y)`, sorted row-major.
    pub pixels: Vec<(u32, u32)>,
}

impl ChangeRegion2D {
    /// Builds a region from its member pixels; `None` when `pixels` is empty.
    pub fn from_pixels(image_index: usize, mut pixels: Vec<(u32, u32)>) -> Option<Self> {
        if pixels.is_empty() {
            return None;
        }
        pixels.sort_unstable_by_key(|&(x, y)| (y, x));
        let n = pixels.len() as f64;
        let mean = pixels.iter().map(|&(x, y)| Vector2::new(x as f64, y as f64)).sum::<Vector2<f64>>() / n;
        let covariance = pixels
            .iter()
            .map(|&(x, y)| {
                let d = Vector2::new(x as f64, y as f64) - mean;
                d * d.transpose()
            })
            .sum::<Matrix2<f64>>()
            / n;
        Some(Self { mean, covariance, area: n, image_index, pixels })
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        self.pixels.binary_search_by_key(&(y, x), |&(px, py)| (py, px)).is_ok()
    }

    /// Whether the pixel nearest to `p` is a member.
    pub fn contains_point(&self, p: &Vector2<f64>) -> bool {
        let (x, y) = (p.x.round(), p.y.round());
        x >= 0.0 && y >= 0.0 && x <= u32::MAX as f64 && y <= u32::MAX as f64 && self.contains(x as u32, y as u32)
    }

    /// Covariance used for gating: member scatter plus pixel quantization.
    pub fn gate_covariance(&self) -> Matrix2<f64> {
        self.covariance + Matrix2::identity() / 12.0
    }
}

/// Squared Mahalanobis distance between two region means under their summed gate covariances.
pub fn region_distance2(a: &ChangeRegion2D, b: &ChangeRegion2D) -> f64 {
    let d = a.mean - b.mean;
    match (a.gate_covariance() + b.gate_covariance()).try_inverse() {
        Some(inv) => (d.transpose() * inv * d)[(0, 0)],
        None => f64::INFINITY,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_block_moments() {
        let pixels: Vec<_> = (10..40).flat_map(|y| (100..130).map(move |x| (x, y))).collect();
        let r = ChangeRegion2D::from_pixels(0, pixels).unwrap();
        let var = (30.0f64 * 30.0 - 1.0) / 12.0;
        assert!((r.mean - Vector2::new(114.5, 24.5)).norm() < 1e-12);
        assert!((r.covariance - Matrix2::new(var, 0.0, 0.0, var)).abs().max() < 1e-9);
        assert_eq!(r.area, 900.0);
        assert!(r.contains(100, 10) && r.contains(129, 39) && !r.contains(130, 10));
        assert!(r.contains_point(&Vector2::new(99.6, 10.2)));
    }

    #[test]
    fn parameter_validation() {
        assert!(InconsistencyParams::default().validate().is_ok());
        assert!(InconsistencyParams { max_comparisons: 0, ..Default::default() }.validate().is_err());
        assert!(InconsistencyParams { threshold: 0.0, ..Default::default() }.validate().is_err());
        assert!(UncertaintyModel::default().validate().is_ok());
        assert!(UncertaintyModel::new(Matrix2::new(1.0, 2.0, 2.0, 1.0), 11.82).is_err());
        assert!(UncertaintyModel::new(Matrix2::identity(), 0.0).is_err());
    }

    #[test]
    fn gate_distance_is_symmetric() {
        let a = ChangeRegion2D::from_pixels(0, (0..20).flat_map(|y| (0..20).map(move |x| (x, y))).collect()).unwrap();
        let b = ChangeRegion2D::from_pixels(1, (5..25).flat_map(|y| (3..23).map(move |x| (x, y))).collect()).unwrap();
        assert_eq!(region_distance2(&a, &b), region_distance2(&b, &a));
        assert_eq!(region_distance2(&a, &a), 0.0);
    }
}
