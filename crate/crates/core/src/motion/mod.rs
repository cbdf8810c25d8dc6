//! Low-movement frame removal by sparse feature tracking.
//!
//! Corners are detected in the last kept frame and tracked into each new
//! frame with a coarse-to-fine Lucas–Kanade tracker. A frame is kept when the
//! median feature displacement reaches the threshold, or when too few features
//! can be tracked at all (large motion or a changed scene).

mod features;
mod tracking;

pub use features::{detect_features, Feature};
pub use tracking::{track_features, TrackedFeature};

use crate::GrayImage;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MotionError {
    #[error("image {width}x{height} is too small for patch radius {patch_radius}")]
    ImageTooSmall { width: usize, height: usize, patch_radius: usize },
    #[error("images differ in size: {a:?} vs {b:?}")]
    DimensionMismatch { a: (usize, usize), b: (usize, usize) },
    #[error("invalid motion filter parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MotionFilterParams {
    pub max_features: usize,
    /// Half-size of the tracked patch, px.
    pub patch_radius: usize,
    pub pyramid_levels: usize,
    /// Largest displacement update allowed at any one pyramid level, px.
    pub search_radius: f64,
    /// Median displacement at or above which a frame counts as moved, px.
    pub displacement_threshold: f64,
    pub min_tracked_fraction: f64,
}

impl Default for MotionFilterParams {
    fn default() -> Self {
        Self {
            max_features: 200,
            patch_radius: 7,
            pyramid_levels: 3,
            search_radius: 8.0,
            displacement_threshold: 2.0,
            min_tracked_fraction: 0.5,
        }
    }
}

impl MotionFilterParams {
    pub fn validate(&self) -> Result<(), MotionError> {
        let ok = self.max_features > 0
            && self.patch_radius > 0
            && self.pyramid_levels > 0
            && self.search_radius > 0.0
            && self.displacement_threshold > 0.0
            && self.min_tracked_fraction > 0.0
            && self.min_tracked_fraction <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(MotionError::InvalidParams(format!("{self:?}")))
        }
    }
}

/// Motion between a reference frame and a candidate frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameMotion {
    /// Median displacement over tracked features, px. `None` when nothing tracked.
    pub median_displacement: Option<f64>,
    pub tracked_fraction: f64,
}

/// Tracks `features` (detected in `reference`) into `candidate`.
pub fn measure_motion(
    reference: &GrayImage,
    candidate: &GrayImage,
    features: &[Feature],
    params: &MotionFilterParams,
) -> Result<FrameMotion, MotionError> {
    if features.is_empty() {
        return Ok(FrameMotion { median_displacement: None, tracked_fraction: 0.0 });
    }
    let tracks = track_features(reference, candidate, features, params)?;
    let mut moved: Vec<f64> = tracks.iter().filter(|t| t.tracked).map(|t| t.displacement.norm()).collect();
    let tracked_fraction = moved.len() as f64 / tracks.len() as f64;
    moved.sort_by(f64::total_cmp);
    let median_displacement = match moved.len() {
        0 => None,
        n if n % 2 == 1 => Some(moved[n / 2]),
        n => Some(0.5 * (moved[n / 2 - 1] + moved[n / 2])),
    };
    Ok(FrameMotion { median_displacement, tracked_fraction })
}

/// Indices of the frames to keep, in increasing order.
///
/// Greedy scan: frame 0 is kept; each later frame is compared against the
/// last kept frame and kept when it moved at least `displacement_threshold`
/// or could not be tracked. The last frame is always kept.
pub fn filter_low_movement(seq: &[GrayImage], params: &MotionFilterParams) -> Vec<usize> {
    if seq.is_empty() {
        return Vec::new();
    }
    let mut kept = vec![0];
    let mut reference = 0usize;
    let mut features = detect_features(&seq[0], params).unwrap_or_default();
    for k in 1..seq.len() {
        let keep = if k == seq.len() - 1 {
            true
        } else {
            match measure_motion(&seq[reference], &seq[k], &features, params) {
                Ok(m) => {
                    m.tracked_fraction < params.min_tracked_fraction
                        || m.median_displacement.is_none_or(|d| d >= params.displacement_threshold)
                }
                Err(_) => true,
            }
        };
        if keep {
            log::debug!("frame {k}: kept");
            kept.push(k);
            reference = k;
            if k + 1 < seq.len() {
                features = detect_features(&seq[k], params).unwrap_or_default();
            }
        }
    }
    kept
}
