//! End-to-end detection over a survey dataset.

use std::path::Path;
use std::time::{Duration, Instant};

use crate::change3d::{estimate_change_regions, prune_near_camera, ChangeRegion3D, DEFAULT_MIN_CAMERA_DISTANCE};
use crate::geometry::{Bvh, CameraIntrinsics, GeometryError, Pose, ProjectionMatrix, TriangleMesh};
use crate::inconsistency::{
    confirm_with_pairs, ChangeRegion2D, Confirmation, InconsistencyError, InconsistencyParams, SurveyView,
    UncertaintyModel,
};
use crate::io::{frame_stem, save_pgm, IoError, SurveyDataset};
use crate::GrayImage;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Inconsistency(#[from] InconsistencyError),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("frame selection: {0}")]
    Selection(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionParams {
    pub inconsistency: InconsistencyParams,
    pub uncertainty: UncertaintyModel,
    /// Detections closer than this to a supporting camera are discarded, m.
    pub min_camera_distance: f64,
}

impl Default for DetectionParams {
    fn default() -> Self {
        Self {
            inconsistency: InconsistencyParams::default(),
            uncertainty: UncertaintyModel::default(),
            min_camera_distance: DEFAULT_MIN_CAMERA_DISTANCE,
        }
    }
}

impl DetectionParams {
    pub fn validate(&self) -> Result<(), PipelineError> {
        self.inconsistency.validate()?;
        self.uncertainty.validate()?;
        if !(self.min_camera_distance >= 0.0 && self.min_camera_distance.is_finite()) {
            return Err(PipelineError::InvalidParams("minimum camera distance must be non-negative".into()));
        }
        Ok(())
    }
}

/// Wall-clock time per stage.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageTimings {
    pub data_loading: Duration,
    pub inconsistencies: Duration,
    pub change_3d: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionOutput {
    /// Dataset frame indices that took part, in order.
    pub frames: Vec<usize>,
    /// Confirmed regions per participating frame; `image_index` is the frame index.
    pub regions_2d: Vec<Vec<ChangeRegion2D>>,
    /// `support` holds frame indices.
    pub regions_3d: Vec<ChangeRegion3D>,
    pub timings: StageTimings,
    /// Number of pairwise image comparisons performed.
    pub comparisons: usize,
    /// Neighbor count actually used after clamping to the available images.
    pub max_comparisons: usize,
}

/// In-memory inputs of a detection run.
#[derive(Debug, Clone, Copy)]
pub struct DetectionInput<'a> {
    pub images: &'a [GrayImage],
    pub poses: &'a [Pose],
    pub intrinsics: &'a CameraIntrinsics,
    pub mesh: &'a TriangleMesh,
    pub bvh: &'a Bvh,
}

/// Result of [`detect`], indexed by position in the input.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub confirmations: Vec<Confirmation>,
    pub regions_3d: Vec<ChangeRegion3D>,
    pub inconsistencies: Duration,
    pub change_3d: Duration,
    pub max_comparisons: usize,
}

/// Runs confirmation on every image, then triangulation and pruning.
pub fn detect(input: &DetectionInput<'_>, params: &DetectionParams) -> Result<Detection, PipelineError> {
    params.validate()?;
    let n = input.images.len();
    if n < 2 {
        return Err(InconsistencyError::NotEnoughImages(n).into());
    }
    let mut inc = params.inconsistency.clone();
    if inc.max_comparisons > n - 1 {
        log::warn!(
            "max comparisons {} exceeds the {} available neighbors; using {}",
            inc.max_comparisons,
            n - 1,
            n - 1
        );
        inc.max_comparisons = n - 1;
    }
    let view = SurveyView {
        images: input.images,
        poses: input.poses,
        intrinsics: input.intrinsics,
        mesh: input.mesh,
        bvh: input.bvh,
    };
    let start = Instant::now();
    let confirmations =
        (0..n).map(|i| confirm_with_pairs(i, &view, &inc, &params.uncertainty)).collect::<Result<Vec<_>, _>>()?;
    let inconsistencies = start.elapsed();

    let start = Instant::now();
    let regions: Vec<Vec<ChangeRegion2D>> = confirmations.iter().map(|c| c.regions.clone()).collect();
    let cameras: Vec<ProjectionMatrix> =
        input.poses.iter().map(|p| ProjectionMatrix::new(input.intrinsics, p)).collect();
    let estimated = estimate_change_regions(&regions, &cameras, params.uncertainty.tau2);
    let regions_3d = prune_near_camera(estimated, input.poses, params.min_camera_distance);
    let change_3d = start.elapsed();
    Ok(Detection { confirmations, regions_3d, inconsistencies, change_3d, max_comparisons: inc.max_comparisons })
}

fn bool_image(mask: &[bool], w: usize, h: usize) -> GrayImage {
    GrayImage::from_vec(w, h, mask.iter().map(|&b| if b { 255 } else { 0 }).collect()).expect("mask sized to image")
}

fn write_debug(dir: &Path, frames: &[usize], confirmations: &[Confirmation]) -> Result<(), IoError> {
    std::fs::create_dir_all(dir).map_err(|source| IoError::Io { path: dir.to_path_buf(), source })?;
    for c in confirmations {
        let dst = frame_stem(frames[c.image_index]);
        for p in &c.pairs {
            let src = frame_stem(frames[p.source]);
            let (w, h) = p.distance.dimensions();
            save_pgm(&p.distance, dir.join(format!("distance_{dst}_from_{src}.pgm")))?;
            save_pgm(&bool_image(&p.mask, w, h), dir.join(format!("mask_{dst}_from_{src}.pgm")))?;
        }
        if let Some(p) = c.pairs.first() {
            let (w, h) = p.distance.dimensions();
            save_pgm(&bool_image(&c.consensus, w, h), dir.join(format!("consensus_{dst}.pgm")))?;
        }
    }
    Ok(())
}

/// Loads the selected frames of `dataset` and runs [`detect`].
///
/// `kept` lists positions in `dataset.frames`; `None` uses every frame.
/// With `debug_dir`, per-pair distance images, masks and consensus masks are written there.
pub fn run_detection(
    dataset: &SurveyDataset,
    kept: Option<&[usize]>,
    params: &DetectionParams,
    debug_dir: Option<&Path>,
) -> Result<DetectionOutput, PipelineError> {
    params.validate()?;
    let positions: Vec<usize> = match kept {
        Some(k) => {
            if let Some(&bad) = k.iter().find(|&&p| p >= dataset.len()) {
                return Err(PipelineError::Selection(format!(
                    "position {bad} but dataset has {} frames",
                    dataset.len()
                )));
            }
            k.to_vec()
        }
        None => (0..dataset.len()).collect(),
    };
    let start = Instant::now();
    let mesh = dataset.load_mesh()?;
    let bvh = Bvh::build(&mesh)?;
    let images = positions.iter().map(|&p| dataset.load_image(p)).collect::<Result<Vec<_>, _>>()?;
    let poses: Vec<Pose> = positions.iter().map(|&p| dataset.frames[p].pose).collect();
    let data_loading = start.elapsed();
    let frames: Vec<usize> = positions.iter().map(|&p| dataset.frames[p].index).collect();

    let input =
        DetectionInput { images: &images, poses: &poses, intrinsics: &dataset.intrinsics, mesh: &mesh, bvh: &bvh };
    let det = detect(&input, params)?;
    if let Some(dir) = debug_dir {
        write_debug(dir, &frames, &det.confirmations)?;
    }
    let comparisons = det.confirmations.iter().map(|c| c.pairs.len()).sum();
    let regions_2d = det
        .confirmations
        .into_iter()
        .map(|c| {
            c.regions
                .into_iter()
                .map(|mut r| {
                    r.image_index = frames[r.image_index];
                    r
                })
                .collect()
        })
        .collect();
    let regions_3d = det
        .regions_3d
        .into_iter()
        .map(|mut r| {
            r.support = r.support.iter().map(|&s| frames[s]).collect();
            r
        })
        .collect();
    Ok(DetectionOutput {
        frames,
        regions_2d,
        regions_3d,
        timings: StageTimings { data_loading, inconsistencies: det.inconsistencies, change_3d: det.change_3d },
        comparisons,
        max_comparisons: det.max_comparisons,
    })
}
