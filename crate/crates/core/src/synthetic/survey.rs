use std::path::Path;

use nalgebra::{Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{build_scene, render, PathSpec, SceneSpec, SyntheticError};
use crate::geometry::{Bvh, CameraIntrinsics, Pose};
use crate::io::{
    frame_stem, load_dataset, read_text, save_intrinsics, save_obj, save_pgm, save_pose_file, write_file, IoError,
    SurveyDataset, GROUND_TRUTH_FILE, INTRINSICS_FILE, MODEL_FILE,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthChange {
    pub centroid: [f64; 3],
    pub half_extents: [f64; 3],
}

/// Contents of `ground_truth.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub changes: Vec<GroundTruthChange>,
}

pub fn read_ground_truth(path: impl AsRef<Path>) -> Result<GroundTruth, IoError> {
    Ok(serde_json::from_str(&read_text(path.as_ref())?)?)
}

/// Applies a random rotation (axis-angle, per-axis σ `rotation_sigma`) and translation.
pub fn perturb_pose(pose: &Pose, rotation_sigma: f64, translation_sigma: f64, rng: &mut impl Rng) -> Pose {
    let mut draw = |s: f64| Vector3::from_fn(|_, _| s * rng.sample::<f64, _>(StandardNormal));
    let delta = Rotation3::new(draw(rotation_sigma));
    let shift = draw(translation_sigma);
    let rotation = delta.matrix() * pose.rotation();
    Pose::new(rotation, pose.translation() + shift).expect("product of rotations")
}

fn image_seed(seed: u64, i: usize) -> u64 {
    seed ^ (i as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Renders a survey along `path` and writes it to `out_dir`.
///
/// Images show the survey mesh; `model.obj` holds the model mesh. Pose
/// perturbation only affects the written poses.
pub fn make_survey(
    spec: &SceneSpec,
    path: &PathSpec,
    k: &CameraIntrinsics,
    out_dir: impl AsRef<Path>,
    seed: u64,
) -> Result<SurveyDataset, SyntheticError> {
    let out_dir = out_dir.as_ref();
    let scene = build_scene(spec)?;
    let poses = path.poses()?;
    let bvh = Bvh::build(&scene.survey)?;
    let images = poses
        .iter()
        .enumerate()
        .map(|(i, pose)| render(&scene.survey, &bvh, k, pose, spec.cell_size, spec.noise_sigma, image_seed(seed, i)))
        .collect::<Result<Vec<_>, _>>()?;

    std::fs::create_dir_all(out_dir).map_err(|source| IoError::Io { path: out_dir.to_path_buf(), source })?;
    save_obj(&scene.model, out_dir.join(MODEL_FILE))?;
    save_intrinsics(k, out_dir.join(INTRINSICS_FILE))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    for (i, (pose, img)) in poses.iter().zip(&images).enumerate() {
        let written = if spec.rotation_sigma > 0.0 || spec.translation_sigma > 0.0 {
            perturb_pose(pose, spec.rotation_sigma, spec.translation_sigma, &mut rng)
        } else {
            *pose
        };
        save_pgm(img, out_dir.join(format!("{}.pgm", frame_stem(i))))?;
        save_pose_file(&written, out_dir.join(format!("{}.pose.txt", frame_stem(i))))?;
    }
    let truth = GroundTruth {
        changes: scene
            .changes
            .iter()
            .map(|c| GroundTruthChange { centroid: c.center.into(), half_extents: c.half_extents.into() })
            .collect(),
    };
    let mut json = serde_json::to_string_pretty(&truth).map_err(IoError::from)?;
    json.push('\n');
    write_file(&out_dir.join(GROUND_TRUTH_FILE), json.as_bytes())?;
    Ok(load_dataset(out_dir)?)
}
