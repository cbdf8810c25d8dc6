use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{load_intrinsics, load_obj, load_pgm, load_pose_file, read_text, write_file, IoError};
use crate::geometry::{CameraIntrinsics, Pose, TriangleMesh};
use crate::GrayImage;

pub const MODEL_FILE: &str = "model.obj";
pub const INTRINSICS_FILE: &str = "intrinsics.txt";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.json";

#[derive(Debug, Clone, PartialEq)]
pub struct SurveyFrame {
    pub index: usize,
    pub image_path: PathBuf,
    pub pose: Pose,
    pub intrinsics: CameraIntrinsics,
}

/// A survey directory: `model.obj`, `intrinsics.txt` and `NNN.pgm` / `NNN.pose.txt` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct SurveyDataset {
    pub root: PathBuf,
    pub mesh_path: PathBuf,
    pub intrinsics: CameraIntrinsics,
    pub frames: Vec<SurveyFrame>,
}

pub fn frame_stem(index: usize) -> String {
    format!("{index:03}")
}

pub fn load_dataset(root: impl AsRef<Path>) -> Result<SurveyDataset, IoError> {
    let root = root.as_ref().to_path_buf();
    if !root.is_dir() {
        return Err(IoError::Dataset(format!("{} is not a directory", root.display())));
    }
    let mesh_path = root.join(MODEL_FILE);
    if !mesh_path.is_file() {
        return Err(IoError::Dataset(format!("missing {}", mesh_path.display())));
    }
    let intrinsics = load_intrinsics(root.join(INTRINSICS_FILE))?;

    let entries = std::fs::read_dir(&root).map_err(|source| IoError::Io { path: root.clone(), source })?;
    let mut indices = Vec::new();
    let mut pose_indices = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|source| IoError::Io { path: root.clone(), source })?;
        let name = entry.file_name().to_string_lossy().into_owned();
        let digits = |s: &str| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit());
        if let Some(stem) = name.strip_suffix(".pose.txt") {
            if digits(stem) {
                pose_indices.push((stem.parse::<usize>().unwrap(), name.clone()));
            }
        } else if let Some(stem) = name.strip_suffix(".pgm") {
            if digits(stem) {
                indices.push((stem.parse::<usize>().unwrap(), name.clone()));
            }
        }
    }
    indices.sort();
    pose_indices.sort();
    if let Some(w) = indices.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(IoError::Dataset(format!("image index {} appears twice", w[0].0)));
    }
    let image_indices: Vec<usize> = indices.iter().map(|(i, _)| *i).collect();
    let pose_only: Vec<usize> = pose_indices.iter().map(|(i, _)| *i).collect();
    if image_indices != pose_only {
        return Err(IoError::Dataset(format!(
            "{} images but {} poses, or their indices differ",
            image_indices.len(),
            pose_indices.len()
        )));
    }
    let frames = indices
        .into_iter()
        .zip(pose_indices)
        .map(|((index, name), (_, pose_name))| {
            let pose = load_pose_file(root.join(pose_name))?;
            Ok(SurveyFrame { index, image_path: root.join(name), pose, intrinsics })
        })
        .collect::<Result<Vec<_>, IoError>>()?;
    Ok(SurveyDataset { root, mesh_path, intrinsics, frames })
}

impl SurveyDataset {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn poses(&self) -> Vec<Pose> {
        self.frames.iter().map(|f| f.pose).collect()
    }

    pub fn load_mesh(&self) -> Result<TriangleMesh, IoError> {
        load_obj(&self.mesh_path)
    }

    /// Loads one image and checks it against the frame's intrinsics.
    pub fn load_image(&self, position: usize) -> Result<GrayImage, IoError> {
        let frame = &self.frames[position];
        let img = load_pgm(&frame.image_path)?;
        let k = &frame.intrinsics;
        if img.width() != k.width as usize || img.height() != k.height as usize {
            return Err(IoError::Dataset(format!(
                "{} is {}x{} but intrinsics say {}x{}",
                frame.image_path.display(),
                img.width(),
                img.height(),
                k.width,
                k.height
            )));
        }
        Ok(img)
    }

    pub fn load_images(&self) -> Result<Vec<GrayImage>, IoError> {
        (0..self.len()).map(|i| self.load_image(i)).collect()
    }
}

/// Frames retained by low-movement filtering, as positions in the dataset's frame list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeptManifest {
    pub total: usize,
    pub kept: Vec<usize>,
}

pub fn write_manifest(manifest: &KeptManifest, path: impl AsRef<Path>) -> Result<(), IoError> {
    let mut json = serde_json::to_string_pretty(manifest)?;
    json.push('\n');
    write_file(path.as_ref(), json.as_bytes())
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<KeptManifest, IoError> {
    let m: KeptManifest = serde_json::from_str(&read_text(path.as_ref())?)?;
    if m.kept.windows(2).any(|w| w[0] >= w[1]) || m.kept.iter().any(|&k| k >= m.total) {
        return Err(IoError::Dataset("manifest indices must be increasing and below total".into()));
    }
    Ok(m)
}
