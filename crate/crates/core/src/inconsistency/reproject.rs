use nalgebra::{Vector2, Vector3};
use rayon::prelude::*;

use super::WarpedImage;
use crate::geometry::{back_project, project, Bvh, CameraIntrinsics, Pose, ProjectionMatrix, Ray, TriangleMesh};
use crate::GrayImage;

/// A source-side hit closer than the model point by more than this marks the point occluded, m.
pub const OCCLUSION_TOLERANCE: f64 = 0.01;
const BOUNDS_TOLERANCE: f64 = 1e-6;

/// First model surface point seen through every pixel of one view.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceMap {
    width: usize,
    height: usize,
    points: Vec<Option<Vector3<f64>>>,
}

impl SurfaceMap {
    pub fn compute(k: &CameraIntrinsics, pose: &Pose, mesh: &TriangleMesh, bvh: &Bvh) -> Self {
        let (width, height) = (k.width as usize, k.height as usize);
        let mut points = vec![None; width * height];
        points.par_chunks_mut(width.max(1)).enumerate().for_each(|(y, row)| {
            for (x, out) in row.iter_mut().enumerate() {
                let ray = back_project(k, pose, &Vector2::new(x as f64, y as f64));
                *out = bvh.intersect(mesh, &ray).map(|h| h.point);
            }
        });
        Self { width, height, points }
    }

    pub fn dimensions(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn get(&self, x: usize, y: usize) -> Option<Vector3<f64>> {
        self.points[y * self.width + x]
    }
}

/// Renders `src` at `dst_pose` by casting destination rays into the model and sampling the source.
pub fn reproject_image(
    src: &GrayImage,
    src_pose: &Pose,
    dst_pose: &Pose,
    k: &CameraIntrinsics,
    mesh: &TriangleMesh,
    bvh: &Bvh,
) -> WarpedImage {
    let surface = SurfaceMap::compute(k, dst_pose, mesh, bvh);
    reproject_from_surface(src, src_pose, k, mesh, bvh, &surface)
}

/// As [`reproject_image`], reusing the destination's surface map.
pub fn reproject_from_surface(
    src: &GrayImage,
    src_pose: &Pose,
    k: &CameraIntrinsics,
    mesh: &TriangleMesh,
    bvh: &Bvh,
    surface: &SurfaceMap,
) -> WarpedImage {
    let (w, h) = surface.dimensions();
    let p_src = ProjectionMatrix::new(k, src_pose);
    let center = src_pose.center();
    let (max_x, max_y) = (src.width() as f64 - 1.0, src.height() as f64 - 1.0);

    let sample = |x: usize, y: usize| -> Option<u8> {
        let point = surface.get(x, y)?;
        let (px, _) = project(&p_src, &point).ok()?;
        if !(px.x >= -BOUNDS_TOLERANCE
            && px.y >= -BOUNDS_TOLERANCE
            && px.x <= max_x + BOUNDS_TOLERANCE
            && px.y <= max_y + BOUNDS_TOLERANCE)
        {
            return None;
        }
        let to_point = point - center;
        let dist = to_point.norm();
        if let Some(hit) = Ray::new(center, to_point).and_then(|r| bvh.intersect(mesh, &r)) {
            if hit.t < dist - OCCLUSION_TOLERANCE {
                return None;
            }
        }
        let v = src.sample_bilinear(px.x.clamp(0.0, max_x), px.y.clamp(0.0, max_y))?;
        Some(v.round().clamp(0.0, 255.0) as u8)
    };

    let mut data = vec![0u8; w * h];
    let mut valid = vec![false; w * h];
    data.par_chunks_mut(w.max(1)).zip(valid.par_chunks_mut(w.max(1))).enumerate().for_each(|(y, (drow, vrow))| {
        for x in 0..w {
            if let Some(v) = sample(x, y) {
                drow[x] = v;
                vrow[x] = true;
            }
        }
    });
    WarpedImage { image: GrayImage::from_vec(w, h, data).expect("buffer sized from surface map"), valid }
}
