use nalgebra::Vector2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::SyntheticError;
use crate::geometry::{back_project, Bvh, CameraIntrinsics, Hit, Pose, TriangleMesh};
use crate::GrayImage;

/// Brightness factor of the dark checker cells.
pub const CHECKER_DARK: f64 = 0.6;
const DEFAULT_ALBEDO: u8 = 128;

fn shade(mesh: &TriangleMesh, hit: &Hit, cell_size: f64) -> f64 {
    let albedo = mesh.albedo().map_or(DEFAULT_ALBEDO, |a| a[hit.triangle_id]) as f64;
    let n = mesh.normal(hit.triangle_id).abs();
    let axis = n.imax();
    let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
    let cell = |c: f64| (c / cell_size).floor() as i64;
    let dark = (cell(hit.point[u]) + cell(hit.point[v])).rem_euclid(2) == 1;
    if dark {
        albedo * CHECKER_DARK
    } else {
        albedo
    }
}

fn check_inside(mesh: &TriangleMesh, pose: &Pose) -> Result<(), SyntheticError> {
    let c = pose.center();
    let inside = mesh.bounds().is_some_and(|(lo, hi)| (0..3).all(|a| c[a] > lo[a] && c[a] < hi[a]));
    if inside {
        Ok(())
    } else {
        Err(SyntheticError::CameraOutsideRoom { center: c.into() })
    }
}

/// Unlit checker-textured rendering of `mesh` seen from `pose`.
///
/// Rays that miss all geometry give 0. With `noise_sigma > 0` each pixel gets
/// independent Gaussian noise drawn from a generator seeded by `seed` and the row.
pub fn render(
    mesh: &TriangleMesh,
    bvh: &Bvh,
    k: &CameraIntrinsics,
    pose: &Pose,
    cell_size: f64,
    noise_sigma: f64,
    seed: u64,
) -> Result<GrayImage, SyntheticError> {
    check_inside(mesh, pose)?;
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(SyntheticError::InvalidSpec("noise sigma must be non-negative".into()));
    }
    let (w, h) = (k.width as usize, k.height as usize);
    let noise = Normal::new(0.0, noise_sigma).expect("checked sigma");
    let mut data = vec![0u8; w * h];
    data.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(y as u64);
        for (x, out) in row.iter_mut().enumerate() {
            let ray = back_project(k, pose, &Vector2::new(x as f64, y as f64));
            let mut v = bvh.intersect(mesh, &ray).map_or(0.0, |hit| shade(mesh, &hit, cell_size));
            if noise_sigma > 0.0 {
                v += noise.sample(&mut rng);
            }
            *out = v.round().clamp(0.0, 255.0) as u8;
        }
    });
    Ok(GrayImage::from_vec(w, h, data).expect("sized from intrinsics"))
}

/// Per-pixel depth along the optical axis of the first surface hit, row-major.
pub fn render_depth(mesh: &TriangleMesh, bvh: &Bvh, k: &CameraIntrinsics, pose: &Pose) -> Vec<Option<f64>> {
    let (w, h) = (k.width as usize, k.height as usize);
    let forward = pose.rotation().column(2).into_owned();
    (0..w * h)
        .into_par_iter()
        .map(|i| {
            let ray = back_project(k, pose, &Vector2::new((i % w) as f64, (i / w) as f64));
            bvh.intersect(mesh, &ray).map(|hit| hit.t * ray.direction.dot(&forward))
        })
        .collect()
}
