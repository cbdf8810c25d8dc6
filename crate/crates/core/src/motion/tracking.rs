use nalgebra::{Matrix2, Vector2};
use rayon::prelude::*;

use super::{Feature, MotionError, MotionFilterParams};
use crate::GrayImage;

const MAX_ITERATIONS: usize = 30;
const CONVERGENCE_EPS: f64 = 0.01;
/// Residual RMS above this fraction of the patch's intensity range marks a track as lost.
const MAX_RESIDUAL_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackedFeature {
    pub feature: Feature,
    /// Position in the second image minus position in the first, px.
    pub displacement: Vector2<f64>,
    pub tracked: bool,
}

struct Level {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl Level {
    fn from_image(img: &GrayImage) -> Self {
        Self { width: img.width(), height: img.height(), data: img.data().iter().map(|&v| v as f32).collect() }
    }

    fn downsample(&self) -> Self {
        let (w, h) = (self.width / 2, self.height / 2);
        let mut data = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                let i = 2 * y * self.width + 2 * x;
                data.push(
                    0.25 * (self.data[i]
                        + self.data[i + 1]
                        + self.data[i + self.width]
                        + self.data[i + self.width + 1]),
                );
            }
        }
        Self { width: w, height: h, data }
    }

    #[inline]
    fn sample_clamped(&self, x: f64, y: f64) -> Option<f64> {
        if !(x.is_finite() && y.is_finite()) {
            return None;
        }
        self.sample(x.clamp(0.0, (self.width - 1) as f64), y.clamp(0.0, (self.height - 1) as f64))
    }

    #[inline]
    fn sample(&self, x: f64, y: f64) -> Option<f64> {
        if !(x >= 0.0 && y >= 0.0 && x <= (self.width - 1) as f64 && y <= (self.height - 1) as f64) {
            return None;
        }
        let x0 = (x as usize).min(self.width - 2);
        let y0 = (y as usize).min(self.height - 2);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let i = y0 * self.width + x0;
        let d = &self.data;
        let top = d[i] as f64 * (1.0 - fx) + d[i + 1] as f64 * fx;
        let bottom = d[i + self.width] as f64 * (1.0 - fx) + d[i + self.width + 1] as f64 * fx;
        Some(top * (1.0 - fy) + bottom * fy)
    }
}

fn pyramid(img: &GrayImage, levels: usize, patch_radius: usize) -> Vec<Level> {
    let mut out = vec![Level::from_image(img)];
    // coarser levels must still hold a full patch plus gradient border
    let min_side = 2 * patch_radius + 4;
    while out.len() < levels {
        let last = out.last().unwrap();
        if last.width / 2 < min_side || last.height / 2 < min_side {
            break;
        }
        out.push(last.downsample());
    }
    out
}

/// Coarse-to-fine translational Lucas–Kanade tracking of `feats` from `a` into `b`.
pub fn track_features(
    a: &GrayImage,
    b: &GrayImage,
    feats: &[Feature],
    params: &MotionFilterParams,
) -> Result<Vec<TrackedFeature>, MotionError> {
    if a.dimensions() != b.dimensions() {
        return Err(MotionError::DimensionMismatch { a: a.dimensions(), b: b.dimensions() });
    }
    let pa = pyramid(a, params.pyramid_levels, params.patch_radius);
    let pb = pyramid(b, pa.len(), params.patch_radius);
    Ok(feats
        .par_iter()
        .map(|f| {
            let (displacement, tracked) = match track_one(&pa, &pb, f.position, params) {
                Some(d) => (d, true),
                None => (Vector2::zeros(), false),
            };
            TrackedFeature { feature: *f, displacement, tracked }
        })
        .collect())
}

fn track_one(pa: &[Level], pb: &[Level], pos: Vector2<f64>, params: &MotionFilterParams) -> Option<Vector2<f64>> {
    let r = params.patch_radius as i64;
    let n = (2 * r + 1) as usize;
    let mut guess = Vector2::zeros();
    let mut template = vec![0.0f64; n * n];
    let mut grad = vec![Vector2::zeros(); n * n];

    for level in (0..pa.len()).rev() {
        let scale = (1u64 << level) as f64;
        let p = pos / scale;
        let la = &pa[level];
        let lb = &pb[level];
        // coarse levels replicate the border so every feature gets an initial estimate
        let strict = level == 0;
        let sa = |x: f64, y: f64| if strict { la.sample(x, y) } else { la.sample_clamped(x, y) };
        let sb = |x: f64, y: f64| if strict { lb.sample(x, y) } else { lb.sample_clamped(x, y) };

        let mut g = Matrix2::zeros();
        for (k, (dy, dx)) in (-r..=r).flat_map(|dy| (-r..=r).map(move |dx| (dy, dx))).enumerate() {
            let (x, y) = (p.x + dx as f64, p.y + dy as f64);
            template[k] = sa(x, y)?;
            let gx = 0.5 * (sa(x + 1.0, y)? - sa(x - 1.0, y)?);
            let gy = 0.5 * (sa(x, y + 1.0)? - sa(x, y - 1.0)?);
            grad[k] = Vector2::new(gx, gy);
            g += grad[k] * grad[k].transpose();
        }
        let g_inv = g.try_inverse().filter(|_| g.determinant() > 1e-9)?;

        let mut step = Vector2::zeros();
        for _ in 0..MAX_ITERATIONS {
            let mut rhs = Vector2::zeros();
            for (k, (dy, dx)) in (-r..=r).flat_map(|dy| (-r..=r).map(move |dx| (dy, dx))).enumerate() {
                let q = p + guess + step + Vector2::new(dx as f64, dy as f64);
                let e = template[k] - sb(q.x, q.y)?;
                rhs += grad[k] * e;
            }
            let delta = g_inv * rhs;
            step += delta;
            if step.norm() > params.search_radius {
                return None;
            }
            if delta.norm() < CONVERGENCE_EPS {
                break;
            }
        }
        guess += step;
        if level > 0 {
            guess *= 2.0;
        }
    }

    // residual check at full resolution
    let la = &pa[0];
    let lb = &pb[0];
    let (mut lo, mut hi, mut sq) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
    for dy in -r..=r {
        for dx in -r..=r {
            let x = pos.x + dx as f64;
            let y = pos.y + dy as f64;
            let t = la.sample(x, y)?;
            let e = t - lb.sample(x + guess.x, y + guess.y)?;
            lo = lo.min(t);
            hi = hi.max(t);
            sq += e * e;
        }
    }
    let rms = (sq / (n * n) as f64).sqrt();
    (rms <= MAX_RESIDUAL_FRACTION * (hi - lo)).then_some(guess)
}

#[cfg(test)]
mod tests {
    use super::super::tests::textured;
    use super::super::{detect_features, measure_motion};
    use super::*;

    #[test]
    fn identical_images_have_zero_motion() {
        let img = textured(160, 120, 0.0, 0.0);
        let p = MotionFilterParams::default();
        let feats = detect_features(&img, &p).unwrap();
        let tracks = track_features(&img, &img, &feats, &p).unwrap();
        assert!(!tracks.is_empty());
        assert!(tracks.iter().all(|t| t.tracked && t.displacement == Vector2::zeros()));
    }

    #[test]
    fn integer_shift_is_recovered() {
        let a = textured(200, 150, 0.0, 0.0);
        let b = textured(200, 150, 3.0, 0.0);
        let p = MotionFilterParams::default();
        let feats = detect_features(&a, &p).unwrap();
        let tracks = track_features(&a, &b, &feats, &p).unwrap();
        let interior: Vec<_> = tracks.iter().filter(|t| t.feature.position.x < 200.0 - 3.0 - 8.0).collect();
        assert!(interior.len() > 10);
        for t in interior {
            assert!(t.tracked, "{:?}", t.feature);
            assert!((t.displacement - Vector2::new(3.0, 0.0)).norm() <= 0.5, "{:?}", t.displacement);
        }
    }

    /// Aperiodic texture: a sum of random Gaussian blobs, translated by (dx, dy).
    fn blobs(w: usize, h: usize, dx: f64, dy: f64) -> GrayImage {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let spots: Vec<(f64, f64, f64, f64)> = (0..120)
            .map(|_| {
                let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                (
                    rng.random_range(-20.0..w as f64 + 20.0),
                    rng.random_range(-20.0..h as f64 + 20.0),
                    rng.random_range(4.0..9.0),
                    sign * rng.random_range(30.0..70.0),
                )
            })
            .collect();
        GrayImage::from_fn(w, h, |x, y| {
            let (u, v) = (x as f64 - dx, y as f64 - dy);
            let s: f64 = spots
                .iter()
                .map(|&(cx, cy, r, a)| a * (-((u - cx).powi(2) + (v - cy).powi(2)) / (2.0 * r * r)).exp())
                .sum();
            (128.0 + s).round().clamp(0.0, 255.0) as u8
        })
    }

    #[test]
    fn larger_shift_through_pyramid() {
        let a = blobs(240, 180, 0.0, 0.0);
        let b = blobs(240, 180, 14.0, -9.0);
        let p = MotionFilterParams::default();
        let feats = detect_features(&a, &p).unwrap();
        let m = measure_motion(&a, &b, &feats, &p).unwrap();
        let expect = (14.0f64 * 14.0 + 81.0).sqrt();
        assert!(m.tracked_fraction > 0.7, "{}", m.tracked_fraction);
        assert!((m.median_displacement.unwrap() - expect).abs() < 0.5);
    }

    #[test]
    fn inverted_image_is_untrackable() {
        let a = textured(160, 120, 0.0, 0.0);
        let b = GrayImage::from_vec(160, 120, a.data().iter().map(|v| 255 - v).collect()).unwrap();
        let p = MotionFilterParams::default();
        let feats = detect_features(&a, &p).unwrap();
        let m = measure_motion(&a, &b, &feats, &p).unwrap();
        assert!(m.tracked_fraction < p.min_tracked_fraction, "{}", m.tracked_fraction);
    }

    #[test]
    fn size_mismatch() {
        let p = MotionFilterParams::default();
        assert!(matches!(
            track_features(&GrayImage::new(40, 40), &GrayImage::new(41, 40), &[], &p),
            Err(MotionError::DimensionMismatch { .. })
        ));
    }
}
