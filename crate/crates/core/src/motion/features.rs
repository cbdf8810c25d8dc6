use nalgebra::Vector2;

use super::{MotionError, MotionFilterParams};
use crate::GrayImage;

/// Candidates weaker than this fraction of the strongest corner are ignored.
const QUALITY_LEVEL: f64 = 0.01;
const MIN_SCORE: f64 = 1e-6;
/// Half-size of the structure-tensor window.
const TENSOR_RADIUS: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feature {
    pub position: Vector2<f64>,
    /// Minimum eigenvalue of the 2×2 gradient structure tensor.
    pub score: f64,
}

/// Shi–Tomasi corners, strongest first, at least `2 * patch_radius` apart.
pub fn detect_features(img: &GrayImage, params: &MotionFilterParams) -> Result<Vec<Feature>, MotionError> {
    let (w, h) = img.dimensions();
    let r = params.patch_radius;
    if w <= 2 * r || h <= 2 * r {
        return Err(MotionError::ImageTooSmall { width: w, height: h, patch_radius: r });
    }
    let scores = min_eigenvalue_map(img);
    // room for the tracked patch, its gradient border and sub-pixel refinement
    let margin = (r + 2).max(TENSOR_RADIUS + 1);
    if w <= 2 * margin || h <= 2 * margin {
        return Ok(Vec::new());
    }
    let max_score = scores.iter().copied().fold(0.0f64, f64::max);
    let floor = (QUALITY_LEVEL * max_score).max(MIN_SCORE);

    let mut candidates = Vec::new();
    for y in margin..h - margin {
        for x in margin..w - margin {
            let s = scores[y * w + x];
            if s <= floor {
                continue;
            }
            let is_peak = (y - 1..=y + 1)
                .flat_map(|yy| (x - 1..=x + 1).map(move |xx| (xx, yy)))
                .all(|(xx, yy)| scores[yy * w + xx] <= s);
            if is_peak {
                candidates.push((s, x, y));
            }
        }
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.2, a.1).cmp(&(b.2, b.1))));

    let min_spacing = (2 * r) as f64;
    let mut features: Vec<Feature> = Vec::new();
    for (s, x, y) in candidates {
        if features.len() >= params.max_features {
            break;
        }
        let p = refine(&scores, w, x, y);
        if features.iter().all(|f| (f.position - p).norm() >= min_spacing) {
            features.push(Feature { position: p, score: s });
        }
    }
    Ok(features)
}

/// Parabolic sub-pixel peak refinement, clamped to half a pixel.
fn refine(scores: &[f64], w: usize, x: usize, y: usize) -> Vector2<f64> {
    let at = |xx: usize, yy: usize| scores[yy * w + xx];
    let offset = |m: f64, c: f64, p: f64| {
        let denom = m - 2.0 * c + p;
        if denom < 0.0 {
            (0.5 * (m - p) / denom).clamp(-0.5, 0.5)
        } else {
            0.0
        }
    };
    let dx = offset(at(x - 1, y), at(x, y), at(x + 1, y));
    let dy = offset(at(x, y - 1), at(x, y), at(x, y + 1));
    Vector2::new(x as f64 + dx, y as f64 + dy)
}

/// Per-pixel minimum eigenvalue of the box-filtered structure tensor.
fn min_eigenvalue_map(img: &GrayImage) -> Vec<f64> {
    let (w, h) = img.dimensions();
    let px = |x: usize, y: usize| img.get(x, y) as f64;
    let mut gxx = vec![0.0; w * h];
    let mut gyy = vec![0.0; w * h];
    let mut gxy = vec![0.0; w * h];
    for y in 1..h.saturating_sub(1) {
        for x in 1..w.saturating_sub(1) {
            let ix = 0.5 * (px(x + 1, y) - px(x - 1, y));
            let iy = 0.5 * (px(x, y + 1) - px(x, y - 1));
            let i = y * w + x;
            gxx[i] = ix * ix;
            gyy[i] = iy * iy;
            gxy[i] = ix * iy;
        }
    }
    let k = TENSOR_RADIUS;
    let mut out = vec![0.0; w * h];
    for y in k..h.saturating_sub(k) {
        for x in k..w.saturating_sub(k) {
            let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
            for yy in y - k..=y + k {
                for xx in x - k..=x + k {
                    let i = yy * w + xx;
                    a += gxx[i];
                    b += gxy[i];
                    c += gyy[i];
                }
            }
            let half_trace = 0.5 * (a + c);
            let disc = (0.25 * (a - c) * (a - c) + b * b).sqrt();
            out[y * w + x] = (half_trace - disc).max(0.0);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_image_has_no_features() {
        let img = GrayImage::filled(64, 64, 77);
        assert!(detect_features(&img, &MotionFilterParams::default()).unwrap().is_empty());
    }

    #[test]
    fn too_small() {
        let img = GrayImage::filled(14, 40, 0);
        assert!(matches!(
            detect_features(&img, &MotionFilterParams::default()),
            Err(MotionError::ImageTooSmall { .. })
        ));
    }

    #[test]
    fn isolated_pixel() {
        let mut img = GrayImage::new(100, 100);
        img.set(50, 50, 255);
        let feats = detect_features(&img, &MotionFilterParams::default()).unwrap();
        assert!(!feats.is_empty());
        for f in &feats {
            assert!((f.position - Vector2::new(50.0, 50.0)).abs().max() <= 1.0, "{:?}", f.position);
        }
    }

    #[test]
    fn checkerboard_corners_on_grid() {
        let cell = 16usize;
        let img = GrayImage::from_fn(160, 128, |x, y| if (x / cell + y / cell).is_multiple_of(2) { 30 } else { 220 });
        let params = MotionFilterParams { max_features: 500, patch_radius: 4, ..Default::default() };
        let feats = detect_features(&img, &params).unwrap();
        // interior intersections lie on pixel boundaries: k * cell - 0.5
        let interior = (160 / cell - 1) * (128 / cell - 1);
        assert!(feats.len() >= interior - 4, "{} features", feats.len());
        for f in &feats {
            let nearest = |v: f64| ((v + 0.5) / cell as f64).round() * cell as f64 - 0.5;
            let corner = Vector2::new(nearest(f.position.x), nearest(f.position.y));
            assert!((f.position - corner).norm() <= 1.0, "{:?} vs {:?}", f.position, corner);
        }
        assert!(feats.windows(2).all(|w| w[0].score >= w[1].score));
    }

    #[test]
    fn respects_spacing_and_cap() {
        let img = super::super::tests::textured(200, 160, 0.0, 0.0);
        let params = MotionFilterParams { max_features: 25, ..Default::default() };
        let feats = detect_features(&img, &params).unwrap();
        assert!(feats.len() <= 25 && !feats.is_empty());
        for (i, a) in feats.iter().enumerate() {
            for b in &feats[i + 1..] {
                assert!((a.position - b.position).norm() >= 14.0);
            }
            let m = params.patch_radius as f64;
            assert!(a.position.x >= m - 0.5 && a.position.y >= m - 0.5);
            assert!(a.position.x <= 200.0 - m && a.position.y <= 160.0 - m);
        }
    }
}
