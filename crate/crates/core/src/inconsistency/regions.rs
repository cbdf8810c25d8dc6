use std::collections::VecDeque;

use super::{ChangeRegion2D, InconsistencyParams};
use crate::GrayImage;

/// Row-major mask of pixels whose distance is at least `theta`.
pub fn threshold(dist: &GrayImage, theta: f64) -> Vec<bool> {
    dist.data().iter().map(|&v| v as f64 >= theta).collect()
}

/// Separable pass of a square min/max filter along one axis.
fn filter_axis(mask: &[bool], w: usize, h: usize, r: usize, horizontal: bool, keep_all: bool) -> Vec<bool> {
    let mut out = vec![false; mask.len()];
    let (outer, inner) = if horizontal { (h, w) } else { (w, h) };
    let idx = |o: usize, i: usize| if horizontal { o * w + i } else { i * w + o };
    for o in 0..outer {
        for i in 0..inner {
            let lo = i as isize - r as isize;
            let hi = i + r;
            out[idx(o, i)] = if keep_all {
                // out-of-bounds pixels count as background
                lo >= 0 && hi < inner && (lo as usize..=hi).all(|j| mask[idx(o, j)])
            } else {
                (lo.max(0) as usize..=hi.min(inner - 1)).any(|j| mask[idx(o, j)])
            };
        }
    }
    out
}

/// Binary erosion with a `(2r+1)²` square.
pub fn erode(mask: &[bool], w: usize, h: usize, r: usize) -> Vec<bool> {
    let tmp = filter_axis(mask, w, h, r, true, true);
    filter_axis(&tmp, w, h, r, false, true)
}

/// Binary dilation with a `(2r+1)²` square.
pub fn dilate(mask: &[bool], w: usize, h: usize, r: usize) -> Vec<bool> {
    let tmp = filter_axis(mask, w, h, r, true, false);
    filter_axis(&tmp, w, h, r, false, false)
}

/// Erosion followed by dilation.
pub fn open(mask: &[bool], w: usize, h: usize, r: usize) -> Vec<bool> {
    dilate(&erode(mask, w, h, r), w, h, r)
}

/// 8-connected components in order of their first pixel (row-major).
pub fn label_components(mask: &[bool], w: usize, h: usize) -> Vec<Vec<(u32, u32)>> {
    let mut seen = vec![false; mask.len()];
    let mut comps = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut comp = Vec::new();
        while let Some(i) = queue.pop_front() {
            let (x, y) = (i % w, i / w);
            comp.push((x as u32, y as u32));
            for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                    let j = ny * w + nx;
                    if mask[j] && !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        comps.push(comp);
    }
    comps
}

/// Components of `mask` with at least `min_area` pixels.
pub fn regions_from_mask(
    mask: &[bool],
    w: usize,
    h: usize,
    min_area: usize,
    image_index: usize,
) -> Vec<ChangeRegion2D> {
    label_components(mask, w, h)
        .into_iter()
        .filter(|c| c.len() >= min_area)
        .filter_map(|c| ChangeRegion2D::from_pixels(image_index, c))
        .collect()
}

/// Threshold, opening, labeling and area filtering of a distance image.
pub fn extract_regions(dist: &GrayImage, params: &InconsistencyParams, image_index: usize) -> Vec<ChangeRegion2D> {
    let (w, h) = dist.dimensions();
    let mask = open(&threshold(dist, params.threshold), w, h, params.kernel_radius);
    regions_from_mask(&mask, w, h, params.min_region_area, image_index)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Matrix2, Vector2};
    use proptest::prelude::*;

    /// Direct definition: min/max over the full square window.
    fn naive(mask: &[bool], w: usize, h: usize, r: usize, erosion: bool) -> Vec<bool> {
        let r = r as isize;
        let at = |x: isize, y: isize| {
            x >= 0 && y >= 0 && x < w as isize && y < h as isize && mask[y as usize * w + x as usize]
        };
        (0..h as isize)
            .flat_map(|y| (0..w as isize).map(move |x| (x, y)))
            .map(|(x, y)| {
                let mut win = (-r..=r).flat_map(|dy| (-r..=r).map(move |dx| (dx, dy)));
                if erosion {
                    win.all(|(dx, dy)| at(x + dx, y + dy))
                } else {
                    win.any(|(dx, dy)| at(x + dx, y + dy))
                }
            })
            .collect()
    }

    #[test]
    fn zero_image_has_no_regions() {
        assert!(extract_regions(&GrayImage::new(50, 40), &InconsistencyParams::default(), 0).is_empty());
    }

    #[test]
    fn speck_is_removed() {
        let mut d = GrayImage::new(50, 40);
        d.set(20, 20, 255);
        let params = InconsistencyParams { min_region_area: 1, ..Default::default() };
        assert!(extract_regions(&d, &params, 0).is_empty());
    }

    #[test]
    fn solid_block() {
        let mut d = GrayImage::new(120, 90);
        for y in 30..60 {
            for x in 50..80 {
                d.set(x, y, 40);
            }
        }
        let regions = extract_regions(&d, &InconsistencyParams::default(), 3);
        assert_eq!(regions.len(), 1);
        let r = &regions[0];
        let var = (30.0f64 * 30.0 - 1.0) / 12.0;
        assert!((r.mean - Vector2::new(64.5, 44.5)).norm() <= 0.5);
        assert!((r.covariance - Matrix2::new(var, 0.0, 0.0, var)).abs().max() < 1e-9);
        assert_eq!(r.area, 900.0);
        assert_eq!(r.image_index, 3);
    }

    #[test]
    fn below_threshold_and_small_blocks_are_dropped() {
        let mut d = GrayImage::new(100, 100);
        for y in 10..40 {
            for x in 10..40 {
                d.set(x, y, 29);
            }
        }
        for y in 60..70 {
            for x in 60..70 {
                d.set(x, y, 200);
            }
        }
        assert!(extract_regions(&d, &InconsistencyParams::default(), 0).is_empty());
    }

    #[test]
    fn diagonal_pixels_connect() {
        let mut m = vec![false; 16];
        m[0] = true;
        m[5] = true;
        m[15] = true;
        let comps = label_components(&m, 4, 4);
        assert_eq!(comps, vec![vec![(0, 0), (1, 1)], vec![(3, 3)]]);
    }

    #[test]
    fn border_block_is_eroded_from_outside() {
        let m = vec![true; 36];
        let e = erode(&m, 6, 6, 1);
        let inner = (0..36).filter(|&i| e[i]).count();
        assert_eq!(inner, 16);
    }

    proptest! {
        #[test]
        fn separable_filters_match_naive(bits in prop::collection::vec(any::<bool>(), 17 * 13), r in 1usize..4) {
            let (w, h) = (17, 13);
            prop_assert_eq!(erode(&bits, w, h, r), naive(&bits, w, h, r, true));
            prop_assert_eq!(dilate(&bits, w, h, r), naive(&bits, w, h, r, false));
        }

        #[test]
        fn opening_is_idempotent_and_antiextensive(bits in prop::collection::vec(any::<bool>(), 20 * 20)) {
            let o = open(&bits, 20, 20, 1);
            prop_assert_eq!(open(&o, 20, 20, 1), o.clone());
            prop_assert!(o.iter().zip(&bits).all(|(a, b)| !a || *b));
        }
    }
}
