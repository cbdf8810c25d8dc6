use super::{
    extract_regions, inconsistency_distance, open, region_distance2, regions_from_mask, reproject_from_surface,
    threshold, ChangeRegion2D, InconsistencyError, InconsistencyParams, SurfaceMap, UncertaintyModel,
};
use crate::geometry::{Bvh, CameraIntrinsics, Pose, TriangleMesh};
use crate::GrayImage;

/// Images, poses and the model shared by all pairwise comparisons.
#[derive(Debug, Clone, Copy)]
pub struct SurveyView<'a> {
    pub images: &'a [GrayImage],
    pub poses: &'a [Pose],
    pub intrinsics: &'a CameraIntrinsics,
    pub mesh: &'a TriangleMesh,
    pub bvh: &'a Bvh,
}

impl SurveyView<'_> {
    fn validate(&self) -> Result<(), InconsistencyError> {
        if self.images.len() != self.poses.len() {
            return Err(InconsistencyError::PoseCount { images: self.images.len(), poses: self.poses.len() });
        }
        let expected = (self.intrinsics.width as usize, self.intrinsics.height as usize);
        match self.images.iter().find(|img| img.dimensions() != expected) {
            Some(img) => Err(InconsistencyError::DimensionMismatch { expected, found: img.dimensions() }),
            None => Ok(()),
        }
    }
}

/// One source image warped into the destination and compared against it.
#[derive(Debug, Clone, PartialEq)]
pub struct PairComparison {
    pub source: usize,
    pub destination: usize,
    pub distance: GrayImage,
    /// Thresholded and opened distance.
    pub mask: Vec<bool>,
    pub valid: Vec<bool>,
    pub regions: Vec<ChangeRegion2D>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Confirmation {
    pub image_index: usize,
    pub regions: Vec<ChangeRegion2D>,
    pub pairs: Vec<PairComparison>,
    /// Pixels inconsistent in enough pairs and in most pairs that observe them.
    pub consensus: Vec<bool>,
}

/// Up to `m` images closest to `i` in sequence order, nearest first, ties to the earlier image.
pub fn neighbors(i: usize, n: usize, m: usize) -> Vec<usize> {
    let mut js: Vec<usize> = (0..n).filter(|&j| j != i).collect();
    js.sort_by_key(|&j| (j.abs_diff(i), j));
    js.truncate(m);
    js
}

/// Warps image `src` into view `dst` and extracts the inconsistent regions of `dst`.
pub fn compare_pair(
    view: &SurveyView<'_>,
    src: usize,
    dst: usize,
    dst_surface: &SurfaceMap,
    params: &InconsistencyParams,
    u: &UncertaintyModel,
) -> Result<PairComparison, InconsistencyError> {
    let k = view.intrinsics;
    let warped = reproject_from_surface(&view.images[src], &view.poses[src], k, view.mesh, view.bvh, dst_surface);
    let distance = inconsistency_distance(&view.images[dst], &warped, u)?;
    let (w, h) = distance.dimensions();
    let mask = open(&threshold(&distance, params.threshold), w, h, params.kernel_radius);
    let regions = regions_from_mask(&mask, w, h, params.min_region_area, dst);
    debug_assert_eq!(regions, extract_regions(&distance, params, dst));
    Ok(PairComparison { source: src, destination: dst, distance, mask, valid: warped.valid, regions })
}

/// Confirmed change regions of image `i`.
pub fn confirm_regions(
    i: usize,
    view: &SurveyView<'_>,
    params: &InconsistencyParams,
    u: &UncertaintyModel,
) -> Result<Vec<ChangeRegion2D>, InconsistencyError> {
    confirm_with_pairs(i, view, params, u).map(|c| c.regions)
}

/// As [`confirm_regions`], also returning the pairwise comparisons.
///
/// A pixel is a consensus pixel when at least `min_confirming_pairs`
/// comparisons flag it and no comparison that observes it disagrees.
/// Consensus components become candidates; a candidate is confirmed when
/// regions from at least `min_confirming_pairs` distinct comparisons fall
/// inside its gate.
pub fn confirm_with_pairs(
    i: usize,
    view: &SurveyView<'_>,
    params: &InconsistencyParams,
    u: &UncertaintyModel,
) -> Result<Confirmation, InconsistencyError> {
    params.validate()?;
    u.validate()?;
    view.validate()?;
    let n = view.images.len();
    if n < 2 {
        return Err(InconsistencyError::NotEnoughImages(n));
    }
    if i >= n {
        return Err(InconsistencyError::IndexOutOfRange { index: i, len: n });
    }
    let k = view.intrinsics;
    let surface = SurfaceMap::compute(k, &view.poses[i], view.mesh, view.bvh);
    let pairs = neighbors(i, n, params.max_comparisons)
        .into_iter()
        .map(|j| compare_pair(view, j, i, &surface, params, u))
        .collect::<Result<Vec<_>, _>>()?;

    let (w, h) = surface.dimensions();
    let consensus: Vec<bool> = (0..w * h)
        .map(|p| {
            let votes = pairs.iter().filter(|c| c.mask[p]).count();
            let observed = pairs.iter().filter(|c| c.valid[p] || c.mask[p]).count();
            votes >= params.min_confirming_pairs && votes == observed
        })
        .collect();

    let regions = regions_from_mask(&consensus, w, h, params.min_region_area, i)
        .into_iter()
        .filter(|cand| {
            let support = pairs.iter().filter(|c| c.regions.iter().any(|r| region_distance2(cand, r) < u.tau2)).count();
            support >= params.min_confirming_pairs
        })
        .collect();
    Ok(Confirmation { image_index: i, regions, pairs, consensus })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Matrix3, Vector3};

    const FX: f64 = 160.0;
    const DEPTH: f64 = 3.0;

    fn scene() -> (TriangleMesh, Bvh, CameraIntrinsics) {
        let v = vec![
            Vector3::new(-9.0, -9.0, DEPTH),
            Vector3::new(9.0, -9.0, DEPTH),
            Vector3::new(9.0, 9.0, DEPTH),
            Vector3::new(-9.0, 9.0, DEPTH),
        ];
        let mesh = TriangleMesh::new(v, vec![[0, 1, 2], [0, 2, 3]], None).unwrap();
        let bvh = Bvh::build(&mesh).unwrap();
        (mesh, bvh, CameraIntrinsics::new(FX, FX, 79.5, 59.5, 160, 120).unwrap())
    }

    fn texture(u: i64, y: usize) -> u8 {
        80 + (((u * 7919 + y as i64 * 104_729).rem_euclid(41)) as u8)
    }

    /// Views of the wall shifted by whole pixels, so warps between them are exact.
    fn survey(shifts: &[i64]) -> (Vec<GrayImage>, Vec<Pose>) {
        let images = shifts.iter().map(|&s| GrayImage::from_fn(160, 120, |x, y| texture(x as i64 + s, y))).collect();
        let poses = shifts
            .iter()
            .map(|&s| Pose::new(Matrix3::identity(), Vector3::new(s as f64 * DEPTH / FX, 0.0, 0.0)).unwrap())
            .collect();
        (images, poses)
    }

    fn paint(img: &mut GrayImage, x0: usize, y0: usize) {
        for y in y0..y0 + 30 {
            for x in x0..x0 + 30 {
                img.set(x, y, 250);
            }
        }
    }

    #[test]
    fn neighbor_order() {
        assert_eq!(neighbors(3, 7, 4), vec![2, 4, 1, 5]);
        assert_eq!(neighbors(0, 7, 4), vec![1, 2, 3, 4]);
        assert_eq!(neighbors(1, 2, 4), vec![0]);
        assert_eq!(neighbors(6, 7, 2), vec![5, 4]);
    }

    #[test]
    fn unchanged_survey_has_no_regions() {
        let (mesh, bvh, k) = scene();
        let (images, poses) = survey(&[0, 6, 12, 18]);
        let view = SurveyView { images: &images, poses: &poses, intrinsics: &k, mesh: &mesh, bvh: &bvh };
        for i in 0..4 {
            let c =
                confirm_with_pairs(i, &view, &InconsistencyParams::default(), &UncertaintyModel::default()).unwrap();
            assert!(c.regions.is_empty());
            assert!(c.pairs.iter().all(|p| p.distance.data().iter().all(|&d| d == 0)));
        }
    }

    #[test]
    fn change_in_destination_is_confirmed() {
        let (mesh, bvh, k) = scene();
        let (mut images, poses) = survey(&[0, 8, 16]);
        paint(&mut images[1], 60, 40);
        let view = SurveyView { images: &images, poses: &poses, intrinsics: &k, mesh: &mesh, bvh: &bvh };
        let regions = confirm_regions(1, &view, &InconsistencyParams::default(), &UncertaintyModel::default()).unwrap();
        assert_eq!(regions.len(), 1);
        assert!((regions[0].mean - nalgebra::Vector2::new(74.5, 54.5)).norm() < 1.0);
        assert_eq!(regions[0].image_index, 1);
    }

    #[test]
    fn single_pair_support_is_rejected() {
        // the blob only exists in image 1, so from image 0 it shows up in one comparison only
        let (mesh, bvh, k) = scene();
        let (mut images, poses) = survey(&[0, 8, 16]);
        paint(&mut images[1], 60, 40);
        let view = SurveyView { images: &images, poses: &poses, intrinsics: &k, mesh: &mesh, bvh: &bvh };
        let c = confirm_with_pairs(0, &view, &InconsistencyParams::default(), &UncertaintyModel::default()).unwrap();
        assert_eq!(c.pairs.iter().filter(|p| !p.regions.is_empty()).count(), 1);
        assert!(c.regions.is_empty());
        let lenient = InconsistencyParams { max_comparisons: 1, min_confirming_pairs: 1, ..Default::default() };
        assert_eq!(confirm_regions(0, &view, &lenient, &UncertaintyModel::default()).unwrap().len(), 1);
    }

    #[test]
    fn errors() {
        let (mesh, bvh, k) = scene();
        let (images, poses) = survey(&[0, 8]);
        let p = InconsistencyParams::default();
        let u = UncertaintyModel::default();
        let one = SurveyView { images: &images[..1], poses: &poses[..1], intrinsics: &k, mesh: &mesh, bvh: &bvh };
        assert_eq!(confirm_regions(0, &one, &p, &u), Err(InconsistencyError::NotEnoughImages(1)));
        let two = SurveyView { images: &images, poses: &poses, intrinsics: &k, mesh: &mesh, bvh: &bvh };
        assert!(matches!(confirm_regions(2, &two, &p, &u), Err(InconsistencyError::IndexOutOfRange { .. })));
        let small = vec![GrayImage::new(10, 10), GrayImage::new(10, 10)];
        let bad = SurveyView { images: &small, poses: &poses, intrinsics: &k, mesh: &mesh, bvh: &bvh };
        assert!(matches!(confirm_regions(0, &bad, &p, &u), Err(InconsistencyError::DimensionMismatch { .. })));
    }

    #[test]
    fn deterministic() {
        let (mesh, bvh, k) = scene();
        let (mut images, poses) = survey(&[0, 5, 10, 15]);
        paint(&mut images[2], 30, 30);
        let view = SurveyView { images: &images, poses: &poses, intrinsics: &k, mesh: &mesh, bvh: &bvh };
        let a = confirm_with_pairs(2, &view, &InconsistencyParams::default(), &UncertaintyModel::default()).unwrap();
        let b = confirm_with_pairs(2, &view, &InconsistencyParams::default(), &UncertaintyModel::default()).unwrap();
        assert_eq!(a, b);
    }
}
