use nalgebra::{Matrix3, Vector2, Vector3};
use rayon::prelude::*;

use super::{sigma_points, triangulate, Change3dError, ChangeRegion3D, SIGMA_POINT_COUNT};
use crate::geometry::{project, Pose, ProjectionMatrix};
use crate::inconsistency::ChangeRegion2D;

/// Regions from different images believed to show the same change.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionGroup {
    /// `(image position, region index)` pairs, one per image, sorted by image.
    pub members: Vec<(usize, usize)>,
}

/// Squared gate distance of a world point's projection from a region mean.
///
/// Infinite when the projection misses the region's pixel footprint. Regions
/// without a footprint are gated on their moments alone.
fn reprojection_d2(x: &Vector3<f64>, region: &ChangeRegion2D, camera: &ProjectionMatrix) -> f64 {
    let Ok((px, _)) = project(camera, x) else { return f64::INFINITY };
    if !region.pixels.is_empty() && !region.contains_point(&px) {
        return f64::INFINITY;
    }
    let d: Vector2<f64> = px - region.mean;
    match region.gate_covariance().try_inverse() {
        Some(inv) => (d.transpose() * inv * d)[(0, 0)],
        None => f64::INFINITY,
    }
}

/// Triangulates the member means and returns each member's gate distance.
fn member_distances(
    members: &[(usize, usize)],
    regions: &[Vec<ChangeRegion2D>],
    cameras: &[ProjectionMatrix],
) -> Option<Vec<f64>> {
    let obs: Vec<_> = members.iter().map(|&(i, r)| (regions[i][r].mean, cameras[i])).collect();
    let x = triangulate(&obs).ok()?.point;
    Some(members.iter().map(|&(i, r)| reprojection_d2(&x, &regions[i][r], &cameras[i])).collect())
}

/// Grows a group from `members` by adding, per remaining image, the unassigned
/// region that keeps every member inside its gate at the lowest total distance,
/// then drops inconsistent members worst first.
fn grow(
    mut members: Vec<(usize, usize)>,
    regions: &[Vec<ChangeRegion2D>],
    cameras: &[ProjectionMatrix],
    assigned: &[Vec<bool>],
    tau2: f64,
) -> Vec<(usize, usize)> {
    let seed = members[0].0;
    let mut others: Vec<usize> = (0..regions.len()).filter(|j| members.iter().all(|m| m.0 != *j)).collect();
    others.sort_by_key(|&j| (j.abs_diff(seed), j));
    for j in others {
        let best = (0..regions[j].len())
            .filter(|&r| !assigned[j][r])
            .filter_map(|r| {
                let mut trial = members.clone();
                trial.push((j, r));
                let d = member_distances(&trial, regions, cameras)?;
                d.iter().all(|&v| v < tau2).then(|| (d.iter().sum::<f64>(), r))
            })
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        if let Some((_, r)) = best {
            members.push((j, r));
        }
    }
    while members.len() >= 2 {
        let Some(d) = member_distances(&members, regions, cameras) else {
            members.clear();
            break;
        };
        let (worst, dw) = d.iter().copied().enumerate().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
        if dw < tau2 {
            break;
        }
        members.remove(worst);
    }
    members
}

/// Associates regions across images by multi-view gating.
///
/// Regions seed groups in order of decreasing area. Every unassigned region
/// of another image that is gate-consistent with the seed starts a
/// hypothesis, which then grows by at most one region per remaining image.
/// The hypothesis with the most members wins, ties going to the smallest
/// total gate distance. Groups need at least two members.
pub fn group_regions(regions: &[Vec<ChangeRegion2D>], cameras: &[ProjectionMatrix], tau2: f64) -> Vec<RegionGroup> {
    assert_eq!(regions.len(), cameras.len(), "one camera per image");
    let mut order: Vec<(usize, usize)> =
        regions.iter().enumerate().flat_map(|(i, rs)| (0..rs.len()).map(move |r| (i, r))).collect();
    order.sort_by(|a, b| regions[b.0][b.1].area.total_cmp(&regions[a.0][a.1].area).then(a.cmp(b)));
    let mut assigned: Vec<Vec<bool>> = regions.iter().map(|rs| vec![false; rs.len()]).collect();
    let mut groups = Vec::new();

    for seed in order {
        if assigned[seed.0][seed.1] {
            continue;
        }
        assigned[seed.0][seed.1] = true;
        let mut best: Option<(f64, Vec<(usize, usize)>)> = None;
        for j in (0..regions.len()).filter(|&j| j != seed.0) {
            for r in (0..regions[j].len()).filter(|&r| !assigned[j][r]) {
                let pair = vec![seed, (j, r)];
                if !member_distances(&pair, regions, cameras).is_some_and(|d| d.iter().all(|&v| v < tau2)) {
                    continue;
                }
                let members = grow(pair, regions, cameras, &assigned, tau2);
                if members.len() < 2 || !members.contains(&seed) {
                    continue;
                }
                let cost: f64 = member_distances(&members, regions, cameras).map_or(f64::INFINITY, |d| d.iter().sum());
                let better = best
                    .as_ref()
                    .is_none_or(|(c, m)| members.len() > m.len() || (members.len() == m.len() && cost < *c));
                if better {
                    best = Some((cost, members));
                }
            }
        }
        if let Some((_, mut members)) = best {
            for &(i, r) in &members {
                assigned[i][r] = true;
            }
            members.sort_unstable();
            groups.push(RegionGroup { members });
        }
    }
    groups
}

/// Sigma-point triangulation of one group.
///
/// The mean is the triangulated region means. The covariance is the sample
/// covariance of the four outer sigma points around it.
fn estimate_group(
    group: &RegionGroup,
    regions: &[Vec<ChangeRegion2D>],
    cameras: &[ProjectionMatrix],
) -> Result<ChangeRegion3D, Change3dError> {
    let sigmas = group
        .members
        .iter()
        .map(|&(i, r)| sigma_points(&regions[i][r].mean, &regions[i][r].covariance))
        .collect::<Result<Vec<_>, _>>()?;
    let mut points = [Vector3::zeros(); SIGMA_POINT_COUNT];
    for (k, p) in points.iter_mut().enumerate() {
        let obs: Vec<_> = group.members.iter().zip(&sigmas).map(|(&(i, _), s)| (s[k], cameras[i])).collect();
        *p = triangulate(&obs)?.point;
    }
    let mean = points[0];
    let covariance = points[1..].iter().map(|y| (y - mean) * (y - mean).transpose()).sum::<Matrix3<f64>>()
        / (SIGMA_POINT_COUNT - 1) as f64;
    Ok(ChangeRegion3D {
        mean,
        covariance,
        support: group.members.iter().map(|&(i, _)| i).collect(),
        pixel_area: group.members.iter().map(|&(i, r)| regions[i][r].area).sum(),
    })
}

/// Groups regions across images and triangulates each group.
///
/// `support` in the result holds positions into `regions`/`cameras`.
/// Groups whose triangulation fails are logged and skipped.
pub fn estimate_change_regions(
    regions: &[Vec<ChangeRegion2D>],
    cameras: &[ProjectionMatrix],
    tau2: f64,
) -> Vec<ChangeRegion3D> {
    let groups = group_regions(regions, cameras, tau2);
    let results: Vec<_> = groups.par_iter().map(|g| (g, estimate_group(g, regions, cameras))).collect();
    results
        .into_iter()
        .filter_map(|(g, r)| match r {
            Ok(region) => Some(region),
            Err(e) => {
                log::warn!("dropping change group {:?}: {e}", g.members);
                None
            }
        })
        .collect()
}

/// Drops regions closer than `min_distance` to the center of any supporting camera.
pub fn prune_near_camera(regions: Vec<ChangeRegion3D>, poses: &[Pose], min_distance: f64) -> Vec<ChangeRegion3D> {
    regions
        .into_iter()
        .filter(|r| {
            r.support.iter().filter_map(|&s| poses.get(s)).all(|p| (r.mean - p.center()).norm() >= min_distance)
        })
        .collect()
}
