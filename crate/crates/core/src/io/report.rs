use std::cmp::Ordering;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::{read_text, write_file, IoError};
use crate::change3d::ChangeRegion3D;

/// One element of the JSON change report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    /// Meters, world frame.
    pub mean: [f64; 3],
    /// Row-major 3×3, m².
    pub covariance: [f64; 9],
    /// Indices of the images that observed the change.
    pub support: Vec<usize>,
    /// Total pixel area of the supporting 2D regions, px².
    pub pixel_area: f64,
}

impl From<&ChangeRegion3D> for ReportEntry {
    fn from(r: &ChangeRegion3D) -> Self {
        let c = &r.covariance;
        Self {
            mean: [r.mean.x, r.mean.y, r.mean.z],
            covariance: std::array::from_fn(|i| c[(i / 3, i % 3)]),
            support: r.support.clone(),
            pixel_area: r.pixel_area,
        }
    }
}

impl From<ReportEntry> for ChangeRegion3D {
    fn from(e: ReportEntry) -> Self {
        ChangeRegion3D {
            mean: Vector3::from(e.mean),
            covariance: Matrix3::from_row_slice(&e.covariance),
            support: e.support,
            pixel_area: e.pixel_area,
        }
    }
}

/// Report entries in canonical order: most supporting images first, then by mean.
pub fn report_entries(regions: &[ChangeRegion3D]) -> Vec<ReportEntry> {
    let mut entries: Vec<ReportEntry> = regions.iter().map(ReportEntry::from).collect();
    entries.sort_by(|a, b| {
        b.support.len().cmp(&a.support.len()).then_with(|| {
            a.mean
                .iter()
                .zip(&b.mean)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| *o != Ordering::Equal)
                .unwrap_or(Ordering::Equal)
        })
    });
    entries
}

pub fn write_change_report(regions: &[ChangeRegion3D], path: impl AsRef<Path>) -> Result<(), IoError> {
    let mut json = serde_json::to_string_pretty(&report_entries(regions))?;
    json.push('\n');
    write_file(path.as_ref(), json.as_bytes())
}

pub fn read_change_report(path: impl AsRef<Path>) -> Result<Vec<ChangeRegion3D>, IoError> {
    let entries: Vec<ReportEntry> = serde_json::from_str(&read_text(path.as_ref())?)?;
    Ok(entries.into_iter().map(ChangeRegion3D::from).collect())
}
