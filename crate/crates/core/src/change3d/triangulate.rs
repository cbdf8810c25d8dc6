use nalgebra::{DMatrix, Vector2, Vector3};

use super::Change3dError;
use crate::geometry::{skew, ProjectionMatrix};

/// Relative gap between the two smallest singular values below which the
/// solution is considered undetermined.
const DEGENERACY_GAP: f64 = 1e-9;

/// Stacked homogeneous system `A X = 0`, one `skew(x̄) P` block per view.
#[derive(Debug, Clone)]
pub struct TriangulationProblem {
    a: DMatrix<f64>,
    cameras: Vec<ProjectionMatrix>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangulation {
    pub point: Vector3<f64>,
    /// Smallest singular value of the block-normalized system relative to the largest.
    pub residual: f64,
}

impl TriangulationProblem {
    pub fn new(observations: &[(Vector2<f64>, ProjectionMatrix)]) -> Result<Self, Change3dError> {
        Self::from_homogeneous(&observations.iter().map(|(x, p)| (Vector3::new(x.x, x.y, 1.0), *p)).collect::<Vec<_>>())
    }

    /// Pixels given as homogeneous 3-vectors; any nonzero scale is accepted.
    pub fn from_homogeneous(observations: &[(Vector3<f64>, ProjectionMatrix)]) -> Result<Self, Change3dError> {
        let n = observations.len();
        if n < 2 {
            return Err(Change3dError::NotEnoughViews(n));
        }
        let mut a = DMatrix::zeros(3 * n, 4);
        for (i, (x, p)) in observations.iter().enumerate() {
            let block = skew(x) * p.matrix();
            // equal weight per view regardless of the homogeneous scale
            let norm = block.norm();
            let block = if norm > 0.0 { block / norm } else { block };
            a.view_mut((3 * i, 0), (3, 4)).copy_from(&block);
        }
        Ok(Self { a, cameras: observations.iter().map(|(_, p)| *p).collect() })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn solve(&self) -> Result<Triangulation, Change3dError> {
        let svd = self.a.clone().svd(false, true);
        let v_t = svd.v_t.expect("requested V");
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
        let s = |k: usize| svd.singular_values[order[k]];
        let largest = s(0);
        let gap = if largest > 0.0 { (s(2) - s(3)) / largest } else { 0.0 };
        if !(gap >= DEGENERACY_GAP) {
            return Err(Change3dError::DegenerateGeometry { gap });
        }
        let h = v_t.row(order[3]);
        let scale = h.norm();
        if h[3].abs() <= 1e-12 * scale {
            return Err(Change3dError::DegenerateGeometry { gap });
        }
        let point = Vector3::new(h[0] / h[3], h[1] / h[3], h[2] / h[3]);
        if let Some(view) = self.cameras.iter().position(|p| !(p.depth(&point) > 0.0)) {
            return Err(Change3dError::BehindCamera { view });
        }
        Ok(Triangulation { point, residual: s(3) / largest })
    }
}

/// Linear least-squares triangulation of one point seen in several views.
pub fn triangulate(observations: &[(Vector2<f64>, ProjectionMatrix)]) -> Result<Triangulation, Change3dError> {
    TriangulationProblem::new(observations)?.solve()
}
