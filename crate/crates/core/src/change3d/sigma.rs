use nalgebra::{Matrix2, SMatrix, SVector, Vector2};

use super::Change3dError;

pub const SIGMA_POINT_COUNT: usize = 5;

/// Unscented weights for two dimensions with κ = 0: the center carries no weight.
pub const SIGMA_WEIGHTS: [f64; SIGMA_POINT_COUNT] = [0.0, 0.25, 0.25, 0.25, 0.25];

/// Minimal symmetric sigma-point set of a 2D Gaussian.
///
/// Order: mean, mean ± √2·L₀, mean ± √2·L₁ where Lⱼ are the columns of the
/// lower Cholesky factor of `cov`. The Cholesky diagonal is non-negative, so
/// the point order carries the same meaning in every image.
pub fn sigma_points(
    mean: &Vector2<f64>,
    cov: &Matrix2<f64>,
) -> Result<[Vector2<f64>; SIGMA_POINT_COUNT], Change3dError> {
    let l = cholesky_psd(cov)?;
    let s = 2f64.sqrt();
    let c0 = l.column(0) * s;
    let c1 = l.column(1) * s;
    Ok([mean.clone_owned(), mean + c0, mean - c0, mean + c1, mean - c1])
}

/// Lower-triangular `L` with `L Lᵀ = cov`, tolerating a singular `cov`.
fn cholesky_psd(cov: &Matrix2<f64>) -> Result<Matrix2<f64>, Change3dError> {
    let (a, b, d) = (cov[(0, 0)], 0.5 * (cov[(0, 1)] + cov[(1, 0)]), cov[(1, 1)]);
    let tol = 1e-12 * a.abs().max(d.abs()).max(f64::MIN_POSITIVE);
    if !(a >= -tol && d >= -tol && a * d - b * b >= -tol * tol.max(a.abs().max(d.abs()))) {
        return Err(Change3dError::NonPsd);
    }
    let l00 = a.max(0.0).sqrt();
    let l10 = if l00 > 0.0 { b / l00 } else { 0.0 };
    let l11 = (d - l10 * l10).max(0.0).sqrt();
    Ok(Matrix2::new(l00, 0.0, l10, l11))
}

/// Weighted mean and covariance of a sigma-point set.
pub fn unscented_moments<const D: usize>(
    points: &[SVector<f64, D>; SIGMA_POINT_COUNT],
) -> (SVector<f64, D>, SMatrix<f64, D, D>) {
    let mean: SVector<f64, D> = points.iter().zip(SIGMA_WEIGHTS).map(|(p, w)| p * w).sum();
    let cov = points.iter().zip(SIGMA_WEIGHTS).map(|(p, w)| (p - mean) * (p - mean).transpose() * w).sum();
    (mean, cov)
}
