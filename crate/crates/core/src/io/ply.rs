use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};

use super::{write_file, IoError};
use crate::change3d::ChangeRegion3D;

/// Vertex count of a twice-subdivided icosahedron.
pub const ICOSPHERE_POINTS: usize = 162;

/// Unit-sphere vertices of an icosahedron subdivided `levels` times.
pub fn icosphere(levels: usize) -> Vec<Vector3<f64>> {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vector3<f64>> = [
        (-1.0, phi, 0.0),
        (1.0, phi, 0.0),
        (-1.0, -phi, 0.0),
        (1.0, -phi, 0.0),
        (0.0, -1.0, phi),
        (0.0, 1.0, phi),
        (0.0, -1.0, -phi),
        (0.0, 1.0, -phi),
        (phi, 0.0, -1.0),
        (phi, 0.0, 1.0),
        (-phi, 0.0, -1.0),
        (-phi, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vector3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..levels {
        let mut cache: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, verts: &mut Vec<Vector3<f64>>| {
            *cache.entry((a.min(b), a.max(b))).or_insert_with(|| {
                verts.push(((verts[a] + verts[b]) / 2.0).normalize());
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    verts
}

/// Surface samples of the `n_sigma` ellipsoid of a 3D covariance.
pub fn ellipsoid_points(
    mean: &Vector3<f64>,
    covariance: &Matrix3<f64>,
    n_sigma: f64,
) -> Result<Vec<Vector3<f64>>, IoError> {
    let sym = (covariance + covariance.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let min_eigenvalue = eig.eigenvalues.min();
    let scale = eig.eigenvalues.abs().max().max(1.0);
    if !min_eigenvalue.is_finite() || min_eigenvalue < -1e-12 * scale {
        return Err(IoError::NonPositiveDefiniteCovariance { min_eigenvalue });
    }
    let root = eig.eigenvectors
        * Matrix3::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt()))
        * eig.eigenvectors.transpose();
    Ok(icosphere(2).iter().map(|u| mean + root * u * n_sigma).collect())
}

/// ASCII PLY point cloud with one sampled ellipsoid per region.
pub fn write_ply_ellipsoids(regions: &[ChangeRegion3D], path: impl AsRef<Path>, n_sigma: f64) -> Result<(), IoError> {
    let mut points = Vec::with_capacity(regions.len() * ICOSPHERE_POINTS);
    for r in regions {
        points.extend(ellipsoid_points(&r.mean, &r.covariance, n_sigma)?);
    }
    let mut out = String::new();
    out.push_str("ply\nformat ascii 1.0\n");
    writeln!(out, "comment change ellipsoids, {} regions, n_sigma {}", regions.len(), n_sigma).unwrap();
    writeln!(out, "element vertex {}", points.len()).unwrap();
    out.push_str("property float x\nproperty float y\nproperty float z\nend_header\n");
    for p in &points {
        writeln!(out, "{} {} {}", p.x, p.y, p.z).unwrap();
    }
    write_file(path.as_ref(), out.as_bytes())
}
