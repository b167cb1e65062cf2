use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use super::{centroid, convex_hull, Matrix3, Point3, PointCloud, Vector3};
use crate::error::{Error, Result};

/// Oriented bounding box. Columns of `axes` are the box axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObbModel {
    pub center: Point3,
    pub axes: Matrix3,
    pub half_extents: [f64; 3],
}

impl ObbModel {
    /// Axis indices ordered by half-extent, largest first (stable on ties).
    pub fn order_by_extent(&self) -> [usize; 3] {
        let mut idx = [0, 1, 2];
        idx.sort_by(|&a, &b| self.half_extents[b].total_cmp(&self.half_extents[a]));
        idx
    }

    pub fn axis(&self, i: usize) -> Vector3 {
        self.axes.column(i).into_owned()
    }

    pub fn contains(&self, p: &Point3, tol: f64) -> bool {
        let d = p - self.center;
        (0..3).all(|i| d.dot(&self.axis(i)).abs() <= self.half_extents[i] + tol)
    }

    pub fn surface_area(&self) -> f64 {
        let [a, b, c] = self.half_extents;
        8.0 * (a * b + b * c + a * c)
    }
}

/// PCA box: axes are eigenvectors of the covariance of the cloud's hull
/// vertices; extents cover every input point.
pub fn pca_obb(cloud: &PointCloud) -> Result<ObbModel> {
    if cloud.len() < 4 {
        return Err(Error::DegenerateInput(format!("need at least 4 points, got {}", cloud.len())));
    }
    let hull = convex_hull(cloud.points())?;
    let verts = &hull.vertices;
    let c = centroid(verts);
    let mut cov = Matrix3::zeros();
    for p in verts {
        let d = p - c;
        cov += d * d.transpose();
    }
    cov /= verts.len() as f64;
    let scale = cov.trace();
    let eig = SymmetricEigen::new(cov);
    let min_ev = eig.eigenvalues.min();
    if !(min_ev > 1e-12 * scale) {
        return Err(Error::DegenerateInput("rank-deficient covariance".into()));
    }

    // Sort eigenvectors by eigenvalue, descending, with a sign convention:
    // largest-magnitude component positive.
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut axes = Matrix3::zeros();
    for (col, &k) in order.iter().enumerate() {
        let mut v: Vector3 = eig.eigenvectors.column(k).into_owned();
        let imax = v.iamax();
        if v[imax] < 0.0 {
            v = -v;
        }
        axes.set_column(col, &v);
    }
    // Right-handed frame.
    if axes.determinant() < 0.0 {
        let v = -axes.column(2).into_owned();
        axes.set_column(2, &v);
    }

    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in cloud.points() {
        for i in 0..3 {
            let s = p.coords.dot(&axes.column(i));
            lo[i] = lo[i].min(s);
            hi[i] = hi[i].max(s);
        }
    }
    let mut center = Vector3::zeros();
    let mut half_extents = [0.0; 3];
    for i in 0..3 {
        center += axes.column(i) * (0.5 * (lo[i] + hi[i]));
        half_extents[i] = 0.5 * (hi[i] - lo[i]);
    }
    Ok(ObbModel { center: Point3::from(center), axes, half_extents })
}
