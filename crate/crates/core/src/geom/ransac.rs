use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Point3, PointCloud, Vector3};
use crate::error::{Error, Result};

/// Plane `a x + b y + c z + d = 0` with unit normal `(a, b, c)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaneModel {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    /// Indices into the cloud the plane was fitted to, ascending.
    pub inliers: Vec<usize>,
    pub tolerance: f64,
}

impl PlaneModel {
    pub fn normal(&self) -> Vector3 {
        Vector3::new(self.a, self.b, self.c)
    }

    pub fn signed_distance(&self, p: &Point3) -> f64 {
        self.a * p.x + self.b * p.y + self.c * p.z + self.d
    }

    pub fn coefficients(&self) -> [f64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    /// Same plane with the normal reversed.
    pub fn flipped(&self) -> Self {
        Self { a: -self.a, b: -self.b, c: -self.c, d: -self.d, ..self.clone() }
    }
}

/// Unit normal and offset through three points; `None` when collinear.
fn plane_through(p: &Point3, q: &Point3, r: &Point3) -> Option<(Vector3, f64)> {
    let n = (q - p).cross(&(r - p));
    let len = n.norm();
    let scale = (q - p).norm() * (r - p).norm();
    if !(len > 1e-12 * scale) || len == 0.0 {
        return None;
    }
    let n = n / len;
    Some((n, -n.dot(&p.coords)))
}

/// Normalize so that `d <= 0`; on `d == 0` the largest-magnitude normal
/// component is made positive.
fn canonical_sign(n: Vector3, d: f64) -> (Vector3, f64) {
    let flip = if d.abs() > 1e-12 { d > 0.0 } else { n[n.iamax()] < 0.0 };
    if flip { (-n, -d + 0.0) } else { (n, d + 0.0) }
}

/// RANSAC plane over the whole cloud.
pub fn fit_plane_ransac(cloud: &PointCloud, tolerance: f64, iterations: usize, seed: u64) -> Result<PlaneModel> {
    let idx: Vec<usize> = (0..cloud.len()).collect();
    fit_plane_ransac_subset(cloud.points(), &idx, tolerance, iterations, seed)
}

/// RANSAC plane over `points[subset]`. Returned inlier indices refer to
/// `points`. Keeps the first plane reaching the maximum inlier count.
pub fn fit_plane_ransac_subset(
    points: &[Point3],
    subset: &[usize],
    tolerance: f64,
    iterations: usize,
    seed: u64,
) -> Result<PlaneModel> {
    let n = subset.len();
    if n < 3 {
        return Err(Error::NoPlaneFound { best: 0 });
    }
    if !(tolerance >= 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance {tolerance} must be >= 0")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(Vector3, f64, usize)> = None;
    let count = |nrm: &Vector3, d: f64| {
        subset.iter().filter(|&&i| (nrm.dot(&points[i].coords) + d).abs() <= tolerance).count()
    };

    let attempt = |i: usize, j: usize, k: usize, best: &mut Option<(Vector3, f64, usize)>| {
        if let Some((nrm, d)) = plane_through(&points[subset[i]], &points[subset[j]], &points[subset[k]]) {
            let c = count(&nrm, d);
            if best.is_none_or(|(_, _, bc)| c > bc) {
                *best = Some((nrm, d, c));
            }
        }
    };

    if n == 3 {
        attempt(0, 1, 2, &mut best);
    } else {
        for _ in 0..iterations.max(1) {
            let i = rng.random_range(0..n);
            let mut j = rng.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            let mut k = rng.random_range(0..n - 2);
            let (lo, hi) = (i.min(j), i.max(j));
            if k >= lo {
                k += 1;
            }
            if k >= hi {
                k += 1;
            }
            attempt(i, j, k, &mut best);
        }
    }

    let Some((nrm, d, c)) = best else {
        return Err(Error::NoPlaneFound { best: 0 });
    };
    if c < 3 {
        return Err(Error::NoPlaneFound { best: c });
    }
    let (nrm, d) = canonical_sign(nrm, d);
    let mut inliers: Vec<usize> = subset
        .iter()
        .copied()
        .filter(|&i| (nrm.dot(&points[i].coords) + d).abs() <= tolerance)
        .collect();
    inliers.sort_unstable();
    inliers.dedup();
    Ok(PlaneModel { a: nrm.x, b: nrm.y, c: nrm.z, d, inliers, tolerance })
}
