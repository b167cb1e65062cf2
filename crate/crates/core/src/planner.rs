//! Plane selection from per-point stability scores: threshold, mean-shift
//! grouping, per-group RANSAC, score ranking and gravity alignment.

use nalgebra::Rotation3;
use serde::{Deserialize, Serialize};

use crate::baselines::{outward, Method, PlacementProposal, RansacParams};
use crate::error::{Error, Result};
use crate::geom::{fit_plane_ransac_subset, rotation_between, PlaneModel, Point3, PointCloud, Vector3};

/// Flat-kernel mean shift. Every row is a seed; converged modes closer than
/// `bandwidth / 2` are merged in seed order and each row gets the label of
/// its nearest merged mode.
pub fn mean_shift(data: &[Vec<f64>], bandwidth: f64, max_iter: usize, tol: f64) -> Result<Vec<usize>> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("mean shift needs at least one point".into()));
    }
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::InvalidParameter { key: "bandwidth".into(), reason: format!("{bandwidth} must be positive") });
    }
    let dim = data[0].len();
    if data.iter().any(|r| r.len() != dim) {
        return Err(Error::InvalidArgument("mean shift rows differ in dimension".into()));
    }
    let dist2 = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    let bw2 = bandwidth * bandwidth;
    let mut modes: Vec<Vec<f64>> = Vec::new();
    for seed in data {
        let mut x = seed.clone();
        for _ in 0..max_iter {
            let mut mean = vec![0.0; dim];
            let mut count = 0usize;
            for r in data {
                if dist2(r, &x) <= bw2 {
                    for (m, v) in mean.iter_mut().zip(r) {
                        *m += v;
                    }
                    count += 1;
                }
            }
            if count == 0 {
                break;
            }
            mean.iter_mut().for_each(|m| *m /= count as f64);
            let shift = dist2(&mean, &x).sqrt();
            x = mean;
            if shift <= tol * bandwidth {
                break;
            }
        }
        if !modes.iter().any(|m| dist2(m, &x) <= 0.25 * bw2) {
            modes.push(x);
        }
    }
    Ok(data
        .iter()
        .map(|r| {
            let mut best = (0usize, f64::INFINITY);
            for (i, m) in modes.iter().enumerate() {
                let d = dist2(r, m);
                if d < best.1 {
                    best = (i, d);
                }
            }
            best.0
        })
        .collect())
}

/// Twice the median nearest-neighbor distance.
pub fn default_bandwidth(points: &[Point3]) -> f64 {
    if points.len() < 2 {
        return 1.0;
    }
    let mut nn: Vec<f64> = points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            points
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, q)| (p - q).norm())
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    nn.sort_by(f64::total_cmp);
    2.0 * nn[nn.len() / 2]
}

/// A cloud with stability scores and optional per-point feature vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredCloud {
    pub cloud: PointCloud,
    pub features: Option<Vec<Vec<f64>>>,
}

impl ScoredCloud {
    pub fn new(cloud: PointCloud, features: Option<Vec<Vec<f64>>>) -> Result<Self> {
        if cloud.scores().is_none() {
            return Err(Error::InvalidArgument("scored cloud needs per-point scores".into()));
        }
        if let Some(f) = &features {
            if f.len() != cloud.len() {
                return Err(Error::InvalidArgument(format!("{} feature rows for {} points", f.len(), cloud.len())));
            }
            let dim = f.first().map_or(0, Vec::len);
            if f.iter().any(|r| r.len() != dim) {
                return Err(Error::InvalidArgument("feature rows differ in dimension".into()));
            }
        }
        Ok(Self { cloud, features })
    }

    /// Features are one-hot encodings of the cloud's non-negative labels
    /// (all-zero rows for label -1). Without labels there are no features.
    pub fn from_labels(cloud: PointCloud) -> Result<Self> {
        let features = cloud.labels().map(|labels| {
            let mut ids: Vec<i64> = labels.iter().copied().filter(|&l| l >= 0).collect();
            ids.sort_unstable();
            ids.dedup();
            labels
                .iter()
                .map(|l| {
                    let mut row = vec![0.0; ids.len()];
                    if let Ok(k) = ids.binary_search(l) {
                        row[k] = 1.0;
                    }
                    row
                })
                .collect()
        });
        Self::new(cloud, features)
    }

    pub fn scores(&self) -> &[f64] {
        self.cloud.scores().expect("checked at construction")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlannerParams {
    /// Minimum stability score of points considered for planes.
    pub tau: f64,
    /// Coordinate bandwidth; `None` uses twice the median neighbor spacing.
    pub bandwidth: Option<f64>,
    /// Bandwidth used when clustering feature vectors.
    pub feature_bandwidth: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub ransac: RansacParams,
}

impl Default for PlannerParams {
    fn default() -> Self {
        Self {
            tau: 0.5,
            bandwidth: None,
            feature_bandwidth: 0.5,
            max_iter: 300,
            tol: 1e-3,
            ransac: RansacParams::default(),
        }
    }
}

impl PlannerParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, reason: String| Err(Error::InvalidParameter { key: key.into(), reason });
        if !(0.0..=1.0).contains(&self.tau) {
            return bad("tau", format!("{} outside [0, 1]", self.tau));
        }
        if let Some(b) = self.bandwidth {
            if !(b > 0.0 && b.is_finite()) {
                return bad("bandwidth", format!("{b} must be positive"));
            }
        }
        if !(self.feature_bandwidth > 0.0) {
            return bad("feature_bandwidth", format!("{} must be positive", self.feature_bandwidth));
        }
        if self.max_iter < 1 {
            return bad("max_iter", "must be at least 1".into());
        }
        self.ransac.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedPlane {
    pub model: PlaneModel,
    pub score: f64,
    pub cluster: usize,
}

/// Candidate planes sorted by score, best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedPlanes {
    pub planes: Vec<RankedPlane>,
    pub best: usize,
}

/// Threshold, cluster, fit one plane per cluster, score = mean score of the
/// plane's inliers × inlier count.
pub fn select_plane(scored: &ScoredCloud, params: &PlannerParams, seed: u64) -> Result<RankedPlanes> {
    params.validate()?;
    let scores = scored.scores();
    let pts = scored.cloud.points();
    let kept: Vec<usize> = (0..pts.len()).filter(|&i| scores[i] >= params.tau).collect();
    if kept.len() < 3 {
        return Err(Error::NoStablePoints { count: kept.len() });
    }
    let labels = match &scored.features {
        Some(f) => {
            let rows: Vec<Vec<f64>> = kept.iter().map(|&i| f[i].clone()).collect();
            mean_shift(&rows, params.feature_bandwidth, params.max_iter, params.tol)?
        }
        None => {
            let sub: Vec<Point3> = kept.iter().map(|&i| pts[i]).collect();
            let bw = params.bandwidth.unwrap_or_else(|| default_bandwidth(&sub)).max(1e-12);
            let rows: Vec<Vec<f64>> = sub.iter().map(|p| vec![p.x, p.y, p.z]).collect();
            mean_shift(&rows, bw, params.max_iter, params.tol)?
        }
    };
    let n_clusters = labels.iter().copied().max().map_or(0, |m| m + 1);
    let tol = params.ransac.tolerance_for(pts);
    let mut planes = Vec::new();
    let mut best_inliers = 0;
    for c in 0..n_clusters {
        let members: Vec<usize> = kept.iter().zip(&labels).filter(|(_, &l)| l == c).map(|(&i, _)| i).collect();
        if members.len() < 3 {
            continue;
        }
        let s = crate::seed::derive(seed, &["cluster", &c.to_string()]);
        match fit_plane_ransac_subset(pts, &members, tol, params.ransac.iterations, s) {
            Ok(model) => {
                let count = model.inliers.len();
                let mean = model.inliers.iter().map(|&i| scores[i]).sum::<f64>() / count as f64;
                planes.push(RankedPlane { model, score: mean * count as f64, cluster: c });
            }
            Err(Error::NoPlaneFound { best }) => best_inliers = best_inliers.max(best),
            Err(e) => return Err(e),
        }
    }
    if planes.is_empty() {
        return Err(Error::NoPlaneFound { best: best_inliers });
    }
    planes.sort_by(|a, b| b.score.total_cmp(&a.score));
    Ok(RankedPlanes { planes, best: 0 })
}

/// Minimal rotation taking the plane's outward normal (away from
/// `centroid`) onto `-table_normal`.
pub fn placement_rotation(plane: &PlaneModel, centroid: &Point3, table_normal: &Vector3) -> Rotation3<f64> {
    rotation_between(&outward(plane, centroid), &-table_normal.normalize())
}

/// Plane-selection planner as a placement method.
pub fn planner(scored: &ScoredCloud, params: &PlannerParams, seed: u64) -> Result<(PlacementProposal, RankedPlanes)> {
    let ranked = select_plane(scored, params, seed)?;
    let best = &ranked.planes[ranked.best];
    let centroid = scored.cloud.centroid();
    let n = outward(&best.model, &centroid);
    let confidence = best.score / best.model.inliers.len() as f64;
    let proposal = PlacementProposal {
        rotation: placement_rotation(&best.model, &centroid, &Vector3::z()),
        source_normal: Some(n),
        confidence,
        method: Method::Planner,
    };
    Ok((proposal, ranked))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn two_blobs_two_clusters() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = Normal::new(0.0, 0.1).unwrap();
        let mut rows = Vec::new();
        let mut truth = Vec::new();
        for k in 0..2 {
            for _ in 0..60 {
                rows.push(vec![k as f64 * 10.0 + g.sample(&mut rng), g.sample(&mut rng)]);
                truth.push(k);
            }
        }
        let labels = mean_shift(&rows, 1.0, 300, 1e-3).unwrap();
        assert_eq!(labels, truth);
    }

    #[test]
    fn identical_and_single_points() {
        assert_eq!(mean_shift(&vec![vec![1.0, 2.0]; 7], 0.5, 100, 1e-3).unwrap(), vec![0; 7]);
        assert_eq!(mean_shift(&[vec![3.0]], 0.5, 100, 1e-3).unwrap(), vec![0]);
        assert!(mean_shift(&[], 0.5, 100, 1e-3).is_err());
    }

    fn grid(z: f64, n: usize, x0: f64) -> Vec<Point3> {
        (0..n).map(|i| Point3::new(x0 + (i % 10) as f64 * 0.01, (i / 10) as f64 * 0.01, z)).collect()
    }

    #[test]
    fn score_product_ranks_support_over_confidence() {
        let mut pts = grid(0.0, 100, 0.0);
        pts.extend(grid(0.5, 50, 5.0));
        let mut scores = vec![0.9; 100];
        scores.extend(vec![1.0; 50]);
        let mut labels = vec![0i64; 100];
        labels.extend(vec![1i64; 50]);
        let cloud = PointCloud::new(pts).unwrap().with_scores(scores).unwrap().with_labels(labels).unwrap();
        let check = |ranked: RankedPlanes| {
            assert_eq!(ranked.best, 0);
            assert_eq!(ranked.planes.len(), 2);
            assert_relative_eq!(ranked.planes[0].score, 90.0, epsilon = 1e-9);
            assert_relative_eq!(ranked.planes[1].score, 50.0, epsilon = 1e-9);
        };
        check(select_plane(&ScoredCloud::from_labels(cloud.clone()).unwrap(), &PlannerParams::default(), 0).unwrap());
        let coords = PlannerParams { bandwidth: Some(1.0), ..PlannerParams::default() };
        check(select_plane(&ScoredCloud::new(cloud, None).unwrap(), &coords, 0).unwrap());
    }

    #[test]
    fn too_few_stable_points() {
        let cloud = PointCloud::new(grid(0.0, 10, 0.0)).unwrap().with_scores(vec![0.1; 10]).unwrap();
        let r = select_plane(&ScoredCloud::new(cloud, None).unwrap(), &PlannerParams::default(), 0);
        assert!(matches!(r, Err(Error::NoStablePoints { count: 0 })));
    }

    #[test]
    fn rotation_conventions() {
        let plane = |n: Vector3| PlaneModel { a: n.x, b: n.y, c: n.z, d: 0.0, inliers: vec![], tolerance: 0.0 };
        let up = Vector3::z();
        let above = Point3::new(0.0, 0.0, 1.0);
        let r = placement_rotation(&plane(-Vector3::z()), &above, &up);
        assert_relative_eq!(r.matrix(), Rotation3::identity().matrix());
        let r = placement_rotation(&plane(Vector3::x()), &Point3::new(-1.0, 0.0, 0.0), &up);
        assert_relative_eq!(r * Vector3::x(), -Vector3::z(), epsilon = 1e-12);
        let (axis, angle) = r.axis_angle().unwrap();
        assert_relative_eq!(angle, std::f64::consts::FRAC_PI_2, epsilon = 1e-12);
        assert_relative_eq!(axis.into_inner(), Vector3::y(), epsilon = 1e-12);
        // Normal pointing up, centroid below: after the flip it is +z, a half turn about x.
        let r = placement_rotation(&plane(Vector3::z()), &Point3::new(0.0, 0.0, -1.0), &up);
        let (axis, angle) = r.axis_angle().unwrap();
        assert_relative_eq!(angle, std::f64::consts::PI, epsilon = 1e-12);
        assert_relative_eq!(axis.into_inner().x.abs(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn features_group_separate_patches() {
        // Two far-apart coplanar patches share a label: one plane spans both.
        let mut pts = grid(0.0, 40, 0.0);
        pts.extend(grid(0.0, 40, 3.0));
        pts.extend(grid(1.0, 40, 0.0));
        let mut labels = vec![0i64; 80];
        labels.extend(vec![1i64; 40]);
        let cloud = PointCloud::new(pts).unwrap().with_scores(vec![1.0; 120]).unwrap().with_labels(labels).unwrap();
        let ranked = select_plane(&ScoredCloud::from_labels(cloud).unwrap(), &PlannerParams::default(), 0).unwrap();
        let best = &ranked.planes[0].model;
        assert_eq!(best.inliers.len(), 80);
        assert!(best.inliers.iter().any(|&i| i < 40) && best.inliers.iter().any(|&i| (40..80).contains(&i)));
    }
}
