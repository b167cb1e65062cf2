//! Classical placement baselines working on raw point clouds: convex-hull
//! stability analysis (CHSA), bounding-box fitting (BBF) and RANSAC plane
//! fitting (RPF).

use std::fmt;
use std::str::FromStr;

use nalgebra::Rotation3;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::geom::{
    bounding_radius, convex_hull, fit_plane_ransac_subset, pca_obb, rotation_between, PlaneModel, Point3,
    PointCloud, Polytope, Vector3,
};

/// Placement method tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Chsa,
    Bbf,
    Rpf,
    Planner,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Planner, Method::Rpf, Method::Chsa, Method::Bbf];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Chsa => "chsa",
            Method::Bbf => "bbf",
            Method::Rpf => "rpf",
            Method::Planner => "planner",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "chsa" => Ok(Method::Chsa),
            "bbf" => Ok(Method::Bbf),
            "rpf" => Ok(Method::Rpf),
            "planner" => Ok(Method::Planner),
            other => Err(Error::InvalidArgument(format!("unknown method `{other}` (chsa, bbf, rpf, planner)"))),
        }
    }
}

/// Rotation to apply to the object (about any point) before release onto a
/// table whose normal is world +z.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacementProposal {
    pub rotation: Rotation3<f64>,
    /// Object-frame outward normal of the face meant to touch the table.
    pub source_normal: Option<Vector3>,
    pub confidence: f64,
    pub method: Method,
}

impl PlacementProposal {
    /// Proposal that puts `normal` (object frame) face down.
    pub fn face_down(normal: Vector3, confidence: f64, method: Method) -> Self {
        let n = normal.normalize();
        Self { rotation: rotation_between(&n, &-Vector3::z()), source_normal: Some(n), confidence, method }
    }
}

#[derive(Serialize, Deserialize)]
struct ProposalRepr {
    rotation: [f64; 9],
    source_normal: Option<[f64; 3]>,
    confidence: f64,
    method: Method,
}

impl Serialize for PlacementProposal {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ProposalRepr {
            rotation: crate::geom::RigidPose::new(self.rotation, Vector3::zeros()).rotation_row_major(),
            source_normal: self.source_normal.map(|n| [n.x, n.y, n.z]),
            confidence: self.confidence,
            method: self.method,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for PlacementProposal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = ProposalRepr::deserialize(d)?;
        let pose = crate::geom::RigidPose::from_matrix(nalgebra::Matrix3::from_row_slice(&r.rotation), Vector3::zeros())
            .map_err(serde::de::Error::custom)?;
        Ok(Self {
            rotation: pose.rotation,
            source_normal: r.source_normal.map(Vector3::from),
            confidence: r.confidence,
            method: r.method,
        })
    }
}

/// Topple graph of a cloud's convex hull on a flat table.
#[derive(Debug, Clone)]
pub struct ChsaAnalysis {
    pub polytope: Polytope,
    /// Uniform-density center of mass of the hull solid.
    pub com: Point3,
    /// Sink facet reached from each facet.
    pub sink_of: Vec<usize>,
    /// Area fraction of each facet's basin, indexed by facet (0 for non-sinks).
    pub probability: Vec<f64>,
}

impl ChsaAnalysis {
    pub fn new(cloud: &PointCloud) -> Result<Self> {
        let hull = convex_hull(cloud.points())?;
        let com = hull.mass_properties()?.com;
        let polytope = Polytope::from_convex_mesh(&hull)?;
        let n = polytope.facets.len();
        let sink_of: Vec<usize> = (0..n).map(|f| polytope.flat_sink(f, &com)).collect();
        let total = polytope.total_area();
        let mut probability = vec![0.0; n];
        for (f, &s) in sink_of.iter().enumerate() {
            probability[s] += polytope.facets[f].area / total;
        }
        Ok(Self { polytope, com, sink_of, probability })
    }

    /// Sink facets in index order.
    pub fn sinks(&self) -> Vec<usize> {
        (0..self.sink_of.len()).filter(|&f| self.sink_of[f] == f).collect()
    }

    /// Highest-probability sink; ties go to the lowest index.
    pub fn best(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probability.iter().enumerate() {
            if p > self.probability[best] {
                best = i;
            }
        }
        best
    }
}

/// Convex-hull stability analysis: put the most likely landing face down.
pub fn chsa(cloud: &PointCloud) -> Result<PlacementProposal> {
    let a = ChsaAnalysis::new(cloud)?;
    let best = a.best();
    Ok(PlacementProposal::face_down(a.polytope.facets[best].normal, a.probability[best], Method::Chsa))
}

/// Bounding-box fitting: largest box face down.
pub fn bbf(cloud: &PointCloud) -> Result<PlacementProposal> {
    let obb = pca_obb(cloud)?;
    let [big, mid, small] = obb.order_by_extent();
    let e = obb.half_extents;
    let confidence = 4.0 * e[big] * e[mid] / obb.surface_area();
    Ok(PlacementProposal::face_down(-obb.axis(small), confidence, Method::Bbf))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RansacParams {
    /// Inlier distance as a fraction of the cloud's bounding radius.
    pub tolerance_frac: f64,
    pub iterations: usize,
    /// Upper bound on sequentially extracted planes.
    pub max_planes: usize,
}

impl Default for RansacParams {
    fn default() -> Self {
        Self { tolerance_frac: 0.005, iterations: 1024, max_planes: 8 }
    }
}

impl RansacParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, reason: String| Err(Error::InvalidParameter { key: key.into(), reason });
        if !(self.tolerance_frac > 0.0 && self.tolerance_frac.is_finite()) {
            return bad("tolerance_frac", format!("{} must be positive", self.tolerance_frac));
        }
        if self.iterations < 1 {
            return bad("iterations", "must be at least 1".into());
        }
        if self.max_planes < 1 {
            return bad("max_planes", "must be at least 1".into());
        }
        Ok(())
    }

    pub fn tolerance_for(&self, points: &[Point3]) -> f64 {
        (self.tolerance_frac * bounding_radius(points)).max(1e-12)
    }
}

/// Sequential RANSAC: fit, remove inliers, repeat. Inlier sets are disjoint.
pub fn extract_planes(
    points: &[Point3],
    subset: &[usize],
    tolerance: f64,
    params: &RansacParams,
    seed: u64,
) -> Vec<PlaneModel> {
    let mut remaining: Vec<usize> = subset.to_vec();
    let mut planes = Vec::new();
    for k in 0..params.max_planes {
        if remaining.len() < 3 {
            break;
        }
        let s = crate::seed::derive(seed, &["plane", &k.to_string()]);
        let Ok(plane) = fit_plane_ransac_subset(points, &remaining, tolerance, params.iterations, s) else {
            break;
        };
        let mut is_in = vec![false; points.len()];
        for &i in &plane.inliers {
            is_in[i] = true;
        }
        remaining.retain(|&i| !is_in[i]);
        planes.push(plane);
    }
    planes
}

/// Flip `plane` so its normal points away from `centroid`.
pub fn outward(plane: &PlaneModel, centroid: &Point3) -> Vector3 {
    if plane.signed_distance(centroid) > 0.0 {
        -plane.normal()
    } else {
        plane.normal()
    }
}

/// RANSAC plane fitting: the plane with the most inliers goes face down.
pub fn rpf(cloud: &PointCloud, params: &RansacParams, seed: u64) -> Result<PlacementProposal> {
    params.validate()?;
    let pts = cloud.points();
    let all: Vec<usize> = (0..pts.len()).collect();
    let planes = extract_planes(pts, &all, params.tolerance_for(pts), params, seed);
    let mut best: Option<&PlaneModel> = None;
    for p in &planes {
        if best.is_none_or(|b| p.inliers.len() > b.inliers.len()) {
            best = Some(p);
        }
    }
    let best = best.ok_or(Error::NoPlaneFound { best: 0 })?;
    let n = outward(best, &cloud.centroid());
    Ok(PlacementProposal::face_down(n, best.inliers.len() as f64 / pts.len() as f64, Method::Rpf))
}
