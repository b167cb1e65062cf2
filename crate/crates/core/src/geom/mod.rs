//! Geometric primitives: clouds, meshes, poses, hulls, bounding boxes and
//! plane models.

mod cloud;
mod hull;
mod mesh;
mod obb;
mod polytope;
mod pose;
mod ransac;
mod voxel;

pub use cloud::PointCloud;
pub use hull::convex_hull;
pub use mesh::{MassProperties, TriMesh};
pub use obb::{pca_obb, ObbModel};
pub use polytope::{Facet, Polytope, ToppleStep};
pub use pose::{geodesic_angle, pose_delta, rotation_between, RigidPose};
pub use ransac::{fit_plane_ransac, fit_plane_ransac_subset, PlaneModel};
pub use voxel::voxel_downsample;

pub type Point3 = nalgebra::Point3<f64>;
pub type Vector3 = nalgebra::Vector3<f64>;
pub type Matrix3 = nalgebra::Matrix3<f64>;

/// Centroid of a non-empty point slice.
pub fn centroid(points: &[Point3]) -> Point3 {
    let mut acc = Vector3::zeros();
    for p in points {
        acc += p.coords;
    }
    Point3::from(acc / points.len().max(1) as f64)
}

/// Largest distance from the centroid to any point.
pub fn bounding_radius(points: &[Point3]) -> f64 {
    let c = centroid(points);
    points
        .iter()
        .map(|p| (p - c).norm())
        .fold(0.0, f64::max)
}
