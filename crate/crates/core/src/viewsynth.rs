//! Single-view partial clouds from a virtual depth camera, fixed-size
//! resampling, augmentation, and transfer of plane annotations to clouds.

use nalgebra::{Matrix3 as M3, Rotation3, Unit};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::annotate::AnnotationRecord;
use crate::error::{Error, Result};
use crate::geom::{Point3, PointCloud, RigidPose, TriMesh, Vector3};

/// Pinhole camera. The pose maps camera coordinates (x right, y down,
/// z forward) to world coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VirtualCamera {
    pub pose: RigidPose,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

/// Resolution, field of view and viewing distance for sampled views.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CameraConfig {
    pub width: usize,
    pub height: usize,
    pub vfov_deg: f64,
    /// Camera distance as a multiple of the mesh bounding radius.
    pub distance_factor: f64,
}

impl Default for CameraConfig {
    fn default() -> Self {
        Self { width: 160, height: 120, vfov_deg: 60.0, distance_factor: 2.5 }
    }
}

impl CameraConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, reason: String| Err(Error::InvalidParameter { key: key.into(), reason });
        if self.width < 16 || self.height < 16 {
            return bad("width", format!("resolution {}x{} below 16x16", self.width, self.height));
        }
        if !(self.vfov_deg > 0.0 && self.vfov_deg < 180.0) {
            return bad("vfov_deg", format!("{} outside (0, 180)", self.vfov_deg));
        }
        if !(self.distance_factor > 1.0) {
            return bad("distance_factor", format!("{} must exceed 1", self.distance_factor));
        }
        Ok(())
    }
}

impl VirtualCamera {
    pub fn new(pose: RigidPose, width: usize, height: usize, vfov_deg: f64) -> Result<Self> {
        if width < 16 || height < 16 {
            return Err(Error::InvalidArgument(format!("resolution {width}x{height} below 16x16")));
        }
        let fy = 0.5 * height as f64 / (0.5 * vfov_deg.to_radians()).tan();
        if !(fy.is_finite() && fy > 0.0) {
            return Err(Error::InvalidArgument(format!("vertical field of view {vfov_deg} not usable")));
        }
        Ok(Self { pose, fx: fy, fy, cx: 0.5 * width as f64, cy: 0.5 * height as f64, width, height })
    }

    /// Camera at `eye` looking at `target`, image "up" roughly along `up`.
    pub fn look_at(eye: Point3, target: Point3, up: Vector3, cfg: &CameraConfig) -> Result<Self> {
        let z = (target - eye)
            .try_normalize(1e-15)
            .ok_or_else(|| Error::InvalidArgument("eye and target coincide".into()))?;
        let up = if z.cross(&up).norm() < 1e-6 { Vector3::y() } else { up };
        let x = z.cross(&up).normalize();
        let y = z.cross(&x);
        let r = Rotation3::from_matrix_unchecked(M3::from_columns(&[x, y, z]));
        Self::new(RigidPose::new(r, eye.coords), cfg.width, cfg.height, cfg.vfov_deg)
    }

    /// Camera on a sphere around the mesh, uniformly distributed direction.
    pub fn random_view<R: Rng + ?Sized>(mesh: &TriMesh, cfg: &CameraConfig, rng: &mut R) -> Result<Self> {
        let (center, radius) = mesh.bounding_sphere();
        let d: Vector3 = loop {
            let v = Vector3::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal));
            if let Some(u) = v.try_normalize(1e-9) {
                break u;
            }
        };
        Self::look_at(center + d * (cfg.distance_factor * radius), center, Vector3::z(), cfg)
    }

    /// World-space direction (unnormalized, camera z = 1) through pixel `(u, v)`.
    pub fn ray(&self, u: usize, v: usize) -> Vector3 {
        let d = Vector3::new((u as f64 + 0.5 - self.cx) / self.fx, (v as f64 + 0.5 - self.cy) / self.fy, 1.0);
        self.pose.rotation * d
    }

    pub fn view_direction(&self) -> Vector3 {
        self.pose.rotation * Vector3::z()
    }
}

/// One ray hit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub point: Point3,
    pub face: usize,
    pub pixel: (usize, usize),
    /// Depth along the camera z axis.
    pub depth: f64,
}

/// Ray parameter of the intersection with triangle `abc`, two-sided.
pub(crate) fn ray_triangle(o: &Point3, d: &Vector3, a: &Point3, b: &Point3, c: &Point3) -> Option<f64> {
    let e1 = b - a;
    let e2 = c - a;
    let p = d.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < 1e-18 {
        return None;
    }
    let inv = 1.0 / det;
    let s = o - a;
    let u = s.dot(&p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = d.dot(&q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(&q) * inv;
    (t > 0.0).then_some(t)
}

/// Nearest hit per pixel, in row-major pixel order.
pub fn render_hits(mesh: &TriMesh, cam: &VirtualCamera) -> Vec<Hit> {
    let (w, h) = (cam.width, cam.height);
    let mut best: Vec<(f64, usize)> = vec![(f64::INFINITY, usize::MAX); w * h];
    let inv = cam.pose.inverse();
    let origin = Point3::from(cam.pose.translation);
    let cam_pts: Vec<Point3> = mesh.vertices.iter().map(|p| inv.apply(p)).collect();
    for (fi, f) in mesh.faces.iter().enumerate() {
        let tri = [cam_pts[f[0]], cam_pts[f[1]], cam_pts[f[2]]];
        if tri.iter().all(|p| p.z <= 0.0) {
            continue;
        }
        let (u0, u1, v0, v1) = if tri.iter().all(|p| p.z > 1e-9) {
            let us = tri.iter().map(|p| cam.fx * p.x / p.z + cam.cx);
            let vs = tri.iter().map(|p| cam.fy * p.y / p.z + cam.cy);
            let (umin, umax) = us.fold((f64::INFINITY, f64::NEG_INFINITY), |a, x| (a.0.min(x), a.1.max(x)));
            let (vmin, vmax) = vs.fold((f64::INFINITY, f64::NEG_INFINITY), |a, x| (a.0.min(x), a.1.max(x)));
            if umax < 0.0 || vmax < 0.0 || umin > w as f64 || vmin > h as f64 {
                continue;
            }
            let lo = |x: f64| (x - 1.0).floor().max(0.0) as usize;
            let hi = |x: f64, n: usize| ((x + 1.0).ceil().max(0.0) as usize).min(n - 1);
            (lo(umin), hi(umax, w), lo(vmin), hi(vmax, h))
        } else {
            (0, w - 1, 0, h - 1)
        };
        let [a, b, c] = mesh.triangle(fi);
        for v in v0..=v1 {
            for u in u0..=u1 {
                let d = cam.ray(u, v);
                if let Some(t) = ray_triangle(&origin, &d, &a, &b, &c) {
                    let slot = &mut best[v * w + u];
                    if t < slot.0 {
                        *slot = (t, fi);
                    }
                }
            }
        }
    }
    let mut hits = Vec::new();
    for v in 0..h {
        for u in 0..w {
            let (t, face) = best[v * w + u];
            if face != usize::MAX {
                hits.push(Hit { point: origin + cam.ray(u, v) * t, face, pixel: (u, v), depth: t });
            }
        }
    }
    hits
}

/// Visible surface points, one per pixel whose ray hits the mesh.
pub fn render_partial(mesh: &TriMesh, cam: &VirtualCamera) -> Result<PointCloud> {
    let hits = render_hits(mesh, cam);
    if hits.is_empty() {
        return Err(Error::EmptyView);
    }
    PointCloud::new(hits.into_iter().map(|h| h.point).collect())
}

/// Render from a camera drawn by [`VirtualCamera::random_view`] with `seed`.
pub fn render_random_view(mesh: &TriMesh, cfg: &CameraConfig, seed: u64) -> Result<(VirtualCamera, PointCloud)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cam = VirtualCamera::random_view(mesh, cfg, &mut rng)?;
    Ok((cam, render_partial(mesh, &cam)?))
}

/// Exactly `n` points: without replacement when the cloud is large enough,
/// with replacement otherwise.
pub fn sample_fixed(cloud: &PointCloud, n: usize, seed: u64) -> Result<PointCloud> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = cloud.len();
    let idx: Vec<usize> = if len >= n {
        index::sample(&mut rng, len, n).into_vec()
    } else {
        (0..n).map(|_| rng.random_range(0..len)).collect()
    };
    cloud.select(&idx)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentConfig {
    /// Rotation angle drawn uniformly from `[-rotation_deg, rotation_deg]`
    /// about a uniformly random axis through the centroid.
    pub rotation_deg: f64,
    /// Off-diagonal shear entries drawn from `[-shear, shear]`.
    pub shear: f64,
    /// Per-point isotropic Gaussian displacement.
    pub jitter_sigma: f64,
    /// One Gaussian offset applied to the whole cloud.
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self { rotation_deg: 0.0, shear: 0.0, jitter_sigma: 0.0, noise_sigma: 0.0, seed: 0 }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        for (key, v) in [
            ("rotation_deg", self.rotation_deg),
            ("shear", self.shear),
            ("jitter_sigma", self.jitter_sigma),
            ("noise_sigma", self.noise_sigma),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter { key: key.into(), reason: format!("{v} must be finite and >= 0") });
            }
        }
        Ok(())
    }
}

/// Rotation, shear, jitter and global noise, in that order.
pub fn augment(cloud: &PointCloud, cfg: &AugmentConfig) -> Result<PointCloud> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let c = cloud.centroid();
    let mut m = M3::identity();
    if cfg.rotation_deg > 0.0 {
        let axis: Vector3 = loop {
            let v = Vector3::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal));
            if let Some(u) = v.try_normalize(1e-9) {
                break u;
            }
        };
        let angle = rng.random_range(-cfg.rotation_deg..=cfg.rotation_deg).to_radians();
        m = *Rotation3::from_axis_angle(&Unit::new_unchecked(axis), angle).matrix();
    }
    if cfg.shear > 0.0 {
        let mut s = M3::identity();
        for r in 0..3 {
            for k in 0..3 {
                if r != k {
                    s[(r, k)] = rng.random_range(-cfg.shear..=cfg.shear);
                }
            }
        }
        m = s * m;
    }
    let jitter = Normal::new(0.0, cfg.jitter_sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let noise = Normal::new(0.0, cfg.noise_sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let offset = Vector3::new(noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng));
    let linear = cfg.rotation_deg > 0.0 || cfg.shear > 0.0;
    Ok(cloud.map_points(|p| {
        let mut q = if linear { c + m * (p - c) } else { *p };
        if cfg.jitter_sigma > 0.0 {
            q += Vector3::new(jitter.sample(&mut rng), jitter.sample(&mut rng), jitter.sample(&mut rng));
        }
        q + offset
    }))
}

/// Euclidean distance from `p` to triangle `abc`.
pub fn point_triangle_distance(p: &Point3, a: &Point3, b: &Point3, c: &Point3) -> f64 {
    let (ab, ac, ap) = (b - a, c - a, p - a);
    let (d1, d2) = (ab.dot(&ap), ac.dot(&ap));
    if d1 <= 0.0 && d2 <= 0.0 {
        return ap.norm();
    }
    let bp = p - b;
    let (d3, d4) = (ab.dot(&bp), ac.dot(&bp));
    if d3 >= 0.0 && d4 <= d3 {
        return bp.norm();
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (p - (a + ab * v)).norm();
    }
    let cp = p - c;
    let (d5, d6) = (ab.dot(&cp), ac.dot(&cp));
    if d6 >= 0.0 && d5 <= d6 {
        return cp.norm();
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (p - (a + ac * w)).norm();
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (p - (b + (c - b) * w)).norm();
    }
    let denom = 1.0 / (va + vb + vc);
    let (v, w) = (vb * denom, vc * denom);
    (p - (a + ab * v + ac * w)).norm()
}

/// Cloud points that support one annotated plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisiblePlane {
    /// Index into the record's plane list.
    pub plane: usize,
    pub normal: Vector3,
    pub points: Vec<usize>,
}

/// Support points per annotated plane: cloud points (object frame) within
/// `tol` of a mesh triangle whose three vertices are all in the plane's
/// support mask. Planes with fewer than `min_points` supporters are dropped.
pub fn transfer_support(
    cloud: &PointCloud,
    mesh: &TriMesh,
    record: &AnnotationRecord,
    tol: f64,
    min_points: usize,
) -> Vec<VisiblePlane> {
    let mut out = Vec::new();
    for (pi, plane) in record.planes.iter().enumerate() {
        let mut masked = vec![false; mesh.vertices.len()];
        for &v in &plane.support_vertices {
            if v < masked.len() {
                masked[v] = true;
            }
        }
        let tris: Vec<[Point3; 3]> = mesh
            .faces
            .iter()
            .enumerate()
            .filter(|(_, f)| f.iter().all(|&v| masked[v]))
            .map(|(i, _)| mesh.triangle(i))
            .collect();
        let verts: Vec<Point3> = plane.support_vertices.iter().filter_map(|&v| mesh.vertices.get(v).copied()).collect();
        let points: Vec<usize> = cloud
            .points()
            .iter()
            .enumerate()
            .filter(|(_, p)| {
                tris.iter().any(|t| point_triangle_distance(p, &t[0], &t[1], &t[2]) <= tol)
                    || verts.iter().any(|v| (*p - v).norm() <= tol)
            })
            .map(|(i, _)| i)
            .collect();
        if points.len() >= min_points {
            out.push(VisiblePlane { plane: pi, normal: plane.normal, points });
        }
    }
    out
}

/// Attach oracle stability scores (1 on any visible plane's support, else 0)
/// and labels (index of the first supported visible plane, or -1).
pub fn oracle_scored(cloud: &PointCloud, visible: &[VisiblePlane]) -> Result<PointCloud> {
    let mut scores = vec![0.0; cloud.len()];
    let mut labels = vec![-1i64; cloud.len()];
    for vp in visible {
        for &i in &vp.points {
            scores[i] = 1.0;
            if labels[i] < 0 {
                labels[i] = vp.plane as i64;
            }
        }
    }
    cloud.clone().with_scores(scores)?.with_labels(labels)
}
