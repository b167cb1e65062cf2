use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Point3, RigidPose, Vector3};
use crate::error::{Error, Result};

/// Triangle mesh. Faces are counter-clockwise when seen from outside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriMesh {
    pub vertices: Vec<Point3>,
    pub faces: Vec<[usize; 3]>,
}

/// Uniform-density volume and center of mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassProperties {
    pub volume: f64,
    pub com: Point3,
}

impl TriMesh {
    pub fn new(vertices: Vec<Point3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let n = vertices.len();
        if let Some((i, f)) = faces.iter().enumerate().find(|(_, f)| f.iter().any(|&v| v >= n)) {
            return Err(Error::InvalidArgument(format!("face {i} {f:?} indexes past {n} vertices")));
        }
        if let Some(i) = vertices.iter().position(|p| !p.coords.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidArgument(format!("vertex {i} has a non-finite coordinate")));
        }
        Ok(Self { vertices, faces })
    }

    /// Every directed edge appears once and its twin exists: closed, 2-manifold
    /// along edges, consistently oriented.
    pub fn check_closed(&self) -> Result<()> {
        if self.faces.is_empty() {
            return Err(Error::OpenMesh("mesh has no faces".into()));
        }
        let mut directed: HashMap<(usize, usize), usize> = HashMap::with_capacity(self.faces.len() * 3);
        for (fi, f) in self.faces.iter().enumerate() {
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::OpenMesh(format!("face {fi} repeats a vertex")));
            }
            for k in 0..3 {
                let e = (f[k], f[(k + 1) % 3]);
                if let Some(other) = directed.insert(e, fi) {
                    return Err(Error::OpenMesh(format!(
                        "edge {:?} used twice in the same direction (faces {other} and {fi})",
                        e
                    )));
                }
            }
        }
        for &(a, b) in directed.keys() {
            if !directed.contains_key(&(b, a)) {
                return Err(Error::OpenMesh(format!("boundary edge ({a}, {b})")));
            }
        }
        Ok(())
    }

    pub fn is_watertight(&self) -> bool {
        self.check_closed().is_ok()
    }

    /// Volume and COM by signed tetrahedra against the origin.
    pub fn mass_properties(&self) -> Result<MassProperties> {
        self.check_closed()?;
        let mut six_vol = 0.0;
        let mut moment = Vector3::zeros();
        for f in &self.faces {
            let a = self.vertices[f[0]].coords;
            let b = self.vertices[f[1]].coords;
            let c = self.vertices[f[2]].coords;
            let v6 = a.dot(&b.cross(&c));
            six_vol += v6;
            moment += (a + b + c) * v6;
        }
        let volume = six_vol / 6.0;
        if !(volume > 0.0) {
            return Err(Error::NonPositiveVolume(volume));
        }
        // Σ V_t (a+b+c)/4 / V with V_t = v6/6
        let com = Point3::from(moment / (4.0 * six_vol));
        Ok(MassProperties { volume, com })
    }

    pub fn transformed(&self, pose: &RigidPose) -> Self {
        Self { vertices: self.vertices.iter().map(|p| pose.apply(p)).collect(), faces: self.faces.clone() }
    }

    pub fn triangle(&self, i: usize) -> [Point3; 3] {
        let f = self.faces[i];
        [self.vertices[f[0]], self.vertices[f[1]], self.vertices[f[2]]]
    }

    /// Unnormalized face normal (length = 2 × area).
    pub fn face_cross(&self, i: usize) -> Vector3 {
        let [a, b, c] = self.triangle(i);
        (b - a).cross(&(c - a))
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.faces.len()).map(|i| 0.5 * self.face_cross(i).norm()).sum()
    }

    pub fn aabb(&self) -> (Point3, Point3) {
        let mut lo = Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let mut hi = Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &self.vertices {
            for k in 0..3 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        (lo, hi)
    }

    /// Center and radius of the AABB's circumscribed sphere.
    pub fn bounding_sphere(&self) -> (Point3, f64) {
        let (lo, hi) = self.aabb();
        let c = nalgebra::center(&lo, &hi);
        let r = self.vertices.iter().map(|p| (p - c).norm()).fold(0.0, f64::max);
        (c, r)
    }

    /// Area-weighted uniform surface samples.
    pub fn sample_surface<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<Point3> {
        let mut cdf = Vec::with_capacity(self.faces.len());
        let mut total = 0.0;
        for i in 0..self.faces.len() {
            total += 0.5 * self.face_cross(i).norm();
            cdf.push(total);
        }
        (0..n)
            .map(|_| {
                let x = rng.random::<f64>() * total;
                let fi = cdf.partition_point(|&c| c < x).min(self.faces.len() - 1);
                let [a, b, c] = self.triangle(fi);
                let (mut u, mut v): (f64, f64) = (rng.random(), rng.random());
                if u + v > 1.0 {
                    u = 1.0 - u;
                    v = 1.0 - v;
                }
                a + (b - a) * u + (c - a) * v
            })
            .collect()
    }

    /// Concatenate shells without welding; indices of `other` are shifted.
    pub fn merged(&self, other: &TriMesh) -> TriMesh {
        let off = self.vertices.len();
        let mut vertices = self.vertices.clone();
        vertices.extend_from_slice(&other.vertices);
        let mut faces = self.faces.clone();
        faces.extend(other.faces.iter().map(|f| [f[0] + off, f[1] + off, f[2] + off]));
        TriMesh { vertices, faces }
    }
}
