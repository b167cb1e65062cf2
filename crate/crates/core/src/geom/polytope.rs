//! Convex polytope with merged planar facets, used for resting-face and
//! toppling analysis.

use std::collections::{HashMap, VecDeque};

use super::{convex_hull, Point3, TriMesh, Vector3};
use crate::error::{Error, Result};

/// COM-inside-polygon margin in meters. On-edge counts as outside.
pub const INSIDE_MARGIN: f64 = 1e-9;

/// A planar facet of a convex polytope.
#[derive(Debug, Clone)]
pub struct Facet {
    /// Outward unit normal.
    pub normal: Vector3,
    /// `normal · x = offset` on the facet plane.
    pub offset: f64,
    /// Boundary loop, counter-clockwise about `normal`.
    pub boundary: Vec<usize>,
    /// `neighbors[i]` is the facet across edge `boundary[i] → boundary[i+1]`.
    pub neighbors: Vec<usize>,
    pub area: f64,
}

/// Result of checking one facet for static stability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ToppleStep {
    /// The gravity line through the COM pierces the facet strictly inside.
    Stable,
    /// The object rotates about boundary edge `edge` onto facet `to`.
    Topple { edge: usize, to: usize },
}

#[derive(Debug, Clone)]
pub struct Polytope {
    pub vertices: Vec<Point3>,
    pub facets: Vec<Facet>,
}

impl Polytope {
    /// Hull the points and merge coplanar hull triangles into facets.
    pub fn from_points(points: &[Point3]) -> Result<Self> {
        let hull = convex_hull(points)?;
        Self::from_convex_mesh(&hull)
    }

    /// Build from a closed convex triangle mesh (as returned by [`convex_hull`]).
    pub fn from_convex_mesh(hull: &TriMesh) -> Result<Self> {
        hull.check_closed()?;
        let nt = hull.faces.len();
        let mut edge_face: HashMap<(usize, usize), usize> = HashMap::with_capacity(nt * 3);
        for (i, f) in hull.faces.iter().enumerate() {
            for k in 0..3 {
                edge_face.insert((f[k], f[(k + 1) % 3]), i);
            }
        }
        let normals: Vec<Vector3> = (0..nt)
            .map(|i| {
                let c = hull.face_cross(i);
                let l = c.norm();
                if l > 0.0 { c / l } else { Vector3::zeros() }
            })
            .collect();
        let (lo, hi) = hull.aabb();
        let plane_tol = 1e-9 * (hi - lo).norm().max(1e-3);

        let mut group = vec![usize::MAX; nt];
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for seed in 0..nt {
            if group[seed] != usize::MAX {
                continue;
            }
            let gid = groups.len();
            let n0 = normals[seed];
            let o0 = n0.dot(&hull.vertices[hull.faces[seed][0]].coords);
            let mut members = vec![seed];
            group[seed] = gid;
            let mut q = VecDeque::from([seed]);
            while let Some(t) = q.pop_front() {
                let f = hull.faces[t];
                for k in 0..3 {
                    let nb = edge_face[&(f[(k + 1) % 3], f[k])];
                    if group[nb] != usize::MAX {
                        continue;
                    }
                    let coplanar = normals[nb].dot(&n0) >= 1.0 - 1e-10
                        && hull.faces[nb]
                            .iter()
                            .all(|&v| (n0.dot(&hull.vertices[v].coords) - o0).abs() <= plane_tol);
                    if coplanar {
                        group[nb] = gid;
                        members.push(nb);
                        q.push_back(nb);
                    }
                }
            }
            groups.push(members);
        }

        // Split any group whose boundary is not a single simple loop.
        let mut loops: Vec<(Vec<usize>, Vec<usize>)> = Vec::new(); // (triangles, boundary)
        for members in groups {
            match boundary_loop(hull, &members, &group, &edge_face) {
                Some(b) => loops.push((members, b)),
                None => {
                    for t in members {
                        let f = hull.faces[t];
                        loops.push((vec![t], f.to_vec()));
                    }
                }
            }
        }
        let mut tri_facet = vec![0usize; nt];
        for (fi, (tris, _)) in loops.iter().enumerate() {
            for &t in tris {
                tri_facet[t] = fi;
            }
        }

        let mut facets = Vec::with_capacity(loops.len());
        for (tris, boundary) in &loops {
            let mut nsum = Vector3::zeros();
            let mut area = 0.0;
            for &t in tris {
                let c = hull.face_cross(t);
                nsum += c;
                area += 0.5 * c.norm();
            }
            let normal = nsum.try_normalize(0.0).ok_or_else(|| {
                Error::DegenerateInput("hull facet with zero area".into())
            })?;
            let offset = boundary
                .iter()
                .map(|&v| normal.dot(&hull.vertices[v].coords))
                .fold(f64::NEG_INFINITY, f64::max);
            let m = boundary.len();
            let neighbors = (0..m)
                .map(|i| {
                    let (a, b) = (boundary[i], boundary[(i + 1) % m]);
                    tri_facet[edge_face[&(b, a)]]
                })
                .collect();
            facets.push(Facet { normal, offset, boundary: boundary.clone(), neighbors, area });
        }
        Ok(Self { vertices: hull.vertices.clone(), facets })
    }

    pub fn total_area(&self) -> f64 {
        self.facets.iter().map(|f| f.area).sum()
    }

    /// Facet pierced by the ray from interior point `origin` along `dir`.
    /// Ties go to the lowest index.
    pub fn ray_facet(&self, origin: &Point3, dir: &Vector3) -> usize {
        let mut best = (0usize, f64::INFINITY);
        for (i, f) in self.facets.iter().enumerate() {
            let den = f.normal.dot(dir);
            if den <= 1e-15 {
                continue;
            }
            let t = (f.offset - f.normal.dot(&origin.coords)) / den;
            if t < best.1 {
                best = (i, t);
            }
        }
        best.0
    }

    /// Where the line through `com` along `gravity` meets the plane of `facet`.
    pub fn gravity_foot(&self, facet: usize, com: &Point3, gravity: &Vector3) -> Point3 {
        let f = &self.facets[facet];
        let den = f.normal.dot(gravity);
        let t = (f.offset - f.normal.dot(&com.coords)) / den;
        com + gravity * t
    }

    /// Signed in-plane distance from `p` to each boundary edge line
    /// (positive inside).
    pub fn edge_distances(&self, facet: usize, p: &Point3) -> Vec<f64> {
        let f = &self.facets[facet];
        let m = f.boundary.len();
        (0..m)
            .map(|i| {
                let a = self.vertices[f.boundary[i]];
                let b = self.vertices[f.boundary[(i + 1) % m]];
                let inward = f.normal.cross(&(b - a)).normalize();
                (p - a).dot(&inward)
            })
            .collect()
    }

    /// Quasi-static check for an object resting on `facet` with gravity
    /// `gravity` expressed in the object frame.
    pub fn topple_step(&self, facet: usize, com: &Point3, gravity: &Vector3) -> ToppleStep {
        let p = self.gravity_foot(facet, com, gravity);
        let sd = self.edge_distances(facet, &p);
        if sd.iter().all(|&d| d > INSIDE_MARGIN) {
            return ToppleStep::Stable;
        }
        let f = &self.facets[facet];
        let m = f.boundary.len();
        let mut best = (usize::MAX, f64::INFINITY);
        for (i, &d) in sd.iter().enumerate() {
            if d > INSIDE_MARGIN {
                continue;
            }
            let a = self.vertices[f.boundary[i]];
            let b = self.vertices[f.boundary[(i + 1) % m]];
            let dist = point_segment_distance(&p, &a, &b);
            if dist < best.1 {
                best = (i, dist);
            }
        }
        ToppleStep::Topple { edge: best.0, to: f.neighbors[best.0] }
    }

    /// Endpoints of boundary edge `edge` of `facet`.
    pub fn edge_points(&self, facet: usize, edge: usize) -> (Point3, Point3) {
        let f = &self.facets[facet];
        let m = f.boundary.len();
        (self.vertices[f.boundary[edge]], self.vertices[f.boundary[(edge + 1) % m]])
    }

    /// Sink facet reached from `start` on a flat surface, following
    /// topple steps with gravity along each facet's outward normal.
    pub fn flat_sink(&self, start: usize, com: &Point3) -> usize {
        let mut f = start;
        for _ in 0..=self.facets.len() {
            match self.topple_step(f, com, &self.facets[f].normal) {
                ToppleStep::Stable => return f,
                ToppleStep::Topple { to, .. } => f = to,
            }
        }
        f
    }
}

pub(crate) fn point_segment_distance(p: &Point3, a: &Point3, b: &Point3) -> f64 {
    let ab = b - a;
    let l2 = ab.norm_squared();
    let t = if l2 > 0.0 { ((p - a).dot(&ab) / l2).clamp(0.0, 1.0) } else { 0.0 };
    (p - (a + ab * t)).norm()
}

fn boundary_loop(
    hull: &TriMesh,
    members: &[usize],
    group: &[usize],
    edge_face: &HashMap<(usize, usize), usize>,
) -> Option<Vec<usize>> {
    let gid = group[members[0]];
    let mut next: HashMap<usize, usize> = HashMap::new();
    let mut count = 0;
    for &t in members {
        let f = hull.faces[t];
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            if group[edge_face[&(b, a)]] != gid {
                if next.insert(a, b).is_some() {
                    return None;
                }
                count += 1;
            }
        }
    }
    let start = *next.keys().min()?;
    let mut out = vec![start];
    let mut cur = next[&start];
    while cur != start {
        if out.len() > count {
            return None;
        }
        out.push(cur);
        cur = *next.get(&cur)?;
    }
    (out.len() == count).then_some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;
    use approx::assert_relative_eq;

    #[test]
    fn cube_has_six_square_facets() {
        let p = Polytope::from_points(&shapes::cuboid(1.0, 1.0, 1.0).vertices).unwrap();
        assert_eq!(p.facets.len(), 6);
        for f in &p.facets {
            assert_eq!(f.boundary.len(), 4);
            assert_relative_eq!(f.area, 1.0, epsilon = 1e-12);
            assert_eq!(f.neighbors.len(), 4);
            assert!(f.neighbors.iter().all(|n| {
                p.facets[*n].normal.dot(&f.normal).abs() < 1e-12
            }));
        }
    }

    #[test]
    fn cube_facets_are_all_sinks() {
        let p = Polytope::from_points(&shapes::cuboid(1.0, 1.0, 1.0).vertices).unwrap();
        for i in 0..6 {
            assert_eq!(p.flat_sink(i, &Point3::origin()), i);
        }
    }

    #[test]
    fn off_center_com_topples() {
        // COM pushed past the +x side: the -z facet must topple onto +x.
        let p = Polytope::from_points(&shapes::cuboid(1.0, 1.0, 1.0).vertices).unwrap();
        let bottom = p.ray_facet(&Point3::origin(), &-Vector3::z());
        let com = Point3::new(0.45, 0.0, 0.0);
        assert_eq!(p.topple_step(bottom, &com, &p.facets[bottom].normal), ToppleStep::Stable);
        let gravity = (Vector3::new(1.0, 0.0, -1.0)).normalize();
        match p.topple_step(bottom, &com, &gravity) {
            ToppleStep::Topple { to, .. } => {
                assert_relative_eq!(p.facets[to].normal, Vector3::x(), epsilon = 1e-12)
            }
            ToppleStep::Stable => panic!("expected topple"),
        }
    }
}
