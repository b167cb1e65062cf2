//! Incremental quickhull.

use std::collections::{HashMap, VecDeque};

use super::{Point3, TriMesh, Vector3};
use crate::error::{Error, Result};

struct Face {
    v: [usize; 3],
    normal: Vector3,
    offset: f64,
    outside: Vec<usize>,
    alive: bool,
}

impl Face {
    fn new(pts: &[Point3], v: [usize; 3]) -> Self {
        let n = (pts[v[1]] - pts[v[0]]).cross(&(pts[v[2]] - pts[v[0]]));
        let len = n.norm();
        let normal = if len > 0.0 { n / len } else { Vector3::zeros() };
        let offset = normal.dot(&pts[v[0]].coords);
        Self { v, normal, offset, outside: Vec::new(), alive: true }
    }

    fn dist(&self, p: &Point3) -> f64 {
        self.normal.dot(&p.coords) - self.offset
    }
}

/// Sort lexicographically and merge points closer than `tol` in every coordinate.
fn dedup_points(points: &[Point3], tol: f64) -> Vec<Point3> {
    let mut sorted: Vec<Point3> = points.to_vec();
    sorted.sort_by(|a, b| {
        a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)).then(a.z.total_cmp(&b.z))
    });
    let mut out: Vec<Point3> = Vec::with_capacity(sorted.len());
    for p in sorted {
        if let Some(last) = out.last() {
            if (p - last).amax() <= tol {
                continue;
            }
        }
        out.push(p);
    }
    out
}

/// Convex hull of a point set as an outward-oriented, closed triangle mesh.
///
/// Coincident points (within 1e-12) are merged first. Points within a
/// scale-relative tolerance of an existing face are treated as on the hull
/// and do not become vertices.
pub fn convex_hull(points: &[Point3]) -> Result<TriMesh> {
    if points.len() < 4 {
        return Err(Error::DegenerateInput(format!("need at least 4 points, got {}", points.len())));
    }
    if points.iter().any(|p| !p.coords.iter().all(|c| c.is_finite())) {
        return Err(Error::DegenerateInput("non-finite coordinate".into()));
    }
    let pts = dedup_points(points, 1e-12);
    if pts.len() < 4 {
        return Err(Error::DegenerateInput("fewer than 4 distinct points".into()));
    }

    let mut lo = pts[0];
    let mut hi = pts[0];
    for p in &pts {
        for k in 0..3 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let scale = (hi - lo).norm().max(1e-300);
    let eps = 1e-12 * scale.max(1e-3);

    let simplex = initial_simplex(&pts, eps)?;
    let mut faces: Vec<Face> = Vec::new();
    let mut edges: HashMap<(usize, usize), usize> = HashMap::new();

    let [a, b, c, d] = simplex;
    // Orient the base triangle so that `d` lies behind it.
    let base = Face::new(&pts, [a, b, c]);
    let tris = if base.dist(&pts[d]) > 0.0 {
        [[a, c, b], [a, b, d], [b, c, d], [c, a, d]]
    } else {
        [[a, b, c], [a, d, b], [b, d, c], [c, d, a]]
    };
    for t in tris {
        add_face(&mut faces, &mut edges, &pts, t);
    }

    let in_simplex = |i: usize| simplex.contains(&i);
    let initial: Vec<usize> = (0..faces.len()).collect();
    let candidates: Vec<usize> = (0..pts.len()).filter(|&i| !in_simplex(i)).collect();
    assign(&mut faces, &initial, &candidates, &pts, eps);

    let mut work: VecDeque<usize> = (0..faces.len()).collect();
    while let Some(fi) = work.pop_front() {
        if !faces[fi].alive || faces[fi].outside.is_empty() {
            continue;
        }
        // Farthest outside point, lowest index on ties.
        let eye = *faces[fi]
            .outside
            .iter()
            .max_by(|&&p, &&q| {
                faces[fi].dist(&pts[p]).total_cmp(&faces[fi].dist(&pts[q])).then(q.cmp(&p))
            })
            .unwrap();
        let eye_pt = pts[eye];

        // Connected visible region by breadth-first search.
        let mut visible = vec![fi];
        let mut is_visible: HashMap<usize, bool> = HashMap::new();
        is_visible.insert(fi, true);
        let mut q = VecDeque::from([fi]);
        while let Some(f) = q.pop_front() {
            let v = faces[f].v;
            for k in 0..3 {
                let nb = edges[&(v[(k + 1) % 3], v[k])];
                if is_visible.contains_key(&nb) {
                    continue;
                }
                let vis = faces[nb].dist(&eye_pt) > eps;
                is_visible.insert(nb, vis);
                if vis {
                    visible.push(nb);
                    q.push_back(nb);
                }
            }
        }

        let mut horizon = Vec::new();
        for &f in &visible {
            let v = faces[f].v;
            for k in 0..3 {
                let (p, r) = (v[k], v[(k + 1) % 3]);
                let nb = edges[&(r, p)];
                if !is_visible[&nb] {
                    horizon.push((p, r));
                }
            }
        }

        let mut orphans = Vec::new();
        for &f in &visible {
            let v = faces[f].v;
            for k in 0..3 {
                edges.remove(&(v[k], v[(k + 1) % 3]));
            }
            faces[f].alive = false;
            orphans.extend(faces[f].outside.drain(..).filter(|&p| p != eye));
        }

        let mut created = Vec::with_capacity(horizon.len());
        for (p, r) in horizon {
            created.push(add_face(&mut faces, &mut edges, &pts, [p, r, eye]));
        }
        assign(&mut faces, &created, &orphans, &pts, eps);
        work.extend(created);
    }

    // Compact: keep vertices referenced by live faces, in sorted-point order.
    let mut remap = vec![usize::MAX; pts.len()];
    let live: Vec<[usize; 3]> = faces.iter().filter(|f| f.alive).map(|f| f.v).collect();
    for f in &live {
        for &v in f {
            remap[v] = 0;
        }
    }
    let mut vertices = Vec::new();
    for (i, slot) in remap.iter_mut().enumerate() {
        if *slot == 0 {
            *slot = vertices.len();
            vertices.push(pts[i]);
        }
    }
    let faces = live.iter().map(|f| [remap[f[0]], remap[f[1]], remap[f[2]]]).collect();
    Ok(TriMesh { vertices, faces })
}

fn add_face(
    faces: &mut Vec<Face>,
    edges: &mut HashMap<(usize, usize), usize>,
    pts: &[Point3],
    v: [usize; 3],
) -> usize {
    let id = faces.len();
    faces.push(Face::new(pts, v));
    for k in 0..3 {
        edges.insert((v[k], v[(k + 1) % 3]), id);
    }
    id
}

/// Give each point to the candidate face it is farthest outside of.
fn assign(faces: &mut [Face], targets: &[usize], points: &[usize], pts: &[Point3], eps: f64) {
    for &p in points {
        let mut best: Option<(usize, f64)> = None;
        for &f in targets {
            let d = faces[f].dist(&pts[p]);
            if d > eps && best.is_none_or(|(_, bd)| d > bd) {
                best = Some((f, d));
            }
        }
        if let Some((f, _)) = best {
            faces[f].outside.push(p);
        }
    }
}

fn initial_simplex(pts: &[Point3], eps: f64) -> Result<[usize; 4]> {
    // Farthest pair among the axis extremes.
    let mut extremes = Vec::with_capacity(6);
    for k in 0..3 {
        let (mut imin, mut imax) = (0, 0);
        for (i, p) in pts.iter().enumerate() {
            if p[k] < pts[imin][k] {
                imin = i;
            }
            if p[k] > pts[imax][k] {
                imax = i;
            }
        }
        extremes.push(imin);
        extremes.push(imax);
    }
    let (mut a, mut b, mut best) = (0, 0, -1.0);
    for &i in &extremes {
        for &j in &extremes {
            let d = (pts[i] - pts[j]).norm_squared();
            if d > best {
                best = d;
                a = i;
                b = j;
            }
        }
    }
    if best.sqrt() <= eps {
        return Err(Error::DegenerateInput("all points coincide".into()));
    }
    let ab = (pts[b] - pts[a]).normalize();
    let (mut c, mut best) = (usize::MAX, eps);
    for (i, p) in pts.iter().enumerate() {
        let d = (p - pts[a]).cross(&ab).norm();
        if d > best {
            best = d;
            c = i;
        }
    }
    if c == usize::MAX {
        return Err(Error::DegenerateInput("points are collinear".into()));
    }
    let n = (pts[b] - pts[a]).cross(&(pts[c] - pts[a])).normalize();
    let (mut d, mut best) = (usize::MAX, eps);
    for (i, p) in pts.iter().enumerate() {
        let dist = (p - pts[a]).dot(&n).abs();
        if dist > best {
            best = dist;
            d = i;
        }
    }
    if d == usize::MAX {
        return Err(Error::DegenerateInput("points are coplanar".into()));
    }
    Ok([a, b, c, d])
}
