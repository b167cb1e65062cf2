//! Procedural watertight meshes and the desk-scale test corpus.

use std::collections::HashMap;
use std::f64::consts::PI;

use crate::geom::{Point3, TriMesh, Vector3};

/// Flip every face if the signed volume is negative.
fn outward(mut mesh: TriMesh) -> TriMesh {
    let six_vol: f64 = mesh
        .faces
        .iter()
        .map(|f| {
            let [a, b, c] = [mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]]];
            a.coords.dot(&b.coords.cross(&c.coords))
        })
        .sum();
    if six_vol < 0.0 {
        for f in &mut mesh.faces {
            f.swap(1, 2);
        }
    }
    mesh
}

/// Axis-aligned box with full side lengths `sx × sy × sz`, centered at the origin.
pub fn cuboid(sx: f64, sy: f64, sz: f64) -> TriMesh {
    let (hx, hy, hz) = (sx / 2.0, sy / 2.0, sz / 2.0);
    extrude(&[[-hx, -hy], [hx, -hy], [hx, hy], [-hx, hy]], -hz, hz)
}

/// Box spanning `lo..hi`.
pub fn box_between(lo: Point3, hi: Point3) -> TriMesh {
    let c = nalgebra::center(&lo, &hi);
    let d = hi - lo;
    translate(&cuboid(d.x, d.y, d.z), &c.coords)
}

pub fn translate(mesh: &TriMesh, t: &Vector3) -> TriMesh {
    TriMesh { vertices: mesh.vertices.iter().map(|p| p + t).collect(), faces: mesh.faces.clone() }
}

/// Extrude a simple polygon (either winding) in the xy-plane from `z0` to `z1`.
pub fn extrude(profile: &[[f64; 2]], z0: f64, z1: f64) -> TriMesh {
    let mut poly: Vec<[f64; 2]> = profile.to_vec();
    if signed_area(&poly) < 0.0 {
        poly.reverse();
    }
    let n = poly.len();
    let mut vertices = Vec::with_capacity(2 * n);
    for p in &poly {
        vertices.push(Point3::new(p[0], p[1], z0));
    }
    for p in &poly {
        vertices.push(Point3::new(p[0], p[1], z1));
    }
    let mut faces = Vec::new();
    for t in ear_clip(&poly) {
        faces.push([t[0] + n, t[1] + n, t[2] + n]);
        faces.push([t[0], t[2], t[1]]);
    }
    for i in 0..n {
        let j = (i + 1) % n;
        faces.push([i, j, j + n]);
        faces.push([i, j + n, i + n]);
    }
    outward(TriMesh { vertices, faces })
}

fn signed_area(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
        * 0.5
}

/// Ear clipping for a counter-clockwise simple polygon.
fn ear_clip(poly: &[[f64; 2]]) -> Vec<[usize; 3]> {
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut idx: Vec<usize> = (0..poly.len()).collect();
    let mut tris = Vec::new();
    while idx.len() > 3 {
        let m = idx.len();
        let mut clipped = false;
        for k in 0..m {
            let (ip, ic, inx) = (idx[(k + m - 1) % m], idx[k], idx[(k + 1) % m]);
            let (p, c, nx) = (poly[ip], poly[ic], poly[inx]);
            if cross(p, c, nx) <= 1e-15 {
                continue;
            }
            let blocked = idx.iter().any(|&o| {
                if o == ip || o == ic || o == inx {
                    return false;
                }
                let q = poly[o];
                cross(p, c, q) >= 0.0 && cross(c, nx, q) >= 0.0 && cross(nx, p, q) >= 0.0
            });
            if blocked {
                continue;
            }
            tris.push([ip, ic, inx]);
            idx.remove(k);
            clipped = true;
            break;
        }
        if !clipped {
            // Only collinear runs remain; fan out what is left.
            for k in 1..idx.len() - 1 {
                tris.push([idx[0], idx[k], idx[k + 1]]);
            }
            return tris;
        }
    }
    tris.push([idx[0], idx[1], idx[2]]);
    tris
}

/// Regular n-gon prism along z, centered at the origin.
pub fn cylinder(radius: f64, height: f64, segments: usize) -> TriMesh {
    let poly: Vec<[f64; 2]> = (0..segments)
        .map(|i| {
            let t = 2.0 * PI * i as f64 / segments as f64;
            [radius * t.cos(), radius * t.sin()]
        })
        .collect();
    extrude(&poly, -height / 2.0, height / 2.0)
}

/// Subdivided icosahedron projected onto a sphere.
pub fn icosphere(radius: f64, subdivisions: usize) -> TriMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vector3> = [
        [-1.0, t, 0.0], [1.0, t, 0.0], [-1.0, -t, 0.0], [1.0, -t, 0.0],
        [0.0, -1.0, t], [0.0, 1.0, t], [0.0, -1.0, -t], [0.0, 1.0, -t],
        [t, 0.0, -1.0], [t, 0.0, 1.0], [-t, 0.0, -1.0], [-t, 0.0, 1.0],
    ]
    .iter()
    .map(|v| Vector3::new(v[0], v[1], v[2]).normalize())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, verts: &mut Vec<Vector3>| {
            let key = (a.min(b), a.max(b));
            *mid.entry(key).or_insert_with(|| {
                verts.push(((verts[a] + verts[b]) * 0.5).normalize());
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for f in &faces {
            let ab = midpoint(f[0], f[1], &mut verts);
            let bc = midpoint(f[1], f[2], &mut verts);
            let ca = midpoint(f[2], f[0], &mut verts);
            next.push([f[0], ab, ca]);
            next.push([f[1], bc, ab]);
            next.push([f[2], ca, bc]);
            next.push([ab, bc, ca]);
        }
        faces = next;
    }
    outward(TriMesh { vertices: verts.iter().map(|v| Point3::from(v * radius)).collect(), faces })
}

/// Surface of revolution about z from a closed `(r, z)` profile loop.
/// Profile points with `r == 0` become single pole vertices.
pub fn revolve(profile: &[[f64; 2]], segments: usize) -> TriMesh {
    let mut vertices = Vec::new();
    // ring[k] is the vertex ids of profile point k (len 1 for poles)
    let mut rings: Vec<Vec<usize>> = Vec::with_capacity(profile.len());
    for p in profile {
        if p[0].abs() < 1e-15 {
            rings.push(vec![vertices.len()]);
            vertices.push(Point3::new(0.0, 0.0, p[1]));
        } else {
            let start = vertices.len();
            for j in 0..segments {
                let t = 2.0 * PI * j as f64 / segments as f64;
                vertices.push(Point3::new(p[0] * t.cos(), p[0] * t.sin(), p[1]));
            }
            rings.push((start..start + segments).collect());
        }
    }
    let mut faces = Vec::new();
    let m = profile.len();
    for k in 0..m {
        let (a, b) = (&rings[k], &rings[(k + 1) % m]);
        for j in 0..segments {
            let jn = (j + 1) % segments;
            match (a.len(), b.len()) {
                (1, 1) => {}
                (1, _) => faces.push([a[0], b[j], b[jn]]),
                (_, 1) => faces.push([a[j], b[0], a[jn]]),
                _ => {
                    faces.push([a[j], b[j], b[jn]]);
                    faces.push([a[j], b[jn], a[jn]]);
                }
            }
        }
    }
    outward(TriMesh { vertices, faces })
}

/// Shift so the axis-aligned bounding box is centered at the origin.
pub fn centered(mesh: TriMesh) -> TriMesh {
    let (lo, hi) = mesh.aabb();
    let c = nalgebra::center(&lo, &hi);
    translate(&mesh, &-c.coords)
}

/// Four-legged chair with a backrest, feet on `z = 0`. Shells touch but do
/// not overlap, so the union stays closed edge-wise.
pub fn toy_chair(seat: f64, seat_thick: f64, leg_h: f64, leg_w: f64, back_h: f64) -> TriMesh {
    let h = seat / 2.0;
    let mut m = box_between(Point3::new(-h, -h, leg_h), Point3::new(h, h, leg_h + seat_thick));
    for (sx, sy) in [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)] {
        let cx = sx * (h - leg_w / 2.0);
        let cy = sy * (h - leg_w / 2.0);
        m = m.merged(&box_between(
            Point3::new(cx - leg_w / 2.0, cy - leg_w / 2.0, 0.0),
            Point3::new(cx + leg_w / 2.0, cy + leg_w / 2.0, leg_h),
        ));
    }
    let top = leg_h + seat_thick;
    m.merged(&box_between(Point3::new(-h, h - leg_w, top), Point3::new(h, h, top + back_h)))
}

/// Open cup (wall and bottom) with a solid handle fin flush on one outer facet.
pub fn mug(radius: f64, height: f64, wall: f64, bottom: f64, segments: usize) -> TriMesh {
    let cup = revolve(
        &[
            [0.0, 0.0],
            [radius, 0.0],
            [radius, height],
            [radius - wall, height],
            [radius - wall, bottom],
            [0.0, bottom],
        ],
        segments,
    );
    // Outer facet between ring angles 0 and 2π/n faces direction π/n.
    let half = PI / segments as f64;
    let apothem = radius * half.cos();
    let facet_w = 2.0 * radius * half.sin();
    let fin = box_between(
        Point3::new(apothem, -0.4 * facet_w, 0.25 * height),
        Point3::new(apothem + 0.6 * radius, 0.4 * facet_w, 0.8 * height),
    );
    let rot = nalgebra::Rotation3::from_axis_angle(&Vector3::z_axis(), half);
    let fin = TriMesh { vertices: fin.vertices.iter().map(|p| rot * p).collect(), faces: fin.faces };
    cup.merged(&fin)
}

/// A named mesh of the desk corpus.
#[derive(Debug, Clone)]
pub struct CorpusObject {
    pub id: String,
    pub mesh: TriMesh,
}

/// The ten desk-scale objects (meters): box, wedge, L-shape, toy chair,
/// cylinder, rod, mug-like, T-block, ramp, plate.
pub fn desk_corpus() -> Vec<CorpusObject> {
    let obj = |id: &str, mesh: TriMesh| CorpusObject { id: id.to_string(), mesh: centered(mesh) };
    vec![
        obj("box", cuboid(0.16, 0.08, 0.04)),
        obj("wedge", wedge(0.15, 0.05, 0.10)),
        obj(
            "l_shape",
            extrude(&[[0.0, 0.0], [0.12, 0.0], [0.12, 0.03], [0.03, 0.03], [0.03, 0.12], [0.0, 0.12]], 0.0, 0.05),
        ),
        obj("toy_chair", toy_chair(0.12, 0.015, 0.12, 0.012, 0.12)),
        obj("cylinder", cylinder(0.04, 0.08, 32)),
        obj("rod", cylinder(0.015, 0.12, 32)),
        obj("mug", mug(0.04, 0.09, 0.005, 0.008, 32)),
        obj(
            "t_block",
            extrude(
                &[
                    [-0.015, 0.0],
                    [0.015, 0.0],
                    [0.015, 0.07],
                    [0.06, 0.07],
                    [0.06, 0.1],
                    [-0.06, 0.1],
                    [-0.06, 0.07],
                    [-0.015, 0.07],
                ],
                0.0,
                0.04,
            ),
        ),
        obj("ramp", extrude(&[[0.0, 0.0], [0.2, 0.0], [0.0, 0.05]], 0.0, 0.08)),
        obj("plate", cylinder(0.1, 0.015, 48)),
    ]
}

/// Isosceles triangular prism: triangle base × height, extruded by depth.
pub fn wedge(base: f64, height: f64, depth: f64) -> TriMesh {
    extrude(&[[-base / 2.0, 0.0], [base / 2.0, 0.0], [0.0, height]], -depth / 2.0, depth / 2.0)
}
