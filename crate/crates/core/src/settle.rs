//! Quasi-static settling on a (possibly tilted) table plane.
//!
//! The object is represented by the convex hull of its mesh. Each step the
//! hull rests on one facet; if the vertical line through the center of mass
//! leaves that facet the object tips about the nearest violated edge onto
//! the neighboring facet. The pose sequence feeds the windowed instability
//! measure used to decide when the object has stopped.

use std::collections::HashSet;
use std::io::Write;

use nalgebra::{Rotation3, Unit};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{pose_delta, rotation_between, Point3, Polytope, RigidPose, ToppleStep, TriMesh, Vector3};

/// Support plane through the world origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableConfig {
    /// Upward unit normal.
    pub normal: Vector3,
    /// Angle between `normal` and world +z, degrees.
    pub tilt_deg: f64,
}

impl TableConfig {
    pub fn flat() -> Self {
        Self { normal: Vector3::z(), tilt_deg: 0.0 }
    }

    /// Table tilted by `tilt_deg` so that it descends toward the horizontal
    /// direction at `azimuth_deg` (measured from +x toward +y).
    pub fn tilted(tilt_deg: f64, azimuth_deg: f64) -> Result<Self> {
        if !(0.0..=45.0).contains(&tilt_deg) {
            return Err(Error::InvalidParameter {
                key: "tilt".into(),
                reason: format!("{tilt_deg} outside [0, 45] degrees"),
            });
        }
        let (t, a) = (tilt_deg.to_radians(), azimuth_deg.to_radians());
        let normal = Vector3::new(t.sin() * a.cos(), t.sin() * a.sin(), t.cos());
        Ok(Self { normal, tilt_deg })
    }

    /// Rotation taking world +z to the table normal.
    pub fn frame(&self) -> Rotation3<f64> {
        rotation_between(&Vector3::z(), &self.normal)
    }
}

impl Default for TableConfig {
    fn default() -> Self {
        Self::flat()
    }
}

/// Thresholds in pose-delta units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SettleParams {
    /// The object counts as stopped once the windowed instability drops below this.
    pub epsilon: f64,
    /// Stability threshold for drop outcomes.
    pub epsilon1: f64,
    /// Threshold used by tilt verification.
    pub epsilon2: f64,
    /// Averaging window in steps.
    #[serde(rename = "L")]
    pub window: usize,
    pub max_steps: usize,
}

impl Default for SettleParams {
    fn default() -> Self {
        Self { epsilon: 1e-4, epsilon1: 1e-3, epsilon2: 1e-3, window: 10, max_steps: 200 }
    }
}

impl SettleParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, reason: String| Err(Error::InvalidParameter { key: key.into(), reason });
        for (key, v) in [("epsilon", self.epsilon), ("epsilon1", self.epsilon1), ("epsilon2", self.epsilon2)] {
            if !(v.is_finite() && v > 0.0) {
                return bad(key, format!("{v} must be positive and finite"));
            }
        }
        if self.epsilon2 < self.epsilon1 {
            return bad("epsilon2", format!("{} must be >= epsilon1 = {}", self.epsilon2, self.epsilon1));
        }
        if self.window < 1 {
            return bad("L", "window must be at least 1 step".into());
        }
        if self.max_steps < 1 {
            return bad("max_steps", "must be at least 1".into());
        }
        Ok(())
    }
}

/// Windowed mean of `movements` at 1-based step `i`: the last `window`
/// movements once the window has filled, otherwise all movements so far.
pub fn instability(movements: &[f64], window: usize, i: usize) -> Result<f64> {
    if i == 0 || i > movements.len() {
        return Err(Error::IndexOutOfRange { index: i, len: movements.len() });
    }
    if window == 0 {
        return Err(Error::InvalidParameter { key: "L".into(), reason: "window must be at least 1 step".into() });
    }
    let lo = i.saturating_sub(window);
    let slice = &movements[lo..i];
    Ok(slice.iter().sum::<f64>() / slice.len() as f64)
}

/// Pose sequence of one settling episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstabilityTrace {
    pub poses: Vec<RigidPose>,
    pub movements: Vec<f64>,
    pub window: usize,
    pub instabilities: Vec<f64>,
    pub converged: bool,
}

impl InstabilityTrace {
    /// One JSON object per pose: `{"step", "pose", "M", "U"}` (null at step 0).
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for (i, pose) in self.poses.iter().enumerate() {
            let (m, u) = match i {
                0 => (None, None),
                _ => (Some(self.movements[i - 1]), Some(self.instabilities[i - 1])),
            };
            let rec = serde_json::json!({ "step": i, "pose": pose, "M": m, "U": u });
            serde_json::to_writer(&mut w, &rec)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettleOutcome {
    pub final_pose: RigidPose,
    /// Facet of the support polytope in contact with the table.
    pub resting_face: Option<usize>,
    pub final_instability: f64,
    pub stable: bool,
    pub converged: bool,
    pub topples: usize,
    /// A facet was revisited, i.e. the object rolls.
    pub rolling: bool,
    /// Object-frame direction of the table's inward normal at the end.
    pub resting_direction: Vector3,
}

/// Support polytope and center of mass of a mesh, reusable across episodes.
#[derive(Debug, Clone)]
pub struct SettleModel {
    pub polytope: Polytope,
    pub com: Point3,
    pub volume: f64,
}

/// Facets whose normal is within this angle (radians) of the down direction
/// are treated as already flush with the table.
const FLUSH_TOL: f64 = 1e-9;

impl SettleModel {
    pub fn new(mesh: &TriMesh) -> Result<Self> {
        let mp = mesh.mass_properties()?;
        let polytope = Polytope::from_points(&mesh.vertices)?;
        Ok(Self { polytope, com: mp.com, volume: mp.volume })
    }

    /// Distance from the COM to the farthest vertex.
    pub fn com_radius(&self) -> f64 {
        self.polytope.vertices.iter().map(|v| (v - self.com).norm()).fold(0.0, f64::max)
    }

    /// Pose with orientation `rotation` whose lowest hull point touches the table.
    pub fn resting_pose(&self, rotation: Rotation3<f64>, table: &TableConfig) -> RigidPose {
        let n = table.normal;
        let low = self
            .polytope
            .vertices
            .iter()
            .map(|v| n.dot(&(rotation * v.coords)))
            .fold(f64::INFINITY, f64::min);
        RigidPose::new(rotation, -n * low)
    }

    /// Facet the object first lands on from `pose`.
    fn landing_facet(&self, pose: &RigidPose, table: &TableConfig) -> usize {
        let down = pose.rotation.inverse() * -table.normal;
        let (best, dot) = self
            .polytope
            .facets
            .iter()
            .enumerate()
            .map(|(i, f)| (i, f.normal.dot(&down)))
            .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
        if dot >= 1.0 - FLUSH_TOL {
            best
        } else {
            self.polytope.ray_facet(&self.com, &down)
        }
    }

    /// Rotate (about the COM) so `facet` is flush with the table and translate
    /// it onto the table plane.
    fn snap(&self, pose: &RigidPose, facet: usize, table: &TableConfig) -> RigidPose {
        let f = &self.polytope.facets[facet];
        let world_n = pose.rotation * f.normal;
        let q = rotation_between(&world_n, &-table.normal);
        let com_w = pose.apply(&self.com);
        let rotated = pose.rotated_about(&q, &com_w);
        self.place_on_facet(rotated, facet, table)
    }

    fn place_on_facet(&self, pose: RigidPose, facet: usize, table: &TableConfig) -> RigidPose {
        let f = &self.polytope.facets[facet];
        let p = pose.apply(&self.polytope.vertices[f.boundary[0]]);
        pose.translated(&(-table.normal * table.normal.dot(&p.coords)))
    }

    /// Run one settling episode from `start`.
    pub fn settle(
        &self,
        start: &RigidPose,
        table: &TableConfig,
        params: &SettleParams,
    ) -> Result<(SettleOutcome, InstabilityTrace)> {
        params.validate()?;
        let gravity_w = -Vector3::z();
        let mut poses = vec![*start];
        let mut movements = Vec::new();
        let mut instabilities = Vec::new();
        let mut visited = HashSet::new();
        let mut rolling = false;
        let mut topples = 0;
        let mut at_rest = false;

        let mut facet = self.landing_facet(start, table);
        let mut pose = self.snap(start, facet, table);
        visited.insert(facet);
        let mut converged = false;
        let mut u = f64::INFINITY;

        for i in 1..=params.max_steps {
            if i > 1 && !at_rest {
                let g = pose.rotation.inverse() * gravity_w;
                match self.polytope.topple_step(facet, &self.com, &g) {
                    ToppleStep::Stable => at_rest = true,
                    ToppleStep::Topple { edge, to } => {
                        pose = self.topple(&pose, facet, edge, to, table);
                        facet = to;
                        topples += 1;
                        if !visited.insert(to) {
                            rolling = true;
                        }
                    }
                }
            }
            let prev = poses.last().expect("non-empty");
            movements.push(pose_delta(&pose, prev));
            poses.push(pose);
            u = instability(&movements, params.window, i)?;
            instabilities.push(u);
            if at_rest && u < params.epsilon {
                converged = true;
                break;
            }
        }

        let g = pose.rotation.inverse() * gravity_w;
        let inside = matches!(self.polytope.topple_step(facet, &self.com, &g), ToppleStep::Stable);
        let outcome = SettleOutcome {
            final_pose: pose,
            resting_face: Some(facet),
            final_instability: u,
            stable: u < params.epsilon1 && inside,
            converged,
            topples,
            rolling,
            resting_direction: pose.rotation.inverse() * -table.normal,
        };
        let trace = InstabilityTrace { poses, movements, window: params.window, instabilities, converged };
        Ok((outcome, trace))
    }

    /// Tip about boundary edge `edge` of `from` until `to` lies on the table.
    fn topple(&self, pose: &RigidPose, from: usize, edge: usize, to: usize, table: &TableConfig) -> RigidPose {
        let (a, b) = self.polytope.edge_points(from, edge);
        let (aw, bw) = (pose.apply(&a), pose.apply(&b));
        let n_to = pose.rotation * self.polytope.facets[to].normal;
        let axis = Unit::new_normalize(bw - aw);
        // Signed angle about the edge axis taking n_to onto -normal.
        let target = -table.normal;
        let x = n_to - axis.into_inner() * axis.dot(&n_to);
        let y = target - axis.into_inner() * axis.dot(&target);
        let angle = axis.dot(&x.cross(&y)).atan2(x.dot(&y));
        let q = Rotation3::from_axis_angle(&axis, angle);
        let tipped = pose.rotated_about(&q, &aw);
        self.place_on_facet(tipped, to, table)
    }

    /// Offset start pose for orientation `rotation`, COM above the table
    /// by the farthest-vertex radius plus a small clearance.
    pub fn drop_pose(&self, rotation: Rotation3<f64>, table: &TableConfig) -> RigidPose {
        let h = self.com_radius() * 1.1;
        RigidPose::new(rotation, table.normal * h - rotation * self.com.coords)
    }
}

/// Settle `mesh` from `start`.
pub fn settle(
    mesh: &TriMesh,
    start: &RigidPose,
    table: &TableConfig,
    params: &SettleParams,
) -> Result<(SettleOutcome, InstabilityTrace)> {
    SettleModel::new(mesh)?.settle(start, table, params)
}

/// Orientations at the cell centers of a `subdivisions³` roll/pitch/yaw grid,
/// each angle over a full turn, composed as `Rx(roll) · Ry(pitch) · Rz(yaw)`.
pub fn euler_grid(subdivisions: usize) -> Vec<Rotation3<f64>> {
    let s = subdivisions;
    let angle = |k: usize| (k as f64 + 0.5) * std::f64::consts::TAU / s as f64;
    let mut out = Vec::with_capacity(s * s * s);
    for r in 0..s {
        for p in 0..s {
            for y in 0..s {
                let rx = Rotation3::from_axis_angle(&Vector3::x_axis(), angle(r));
                let ry = Rotation3::from_axis_angle(&Vector3::y_axis(), angle(p));
                let rz = Rotation3::from_axis_angle(&Vector3::z_axis(), angle(y));
                out.push(rx * ry * rz);
            }
        }
    }
    out
}

/// Drop `mesh` onto a flat table from every grid orientation. Results are in
/// grid order regardless of scheduling.
pub fn drop_grid(mesh: &TriMesh, params: &SettleParams, subdivisions: usize) -> Result<Vec<SettleOutcome>> {
    if subdivisions < 1 {
        return Err(Error::InvalidParameter { key: "subdivisions".into(), reason: "must be at least 1".into() });
    }
    let model = SettleModel::new(mesh)?;
    let table = TableConfig::flat();
    euler_grid(subdivisions)
        .into_par_iter()
        .map(|r| model.settle(&model.drop_pose(r, &table), &table, params).map(|(o, _)| o))
        .collect()
}
