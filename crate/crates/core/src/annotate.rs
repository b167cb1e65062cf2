//! Stable-plane annotation: grid drops, direction clustering, support masks
//! and tilted-table verification.

use nalgebra::Rotation3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{rotation_between, RigidPose, TriMesh, Vector3};
use crate::settle::{drop_grid, SettleModel, SettleOutcome, SettleParams, TableConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClusterParams {
    /// DBSCAN neighborhood radius, degrees.
    pub eps_deg: f64,
    pub min_pts: usize,
}

impl Default for ClusterParams {
    fn default() -> Self {
        Self { eps_deg: 10.0, min_pts: 3 }
    }
}

impl ClusterParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_deg > 0.0 && self.eps_deg < 180.0) {
            return Err(Error::InvalidParameter { key: "eps_deg".into(), reason: format!("{} outside (0, 180)", self.eps_deg) });
        }
        if self.min_pts < 1 {
            return Err(Error::InvalidParameter { key: "min_pts".into(), reason: "must be at least 1".into() });
        }
        Ok(())
    }
}

/// Everything that controls annotation of one mesh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnnotateParams {
    pub settle: SettleParams,
    pub cluster: ClusterParams,
    /// Grid intervals per Euler angle.
    pub subdivisions: usize,
    /// Height fraction of the support band.
    pub band: f64,
    pub tilt_deg: f64,
    pub azimuths: usize,
}

impl Default for AnnotateParams {
    fn default() -> Self {
        Self {
            settle: SettleParams::default(),
            cluster: ClusterParams::default(),
            subdivisions: 8,
            band: 0.05,
            tilt_deg: 10.0,
            azimuths: 8,
        }
    }
}

impl AnnotateParams {
    pub fn validate(&self) -> Result<()> {
        self.settle.validate()?;
        self.cluster.validate()?;
        let bad = |key: &str, reason: String| Err(Error::InvalidParameter { key: key.into(), reason });
        if self.subdivisions < 1 {
            return bad("subdivisions", "must be at least 1".into());
        }
        if !(self.band > 0.0 && self.band <= 1.0) {
            return bad("band", format!("{} outside (0, 1]", self.band));
        }
        if !(0.0..=45.0).contains(&self.tilt_deg) {
            return bad("tilt_deg", format!("{} outside [0, 45]", self.tilt_deg));
        }
        if self.azimuths < 1 {
            return bad("azimuths", "must be at least 1".into());
        }
        Ok(())
    }
}

/// A group of drop outcomes that came to rest on the same side.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionCluster {
    /// Normalized mean resting direction (object frame).
    pub direction: Vector3,
    /// Indices into the clustered outcome list.
    pub members: Vec<usize>,
}

fn angle_between(a: &Vector3, b: &Vector3) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

/// DBSCAN over resting directions with the angular metric. Noise is dropped;
/// clusters are numbered in order of their first core point.
pub fn cluster_resting_directions(outcomes: &[SettleOutcome], eps_deg: f64, min_pts: usize) -> Vec<DirectionCluster> {
    let dirs: Vec<Vector3> = outcomes.iter().map(|o| o.resting_direction.normalize()).collect();
    let n = dirs.len();
    let eps = eps_deg.to_radians();
    let neighbors: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| angle_between(&dirs[i], &dirs[j]) <= eps).collect())
        .collect();
    const UNSEEN: usize = usize::MAX;
    const NOISE: usize = usize::MAX - 1;
    let mut label = vec![UNSEEN; n];
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        if label[i] != UNSEEN {
            continue;
        }
        if neighbors[i].len() < min_pts {
            label[i] = NOISE;
            continue;
        }
        let cid = clusters.len();
        let mut members = vec![i];
        label[i] = cid;
        let mut stack: Vec<usize> = neighbors[i].clone();
        while let Some(j) = stack.pop() {
            if label[j] == NOISE {
                label[j] = cid;
                members.push(j);
            }
            if label[j] != UNSEEN {
                continue;
            }
            label[j] = cid;
            members.push(j);
            if neighbors[j].len() >= min_pts {
                stack.extend(neighbors[j].iter().copied().filter(|&k| label[k] == UNSEEN || label[k] == NOISE));
            }
        }
        members.sort_unstable();
        clusters.push(members);
    }
    clusters
        .into_iter()
        .map(|members| {
            let sum: Vector3 = members.iter().map(|&m| dirs[m]).sum();
            let direction = sum.try_normalize(1e-9).unwrap_or(dirs[members[0]]);
            DirectionCluster { direction, members }
        })
        .collect()
}

/// Vertices in the lowest `band` fraction of the height when the mesh rests
/// with `direction` pointing down.
pub fn extract_support_mask(mesh: &TriMesh, direction: &Vector3, band: f64) -> Result<Vec<bool>> {
    let d = direction.normalize();
    let heights: Vec<f64> = mesh.vertices.iter().map(|v| -d.dot(&v.coords)).collect();
    let lo = heights.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = heights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scale = mesh.vertices.iter().map(|v| v.coords.amax()).fold(0.0, f64::max).max(1e-300);
    if hi - lo <= 1e-12 * scale {
        return Err(Error::DegenerateExtent);
    }
    let cut = lo + band * (hi - lo);
    Ok(heights.iter().map(|&h| h <= cut).collect())
}

/// A verified resting plane of a mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StablePlane {
    /// Outward (downward when resting) unit normal, object frame.
    pub normal: Vector3,
    /// Mesh vertex indices inside the support band.
    pub support_vertices: Vec<usize>,
    pub cluster_size: usize,
    pub rep_pose: RigidPose,
    /// Fraction of grid drops that ended on this plane.
    pub score: f64,
}

/// Starting pose on `table` with `direction` pointing into it.
pub fn pose_on_plane(model: &SettleModel, direction: &Vector3, table: &TableConfig) -> RigidPose {
    let r: Rotation3<f64> = table.frame() * rotation_between(direction, &-Vector3::z());
    model.resting_pose(r, table)
}

/// Settle from `direction` on a table tilted by `tilt_deg` at `azimuths`
/// evenly spaced azimuths; every episode must stop below `epsilon2` without
/// leaving the plane (resting direction within `eps_deg`).
pub fn tilt_verify_model(
    model: &SettleModel,
    direction: &Vector3,
    tilt_deg: f64,
    azimuths: usize,
    eps_deg: f64,
    params: &SettleParams,
) -> Result<bool> {
    for k in 0..azimuths {
        let table = TableConfig::tilted(tilt_deg, 360.0 * k as f64 / azimuths as f64)?;
        let start = pose_on_plane(model, direction, &table);
        let (o, _) = model.settle(&start, &table, params)?;
        let ok = o.converged
            && o.final_instability < params.epsilon2
            && angle_between(&o.resting_direction, direction).to_degrees() <= eps_deg;
        if !ok {
            return Ok(false);
        }
    }
    Ok(true)
}

/// [`tilt_verify_model`] at the default 10° and 8 azimuths.
pub fn tilt_verify(mesh: &TriMesh, plane: &StablePlane, params: &SettleParams) -> Result<bool> {
    let d = AnnotateParams::default();
    tilt_verify_model(&SettleModel::new(mesh)?, &plane.normal, d.tilt_deg, d.azimuths, d.cluster.eps_deg, params)
}

/// Tool version, seed and configuration fingerprint attached to artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    #[serde(default)]
    pub config_hash: String,
    /// Effective configuration the artifact was produced with.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generated_at: Option<String>,
}

impl Provenance {
    pub fn new(seed: u64) -> Self {
        Self {
            tool: "stableplace".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed,
            config_hash: String::new(),
            config: None,
            generated_at: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub object_id: String,
    pub mesh: String,
    pub params: AnnotateParams,
    pub planes: Vec<StablePlane>,
    pub no_stable_planes: bool,
    pub provenance: Provenance,
}

impl AnnotationRecord {
    /// Facets verified as planes, by normal.
    pub fn normals(&self) -> Vec<Vector3> {
        self.planes.iter().map(|p| p.normal).collect()
    }
}

/// Drop, cluster, mask and verify. `mesh_ref` is stored verbatim.
pub fn annotate(mesh: &TriMesh, object_id: &str, mesh_ref: &str, params: &AnnotateParams) -> Result<AnnotationRecord> {
    params.validate()?;
    mesh.check_closed()?;
    let model = SettleModel::new(mesh)?;
    let outcomes = drop_grid(mesh, &params.settle, params.subdivisions)?;
    let total = outcomes.len();
    let stable: Vec<SettleOutcome> =
        outcomes.into_iter().filter(|o| o.stable && o.final_instability < params.settle.epsilon1).collect();
    let clusters = cluster_resting_directions(&stable, params.cluster.eps_deg, params.cluster.min_pts);

    let mut planes: Vec<StablePlane> = Vec::new();
    for c in clusters {
        let verified = tilt_verify_model(
            &model,
            &c.direction,
            params.tilt_deg,
            params.azimuths,
            params.cluster.eps_deg,
            &params.settle,
        )?;
        if !verified {
            continue;
        }
        let mask = extract_support_mask(mesh, &c.direction, params.band)?;
        let rep = c
            .members
            .iter()
            .copied()
            .min_by(|&a, &b| {
                let da = angle_between(&stable[a].resting_direction, &c.direction);
                let db = angle_between(&stable[b].resting_direction, &c.direction);
                da.total_cmp(&db).then(a.cmp(&b))
            })
            .expect("clusters are non-empty");
        planes.push(StablePlane {
            normal: c.direction,
            support_vertices: mask.iter().enumerate().filter_map(|(i, &m)| m.then_some(i)).collect(),
            cluster_size: c.members.len(),
            rep_pose: stable[rep].final_pose,
            score: c.members.len() as f64 / total as f64,
        });
    }
    planes.sort_by_key(|p| std::cmp::Reverse(p.cluster_size));

    // Keep planes pairwise separated by at least the clustering radius.
    let mut kept: Vec<StablePlane> = Vec::new();
    for p in planes {
        if kept.iter().all(|k| angle_between(&k.normal, &p.normal).to_degrees() >= params.cluster.eps_deg) {
            kept.push(p);
        }
    }
    Ok(AnnotationRecord {
        object_id: object_id.to_string(),
        mesh: mesh_ref.to_string(),
        params: *params,
        no_stable_planes: kept.is_empty(),
        planes: kept,
        provenance: Provenance::new(crate::seed::seed_from_str(object_id)),
    })
}
