//! Repeated-placement benchmark: object stability drift and success rate per
//! method and object.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::annotate::{AnnotationRecord, Provenance};
use crate::baselines::{bbf, chsa, rpf, Method, PlacementProposal, RansacParams};
use crate::error::{Error, Result};
use crate::geom::{geodesic_angle, PointCloud, TriMesh};
use crate::planner::{planner, PlannerParams, ScoredCloud};
use crate::seed::derive;
use crate::settle::{SettleModel, SettleParams, TableConfig};
use crate::viewsynth::{oracle_scored, render_random_view, sample_fixed, transfer_support, CameraConfig};

/// Outcome of releasing one proposal on the table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlacementResult {
    /// Accumulated geodesic rotation over the trace, degrees. `None` when
    /// no plane was proposed.
    pub rotation_drift_deg: Option<f64>,
    /// Accumulated COM travel, centimeters.
    pub translation_drift_cm: Option<f64>,
    pub stationary: bool,
    pub success: bool,
}

impl PlacementResult {
    pub fn no_plane() -> Self {
        Self { rotation_drift_deg: None, translation_drift_cm: None, stationary: false, success: false }
    }
}

/// Release `proposal` flush with `table` and settle for the full horizon.
pub fn evaluate_placement(
    model: &SettleModel,
    proposal: Option<&PlacementProposal>,
    table: &TableConfig,
    params: &SettleParams,
    success_deg: f64,
) -> Result<PlacementResult> {
    let Some(p) = proposal else {
        return Ok(PlacementResult::no_plane());
    };
    let start = model.resting_pose(table.frame() * p.rotation, table);
    let (outcome, trace) = model.settle(&start, table, params)?;
    let mut rot = 0.0;
    let mut trans = 0.0;
    for w in trace.poses.windows(2) {
        rot += geodesic_angle(&w[1].rotation, &w[0].rotation).to_degrees();
        trans += (w[1].apply(&model.com) - w[0].apply(&model.com)).norm() * 100.0;
    }
    let stationary = outcome.converged;
    Ok(PlacementResult {
        rotation_drift_deg: Some(rot),
        translation_drift_cm: Some(trans),
        stationary,
        success: stationary && rot < success_deg,
    })
}

/// [`evaluate_placement`] for a mesh.
pub fn evaluate_mesh(
    mesh: &TriMesh,
    proposal: Option<&PlacementProposal>,
    table: &TableConfig,
    params: &SettleParams,
    success_deg: f64,
) -> Result<PlacementResult> {
    evaluate_placement(&SettleModel::new(mesh)?, proposal, table, params, success_deg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Whole,
    Partial,
}

impl std::str::FromStr for Regime {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "whole" => Ok(Regime::Whole),
            "partial" => Ok(Regime::Partial),
            other => Err(Error::InvalidArgument(format!("unknown regime `{other}` (whole, partial)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    pub trials: usize,
    pub regime: Regime,
    pub seed: u64,
    /// Points per cloud handed to the methods.
    pub points: usize,
    /// Evaluation table tilt; the azimuth is drawn per trial.
    pub tilt_deg: f64,
    /// Accumulated rotation below which a stationary placement succeeds.
    pub success_deg: f64,
    /// Distance from masked mesh geometry within which a cloud point
    /// supports an annotated plane.
    pub transfer_tol: f64,
    pub min_visible_points: usize,
    pub settle: SettleParams,
    pub camera: CameraConfig,
    pub ransac: RansacParams,
    pub planner: PlannerParams,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            trials: 100,
            regime: Regime::Partial,
            seed: 0,
            points: 2048,
            tilt_deg: 10.0,
            success_deg: 10.0,
            transfer_tol: 0.005,
            min_visible_points: 3,
            settle: SettleParams::default(),
            camera: CameraConfig::default(),
            ransac: RansacParams::default(),
            planner: PlannerParams::default(),
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, reason: String| Err(Error::InvalidParameter { key: key.into(), reason });
        if self.trials < 1 {
            return bad("trials", "must be at least 1".into());
        }
        if self.points < 3 {
            return bad("points", format!("{} is below 3", self.points));
        }
        if !(0.0..90.0).contains(&self.tilt_deg) {
            return bad("tilt_deg", format!("{} outside [0, 90)", self.tilt_deg));
        }
        if !(self.success_deg > 0.0) {
            return bad("success_deg", format!("{} must be positive", self.success_deg));
        }
        if !(self.transfer_tol >= 0.0) {
            return bad("transfer_tol", format!("{} must be >= 0", self.transfer_tol));
        }
        self.settle.validate()?;
        self.camera.validate()?;
        self.ransac.validate()?;
        self.planner.validate()
    }
}

/// One annotated benchmark object.
#[derive(Debug, Clone)]
pub struct BenchObject {
    pub id: String,
    pub mesh: TriMesh,
    pub annotation: AnnotationRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub object_id: String,
    pub method: Method,
    pub trial: usize,
    pub table_azimuth_deg: f64,
    pub cloud_points: usize,
    pub no_plane: bool,
    pub result: PlacementResult,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    /// Object id, or `"all"` for aggregate rows.
    pub object_id: String,
    pub method: Method,
    pub trials: usize,
    pub successes: usize,
    pub no_plane: usize,
    /// Means over trials with a proposal.
    pub mean_rotation_deg: Option<f64>,
    pub mean_translation_cm: Option<f64>,
    pub success_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchMetadata {
    pub tool: String,
    pub version: String,
    pub regime: Regime,
    pub trials: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    pub objects: Vec<String>,
    pub success_deg: f64,
    pub tilt_deg: f64,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub metadata: BenchMetadata,
    pub rows: Vec<ReportRow>,
    pub aggregates: Vec<ReportRow>,
    pub trials: Vec<TrialRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

const NO_PLANE_NOTE: &str = "trials without a proposed plane count as failures in success rates and are excluded from drift means";

fn fold(object_id: &str, method: Method, trials: &[&TrialRecord]) -> ReportRow {
    let n = trials.len();
    let successes = trials.iter().filter(|t| t.result.success).count();
    let no_plane = trials.iter().filter(|t| t.no_plane).count();
    let mean = |f: fn(&PlacementResult) -> Option<f64>| {
        let v: Vec<f64> = trials.iter().filter_map(|t| f(&t.result)).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    };
    ReportRow {
        object_id: object_id.to_string(),
        method,
        trials: n,
        successes,
        no_plane,
        mean_rotation_deg: mean(|r| r.rotation_drift_deg),
        mean_translation_cm: mean(|r| r.translation_drift_cm),
        success_rate: if n == 0 { 0.0 } else { successes as f64 / n as f64 * 100.0 },
    }
}

impl BenchReport {
    /// Rows and aggregates are a pure fold of the trial log.
    pub fn from_trials(metadata: BenchMetadata, trials: Vec<TrialRecord>) -> Self {
        let mut rows = Vec::new();
        let mut aggregates = Vec::new();
        for &m in &metadata.methods {
            for id in &metadata.objects {
                let sel: Vec<&TrialRecord> = trials.iter().filter(|t| t.method == m && &t.object_id == id).collect();
                rows.push(fold(id, m, &sel));
            }
            let sel: Vec<&TrialRecord> = trials.iter().filter(|t| t.method == m).collect();
            aggregates.push(fold("all", m, &sel));
        }
        Self { metadata, rows, aggregates, trials, provenance: None }
    }

    pub fn aggregate(&self, method: Method) -> Option<&ReportRow> {
        self.aggregates.iter().find(|r| r.method == method)
    }

    pub fn success_rate(&self, method: Method) -> Option<f64> {
        self.aggregate(method).map(|r| r.success_rate)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn to_markdown(&self) -> String {
        let cell = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.2}"));
        let mut s = String::new();
        let _ = writeln!(
            s,
            "Regime: {:?}, trials per object: {}, seed: {}\n",
            self.metadata.regime, self.metadata.trials, self.metadata.seed
        );
        s.push_str("| Object | Method | Trials | Rotation (°) | Translation (cm) | SR (%) |\n");
        s.push_str("|---|---|---:|---:|---:|---:|\n");
        for r in self.rows.iter().chain(&self.aggregates) {
            let _ = writeln!(
                s,
                "| {} | {} | {} | {} | {} | {:.2} |",
                r.object_id,
                r.method,
                r.trials,
                cell(r.mean_rotation_deg),
                cell(r.mean_translation_cm),
                r.success_rate
            );
        }
        let _ = writeln!(s, "\nNote: {}.", self.metadata.note);
        s
    }

    pub fn to_csv(&self) -> String {
        let cell = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x}"));
        let mut s = String::from("object,method,trials,successes,no_plane,rotation_deg,translation_cm,sr_percent\n");
        for r in self.rows.iter().chain(&self.aggregates) {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                r.object_id,
                r.method,
                r.trials,
                r.successes,
                r.no_plane,
                cell(r.mean_rotation_deg),
                cell(r.mean_translation_cm),
                r.success_rate
            );
        }
        s
    }
}

fn observe(obj: &BenchObject, cfg: &BenchConfig, seed: u64) -> Result<PointCloud> {
    match cfg.regime {
        Regime::Whole => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            PointCloud::new(obj.mesh.sample_surface(cfg.points, &mut rng))
        }
        Regime::Partial => {
            let (_, view) = render_random_view(&obj.mesh, &cfg.camera, seed)?;
            sample_fixed(&view, cfg.points, derive(seed, &["sample"]))
        }
    }
}

fn propose(method: Method, cloud: &PointCloud, obj: &BenchObject, cfg: &BenchConfig, seed: u64) -> Result<PlacementProposal> {
    match method {
        Method::Chsa => chsa(cloud),
        Method::Bbf => bbf(cloud),
        Method::Rpf => rpf(cloud, &cfg.ransac, seed),
        Method::Planner => {
            let visible = transfer_support(cloud, &obj.mesh, &obj.annotation, cfg.transfer_tol, cfg.min_visible_points);
            let scored = ScoredCloud::from_labels(oracle_scored(cloud, &visible)?)?;
            planner(&scored, &cfg.planner, seed).map(|(p, _)| p)
        }
    }
}

fn run_trial(
    obj: &BenchObject,
    model: &Result<SettleModel>,
    methods: &[Method],
    cfg: &BenchConfig,
    trial: usize,
) -> Vec<TrialRecord> {
    let t = trial.to_string();
    let trial_seed = derive(cfg.seed, &[&obj.id, "trial", &t]);
    let mut rng = ChaCha8Rng::seed_from_u64(derive(trial_seed, &["table"]));
    let azimuth: f64 = rng.random_range(0.0..360.0);
    let cloud = observe(obj, cfg, derive(trial_seed, &["cloud"]));
    methods
        .iter()
        .map(|&m| {
            let mut rec = TrialRecord {
                object_id: obj.id.clone(),
                method: m,
                trial,
                table_azimuth_deg: azimuth,
                cloud_points: cloud.as_ref().map_or(0, PointCloud::len),
                no_plane: false,
                result: PlacementResult::no_plane(),
                error: None,
            };
            let evaluated = (|| -> Result<PlacementResult> {
                let cloud = cloud.as_ref().map_err(|e| Error::InvalidArgument(format!("observation: {e}")))?;
                let model = model.as_ref().map_err(|e| Error::InvalidArgument(format!("object model: {e}")))?;
                let table = TableConfig::tilted(cfg.tilt_deg, azimuth)?;
                let proposal = match propose(m, cloud, obj, cfg, derive(cfg.seed, &[&obj.id, m.as_str(), &t])) {
                    Ok(p) => Some(p),
                    Err(Error::NoPlaneFound { .. } | Error::NoStablePoints { .. }) => None,
                    Err(e) => return Err(e),
                };
                rec.no_plane = proposal.is_none();
                evaluate_placement(model, proposal.as_ref(), &table, &cfg.settle, cfg.success_deg)
            })();
            match evaluated {
                Ok(r) => rec.result = r,
                Err(e) => {
                    tracing::warn!(object = %obj.id, method = %m, trial, error = %e, "trial failed");
                    rec.error = Some(e.to_string());
                }
            }
            rec
        })
        .collect()
}

/// Run every method on `trials` observations of every object. Trials run in
/// parallel; the report does not depend on the thread count.
pub fn run_benchmark(objects: &[BenchObject], methods: &[Method], cfg: &BenchConfig) -> Result<BenchReport> {
    cfg.validate()?;
    if methods.is_empty() {
        return Err(Error::InvalidArgument("no methods given".into()));
    }
    let models: Vec<Result<SettleModel>> = objects.iter().map(|o| SettleModel::new(&o.mesh)).collect();
    let jobs: Vec<(usize, usize)> = (0..objects.len()).flat_map(|o| (0..cfg.trials).map(move |t| (o, t))).collect();
    let per_trial: Vec<Vec<TrialRecord>> =
        jobs.par_iter().map(|&(o, t)| run_trial(&objects[o], &models[o], methods, cfg, t)).collect();
    let mut trials: Vec<TrialRecord> = per_trial.into_iter().flatten().collect();
    trials.sort_by(|a, b| {
        (methods.iter().position(|&m| m == a.method), &a.object_id, a.trial).cmp(&(
            methods.iter().position(|&m| m == b.method),
            &b.object_id,
            b.trial,
        ))
    });
    let metadata = BenchMetadata {
        tool: "stableplace".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        regime: cfg.regime,
        trials: cfg.trials,
        seed: cfg.seed,
        methods: methods.to_vec(),
        objects: objects.iter().map(|o| o.id.clone()).collect(),
        success_deg: cfg.success_deg,
        tilt_deg: cfg.tilt_deg,
        note: NO_PLANE_NOTE.into(),
    };
    Ok(BenchReport::from_trials(metadata, trials))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vector3;
    use crate::shapes;
    use approx::assert_relative_eq;
    use nalgebra::{Rotation3, Unit};

    fn face_down(n: Vector3) -> PlacementProposal {
        PlacementProposal::face_down(n, 1.0, Method::Bbf)
    }

    #[test]
    fn cube_on_face_has_no_drift() {
        let cube = shapes::cuboid(1.0, 1.0, 1.0);
        let table = TableConfig::tilted(10.0, 30.0).unwrap();
        let r = evaluate_mesh(&cube, Some(&face_down(-Vector3::z())), &table, &SettleParams::default(), 10.0).unwrap();
        assert!(r.success && r.stationary);
        assert!(r.rotation_drift_deg.unwrap() < 1e-6);
        assert!(r.translation_drift_cm.unwrap() < 1e-6);
    }

    #[test]
    fn cube_tilted_five_degrees_rocks_back() {
        let cube = shapes::cuboid(1.0, 1.0, 1.0);
        let tilt = Rotation3::from_axis_angle(&Unit::new_normalize(Vector3::y()), 5f64.to_radians());
        let p = PlacementProposal { rotation: tilt, source_normal: None, confidence: 1.0, method: Method::Bbf };
        let r = evaluate_mesh(&cube, Some(&p), &TableConfig::flat(), &SettleParams::default(), 10.0).unwrap();
        assert_relative_eq!(r.rotation_drift_deg.unwrap(), 5.0, epsilon = 1e-6);
        assert!(r.success);
    }

    #[test]
    fn rod_on_end_topples_on_tilt() {
        let rod = shapes::cylinder(0.01, 0.12, 32);
        let table = TableConfig::tilted(10.0, 0.0).unwrap();
        let r = evaluate_mesh(&rod, Some(&face_down(-Vector3::z())), &table, &SettleParams::default(), 10.0).unwrap();
        assert!(r.rotation_drift_deg.unwrap() >= 80.0, "{r:?}");
        assert!(!r.success);
    }

    #[test]
    fn missing_proposal_fails() {
        let cube = shapes::cuboid(1.0, 1.0, 1.0);
        let r = evaluate_mesh(&cube, None, &TableConfig::flat(), &SettleParams::default(), 10.0).unwrap();
        assert_eq!(r, PlacementResult::no_plane());
    }

    fn record(id: &str, ok: bool, rot: Option<f64>) -> TrialRecord {
        TrialRecord {
            object_id: id.into(),
            method: Method::Rpf,
            trial: 0,
            table_azimuth_deg: 0.0,
            cloud_points: 10,
            no_plane: rot.is_none(),
            result: PlacementResult {
                rotation_drift_deg: rot,
                translation_drift_cm: rot.map(|r| r / 10.0),
                stationary: ok,
                success: ok,
            },
            error: None,
        }
    }

    #[test]
    fn report_folds_log() {
        let meta = BenchMetadata {
            tool: "stableplace".into(),
            version: "0".into(),
            regime: Regime::Whole,
            trials: 2,
            seed: 0,
            methods: vec![Method::Rpf],
            objects: vec!["a".into(), "b".into()],
            success_deg: 10.0,
            tilt_deg: 10.0,
            note: NO_PLANE_NOTE.into(),
        };
        let log = vec![record("a", true, Some(2.0)), record("a", false, None), record("b", false, Some(40.0)), record("b", true, Some(0.0))];
        let rep = BenchReport::from_trials(meta, log);
        assert_eq!(rep.rows[0].success_rate, 50.0);
        assert_eq!(rep.rows[0].mean_rotation_deg, Some(2.0));
        assert_eq!(rep.rows[0].no_plane, 1);
        assert_eq!(rep.rows[1].mean_rotation_deg, Some(20.0));
        assert_eq!(rep.aggregates[0].success_rate, 50.0);
        assert_eq!(rep.aggregates[0].trials, 4);
        assert!(rep.to_markdown().contains("| a | rpf | 2 | 2.00 | 0.20 | 50.00 |"));
        assert!(rep.to_csv().lines().nth(1).unwrap().starts_with("a,rpf,2,1,1,2,"));
    }
}
