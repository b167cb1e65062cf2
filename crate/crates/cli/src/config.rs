//! Tool configuration: TOML or JSON, defaults for absent keys, unknown keys
//! rejected, every section validated on load.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use stableplace_core::annotate::{AnnotateParams, ClusterParams};
use stableplace_core::baselines::RansacParams;
use stableplace_core::bench::{BenchConfig, Regime};
use stableplace_core::planner::PlannerParams;
use stableplace_core::settle::SettleParams;
use stableplace_core::viewsynth::{AugmentConfig, CameraConfig};
use stableplace_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{}:{line}:{column}: parse error: {message}", path.display())]
    Parse { path: PathBuf, line: usize, column: usize, message: String },
    #[error("invalid value for `{key}`: {reason}")]
    Validation { key: String, reason: String },
    #[error("cannot read {}: {source}", path.display())]
    Read { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnnotateSection {
    pub subdivisions: usize,
    pub band: f64,
    pub tilt_deg: f64,
    pub azimuths: usize,
}

impl Default for AnnotateSection {
    fn default() -> Self {
        let d = AnnotateParams::default();
        Self { subdivisions: d.subdivisions, band: d.band, tilt_deg: d.tilt_deg, azimuths: d.azimuths }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlannerSection {
    pub tau: f64,
    pub bandwidth: Option<f64>,
    pub feature_bandwidth: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for PlannerSection {
    fn default() -> Self {
        let d = PlannerParams::default();
        Self { tau: d.tau, bandwidth: d.bandwidth, feature_bandwidth: d.feature_bandwidth, max_iter: d.max_iter, tol: d.tol }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchSection {
    pub trials: usize,
    pub regime: Regime,
    pub points: usize,
    pub tilt_deg: f64,
    pub success_deg: f64,
    pub transfer_tol: f64,
    pub min_visible_points: usize,
}

impl Default for BenchSection {
    fn default() -> Self {
        let d = BenchConfig::default();
        Self {
            trials: d.trials,
            regime: d.regime,
            points: d.points,
            tilt_deg: d.tilt_deg,
            success_deg: d.success_deg,
            transfer_tol: d.transfer_tol,
            min_visible_points: d.min_visible_points,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ToolConfig {
    pub seed: u64,
    /// Worker threads; `None` lets the pool decide.
    pub threads: Option<usize>,
    pub settle: SettleParams,
    pub cluster: ClusterParams,
    pub annotate: AnnotateSection,
    pub ransac: RansacParams,
    pub planner: PlannerSection,
    pub augment: AugmentConfig,
    pub camera: CameraConfig,
    pub bench: BenchSection,
}

fn in_section(section: &str, e: CoreError) -> ConfigError {
    match e {
        CoreError::InvalidParameter { key, reason } => ConfigError::Validation { key: format!("{section}.{key}"), reason },
        other => ConfigError::Validation { key: section.to_string(), reason: other.to_string() },
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

impl ToolConfig {
    pub fn annotate_params(&self) -> AnnotateParams {
        AnnotateParams {
            settle: self.settle,
            cluster: self.cluster,
            subdivisions: self.annotate.subdivisions,
            band: self.annotate.band,
            tilt_deg: self.annotate.tilt_deg,
            azimuths: self.annotate.azimuths,
        }
    }

    pub fn planner_params(&self) -> PlannerParams {
        let p = &self.planner;
        PlannerParams {
            tau: p.tau,
            bandwidth: p.bandwidth,
            feature_bandwidth: p.feature_bandwidth,
            max_iter: p.max_iter,
            tol: p.tol,
            ransac: self.ransac,
        }
    }

    pub fn bench_config(&self) -> BenchConfig {
        let b = &self.bench;
        BenchConfig {
            trials: b.trials,
            regime: b.regime,
            seed: self.seed,
            points: b.points,
            tilt_deg: b.tilt_deg,
            success_deg: b.success_deg,
            transfer_tol: b.transfer_tol,
            min_visible_points: b.min_visible_points,
            settle: self.settle,
            camera: self.camera,
            ransac: self.ransac,
            planner: self.planner_params(),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.threads == Some(0) {
            return Err(ConfigError::Validation { key: "threads".into(), reason: "must be at least 1".into() });
        }
        self.settle.validate().map_err(|e| in_section("settle", e))?;
        self.cluster.validate().map_err(|e| in_section("cluster", e))?;
        let mut a = self.annotate_params();
        a.settle = SettleParams::default();
        a.cluster = ClusterParams::default();
        a.validate().map_err(|e| in_section("annotate", e))?;
        self.ransac.validate().map_err(|e| in_section("ransac", e))?;
        let mut p = self.planner_params();
        p.ransac = RansacParams::default();
        p.validate().map_err(|e| in_section("planner", e))?;
        self.augment.validate().map_err(|e| in_section("augment", e))?;
        self.camera.validate().map_err(|e| in_section("camera", e))?;
        let mut b = self.bench_config();
        b.settle = SettleParams::default();
        b.camera = CameraConfig::default();
        b.ransac = RansacParams::default();
        b.planner = PlannerParams::default();
        b.validate().map_err(|e| in_section("bench", e))
    }

    /// Parse TOML, or JSON when the text starts with `{`.
    pub fn parse(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let cfg: ToolConfig = if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| ConfigError::Parse {
                path: path.to_path_buf(),
                line: e.line(),
                column: e.column(),
                message: e.to_string(),
            })?
        } else {
            toml::from_str(text).map_err(|e| {
                let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
                ConfigError::Parse { path: path.to_path_buf(), line, column, message: e.message().to_string() }
            })?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        Self::parse(&text, path)
    }

    pub fn to_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(&self.to_value()).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<ToolConfig, ConfigError> {
        ToolConfig::parse(s, Path::new("cfg.toml"))
    }

    #[test]
    fn empty_is_default() {
        assert_eq!(parse("").unwrap(), ToolConfig::default());
        assert_eq!(parse("{}").unwrap(), ToolConfig::default());
    }

    #[test]
    fn validation_names_key() {
        let e = parse("[settle]\nL = 0\n").unwrap_err();
        assert!(matches!(&e, ConfigError::Validation { key, .. } if key == "settle.L"), "{e}");
        assert!(e.to_string().contains("settle.L"));
        let e = parse("[bench]\ntrials = 0\n").unwrap_err();
        assert!(matches!(&e, ConfigError::Validation { key, .. } if key == "bench.trials"), "{e}");
    }

    #[test]
    fn unknown_key_reports_position() {
        let e = parse("seed = 1\n[settle]\nwindow = 3\n").unwrap_err();
        match e {
            ConfigError::Parse { line, column, .. } => assert_eq!((line, column), (3, 1)),
            other => panic!("{other}"),
        }
        let e = ToolConfig::parse("{\n  \"seed\": \"x\"\n}", Path::new("c.json")).unwrap_err();
        assert!(matches!(e, ConfigError::Parse { line: 2, .. }), "{e}");
    }

    #[test]
    fn values_round_trip_and_change_hash() {
        let c = parse("[settle]\nepsilon1 = 5e-4\n").unwrap();
        assert_eq!(c.settle.epsilon1, 5e-4);
        assert_eq!(c.to_value()["settle"]["epsilon1"], serde_json::json!(5e-4));
        assert_ne!(c.hash(), ToolConfig::default().hash());
        assert_eq!(c.hash(), parse("[settle]\nepsilon1 = 0.0005\n").unwrap().hash());
    }
}
