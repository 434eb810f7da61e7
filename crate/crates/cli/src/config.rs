//! Experiment configuration files and their schema.

use std::fs;
use std::path::{Path, PathBuf};

use feedopt::experiments::{MonteCarloSettings, RideshareSettings, SimulateSettings, TrackingSettings};
use feedopt::{Error, EstimationMethod, Result};
use serde::Deserialize;
use serde_json::Value;

/// Published schema every configuration file is checked against.
pub const SCHEMA: &str = include_str!("../schema/config.schema.json");

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default)]
pub struct RideshareSection {
    pub graph_file: Option<String>,
    pub demand_file: Option<String>,
    #[serde(flatten)]
    pub settings: RideshareSettings,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default)]
pub struct EstimateSection {
    pub u: Option<String>,
    pub y: Option<String>,
    pub w: Option<String>,
    pub method: Option<EstimationMethod>,
    pub nu: Option<usize>,
    pub block: Option<usize>,
    pub excitation_order: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default)]
pub struct SimulateSection {
    pub system: Option<String>,
    pub input_file: Option<String>,
    #[serde(flatten)]
    pub settings: SimulateSettings,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub experiment: Option<String>,
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub output_dir: Option<String>,
    pub montecarlo: MonteCarloSettings,
    pub tracking: TrackingSettings,
    pub rideshare: RideshareSection,
    pub estimate: EstimateSection,
    pub simulate: SimulateSection,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Messages of every schema violation, empty when the document is valid.
pub fn schema_violations(instance: &Value) -> Vec<String> {
    let schema: Value = serde_json::from_str(SCHEMA).expect("bundled schema is valid JSON");
    let validator = jsonschema::validator_for(&schema).expect("bundled schema compiles");
    validator
        .iter_errors(instance)
        .map(|e| {
            let at = e.instance_path().to_string();
            if at.is_empty() {
                e.to_string()
            } else {
                format!("{at}: {e}")
            }
        })
        .collect()
}

impl ExperimentConfig {
    pub fn parse_str(text: &str, base_dir: &Path) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::Config(format!("not valid JSON: {e}")))?;
        let violations = schema_violations(&value);
        if !violations.is_empty() {
            return Err(Error::Config(format!("schema violations: {}", violations.join("; "))));
        }
        let mut cfg: ExperimentConfig = serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse_str(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Resolve a path from the file against the config's directory.
    pub fn resolve(&self, p: &str) -> PathBuf {
        let p = Path::new(p);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// The `experiment` field, if present, must name the running command.
    pub fn expect_experiment(&self, name: &str) -> Result<()> {
        match &self.experiment {
            Some(e) if e != name => Err(Error::Config(format!(
                "config is for experiment `{e}`, but `{name}` was requested"
            ))),
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_valid() {
        let cfg = ExperimentConfig::parse_str("{}", Path::new(".")).unwrap();
        assert_eq!(cfg.tracking, TrackingSettings::default());
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        for text in [
            r#"{"trials": 0}"#,
            r#"{"bogus": 1}"#,
            r#"{"tracking": {"kappa": 1.5}}"#,
            r#"{"montecarlo": {"sizes": [40]}}"#,
            r#"{"estimate": {"method": "magic"}}"#,
            r#"{"simulate": {"disturbance": {"kind": "constant"}}}"#,
        ] {
            let err = ExperimentConfig::parse_str(text, Path::new(".")).unwrap_err();
            assert!(matches!(err, Error::Config(_)), "{text}");
            assert_eq!(err.exit_code(), 2);
        }
    }

    #[test]
    fn sections_deserialize() {
        let text = r#"{
            "experiment": "simulate",
            "montecarlo": {"sizes": [1, 2], "method": "constant-noise", "radius": [0.2, 0.5]},
            "simulate": {"system": "sys.json", "horizon": 5,
                         "disturbance": {"kind": "iid-bounded", "center": [0], "half_width": [0.1], "seed": 3}},
            "rideshare": {"graph_file": "g.json", "rho": 0.2, "day": {"peak_total": 2}}
        }"#;
        let cfg = ExperimentConfig::parse_str(text, Path::new("/cfg")).unwrap();
        assert_eq!(cfg.montecarlo.sizes, vec![1, 2]);
        assert_eq!(cfg.montecarlo.method, EstimationMethod::ConstantNoise);
        assert_eq!(cfg.simulate.settings.horizon, 5);
        assert_eq!(cfg.rideshare.settings.rho, 0.2);
        assert_eq!(cfg.rideshare.settings.day.peak_total, 2.0);
        assert_eq!(cfg.resolve("g.json"), PathBuf::from("/cfg/g.json"));
        assert!(cfg.expect_experiment("tracking").is_err());
    }
}
