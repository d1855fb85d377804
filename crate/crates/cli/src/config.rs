//! Experiment files: one JSON document per run, `"schema": 1` at the top.

use std::path::{Path, PathBuf};

use pointspec::random::Ensemble;
use pointspec::spectra::EIGEN_TOLERANCE;
use pointspec::{DichotomyOptions, Problem, SearchOptions, StepControl};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, Result};

pub const SCHEMA_VERSION: u64 = 1;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<Problem>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eigs: Option<EigsBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dichotomy: Option<DichotomyBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub montecarlo: Option<MonteCarloBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degenerate: Option<DegenerateBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transfer: Option<TransferBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputBlock>,
}

/// Numerical tolerances. Every field has a default; none can be set by flag.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Integrator control for the ODE between sites.
    pub step: StepControl,
    /// Angular mismatch at or below which an energy counts as an eigenvalue.
    pub eigen: f64,
    /// Angular tolerance for matching fixed classes in the dichotomy.
    pub class: f64,
    /// Width of the final bisection bracket in the eigenvalue search.
    pub energy: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            step: StepControl::default(),
            eigen: EIGEN_TOLERANCE,
            class: DichotomyOptions::default().class_tolerance,
            energy: SearchOptions::default().energy_tolerance,
        }
    }
}

impl Tolerances {
    pub fn dichotomy(&self) -> DichotomyOptions {
        DichotomyOptions {
            eigen_tolerance: self.eigen,
            class_tolerance: self.class,
        }
    }

    pub fn search(&self) -> SearchOptions {
        SearchOptions {
            energy_tolerance: self.energy,
        }
    }

    fn validate(&self) -> Result<()> {
        self.step.validate()?;
        for (name, v) in [("eigen", self.eigen), ("class", self.class), ("energy", self.energy)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::Config(format!("tolerances.{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EigsBlock {
    pub e_lo: f64,
    pub e_hi: f64,
    pub grid: usize,
    /// Also classify every eigenvalue at every site.
    #[serde(default)]
    pub classify: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DichotomyBlock {
    pub energy: f64,
    /// Site index; all sites when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub site: Option<usize>,
}

fn default_epsilon() -> f64 {
    1e-6
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloBlock {
    pub energy: f64,
    pub ensemble: Ensemble,
    pub samples: usize,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Where to write the histogram CSV in JSON mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub histogram: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DegenerateBlock {
    pub energy: f64,
    pub thetas: Vec<f64>,
    pub rs: Vec<f64>,
    #[serde(default)]
    pub allow_non_eigenvalue: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransferMode {
    #[default]
    Matrix,
    Prufer,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferBlock {
    pub energy: f64,
    #[serde(default)]
    pub mode: TransferMode,
    /// Matrix mode: `M(x, y; E)`, defaulting to `x = b`, `y = a`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<f64>,
    /// Pruefer mode: sample spacing, default `(b - a) / 1000`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<f64>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

impl ExperimentConfig {
    pub fn load(path: &Path, degrees: bool) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
            path: path.to_owned(),
            source,
        })?;
        Self::parse(&text, degrees)
    }

    /// Parse and validate. With `degrees`, angle fields are read in degrees.
    pub fn parse(text: &str, degrees: bool) -> Result<Self> {
        let mut value: Value =
            serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        match value.get("schema").and_then(Value::as_u64) {
            Some(SCHEMA_VERSION) => {}
            Some(v) => return Err(CliError::Config(format!("unsupported schema version {v}"))),
            None => return Err(CliError::Config("missing \"schema\": 1".into())),
        }
        if degrees {
            angles_to_radians(&mut value);
        }
        let config: ExperimentConfig =
            serde_json::from_value(value).map_err(|e| CliError::Config(e.to_string()))?;
        config.tolerances.validate()?;
        if let Some(m) = &config.montecarlo {
            m.ensemble.validate()?;
        }
        Ok(config)
    }

    pub fn problem(&self) -> Result<&Problem> {
        self.problem
            .as_ref()
            .ok_or_else(|| CliError::Config("missing \"problem\" block".into()))
    }

    pub fn block<'a, T>(&self, block: &'a Option<T>, name: &str) -> Result<&'a T> {
        block
            .as_ref()
            .ok_or_else(|| CliError::Config(format!("missing \"{name}\" block")))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }
}

fn scale(v: &mut Value) {
    if let Some(x) = v.as_f64() {
        *v = Value::from(x.to_radians());
    }
}

fn angles_to_radians(root: &mut Value) {
    if let Some(p) = root.get_mut("problem") {
        for key in ["bc_left", "bc_right"] {
            if let Some(v) = p.get_mut(key) {
                scale(v);
            }
        }
        if let Some(Value::Array(sites)) = p.get_mut("interactions") {
            for s in sites {
                if let Some(v) = s.get_mut("theta") {
                    scale(v);
                }
            }
        }
    }
    if let Some(Value::Array(ts)) = root.pointer_mut("/degenerate/thetas") {
        ts.iter_mut().for_each(scale);
    }
    if let Some(e) = root.pointer_mut("/montecarlo/ensemble") {
        if e.get("target").and_then(Value::as_str) == Some("theta") {
            if let Some(Value::Array(sites)) = e.get_mut("sites") {
                for s in sites {
                    for key in ["lo", "hi", "mean", "sd", "value"] {
                        if let Some(v) = s.get_mut(key) {
                            scale(v);
                        }
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BOX: &str = r#"{"schema": 1,
        "problem": {"a": 0, "b": 3.141592653589793, "potential": {"kind": "constant", "value": 0},
                    "bc_left": 0, "bc_right": 0},
        "eigs": {"e_lo": 0.5, "e_hi": 20, "grid": 200}}"#;

    #[test]
    fn parses_and_defaults() {
        let c = ExperimentConfig::parse(BOX, false).unwrap();
        assert_eq!(c.tolerances, Tolerances::default());
        assert_eq!(c.eigs.unwrap().grid, 200);
    }

    #[test]
    fn rejects_unknown_keys_and_schema() {
        let bad = BOX.replace("\"grid\": 200", "\"grid\": 200, \"gird\": 3");
        assert!(matches!(ExperimentConfig::parse(&bad, false), Err(CliError::Config(_))));
        let v2 = BOX.replace("\"schema\": 1", "\"schema\": 2");
        assert!(ExperimentConfig::parse(&v2, false).is_err());
        let none = BOX.replace("\"schema\": 1,", "");
        assert!(ExperimentConfig::parse(&none, false).is_err());
        let tol = BOX.replace("\"schema\": 1,", "\"schema\": 1, \"tolerances\": {\"eigen\": -1},");
        assert_eq!(ExperimentConfig::parse(&tol, false).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn degrees_are_converted() {
        let text = BOX.replace("\"bc_left\": 0", "\"bc_left\": 90");
        let c = ExperimentConfig::parse(&text, true).unwrap();
        let angle = c.problem.unwrap().bc_left().angle();
        assert!((angle - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn roundtrip() {
        let c = ExperimentConfig::parse(BOX, false).unwrap();
        let again = ExperimentConfig::parse(&c.to_json(), false).unwrap();
        assert_eq!(again.problem, c.problem);
    }
}
