//! JSON run configuration.
//!
//! ```json
//! {
//!   "system": { "A": [0.1, 0.2, -0.3, 0.1], "b": [1, 2], "v_min": -0.2, "v_max": 0.2,
//!               "z0": [0, 0], "t_final": 3 },
//!   "numerics": { "dt": 0.01 },
//!   "outputs": { "format": "csv", "path": "out" }
//! }
//! ```
//!
//! `A` is row-major. `numerics` and `outputs` are optional; unknown keys are rejected.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{ReachError, Result};
use crate::lti_model::{LtiProblem, NumericalSettings};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    #[serde(rename = "A")]
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub v_min: f64,
    pub v_max: f64,
    pub z0: Vec<f64>,
    pub t_final: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
    Svg,
}

impl FromStr for OutputFormat {
    type Err = ReachError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            "svg" => Ok(Self::Svg),
            other => Err(ReachError::Validation(format!("unknown format {other:?}; expected csv, json or svg"))),
        }
    }
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Csv => "csv",
            Self::Json => "json",
            Self::Svg => "svg",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Outputs {
    pub format: OutputFormat,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub system: SystemSpec,
    #[serde(default)]
    pub numerics: NumericalSettings,
    #[serde(default)]
    pub outputs: Outputs,
}

impl Config {
    /// Dimension-checked problem definition.
    pub fn problem(&self) -> Result<LtiProblem> {
        let s = &self.system;
        let n = s.b.len();
        if s.a.len() != n * n {
            return Err(ReachError::Validation(format!(
                "A has {} entries but b has length {n} (expected {})",
                s.a.len(),
                n * n
            )));
        }
        LtiProblem::new(
            DMatrix::from_row_slice(n, n, &s.a),
            DVector::from_column_slice(&s.b),
            s.v_min,
            s.v_max,
            DVector::from_column_slice(&s.z0),
            s.t_final,
            self.numerics.clone(),
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Parse and validate a configuration document.
pub fn parse_config(document: &str) -> Result<Config> {
    let config: Config = serde_json::from_str(document).map_err(|e| ReachError::Parse(e.to_string()))?;
    config.problem()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = include_str!("../fixtures/planar_oscillator.json");

    #[test]
    fn bundled_example() {
        let c = parse_config(EXAMPLE).unwrap();
        let p = c.problem().unwrap();
        assert_eq!(p.dim(), 2);
        assert_eq!(p.t_final, 3.0);
        assert_eq!((p.v_min, p.v_max), (-0.2, 0.2));
        assert_eq!(p.a[(1, 0)], -0.3);
    }

    #[test]
    fn missing_numerics_gives_defaults() {
        let doc = r#"{"system": {"A": [0, 1, 0, 0], "b": [0, 1], "v_min": -1, "v_max": 1, "z0": [0, 0], "t_final": 1}}"#;
        let c = parse_config(doc).unwrap();
        assert_eq!(c.numerics, NumericalSettings::default());
        assert_eq!(c.outputs, Outputs::default());
    }

    #[test]
    fn partial_numerics_keep_other_defaults() {
        let doc = r#"{"system": {"A": [0, 1, 0, 0], "b": [0, 1], "v_min": -1, "v_max": 1, "z0": [0, 0], "t_final": 1},
                      "numerics": {"dt": 0.005, "sphere_samples": 90}}"#;
        let c = parse_config(doc).unwrap();
        assert_eq!(c.numerics.dt, 0.005);
        assert_eq!(c.numerics.sphere_samples, Some(90));
        assert_eq!(c.numerics.sigma_grid, 200);
    }

    #[test]
    fn rejects_bad_documents() {
        let mismatch = r#"{"system": {"A": [0, 1, 0, 0], "b": [0, 1, 2], "v_min": -1, "v_max": 1, "z0": [0, 0, 0], "t_final": 1}}"#;
        assert!(matches!(parse_config(mismatch), Err(ReachError::Validation(_))));
        let swapped = r#"{"system": {"A": [0, 1, 0, 0], "b": [0, 1], "v_min": 1, "v_max": -1, "z0": [0, 0], "t_final": 1}}"#;
        assert!(matches!(parse_config(swapped), Err(ReachError::Validation(_))));
        let no_time = r#"{"system": {"A": [0, 1, 0, 0], "b": [0, 1], "v_min": -1, "v_max": 1, "z0": [0, 0], "t_final": 0}}"#;
        assert!(matches!(parse_config(no_time), Err(ReachError::Validation(_))));
        let unknown = r#"{"system": {"A": [0], "b": [1], "v_min": -1, "v_max": 1, "z0": [0], "t_final": 1}, "extra": 1}"#;
        assert!(matches!(parse_config(unknown), Err(ReachError::Parse(_))));
        let unknown_numeric = r#"{"system": {"A": [0], "b": [1], "v_min": -1, "v_max": 1, "z0": [0], "t_final": 1}, "numerics": {"typo": 1}}"#;
        assert!(matches!(parse_config(unknown_numeric), Err(ReachError::Parse(_))));
        assert!(matches!(parse_config("{not json"), Err(ReachError::Parse(_))));
        let bad_dt = r#"{"system": {"A": [0], "b": [1], "v_min": -1, "v_max": 1, "z0": [0], "t_final": 1}, "numerics": {"dt": -1}}"#;
        assert!(matches!(parse_config(bad_dt), Err(ReachError::Validation(_))));
    }

    #[test]
    fn round_trip() {
        let c = parse_config(EXAMPLE).unwrap();
        let again = parse_config(&c.to_json()).unwrap();
        assert_eq!(c, again);
        let original: serde_json::Value = serde_json::from_str(EXAMPLE).unwrap();
        let emitted: serde_json::Value = serde_json::from_str(&again.to_json()).unwrap();
        assert_eq!(original, emitted);
    }

    #[test]
    fn format_names() {
        for f in [OutputFormat::Csv, OutputFormat::Json, OutputFormat::Svg] {
            assert_eq!(f.to_string().parse::<OutputFormat>().unwrap(), f);
        }
        assert!("png".parse::<OutputFormat>().is_err());
    }
}
