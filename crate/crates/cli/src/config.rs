//! Scenario and sweep configuration files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use slngeo::blockdiag::{BlockState, Preset};
use slngeo::integrate::IntegratorOptions;
use slngeo::SquareMatrix;

use crate::error::CliError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputSpec {
    pub format: Format,
    /// File name, resolved against `--out` when given.
    pub path: Option<PathBuf>,
}

impl OutputSpec {
    pub fn resolve(&self, out_dir: Option<&Path>, default_stem: &str) -> PathBuf {
        let file = self
            .path
            .clone()
            .unwrap_or_else(|| PathBuf::from(format!("{default_stem}.{}", self.format.extension())));
        match out_dir {
            Some(dir) => dir.join(file),
            None => file,
        }
    }
}

/// Initial data, tagged by `family`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    CustomPhase {
        a: SquareMatrix,
        adot: SquareMatrix,
    },
    CustomReduced {
        beta: SquareMatrix,
        omega: SquareMatrix,
        zeta: SquareMatrix,
    },
    /// `B (I + tM)`.
    Linear { b: SquareMatrix, m: SquareMatrix },
    /// `B e^{tC}`, integrated from `(B, BC)`.
    Exponential { b: SquareMatrix, c: SquareMatrix },
    Blockdiag { state: BlockState },
    Preset { preset: Preset },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::CustomPhase { .. } => "custom_phase",
            Family::CustomReduced { .. } => "custom_reduced",
            Family::Linear { .. } => "linear",
            Family::Exponential { .. } => "exponential",
            Family::Blockdiag { .. } => "blockdiag",
            Family::Preset { .. } => "preset",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    #[serde(flatten)]
    pub family: Family,
    /// Expected dimension; checked against the data when given.
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub integrator: IntegratorOptions,
    /// Integration window; must contain the initial time 0.
    #[serde(default)]
    pub t_span: Option<(f64, f64)>,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepKind {
    /// Random phase-space states; `dims` lists `n`.
    Phase,
    /// Random block states; `dims` lists the number of blocks.
    Block,
}

fn default_sigma() -> f64 {
    0.3
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub kind: SweepKind,
    pub dims: Vec<usize>,
    /// Scenarios per entry of `dims`.
    pub count: usize,
    pub t_end: f64,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    /// Odd block states (with a 1x1 tail) for `kind = block`.
    #[serde(default)]
    pub odd: bool,
    /// Falls back to `SLNGEO_SEED`, then to 0.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub integrator: IntegratorOptions,
    #[serde(default)]
    pub output: OutputSpec,
}

pub fn load<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("malformed config {}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_config_parses_with_defaults() {
        let c: ScenarioConfig = serde_json::from_str(r#"{"family": "preset", "preset": "fig1"}"#).unwrap();
        assert_eq!(c.family, Family::Preset { preset: Preset::Fig1 });
        assert_eq!(c.integrator, IntegratorOptions::default());
        assert_eq!(c.output.resolve(None, "fig1"), PathBuf::from("fig1.csv"));
    }

    #[test]
    fn matrices_and_options_parse() {
        let c: ScenarioConfig = serde_json::from_str(
            r#"{
                "family": "linear",
                "b": [[1, 0], [0, 1]],
                "m": [[0, 1], [0, 0]],
                "integrator": {"rel_tol": 1e-9, "dt_out": 0.5},
                "t_span": [-1, 2],
                "output": {"format": "json", "path": "line.json"}
            }"#,
        )
        .unwrap();
        assert_eq!(c.integrator.rel_tol, 1e-9);
        assert_eq!(c.integrator.abs_tol, IntegratorOptions::default().abs_tol);
        assert_eq!(c.t_span, Some((-1.0, 2.0)));
        assert_eq!(c.output.format, Format::Json);
        assert!(serde_json::from_str::<ScenarioConfig>(r#"{"family": "linear", "b": [[1, 0]], "m": [[0]]}"#).is_err());
        assert!(serde_json::from_str::<ScenarioConfig>(r#"{"family": "spiral"}"#).is_err());
    }
}
