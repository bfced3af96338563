//! JSON experiment configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use expflow::{FlowKind, ProblemDescriptor, Profile, StepControl};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemRef,
    pub system: FlowKind,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub init: Option<InitConfig>,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Seeds the default initial point and the operator audit.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
}

/// A registry name or an inline descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProblemRef {
    Name(String),
    Inline(ProblemDescriptor),
}

/// A scalar parameter given as a number or as a profile object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Number(f64),
    Profile(Profile),
}

impl ParamValue {
    pub fn profile(&self) -> Profile {
        match self {
            ParamValue::Number(v) => Profile::constant(*v),
            ParamValue::Profile(p) => p.clone(),
        }
    }

    pub fn number(&self, what: &str) -> Result<f64, CliError> {
        match self {
            ParamValue::Number(v) => Ok(*v),
            ParamValue::Profile(Profile::Constant { value }) => Ok(*value),
            ParamValue::Profile(_) => Err(CliError::Config(format!("{what} must be a constant for this system"))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[serde(default)]
    pub alpha: Option<ParamValue>,
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub lambda: Option<ParamValue>,
    #[serde(default)]
    pub gamma: Option<ParamValue>,
    /// Lower bound `ᾱ` of a time-varying `α` (second-order gradient system).
    #[serde(default)]
    pub alpha_lower: Option<f64>,
    /// Margin used when the second-order gradient constants are suggested.
    #[serde(default)]
    pub epsilon: Option<f64>,
    // Accepted only so the error can say why they are refused.
    #[serde(default, skip_serializing)]
    pub rho: Option<serde_json::Value>,
    #[serde(default, skip_serializing)]
    pub beta: Option<serde_json::Value>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitConfig {
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    #[serde(default)]
    pub v0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepMode {
    #[default]
    Adaptive,
    Fixed,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    /// Defaults to `ln(1e10)/r` for certified decay exponent `r`.
    #[serde(default)]
    pub t_end: Option<f64>,
    #[serde(default)]
    pub mode: StepMode,
    #[serde(default)]
    pub rel_tol: Option<f64>,
    #[serde(default)]
    pub abs_tol: Option<f64>,
    /// Step size in fixed mode.
    #[serde(default)]
    pub h: Option<f64>,
    #[serde(default)]
    pub samples: Option<usize>,
}

impl IntegratorConfig {
    pub fn control(&self) -> Result<StepControl, CliError> {
        match self.mode {
            StepMode::Adaptive => {
                if self.h.is_some() {
                    return Err(CliError::Config("integrator.h applies to fixed mode only".into()));
                }
                let StepControl::Adaptive { rel_tol, abs_tol } = StepControl::default() else {
                    unreachable!("default control is adaptive")
                };
                Ok(StepControl::Adaptive {
                    rel_tol: self.rel_tol.unwrap_or(rel_tol),
                    abs_tol: self.abs_tol.unwrap_or(abs_tol),
                })
            }
            StepMode::Fixed => {
                if self.rel_tol.is_some() || self.abs_tol.is_some() {
                    return Err(CliError::Config("tolerances apply to adaptive mode only".into()));
                }
                let h = self.h.ok_or_else(|| CliError::Config("fixed mode needs integrator.h".into()))?;
                Ok(StepControl::Fixed { h })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default = "default_tol_rel")]
    pub tol_rel: f64,
    #[serde(default)]
    pub tol_abs: f64,
    /// Random point pairs for the operator audit; 0 skips it.
    #[serde(default = "default_audit_pairs")]
    pub audit_pairs: usize,
}

fn default_tol_rel() -> f64 {
    1e-6
}

fn default_audit_pairs() -> usize {
    200
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { tol_rel: default_tol_rel(), tol_abs: 0.0, audit_pairs: default_audit_pairs() }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Axis {
    Values(Vec<f64>),
    Range {
        min: f64,
        max: f64,
        points: usize,
        #[serde(default)]
        scale: Scale,
    },
}

impl Axis {
    pub fn values(&self, name: &str) -> Result<Vec<f64>, CliError> {
        let bad = |why: &str| CliError::Config(format!("sweep axis '{name}': {why}"));
        match self {
            Axis::Values(v) if v.is_empty() => Err(bad("no values")),
            Axis::Values(v) => Ok(v.clone()),
            Axis::Range { min, max, points, scale } => {
                if *points == 0 || !(min <= max) || !min.is_finite() || !max.is_finite() {
                    return Err(bad("needs finite min ≤ max and points ≥ 1"));
                }
                if *scale == Scale::Log && *min <= 0.0 {
                    return Err(bad("log scale needs min > 0"));
                }
                if *points == 1 {
                    return Ok(vec![*min]);
                }
                let frac = |i: usize| i as f64 / (*points - 1) as f64;
                let last = *points - 1;
                Ok((0..*points)
                    .map(|i| match (i, scale) {
                        (0, _) => *min,
                        (i, _) if i == last => *max,
                        (i, Scale::Linear) => min + (max - min) * frac(i),
                        (i, Scale::Log) => min * (max / min).powf(frac(i)),
                    })
                    .collect())
            }
        }
    }
}

pub const SWEEP_AXES: [&str; 6] = ["alpha", "alpha_lower", "delta", "eta", "gamma", "lambda"];
pub const MAX_SWEEP_CELLS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub axes: BTreeMap<String, Axis>,
    /// Also integrate and verify every certified cell.
    #[serde(default)]
    pub simulate: bool,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        if cfg.params.rho.is_some() || cfg.params.beta.is_some() {
            return Err(CliError::Config(
                "ρ and β cannot be overridden; they are read from the problem instance".into(),
            ));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_owned(), source })?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config() {
        let cfg = ExperimentConfig::from_json(r#"{"problem": "skew-rotation", "system": "fb1"}"#).unwrap();
        assert_eq!(cfg.problem, ProblemRef::Name("skew-rotation".into()));
        assert_eq!(cfg.system, FlowKind::Fb1);
        assert_eq!(cfg.verify.tol_rel, 1e-6);
    }

    #[test]
    fn params_accept_numbers_and_profiles() {
        let cfg = ExperimentConfig::from_json(
            r#"{"problem": "quadratic-2d", "system": "fb1",
                "params": {"alpha": 0.5, "eta": 1, "lambda": {"profile": "exponential", "start": 2, "end": 1, "rate": 0.5}}}"#,
        )
        .unwrap();
        assert_eq!(cfg.params.alpha, Some(ParamValue::Number(0.5)));
        assert_eq!(
            cfg.params.lambda.unwrap().profile(),
            Profile::Exponential { start: 2.0, end: 1.0, rate: 0.5 }
        );
    }

    #[test]
    fn inline_descriptor() {
        let cfg = ExperimentConfig::from_json(
            r#"{"problem": {"kind": "skew_rotation", "rho": 2.0, "c": [1, 0]}, "system": "fb2"}"#,
        )
        .unwrap();
        assert!(matches!(cfg.problem, ProblemRef::Inline(ProblemDescriptor::SkewRotation { .. })));
    }

    #[test]
    fn rho_override_refused() {
        let err = ExperimentConfig::from_json(r#"{"problem": "skew-rotation", "system": "fb1", "params": {"rho": 2}}"#)
            .unwrap_err();
        assert!(matches!(err, CliError::Config(ref m) if m.contains("ρ and β")));
    }

    #[test]
    fn unknown_fields_refused() {
        assert!(ExperimentConfig::from_json(r#"{"problem": "x", "system": "fb1", "colour": 1}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"problem": "x", "system": "fb3"}"#).is_err());
    }

    #[test]
    fn axis_values() {
        let lin = Axis::Range { min: 0.0, max: 1.0, points: 5, scale: Scale::Linear };
        assert_eq!(lin.values("a").unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let log = Axis::Range { min: 0.01, max: 1.0, points: 3, scale: Scale::Log };
        let v = log.values("a").unwrap();
        assert!((v[1] - 0.1).abs() < 1e-15 && (v[2] - 1.0).abs() < 1e-15);
        assert!(Axis::Range { min: 0.0, max: 1.0, points: 3, scale: Scale::Log }.values("a").is_err());
    }

    #[test]
    fn step_control() {
        let fixed = IntegratorConfig { mode: StepMode::Fixed, h: Some(0.01), ..Default::default() };
        assert_eq!(fixed.control().unwrap(), StepControl::Fixed { h: 0.01 });
        let missing = IntegratorConfig { mode: StepMode::Fixed, ..Default::default() };
        assert!(missing.control().is_err());
        assert_eq!(IntegratorConfig::default().control().unwrap(), StepControl::default());
    }
}
