use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sublinear::{GConfig, Lattice, LatticeParams, TerminalSpec, DEFAULT_MEMORY_CAP};
use crate::yosida::{GeneratorConfig, GeneratorSpec, DEFAULT_TOL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    pub horizon: f64,
    pub steps: usize,
    pub sigma_lo: f64,
    pub sigma_hi: f64,
    pub m_vol: usize,
    pub truncation_factor: f64,
    #[serde(default = "default_refinement")]
    pub refinement: usize,
    #[serde(default = "default_memory_cap")]
    pub memory_cap: u64,
}

fn default_refinement() -> usize {
    1
}

fn default_memory_cap() -> u64 {
    DEFAULT_MEMORY_CAP
}

impl LatticeConfig {
    pub fn g(&self) -> Result<GConfig> {
        GConfig::new(self.sigma_lo, self.sigma_hi)
    }

    pub fn build(&self) -> Result<Lattice> {
        Lattice::build(
            LatticeParams::new(self.horizon, self.steps, self.g()?, self.m_vol, self.truncation_factor)
                .refinement(self.refinement)
                .memory_cap(self.memory_cap),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_tol")]
    pub root: f64,
    #[serde(default = "default_tol")]
    pub picard: f64,
}

fn default_tol() -> f64 {
    DEFAULT_TOL
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            root: DEFAULT_TOL,
            picard: DEFAULT_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityConfig {
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,
    /// Perturbation direction `η`.
    #[serde(default = "default_perturbation")]
    pub perturbation: TerminalSpec,
}

fn default_epsilons() -> Vec<f64> {
    vec![1e-1, 1e-2, 1e-3]
}

fn default_perturbation() -> TerminalSpec {
    TerminalSpec::Constant { value: 1.0 }
}

impl Default for StabilityConfig {
    fn default() -> Self {
        StabilityConfig {
            epsilons: default_epsilons(),
            perturbation: default_perturbation(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    /// Samples per inequality in the Yosida audit.
    #[serde(default = "default_audit_samples")]
    pub audit_samples: usize,
    /// Samples for the generator assumption checks.
    #[serde(default = "default_audit_samples")]
    pub validation_samples: usize,
    /// Simulated paths per `α` in the norm audit.
    #[serde(default = "default_paths")]
    pub paths: usize,
}

fn default_audit_samples() -> usize {
    10_000
}

fn default_paths() -> usize {
    2_000
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            audit_samples: default_audit_samples(),
            validation_samples: default_audit_samples(),
            paths: default_paths(),
        }
    }
}

/// One experiment, read from a single JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub lattice: LatticeConfig,
    pub generator: GeneratorConfig,
    pub terminal: TerminalSpec,
    #[serde(default = "default_alpha_schedule")]
    pub alpha_schedule: Vec<f64>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub stability: StabilityConfig,
    #[serde(default)]
    pub sampling: SamplingConfig,
}

fn default_alpha_schedule() -> Vec<f64> {
    vec![1e-1, 3e-2, 1e-2, 3e-3, 1e-3]
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn config_error(path: &str, message: impl Into<String>) -> Error {
    Error::Config {
        path: path.to_string(),
        message: message.into(),
        suggestion: None,
    }
}

impl RunConfig {
    /// Checks everything serde cannot: orderings, signs and the lattice and
    /// generator constructors.
    pub fn validate(&self) -> Result<()> {
        if self.alpha_schedule.is_empty() {
            return Err(config_error("alpha_schedule", "must not be empty"));
        }
        if let Some(bad) = self.alpha_schedule.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
            return Err(config_error("alpha_schedule", format!("entries must be positive, got {bad}")));
        }
        if self.alpha_schedule.windows(2).any(|w| w[1] >= w[0]) {
            return Err(config_error("alpha_schedule", "must be strictly decreasing"));
        }
        for (name, v) in [("tolerances.root", self.tolerances.root), ("tolerances.picard", self.tolerances.picard)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(config_error(name, format!("must be positive, got {v}")));
            }
        }
        if let Some(bad) = self.stability.epsilons.iter().find(|e| !(**e >= 0.0 && e.is_finite())) {
            return Err(config_error("stability.epsilons", format!("entries must be non-negative, got {bad}")));
        }
        self.lattice.build().map_err(|e| config_error("lattice", e.to_string()))?;
        let spec = GeneratorSpec::from_config(&self.generator).map_err(|e| config_error("generator", e.to_string()))?;
        spec.validate_rates(self.lattice.horizon)
            .map_err(|e| config_error("generator", e.to_string()))?;
        Ok(())
    }

    pub fn generator_spec(&self) -> Result<GeneratorSpec> {
        GeneratorSpec::from_config(&self.generator)
    }

    pub fn build_lattice(&self) -> Result<Lattice> {
        self.lattice.build()
    }
}

/// Backticked identifiers in a serde message, in order.
fn backticked(message: &str) -> Vec<&str> {
    message.split('`').skip(1).step_by(2).collect()
}

fn suggest(unknown: &str, candidates: &[&str]) -> Option<String> {
    candidates
        .iter()
        .map(|c| (strsim::jaro_winkler(unknown, c), *c))
        .filter(|(score, _)| *score >= 0.8)
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, c)| c.to_string())
}

/// Strict parse of a config document, then [`RunConfig::validate`].
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let message = e.inner().to_string();
        let suggestion = if message.starts_with("unknown field") || message.starts_with("unknown variant") {
            let names = backticked(&message);
            names.split_first().and_then(|(unknown, rest)| suggest(unknown, rest))
        } else {
            None
        };
        Error::Config { path, message, suggestion }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "lattice": {"horizon": 1, "steps": 20, "sigma_lo": 0.5, "sigma_hi": 1, "m_vol": 3, "truncation_factor": 5},
        "generator": {"driver": {"kind": "zero"}, "u": {"kind": "constant", "value": 0}, "h": {"kind": "constant", "value": 0}, "lipschitz_z": 0, "m_bound": 0},
        "terminal": {"kind": "quadratic"}
    }"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.lattice.refinement, 1);
        assert_eq!(cfg.alpha_schedule, vec![1e-1, 3e-2, 1e-2, 3e-3, 1e-3]);
        assert_eq!(cfg.tolerances, Tolerances::default());
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.output_dir, PathBuf::from("out"));
        assert_eq!(cfg.stability.epsilons, vec![1e-1, 1e-2, 1e-3]);
    }

    #[test]
    fn round_trips() {
        let cfg = parse_config(MINIMAL).unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(parse_config(&text).unwrap(), cfg);
    }

    #[test]
    fn non_decreasing_schedule_is_rejected() {
        let text = MINIMAL.replacen('{', r#"{"alpha_schedule": [0.1, 0.2],"#, 1);
        match parse_config(&text).unwrap_err() {
            Error::Config { path, .. } => assert_eq!(path, "alpha_schedule"),
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn misspelled_field_gets_suggestion() {
        let text = MINIMAL.replacen('{', r#"{"alpha_shedule": [0.1],"#, 1);
        let err = parse_config(&text).unwrap_err();
        match &err {
            Error::Config { suggestion, .. } => assert_eq!(suggestion.as_deref(), Some("alpha_schedule")),
            e => panic!("{e:?}"),
        }
        assert!(err.to_string().contains("did you mean `alpha_schedule`"));
    }

    #[test]
    fn nested_errors_carry_field_path() {
        let text = MINIMAL.replace("\"steps\": 20", "\"steps\": -3");
        match parse_config(&text).unwrap_err() {
            Error::Config { path, .. } => assert_eq!(path, "lattice.steps"),
            e => panic!("{e:?}"),
        }
        let text = MINIMAL.replace("\"m_vol\": 3", "\"m_vool\": 3");
        match parse_config(&text).unwrap_err() {
            Error::Config { suggestion, .. } => assert_eq!(suggestion.as_deref(), Some("m_vol")),
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn bad_tolerance_is_rejected() {
        let text = MINIMAL.replacen('{', r#"{"tolerances": {"root": 0},"#, 1);
        match parse_config(&text).unwrap_err() {
            Error::Config { path, .. } => assert_eq!(path, "tolerances.root"),
            e => panic!("{e:?}"),
        }
    }
}
