//! JSON experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::criteria::{CriterionKind, DEFAULT_RCOND};
use crate::error::{Error, Result};
use crate::fit::OptimizerConfig;
use crate::qhbm::{CircuitSpec, EbmSpec, Gate, QhbmModel, StateFamily};
use crate::rng::{derive_seed, rng_from_seed, uniform_range};

/// A model given by name (`"M1"`, `"M2"`) or by explicit structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelConfig {
    Named(String),
    Explicit(ExplicitModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitModel {
    pub name: String,
    pub nodes: usize,
    pub gates: Vec<Gate>,
}

impl ModelConfig {
    pub fn build(&self) -> Result<QhbmModel> {
        match self {
            ModelConfig::Named(name) => QhbmModel::by_name(name),
            ModelConfig::Explicit(m) => {
                QhbmModel::new(m.name.clone(), EbmSpec::new(m.nodes)?, CircuitSpec::new(m.nodes, m.gates.clone())?)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum ParamSource {
    Explicit(Vec<f64>),
    Random(RandomParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomParams {
    /// Defaults to a stream derived from `master_seed`.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_range")]
    pub range: [f64; 2],
}

fn default_range() -> [f64; 2] {
    [-1.0, 1.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrueModelConfig {
    pub model: ModelConfig,
    pub params: ParamSource,
}

/// Settings for the Monte-Carlo validation subcommands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidationConfig {
    /// Indices of the true model's parameters left free; the rest stay at θ0.
    pub free_params: Vec<usize>,
    pub replications: usize,
    pub n_shots: usize,
    /// Extra sample sizes for the bias sweep.
    pub bias_sweep: Vec<usize>,
    /// Sample sizes and seed count for the consistency check.
    pub consistency_shots: Vec<usize>,
    pub consistency_seeds: usize,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            free_params: vec![0],
            replications: 500,
            n_shots: 10_000,
            bias_sweep: vec![1_000],
            consistency_shots: vec![100, 1_000, 10_000],
            consistency_seeds: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_qubits")]
    pub qubits: usize,
    pub true_model: TrueModelConfig,
    pub candidate_models: Vec<ModelConfig>,
    #[serde(default = "default_shots")]
    pub n_shots: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default = "default_criteria")]
    pub criteria: Vec<CriterionKind>,
    pub master_seed: u64,
    #[serde(default = "default_rcond")]
    pub rcond: f64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_grad_tol")]
    pub grad_tol: f64,
    /// Optional box `|θ_i| ≤ param_bound` for every fit; absent means unconstrained.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub param_bound: Option<f64>,
    #[serde(default)]
    pub validation: ValidationConfig,
}

fn default_qubits() -> usize {
    3
}
fn default_shots() -> usize {
    1000
}
fn default_trials() -> usize {
    50
}
fn default_restarts() -> usize {
    5
}
fn default_criteria() -> Vec<CriterionKind> {
    CriterionKind::ALL.to_vec()
}
fn default_rcond() -> f64 {
    DEFAULT_RCOND
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_max_iter() -> usize {
    OptimizerConfig::default().max_iter
}
fn default_grad_tol() -> f64 {
    OptimizerConfig::default().grad_tol
}

fn invalid(field: &str, message: impl Into<String>) -> Error {
    Error::Config {
        field: field.into(),
        message: message.into(),
    }
}

impl ExperimentConfig {
    /// The two-model, three-qubit setup with a random M1 true state.
    pub fn standard(master_seed: u64) -> Self {
        Self {
            qubits: 3,
            true_model: TrueModelConfig {
                model: ModelConfig::Named("M1".into()),
                params: ParamSource::Random(RandomParams {
                    seed: None,
                    range: default_range(),
                }),
            },
            candidate_models: vec![ModelConfig::Named("M1".into()), ModelConfig::Named("M2".into())],
            n_shots: default_shots(),
            trials: default_trials(),
            restarts: default_restarts(),
            criteria: default_criteria(),
            master_seed,
            rcond: DEFAULT_RCOND,
            output_dir: default_output_dir(),
            max_iter: default_max_iter(),
            grad_tol: default_grad_tol(),
            param_bound: None,
            validation: ValidationConfig::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(invalid("trials", "must be at least 1"));
        }
        if self.n_shots == 0 {
            return Err(invalid("n_shots", "must be at least 1"));
        }
        if self.candidate_models.is_empty() {
            return Err(invalid("candidate_models", "must not be empty"));
        }
        if self.restarts == 0 {
            return Err(invalid("restarts", "must be at least 1"));
        }
        if self.criteria.is_empty() {
            return Err(invalid("criteria", "must not be empty"));
        }
        if !(self.rcond >= 0.0 && self.rcond < 1.0) {
            return Err(invalid("rcond", "must lie in [0, 1)"));
        }
        if self.max_iter == 0 {
            return Err(invalid("max_iter", "must be at least 1"));
        }
        if self.grad_tol.is_nan() || self.grad_tol <= 0.0 {
            return Err(invalid("grad_tol", "must be positive"));
        }
        if let Some(b) = self.param_bound {
            if !(b > 0.0 && b.is_finite()) {
                return Err(invalid("param_bound", "must be positive and finite"));
            }
        }
        let truth = self.true_model.model.build().map_err(|e| invalid("true_model.model", e.to_string()))?;
        if truth.qubits() != self.qubits {
            return Err(invalid("true_model.model", format!("acts on {} qubits, config says {}", truth.qubits(), self.qubits)));
        }
        match &self.true_model.params {
            ParamSource::Explicit(v) if v.len() != truth.num_params() => {
                return Err(invalid(
                    "true_model.params",
                    format!("has {} values, model has {} parameters", v.len(), truth.num_params()),
                ));
            }
            ParamSource::Random(r) if r.range[0].is_nan() || r.range[1].is_nan() || r.range[0] >= r.range[1] => {
                return Err(invalid("true_model.params.random.range", "low must be below high"));
            }
            _ => {}
        }
        let mut names = Vec::new();
        for (k, m) in self.candidate_models.iter().enumerate() {
            let model = m.build().map_err(|e| invalid(&format!("candidate_models[{k}]"), e.to_string()))?;
            if model.qubits() != self.qubits {
                return Err(invalid(&format!("candidate_models[{k}]"), "qubit count differs from `qubits`"));
            }
            if names.contains(&model.name().to_string()) {
                return Err(invalid(&format!("candidate_models[{k}]"), format!("duplicate name {}", model.name())));
            }
            names.push(model.name().to_string());
        }
        let v = &self.validation;
        if v.free_params.is_empty() || v.free_params.iter().any(|&i| i >= truth.num_params()) {
            return Err(invalid("validation.free_params", "indices must be non-empty and within the true model"));
        }
        if v.replications < 2 {
            return Err(invalid("validation.replications", "must be at least 2"));
        }
        if v.n_shots == 0 || v.bias_sweep.contains(&0) || v.consistency_shots.contains(&0) {
            return Err(invalid("validation", "sample sizes must be positive"));
        }
        if v.consistency_seeds == 0 {
            return Err(invalid("validation.consistency_seeds", "must be at least 1"));
        }
        Ok(())
    }

    pub fn optimizer(&self) -> OptimizerConfig {
        OptimizerConfig {
            restarts: self.restarts,
            max_iter: self.max_iter,
            grad_tol: self.grad_tol,
            bound: self.param_bound,
            ..OptimizerConfig::default()
        }
    }

    pub fn true_model(&self) -> Result<QhbmModel> {
        self.true_model.model.build()
    }

    pub fn candidates(&self) -> Result<Vec<QhbmModel>> {
        self.candidate_models.iter().map(ModelConfig::build).collect()
    }

    /// θ0 of the true state.
    pub fn true_params(&self) -> Result<Vec<f64>> {
        let p = self.true_model()?.num_params();
        Ok(match &self.true_model.params {
            ParamSource::Explicit(v) => v.clone(),
            ParamSource::Random(r) => {
                let seed = r.seed.unwrap_or_else(|| derive_seed(self.master_seed, u64::MAX));
                let mut rng = rng_from_seed(seed);
                (0..p).map(|_| uniform_range(&mut rng, r.range[0], r.range[1])).collect()
            }
        })
    }

    pub fn needs_likelihood_fit(&self) -> bool {
        self.criteria.iter().any(|k| k.uses_likelihood_fit())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_config_round_trips() {
        let cfg = ExperimentConfig::standard(7);
        cfg.validate().unwrap();
        let back = ExperimentConfig::from_json(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(cfg.true_params().unwrap().len(), 9);
        assert_eq!(cfg.true_params().unwrap(), back.true_params().unwrap());
    }

    #[test]
    fn minimal_json_uses_defaults() {
        let cfg = ExperimentConfig::from_json(
            r#"{"true_model": {"model": "M1", "params": {"random": {}}},
                "candidate_models": ["M1", "M2"], "master_seed": 1}"#,
        )
        .unwrap();
        assert_eq!(cfg.n_shots, 1000);
        assert_eq!(cfg.trials, 50);
        assert_eq!(cfg.restarts, 5);
        assert_eq!(cfg.criteria.len(), 7);
    }

    #[test]
    fn explicit_model_and_params() {
        let cfg = ExperimentConfig::from_json(
            r#"{"qubits": 2,
                "true_model": {"model": {"name": "T", "nodes": 2,
                    "gates": [{"gate": "ry", "qubit": 0, "param": 0},
                              {"gate": "cnot", "control": 0, "target": 1},
                              {"gate": "ry", "qubit": 1, "param": 1}]},
                  "params": {"explicit": [0.1, 0.2, 0.3, 0.4, 0.5]}},
                "candidate_models": [{"name": "A", "nodes": 2, "gates": []}],
                "master_seed": 3}"#,
        )
        .unwrap();
        assert_eq!(cfg.true_params().unwrap(), vec![0.1, 0.2, 0.3, 0.4, 0.5]);
        assert_eq!(cfg.candidates().unwrap()[0].num_params(), 3);
    }

    #[test]
    fn errors_name_the_field() {
        let base = r#""true_model": {"model": "M1", "params": {"random": {}}}, "master_seed": 1"#;
        let cases = [
            (format!(r#"{{{base}, "candidate_models": []}}"#), "candidate_models"),
            (format!(r#"{{{base}, "candidate_models": ["M1"], "trials": 0}}"#), "trials"),
            (format!(r#"{{{base}, "candidate_models": ["M1"], "n_shots": 0}}"#), "n_shots"),
            (format!(r#"{{{base}, "candidate_models": ["M9"]}}"#), "candidate_models[0]"),
            (format!(r#"{{{base}, "candidate_models": ["M1"], "bogus": 1}}"#), "bogus"),
        ];
        for (json, field) in cases {
            let err = ExperimentConfig::from_json(&json).unwrap_err().to_string();
            assert!(err.contains(field), "{err} should mention {field}");
        }
        let wrong_len = r#"{"true_model": {"model": "M1", "params": {"explicit": [1.0]}},
            "candidate_models": ["M1"], "master_seed": 1}"#;
        assert!(ExperimentConfig::from_json(wrong_len).unwrap_err().to_string().contains("true_model.params"));
    }
}
