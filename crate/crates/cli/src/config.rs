//! Experiment configuration files and command-line overrides.

use std::path::{Path, PathBuf};

use osiris_core::estimators::EstimatorKind;
use osiris_core::relevance::RelevanceConfig;
use serde::{Deserialize, Serialize};

use crate::environments::EnvChoice;
use crate::error::{CliError, Result};

/// Draw counts of the diagnostics checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnosticsConfig {
    pub omitted_draws: usize,
    pub bias_draws: usize,
    pub identity_draws: usize,
    pub proposition_draws: usize,
    /// Nested subset sizes for the weight-length propositions.
    pub subset_sizes: Vec<usize>,
    /// Trials pooled for the weight-length correlation.
    pub correlation_trials: usize,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            omitted_draws: 200_000,
            bias_draws: 100_000,
            identity_draws: 500_000,
            proposition_draws: 200_000,
            subset_sizes: vec![1, 3, 6],
            correlation_trials: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub env: EnvChoice,
    pub estimators: Vec<EstimatorKind>,
    pub n_trials: usize,
    pub batch_size: usize,
    /// Batch sizes of the consistency sweep.
    pub batch_sizes: Vec<usize>,
    pub alphas: Vec<f64>,
    pub seed: u64,
    pub relevance: RelevanceConfig,
    pub output_dir: PathBuf,
    pub diagnostics: DiagnosticsConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            env: EnvChoice::DillyDallying,
            estimators: vec![
                EstimatorKind::Mc,
                EstimatorKind::Is,
                EstimatorKind::Wis,
                EstimatorKind::Pdis,
                EstimatorKind::Osiris,
                EstimatorKind::Osirwis,
            ],
            n_trials: 200,
            batch_size: 25,
            batch_sizes: vec![10, 25, 50, 100],
            alphas: vec![0.05],
            seed: 0,
            relevance: RelevanceConfig::default(),
            output_dir: PathBuf::from("results"),
            diagnostics: DiagnosticsConfig::default(),
        }
    }
}

/// Flag values that replace config fields when given.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub batch_size: Option<usize>,
    pub alphas: Option<Vec<f64>>,
    pub env: Option<EnvChoice>,
    pub out: Option<PathBuf>,
    pub batch_sizes: Option<Vec<usize>>,
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        serde_path_to_error::deserialize(de).map_err(|e| CliError::Schema {
            path: path.to_path_buf(),
            message: format!("at {}: {}", e.path(), e.inner()),
        })
    }

    pub fn apply(mut self, o: Overrides) -> Self {
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = o.trials {
            self.n_trials = v;
        }
        if let Some(v) = o.batch_size {
            self.batch_size = v;
        }
        if let Some(v) = o.alphas {
            self.alphas = v;
        }
        if let Some(v) = o.env {
            self.env = v;
        }
        if let Some(v) = o.out {
            self.output_dir = v;
        }
        if let Some(v) = o.batch_sizes {
            self.batch_sizes = v;
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.n_trials == 0 {
            return bad("n_trials must be at least 1".into());
        }
        if self.batch_size == 0 || self.batch_sizes.contains(&0) {
            return bad("batch sizes must be positive".into());
        }
        if self.estimators.is_empty() {
            return bad("no estimators requested".into());
        }
        if self.alphas.is_empty() {
            return bad("no alpha values given".into());
        }
        if let Some(a) = self.alphas.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return bad(format!("alpha {a} outside [0, 1]"));
        }
        self.relevance.validate()?;
        if self.diagnostics.subset_sizes.windows(2).any(|w| w[0] > w[1]) {
            return bad("diagnostics.subset_sizes must be non-decreasing".into());
        }
        Ok(())
    }

    /// Relevance settings at one significance level.
    pub fn relevance_at(&self, alpha: f64) -> RelevanceConfig {
        RelevanceConfig {
            alpha,
            ..self.relevance
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        ExperimentConfig::default().validate().unwrap();
    }

    #[test]
    fn partial_file_fills_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(
            &path,
            r#"{"env": "express", "estimators": ["is", "osiris"], "relevance": {"test": "smirnov"}}"#,
        )
        .unwrap();
        let cfg = ExperimentConfig::from_file(&path).unwrap();
        assert_eq!(cfg.env, EnvChoice::Express);
        assert_eq!(cfg.estimators, vec![EstimatorKind::Is, EstimatorKind::Osiris]);
        assert_eq!(cfg.relevance.min_samples_per_side, 2);
        assert_eq!(cfg.n_trials, 200);
    }

    #[test]
    fn unknown_fields_are_rejected_with_path() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"relevance": {"alpah": 0.1}}"#).unwrap();
        let err = ExperimentConfig::from_file(&path).unwrap_err().to_string();
        assert!(err.contains("relevance"), "{err}");
    }

    #[test]
    fn invalid_values_are_rejected() {
        let cfg = ExperimentConfig {
            n_trials: 0,
            ..ExperimentConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = ExperimentConfig::default().apply(Overrides {
            alphas: Some(vec![1.5]),
            ..Overrides::default()
        });
        assert!(cfg.validate().is_err());
    }
}
