//! TOML configuration for the `cocr` binary.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distill::DistillConfig;
use crate::eval::CaseMode;
use crate::pipeline::Method;
use crate::reconstruct::{BackendKind, LlmBackendConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Read { path: String, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub method: Method,
    /// Records processed concurrently.
    pub max_in_flight: usize,
    /// One reconstruction call over all documents' concepts.
    pub pooled: bool,
    /// Drop records whose documents never contain a gold answer.
    pub screen: bool,
    /// Text-to-AMR endpoint for documents without an `amr` field.
    pub amr_endpoint: Option<String>,
    pub amr_timeout_secs: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            method: Method::Cocr,
            max_in_flight: 4,
            pooled: false,
            screen: false,
            amr_endpoint: None,
            amr_timeout_secs: 60.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub case_mode: CaseMode,
    /// Inclusive `[start, end]` range of K integrated for the AUC.
    pub interval: (u32, u32),
    /// Label used for the model column of summaries.
    pub model: String,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            case_mode: CaseMode::Insensitive,
            interval: (1, 8),
            model: "model".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub distill: DistillConfig,
    /// Backend used for concept reconstruction, keywords and summaries.
    pub reconstructor: LlmBackendConfig,
    /// Backend used to answer the final question.
    pub answerer: LlmBackendConfig,
    pub run: RunConfig,
    pub eval: EvalConfig,
    /// Optional stoplist file, one label per line, replacing the default.
    pub stoplist_file: Option<PathBuf>,
}

impl Default for AppConfig {
    fn default() -> Self {
        AppConfig {
            distill: DistillConfig::default(),
            reconstructor: LlmBackendConfig::mock(BackendKind::MockConceptEcho),
            answerer: LlmBackendConfig::mock(BackendKind::MockFactsEcho),
            run: RunConfig::default(),
            eval: EvalConfig::default(),
            stoplist_file: None,
        }
    }
}

impl AppConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: AppConfig = toml::from_str(text).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a config file. Relative `stoplist_file` paths resolve against
    /// the config file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let (Some(stop), Some(dir)) = (&cfg.stoplist_file, path.parent()) {
            if stop.is_relative() {
                cfg.stoplist_file = Some(dir.join(stop));
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.distill
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        for (name, b) in [("reconstructor", &self.reconstructor), ("answerer", &self.answerer)] {
            b.validate()
                .map_err(|e| ConfigError::Invalid(format!("{name}: {e}")))?;
        }
        if self.run.max_in_flight == 0 {
            return Err(ConfigError::Invalid("run.max_in_flight must be positive".into()));
        }
        let (start, end) = self.eval.interval;
        if start >= end {
            return Err(ConfigError::Invalid(format!(
                "eval.interval must satisfy start < end, got [{start}, {end}]"
            )));
        }
        Ok(())
    }

    /// Distillation settings with the stoplist file applied.
    pub fn resolved_distill(&self) -> Result<DistillConfig, ConfigError> {
        match &self.stoplist_file {
            None => Ok(self.distill.clone()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| ConfigError::Read {
                    path: p.display().to_string(),
                    message: e.to_string(),
                })?;
                Ok(self.distill.clone().with_stoplist_text(&text))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_default() {
        assert_eq!(AppConfig::from_toml_str("").unwrap(), AppConfig::default());
    }

    #[test]
    fn sections_parse() {
        let cfg = AppConfig::from_toml_str(
            r#"
            [run]
            method = "keywords"
            pooled = true
            [eval]
            interval = [2, 6]
            case_mode = "exact"
            [answerer]
            kind = "mock-fixed"
            fixed_response = "Texas"
            [distill]
            frequent_threshold = 0.5
            "#,
        )
        .unwrap();
        assert_eq!(cfg.run.method, Method::Keywords);
        assert!(cfg.run.pooled);
        assert_eq!(cfg.eval.interval, (2, 6));
        assert_eq!(cfg.eval.case_mode, CaseMode::Exact);
        assert_eq!(cfg.answerer.fixed_response, "Texas");
        assert_eq!(cfg.distill.frequent_threshold, 0.5);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(AppConfig::from_toml_str("[eval]\ninterval = [5, 5]").is_err());
        assert!(AppConfig::from_toml_str("[run]\nmax_in_flight = 0").is_err());
        assert!(AppConfig::from_toml_str("[answerer]\nkind = \"http\"").is_err());
        assert!(AppConfig::from_toml_str("bogus = 1").is_err());
    }
}
