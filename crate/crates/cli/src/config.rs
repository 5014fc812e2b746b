//! Pipeline configuration (JSON).
//!
//! ```json
//! {
//!   "manifest": "manifest.json",
//!   "output_dir": "run",
//!   "seed": 0,
//!   "fusion": { "weight_ratio": 2.0, "order": "by_validation_accuracy" },
//!   "streams": [
//!     { "name": "rgb", "kind": "feature_svm", "features": "rgb.fmat",
//!       "encoder": { "recipe": "mean_pool" }, "svm_c": 1.0 },
//!     { "name": "flow", "kind": "raw_scores",
//!       "validation_scores": "flow.validation.scores.csv",
//!       "test_scores": "flow.test.scores.csv", "validation_accuracy": 0.6 }
//!   ]
//! }
//! ```
//!
//! Relative paths are resolved against the directory holding the config file.
//! `fusion.order` may also be `{"explicit": ["rgb", "flow"]}`.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use latefuse_core::encode::EncoderSpec;
use latefuse_core::fusion::FusionConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

fn default_c() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StreamSource {
    FeatureSvm {
        features: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        encoder: Option<EncoderSpec>,
        #[serde(default = "default_c")]
        svm_c: f64,
    },
    RawScores {
        validation_scores: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        test_scores: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamConfig {
    pub name: String,
    #[serde(flatten)]
    pub source: StreamSource,
    /// Replaces the measured validation accuracy when ordering the fusion.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub manifest: PathBuf,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub fusion: FusionConfig,
    pub streams: Vec<StreamConfig>,
}

fn data_error(path: &Path, message: impl std::fmt::Display) -> CliError {
    CliError {
        stage: "config".into(),
        kind: crate::error::ExitKind::Data,
        message: format!("{}: {message}", path.display()),
    }
}

impl PipelineConfig {
    /// Reads, validates and resolves relative paths against the file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let raw = fs::read(path).map_err(|e| data_error(path, e))?;
        let mut cfg: PipelineConfig = serde_json::from_slice(&raw).map_err(|e| data_error(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        cfg.resolve(base);
        cfg.validate().map_err(|m| data_error(path, m))?;
        Ok(cfg)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.manifest);
        fix(&mut self.output_dir);
        for s in &mut self.streams {
            match &mut s.source {
                StreamSource::FeatureSvm { features, .. } => fix(features),
                StreamSource::RawScores {
                    validation_scores,
                    test_scores,
                } => {
                    fix(validation_scores);
                    if let Some(t) = test_scores {
                        fix(t);
                    }
                }
            }
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.streams.is_empty() {
            return Err("no streams configured".into());
        }
        let mut seen = HashSet::new();
        for s in &self.streams {
            if s.name.is_empty() || s.name.contains(['/', '\\', ',']) {
                return Err(format!("invalid stream name {:?}", s.name));
            }
            if !seen.insert(s.name.as_str()) {
                return Err(format!("stream {:?} listed twice", s.name));
            }
            if let Some(a) = s.validation_accuracy {
                if !(0.0..=1.0).contains(&a) {
                    return Err(format!("stream {:?}: validation_accuracy {a} outside [0, 1]", s.name));
                }
            }
            if let StreamSource::FeatureSvm { svm_c, .. } = &s.source {
                if !(*svm_c > 0.0 && svm_c.is_finite()) {
                    return Err(format!("stream {:?}: svm_c must be positive", s.name));
                }
            }
        }
        Ok(())
    }
}
