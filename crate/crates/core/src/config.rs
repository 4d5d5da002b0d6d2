//! TOML configuration file. Unknown keys are rejected.
//!
//! ```toml
//! [validator]
//! terminators = ["."]
//! allow_leading_quote = true
//! min_tokens = 1
//!
//! [detector]
//! compound_connectors = [", and ", "; "]
//! complex_connectors = ["because ", "when "]
//!
//! [labels]
//! subjects = ["nsubj", "nsubjpass"]
//! objects = ["dobj", "pobj"]
//! compounds = ["compound"]
//! normalization = { "obj" = "dobj" }
//!
//! [scorer]
//! model = "model.txt"        # or: endpoint = "127.0.0.1:7000"
//! threshold = 0.5
//! timeout_secs = 30
//! neural_enabled = true
//!
//! [parser]
//! command = "python3 scripts/parse.py"
//! timeout_secs = 120
//! batch_size = 64
//!
//! [runtime]
//! jobs = 4
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Deserialize;
use thiserror::Error;

use crate::ingest::ParserAdapterConfig;
use crate::pipeline::{PipelineConfig, ScorerSelection};
use crate::scorer::ScorerEndpoint;
use crate::types::{ConnectorCatalogue, LabelPolicy};

pub const DEFAULT_SCORER_TIMEOUT: Duration = Duration::from_secs(30);
pub const DEFAULT_PARSER_TIMEOUT: Duration = Duration::from_secs(120);
pub const DEFAULT_PARSER_BATCH: usize = 64;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config syntax: {0}")]
    Syntax(String),
    #[error("config value: {0}")]
    Invalid(String),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub validator: ValidatorSection,
    #[serde(default)]
    pub detector: DetectorSection,
    #[serde(default)]
    pub labels: LabelSection,
    #[serde(default)]
    pub scorer: ScorerSection,
    pub parser: Option<ParserSection>,
    #[serde(default)]
    pub runtime: RuntimeSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidatorSection {
    pub terminators: Option<Vec<String>>,
    pub allow_leading_quote: Option<bool>,
    pub min_tokens: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSection {
    pub compound_connectors: Option<Vec<String>>,
    pub complex_connectors: Option<Vec<String>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelSection {
    pub subjects: Option<Vec<String>>,
    pub objects: Option<Vec<String>>,
    pub compounds: Option<Vec<String>>,
    pub normalization: Option<BTreeMap<String, String>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScorerSection {
    pub model: Option<PathBuf>,
    pub endpoint: Option<String>,
    pub threshold: Option<f64>,
    pub timeout_secs: Option<f64>,
    pub neural_enabled: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParserSection {
    pub command: String,
    pub timeout_secs: Option<f64>,
    pub batch_size: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuntimeSection {
    pub jobs: Option<usize>,
}

fn seconds(v: Option<f64>, default: Duration) -> Result<Duration, ConfigError> {
    match v {
        None => Ok(default),
        Some(s) => Duration::try_from_secs_f64(s)
            .ok()
            .filter(|d| !d.is_zero())
            .ok_or_else(|| ConfigError::Invalid(format!("timeout must be positive, got {s}"))),
    }
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Applies the file on top of the defaults. Relative model paths are
    /// resolved against `base_dir`.
    pub fn into_pipeline_config(self, base_dir: Option<&Path>) -> Result<PipelineConfig, ConfigError> {
        let mut cfg = PipelineConfig::default();
        let invalid = |e: &dyn std::fmt::Display| ConfigError::Invalid(e.to_string());

        let v = self.validator;
        if let Some(terms) = v.terminators {
            let mut set = std::collections::BTreeSet::new();
            for t in &terms {
                let mut chars = t.chars();
                match (chars.next(), chars.next()) {
                    (Some(c), None) => {
                        set.insert(c);
                    }
                    _ => return Err(ConfigError::Invalid(format!("terminator {t:?} is not a single character"))),
                }
            }
            if set.is_empty() {
                return Err(ConfigError::Invalid("terminator set is empty".into()));
            }
            cfg.surface.terminators = set;
        }
        if let Some(q) = v.allow_leading_quote {
            cfg.surface.allow_leading_quote = q;
        }
        if let Some(n) = v.min_tokens {
            if n == 0 {
                return Err(ConfigError::Invalid("min_tokens must be at least 1".into()));
            }
            cfg.surface.min_tokens = n;
        }

        let d = self.detector;
        if d.compound_connectors.is_some() || d.complex_connectors.is_some() {
            let compound = d
                .compound_connectors
                .unwrap_or_else(|| cfg.catalogue.compound().to_vec());
            let complex = d
                .complex_connectors
                .unwrap_or_else(|| cfg.catalogue.complex().to_vec());
            cfg.catalogue = ConnectorCatalogue::new(&compound, &complex).map_err(|e| invalid(&e))?;
        }

        let l = self.labels;
        if l.subjects.is_some() || l.objects.is_some() || l.compounds.is_some() || l.normalization.is_some() {
            let base = &cfg.policy;
            let subjects = l.subjects.unwrap_or_else(|| base.subjects().iter().cloned().collect());
            let objects = l.objects.unwrap_or_else(|| base.objects().iter().cloned().collect());
            let compounds = l.compounds.unwrap_or_else(|| base.compounds().iter().cloned().collect());
            let normalization = l.normalization.unwrap_or_else(|| base.normalization().clone());
            cfg.policy = LabelPolicy::new(subjects, objects, compounds, normalization).map_err(|e| invalid(&e))?;
        }

        let s = self.scorer;
        let timeout = seconds(s.timeout_secs, DEFAULT_SCORER_TIMEOUT)?;
        cfg.scorer = match (s.model, s.endpoint) {
            (Some(_), Some(_)) => {
                return Err(ConfigError::Invalid("scorer.model and scorer.endpoint are mutually exclusive".into()))
            }
            (Some(path), None) => {
                let path = match base_dir {
                    Some(dir) if path.is_relative() => dir.join(path),
                    _ => path,
                };
                ScorerSelection::Builtin(path)
            }
            (None, Some(spec)) => ScorerSelection::Remote(ScorerEndpoint::parse(&spec, timeout).map_err(|e| invalid(&e))?),
            (None, None) => ScorerSelection::None,
        };
        if let Some(t) = s.threshold {
            if !(t > 0.0 && t < 1.0) {
                return Err(ConfigError::Invalid(format!("threshold must lie in (0, 1), got {t}")));
            }
            cfg.threshold = Some(t);
        }
        cfg.neural_enabled = s
            .neural_enabled
            .unwrap_or(cfg.scorer != ScorerSelection::None);
        if cfg.neural_enabled && cfg.scorer == ScorerSelection::None {
            return Err(ConfigError::Invalid("neural_enabled requires scorer.model or scorer.endpoint".into()));
        }

        if let Some(p) = self.parser {
            let timeout = seconds(p.timeout_secs, DEFAULT_PARSER_TIMEOUT)?;
            cfg.parser = Some(
                ParserAdapterConfig::from_command_line(&p.command, timeout, p.batch_size.unwrap_or(DEFAULT_PARSER_BATCH))
                    .map_err(|e| invalid(&e))?,
            );
        }

        if let Some(j) = self.runtime.jobs {
            if j == 0 {
                return Err(ConfigError::Invalid("jobs must be at least 1".into()));
            }
            cfg.jobs = j;
        }
        Ok(cfg)
    }
}
