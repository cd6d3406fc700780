//! Pipeline configuration: a `key = value` text file.
//!
//! Blank lines and `#` comments are ignored. Unknown keys are errors.
//! Relative paths resolve against the directory of the config file. Later
//! assignments win, so command-line overrides are applied with
//! [`PipelineConfig::set`] after loading.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::actions::{ActionLabel, ReliabilityTable};
use crate::align::AlignConfig;
use crate::classifier::TrainConfig;
use crate::corpus::{CorpusError, LexicalResources};
use crate::relations::ScorerConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown config key {0:?}")]
    UnknownKey(String),
    #[error("bad value {value:?} for {key}: {msg}")]
    BadValue {
        key: String,
        value: String,
        msg: String,
    },
    #[error("{key}: file {path} does not exist")]
    MissingPath { key: String, path: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    /// PropBank frame list; the bundled list when unset.
    pub frames: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub seed: u64,
    pub smatch_restarts: usize,
    pub align: AlignConfig,
    pub maxent: TrainConfig,
    pub scorer: ScorerConfig,
    /// Replace the default reliabilities with corpus estimates at extraction.
    pub estimate_reliability: bool,
    /// Fixed reliabilities; these win over defaults and estimates.
    pub reliability: BTreeMap<ActionLabel, f64>,
    base: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> PipelineConfig {
        PipelineConfig {
            frames: None,
            embeddings: None,
            seed: 13,
            smatch_restarts: crate::eval::DEFAULT_RESTARTS,
            align: AlignConfig::default(),
            maxent: TrainConfig::default(),
            scorer: ScorerConfig::default(),
            estimate_reliability: true,
            reliability: BTreeMap::new(),
            base: PathBuf::new(),
        }
    }
}

fn bad(key: &str, value: &str, msg: impl ToString) -> ConfigError {
    ConfigError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
        msg: msg.to_string(),
    }
}

fn number<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| bad(key, value, e))
}

fn positive(key: &str, value: &str) -> Result<f64, ConfigError> {
    let v: f64 = number(key, value)?;
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(bad(key, value, "must be positive"))
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<PipelineConfig, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        PipelineConfig::parse(&text, &base)
    }

    pub fn parse(text: &str, base: &Path) -> Result<PipelineConfig, ConfigError> {
        let mut c = PipelineConfig {
            base: base.to_path_buf(),
            ..PipelineConfig::default()
        };
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or(ConfigError::Syntax { line: i + 1 })?;
            c.set(k.trim(), v.trim())?;
        }
        Ok(c)
    }

    /// Applies one assignment. `reliability.<ACTION>` keys override a
    /// single reliability.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let path = |v: &str| Some(self.base.join(v));
        match key {
            "frames" => self.frames = path(value),
            "embeddings" => self.embeddings = path(value),
            "seed" => self.seed = number(key, value)?,
            "smatch_restarts" => {
                self.smatch_restarts = number(key, value)?;
                if self.smatch_restarts == 0 {
                    return Err(bad(key, value, "need at least one restart"));
                }
            }
            "align_beta" => self.align.beta = number(key, value)?,
            "align_gamma" => self.align.gamma = number(key, value)?,
            "align_iters" => self.align.hill_climb_iters = number(key, value)?,
            "maxent_l2" => {
                let l2: f64 = number(key, value)?;
                if !(l2.is_finite() && l2 >= 0.0) {
                    return Err(bad(key, value, "must be finite and non-negative"));
                }
                self.maxent.l2 = l2;
            }
            "maxent_epochs" => self.maxent.max_epochs = number(key, value)?,
            "maxent_tolerance" => self.maxent.tolerance = positive(key, value)?,
            "maxent_step" => self.maxent.initial_step = positive(key, value)?,
            "scorer_epochs" => self.scorer.epochs = number(key, value)?,
            "estimate_reliability" => self.estimate_reliability = number(key, value)?,
            _ => {
                let Some(action) = key.strip_prefix("reliability.") else {
                    return Err(ConfigError::UnknownKey(key.to_string()));
                };
                let action: ActionLabel = action
                    .parse()
                    .map_err(|_| ConfigError::UnknownKey(key.to_string()))?;
                let v: f64 = number(key, value)?;
                ReliabilityTable::default()
                    .set(action, v)
                    .map_err(|e| bad(key, value, e))?;
                self.reliability.insert(action, v);
            }
        }
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn set_assignment(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or(ConfigError::Syntax { line: 0 })?;
        self.set(k.trim(), v.trim())
    }

    /// Every setting, one `key = value` per line in a fixed order.
    pub fn canonical(&self) -> String {
        let path = |p: &Option<PathBuf>| {
            p.as_ref()
                .map_or(String::new(), |p| p.display().to_string())
        };
        let mut out = format!(
            "frames = {}\nembeddings = {}\nseed = {}\nsmatch_restarts = {}\nalign_beta = {}\nalign_gamma = {}\nalign_iters = {}\n\
             maxent_l2 = {}\nmaxent_epochs = {}\nmaxent_tolerance = {}\nmaxent_step = {}\nscorer_epochs = {}\n\
             estimate_reliability = {}\n",
            path(&self.frames),
            path(&self.embeddings),
            self.seed,
            self.smatch_restarts,
            self.align.beta,
            self.align.gamma,
            self.align.hill_climb_iters,
            self.maxent.l2,
            self.maxent.max_epochs,
            self.maxent.tolerance,
            self.maxent.initial_step,
            self.scorer.epochs,
            self.estimate_reliability,
        );
        for (a, v) in &self.reliability {
            out.push_str(&format!("reliability.{a} = {v}\n"));
        }
        out
    }

    pub fn sha256(&self) -> String {
        Sha256::digest(self.canonical().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Checks that every configured path exists.
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (key, p) in [("frames", &self.frames), ("embeddings", &self.embeddings)] {
            if let Some(p) = p {
                if !p.is_file() {
                    return Err(ConfigError::MissingPath {
                        key: key.to_string(),
                        path: p.display().to_string(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn resources(&self) -> Result<LexicalResources, CorpusError> {
        match &self.frames {
            Some(f) => LexicalResources::load(f, self.embeddings.as_deref()),
            None => {
                let mut r = LexicalResources::bundled();
                if let Some(e) = &self.embeddings {
                    r.embeddings = Some(crate::corpus::Embeddings::parse(
                        &crate::corpus::read_file(e)?,
                        &e.display().to_string(),
                    )?);
                }
                Ok(r)
            }
        }
    }

    /// `base` with the configured overrides applied.
    pub fn apply_overrides(&self, base: &ReliabilityTable) -> ReliabilityTable {
        let mut t = base.clone();
        for (&a, &v) in &self.reliability {
            t.set(a, v).expect("overrides are validated when set");
        }
        t
    }
}
