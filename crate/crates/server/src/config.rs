use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use clinanno_core::agreement::{Segmentation, GOLD_THRESHOLD};
use clinanno_core::workflow::DEFAULT_EPSILON;
use clinanno_core::{Role, Variant};
use serde::Deserialize;
use thiserror::Error;

pub const ENV_STORAGE: &str = "CLINANNO_STORAGE";
pub const ENV_TERMINOLOGY_URL: &str = "CLINANNO_TERMINOLOGY_URL";
pub const ENV_SEED: &str = "CLINANNO_SEED";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid value for {var}: {value}")]
    Env { var: &'static str, value: String },
    #[error("threshold {0} is outside [0, 1]")]
    Threshold(f64),
    #[error("stability epsilon {0} is negative")]
    Epsilon(f64),
    #[error("duplicate user id or token for `{0}`")]
    DuplicateUser(String),
}

#[derive(Debug, Clone, Deserialize)]
pub struct UserConfig {
    pub id: String,
    #[serde(default)]
    pub name: Option<String>,
    pub role: Role,
    pub token: String,
    #[serde(default)]
    pub expires: Option<DateTime<Utc>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TerminologyConfig {
    /// Local `term<TAB>sty[,sty]` file.
    pub file: Option<PathBuf>,
    /// Remote service answering `GET {url}/lookup?term=`.
    pub url: Option<String>,
    pub timeout_ms: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub listen: String,
    /// Directory holding the journal.
    pub storage: PathBuf,
    /// Semantic type table; the bundled UMLS table when unset.
    pub registry: Option<PathBuf>,
    pub terminology: TerminologyConfig,
    pub segmentation_variant: Variant,
    pub threshold: f64,
    pub epsilon: f64,
    pub seed: u64,
    /// History from rounds before this one is not suggested.
    pub stale_after_round: Option<u32>,
    pub users: Vec<UserConfig>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            listen: "127.0.0.1:8080".to_string(),
            storage: PathBuf::from("clinanno-data"),
            registry: None,
            terminology: TerminologyConfig::default(),
            segmentation_variant: Variant::Strict,
            threshold: GOLD_THRESHOLD,
            epsilon: DEFAULT_EPSILON,
            seed: 0,
            stale_after_round: None,
            users: Vec::new(),
        }
    }
}

impl Config {
    /// Reads `path` (when given), then applies environment overrides.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut config = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Read {
                    path: p.to_path_buf(),
                    source,
                })?;
                toml::from_str(&text)?
            }
            None => Config::default(),
        };
        config.apply_env(|k| std::env::var(k).ok())?;
        config.validate()?;
        Ok(config)
    }

    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        if let Some(v) = get(ENV_STORAGE) {
            self.storage = PathBuf::from(v);
        }
        if let Some(v) = get(ENV_TERMINOLOGY_URL) {
            self.terminology.url = (!v.is_empty()).then_some(v);
        }
        if let Some(v) = get(ENV_SEED) {
            self.seed = v.parse().map_err(|_| ConfigError::Env {
                var: ENV_SEED,
                value: v,
            })?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(ConfigError::Threshold(self.threshold));
        }
        if self.epsilon.is_nan() || self.epsilon < 0.0 {
            return Err(ConfigError::Epsilon(self.epsilon));
        }
        let mut ids = std::collections::HashSet::new();
        let mut tokens = std::collections::HashSet::new();
        for u in &self.users {
            if !ids.insert(&u.id) || !tokens.insert(&u.token) {
                return Err(ConfigError::DuplicateUser(u.id.clone()));
            }
        }
        Ok(())
    }

    pub fn segmentation(&self) -> Segmentation {
        Segmentation {
            variant: self.segmentation_variant,
            threshold: self.threshold,
        }
    }
}
