//! Daemon configuration file (TOML).
//!
//! ```toml
//! model_path = "/etc/ransomguard/notes.rgmodel"
//! blocklist_path = "/etc/ransomguard/sha256.txt"
//! threshold_t = 10
//! emit_every_candidate_after_threshold = true
//! response = "dry-run"          # dry-run | log | kill | suspend
//! max_scan_bytes = 16384
//! watch_scope = ["/home", "/srv"]
//! allow_pids = []
//! audit_log = "/var/log/ransomguard/audit.jsonl"
//! ```
//!
//! Only `model_path` is required. Without `blocklist_path` the hash phase runs
//! against an empty set.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::monitor::MonitorConfig;
use crate::nlp::classify::DEFAULT_MAX_SCAN_BYTES;
use crate::response::ResponseMode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    model_path: PathBuf,
    #[serde(default)]
    blocklist_path: Option<PathBuf>,
    #[serde(default = "default_threshold")]
    threshold_t: u32,
    #[serde(default = "default_true")]
    emit_every_candidate_after_threshold: bool,
    #[serde(default = "default_response")]
    response: ResponseMode,
    #[serde(default = "default_scan")]
    max_scan_bytes: usize,
    #[serde(default)]
    watch_scope: Vec<PathBuf>,
    #[serde(default)]
    allow_pids: Vec<u32>,
    #[serde(default)]
    audit_log: Option<PathBuf>,
}

fn default_threshold() -> u32 {
    MonitorConfig::default().threshold_t
}
fn default_true() -> bool {
    true
}
fn default_response() -> ResponseMode {
    ResponseMode::DryRun
}
fn default_scan() -> usize {
    DEFAULT_MAX_SCAN_BYTES
}

#[derive(Debug, Clone, PartialEq)]
pub struct DaemonConfig {
    pub model_path: PathBuf,
    pub blocklist_path: Option<PathBuf>,
    pub monitor: MonitorConfig,
    pub response: ResponseMode,
    pub max_scan_bytes: usize,
    /// Path prefixes whose new files are classified. Empty means everything.
    pub watch_scope: Vec<PathBuf>,
    pub allow_pids: Vec<u32>,
    pub audit_log: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

impl DaemonConfig {
    pub fn new(model_path: impl Into<PathBuf>) -> Self {
        DaemonConfig {
            model_path: model_path.into(),
            blocklist_path: None,
            monitor: MonitorConfig::default(),
            response: ResponseMode::DryRun,
            max_scan_bytes: DEFAULT_MAX_SCAN_BYTES,
            watch_scope: Vec::new(),
            allow_pids: Vec::new(),
            audit_log: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let file: ConfigFile = toml::from_str(text)?;
        let cfg = DaemonConfig {
            model_path: file.model_path,
            blocklist_path: file.blocklist_path,
            monitor: MonitorConfig {
                threshold_t: file.threshold_t,
                emit_every_candidate_after_threshold: file.emit_every_candidate_after_threshold,
            },
            response: file.response,
            max_scan_bytes: file.max_scan_bytes,
            watch_scope: file.watch_scope,
            allow_pids: file.allow_pids,
            audit_log: file.audit_log,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_owned(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.monitor
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.max_scan_bytes == 0 {
            return Err(ConfigError::Invalid("max_scan_bytes must be positive".into()));
        }
        Ok(())
    }

    pub fn in_scope(&self, path: &Path) -> bool {
        self.watch_scope.is_empty() || self.watch_scope.iter().any(|p| path.starts_with(p))
    }
}
