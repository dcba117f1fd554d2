//! Service configuration and the loaded, validated context.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::Duration;
use serde::{Deserialize, Serialize};

use crate::alerting::{AlertRules, RetryPolicy, RuleError};
use crate::gazetteer::{Gazetteer, GazetteerError};
use crate::reporting::{EpiWeekConvention, ReportSettings};
use crate::time::DisplayZone;
use crate::vocab::{Vocabularies, VocabularyError};
use crate::workflow::{OfficerRegistry, RegistryError};

pub const ENV_DATA_DIR: &str = "DSURV_DATA_DIR";
pub const ENV_LISTEN: &str = "DSURV_LISTEN";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config {path}: {reason}")]
    Invalid { path: String, reason: String },
    #[error("{0} does not exist")]
    MissingPath(String),
    #[error(transparent)]
    Gazetteer(#[from] GazetteerError),
    #[error(transparent)]
    Vocabulary(#[from] VocabularyError),
    #[error(transparent)]
    Officers(#[from] RegistryError),
    #[error(transparent)]
    Rules(#[from] RuleError),
}

fn default_true() -> bool {
    true
}
fn default_listen() -> String {
    "127.0.0.1:8080".into()
}
fn default_max_retries() -> u32 {
    3
}
fn default_retry_base() -> i64 {
    60
}
fn default_snapshot_every() -> u64 {
    500
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    pub gazetteer: PathBuf,
    pub vocabularies: PathBuf,
    pub officers: PathBuf,
    pub alert_rules: PathBuf,
    #[serde(default = "default_true")]
    pub auto_assign: bool,
    #[serde(default)]
    pub epi_week: EpiWeekConvention,
    #[serde(default)]
    pub timezone: DisplayZone,
    #[serde(default = "default_listen")]
    pub listen: String,
    pub data_dir: PathBuf,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default = "default_retry_base")]
    pub retry_base_secs: i64,
    /// Write a state snapshot every this many events (0 disables).
    #[serde(default = "default_snapshot_every")]
    pub snapshot_every: u64,
}

impl ServiceConfig {
    /// Reads a TOML config, resolves relative paths against its directory
    /// and applies environment overrides.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let invalid = |reason: String| ConfigError::Invalid {
            path: path.display().to_string(),
            reason,
        };
        let text = std::fs::read_to_string(path).map_err(|e| invalid(e.to_string()))?;
        let mut cfg: ServiceConfig = toml::from_str(&text).map_err(|e| invalid(e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut cfg.gazetteer,
            &mut cfg.vocabularies,
            &mut cfg.officers,
            &mut cfg.alert_rules,
            &mut cfg.data_dir,
        ] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Ok(dir) = std::env::var(ENV_DATA_DIR) {
            cfg.data_dir = PathBuf::from(dir);
        }
        if let Ok(listen) = std::env::var(ENV_LISTEN) {
            cfg.listen = listen;
        }
        Ok(cfg)
    }

    pub fn settings(&self) -> Settings {
        Settings {
            auto_assign: self.auto_assign,
            convention: self.epi_week,
            zone: self.timezone,
            retry: RetryPolicy {
                max_retries: self.max_retries,
                base_backoff: Duration::seconds(self.retry_base_secs),
            },
            snapshot_every: self.snapshot_every,
        }
    }

    pub fn events_path(&self) -> PathBuf {
        self.data_dir.join("events.jsonl")
    }

    pub fn snapshot_path(&self) -> PathBuf {
        self.data_dir.join("snapshot.json")
    }

    pub fn outbox_path(&self) -> PathBuf {
        self.data_dir.join("outbox.jsonl")
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Settings {
    pub auto_assign: bool,
    pub convention: EpiWeekConvention,
    pub zone: DisplayZone,
    pub retry: RetryPolicy,
    pub snapshot_every: u64,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            auto_assign: true,
            convention: EpiWeekConvention::Iso,
            zone: DisplayZone::colombo(),
            retry: RetryPolicy::default(),
            snapshot_every: 0,
        }
    }
}

impl Settings {
    pub fn report(&self) -> ReportSettings {
        ReportSettings {
            zone: self.zone,
            convention: self.convention,
        }
    }
}

/// Everything loaded from configuration. Immutable once built.
#[derive(Debug, Clone)]
pub struct Context {
    pub gazetteer: Arc<Gazetteer>,
    pub vocabularies: Vocabularies,
    pub officers: OfficerRegistry,
    pub rules: AlertRules,
    pub settings: Settings,
}

impl Context {
    pub fn load(cfg: &ServiceConfig) -> Result<Self, ConfigError> {
        for p in [
            &cfg.gazetteer,
            &cfg.vocabularies,
            &cfg.officers,
            &cfg.alert_rules,
        ] {
            if !p.exists() {
                return Err(ConfigError::MissingPath(p.display().to_string()));
            }
        }
        let gazetteer = Gazetteer::load(&cfg.gazetteer)?;
        let vocabularies = Vocabularies::load_dir(&cfg.vocabularies)?;
        let officers = OfficerRegistry::load(&cfg.officers, &gazetteer)?;
        let rules = AlertRules::load(&cfg.alert_rules, &officers)?;
        Ok(Context {
            gazetteer: Arc::new(gazetteer),
            vocabularies,
            officers,
            rules,
            settings: cfg.settings(),
        })
    }
}
