//! Application configuration: a flat `key = value` file, then `GG_*`
//! environment variables on top.

use std::path::{Path, PathBuf};

use gradegauge_core::preprocess::Thresholds;
use gradegauge_core::{Algorithm, TrainConfig};

pub const ENV_PREFIX: &str = "GG_";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),
    #[error("invalid value `{value}` for `{key}`")]
    InvalidValue { key: String, value: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

impl ConfigError {
    pub fn name(&self) -> &'static str {
        match self {
            ConfigError::Read { .. } => "ConfigRead",
            ConfigError::Syntax { .. } => "ConfigSyntax",
            ConfigError::UnknownKey(_) => "UnknownKey",
            ConfigError::InvalidValue { .. } => "InvalidValue",
            ConfigError::Invalid(_) => "InvalidConfig",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AppConfig {
    pub thresholds: Thresholds,
    pub id3: TrainConfig,
    pub c45: TrainConfig,
    pub store_path: PathBuf,
    pub bind_address: String,
    pub port: u16,
    pub log_level: String,
    pub max_upload_bytes: usize,
    pub session_ttl_secs: u64,
    pub password_iterations: u32,
}

pub const MIN_PASSWORD_ITERATIONS: u32 = 100_000;

impl Default for AppConfig {
    fn default() -> Self {
        AppConfig {
            thresholds: Thresholds::default(),
            id3: TrainConfig::id3(),
            c45: TrainConfig::c45(),
            store_path: PathBuf::from("gradegauge.redb"),
            bind_address: "127.0.0.1".into(),
            port: 8080,
            log_level: "info".into(),
            max_upload_bytes: 2 * 1024 * 1024,
            session_ttl_secs: 8 * 60 * 60,
            password_iterations: MIN_PASSWORD_ITERATIONS,
        }
    }
}

const KEYS: &[&str] = &[
    "merit_cutoff",
    "distinction_cutoff",
    "first_class_cutoff",
    "id3_min_leaf_size",
    "id3_prune",
    "id3_confidence_factor",
    "c45_min_leaf_size",
    "c45_prune",
    "c45_confidence_factor",
    "store_path",
    "bind_address",
    "port",
    "log_level",
    "max_upload_bytes",
    "session_ttl_secs",
    "password_iterations",
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::InvalidValue {
        key: key.into(),
        value: value.into(),
    })
}

impl AppConfig {
    pub fn train_config(&self, algorithm: Algorithm) -> TrainConfig {
        match algorithm {
            Algorithm::Id3 => self.id3,
            Algorithm::C45 => self.c45,
        }
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let value = value.trim();
        match key {
            "merit_cutoff" => self.thresholds.merit_cutoff = parse(key, value)?,
            "distinction_cutoff" => self.thresholds.distinction_cutoff = parse(key, value)?,
            "first_class_cutoff" => self.thresholds.first_class_cutoff = parse(key, value)?,
            "id3_min_leaf_size" => self.id3.min_leaf_size = parse(key, value)?,
            "id3_prune" => self.id3.prune = parse(key, value)?,
            "id3_confidence_factor" => self.id3.confidence_factor = parse(key, value)?,
            "c45_min_leaf_size" => self.c45.min_leaf_size = parse(key, value)?,
            "c45_prune" => self.c45.prune = parse(key, value)?,
            "c45_confidence_factor" => self.c45.confidence_factor = parse(key, value)?,
            "store_path" => self.store_path = PathBuf::from(value),
            "bind_address" => self.bind_address = value.to_string(),
            "port" => self.port = parse(key, value)?,
            "log_level" => self.log_level = value.to_string(),
            "max_upload_bytes" => self.max_upload_bytes = parse(key, value)?,
            "session_ttl_secs" => self.session_ttl_secs = parse(key, value)?,
            "password_iterations" => self.password_iterations = parse(key, value)?,
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Applies a configuration file's text. Blank lines and lines starting
    /// with `#` are skipped.
    pub fn apply_file_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or(ConfigError::Syntax { line: i + 1 })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(ConfigError::Syntax { line: i + 1 });
            }
            self.set(key, value)?;
        }
        Ok(())
    }

    /// Applies `GG_<KEY>` variables; other variables are ignored.
    pub fn apply_env<I>(&mut self, vars: I) -> Result<(), ConfigError>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        for (name, value) in vars {
            let Some(key) = name.strip_prefix(ENV_PREFIX) else {
                continue;
            };
            let key = key.to_ascii_lowercase();
            if !KEYS.contains(&key.as_str()) {
                return Err(ConfigError::UnknownKey(name));
            }
            self.set(&key, &value)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.thresholds
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        for (name, c) in [("id3", self.id3), ("c45", self.c45)] {
            c.validate()
                .map_err(|e| ConfigError::Invalid(format!("{name}: {e}")))?;
        }
        if self.password_iterations < MIN_PASSWORD_ITERATIONS {
            return Err(ConfigError::Invalid(format!(
                "password_iterations must be at least {MIN_PASSWORD_ITERATIONS}"
            )));
        }
        if self.max_upload_bytes == 0 || self.session_ttl_secs == 0 {
            return Err(ConfigError::Invalid(
                "max_upload_bytes and session_ttl_secs must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Defaults, then the file (if any), then the process environment.
    pub fn load(path: Option<&Path>) -> Result<AppConfig, ConfigError> {
        Self::load_with_env(path, std::env::vars())
    }

    pub fn load_with_env<I>(path: Option<&Path>, env: I) -> Result<AppConfig, ConfigError>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut config = AppConfig::default();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
                path: path.to_path_buf(),
                source,
            })?;
            config.apply_file_text(&text)?;
        }
        config.apply_env(env)?;
        config.validate()?;
        Ok(config)
    }
}
