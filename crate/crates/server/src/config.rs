use std::fs;
use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};

use aiodc_core::ingest::DatasetFormat;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config {path}: {message}")]
    Invalid { path: PathBuf, message: String },
}

/// Service settings, usually read from a TOML file.
///
/// Relative paths are resolved against `project_root`, which itself is
/// resolved against the directory holding the config file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServerConfig {
    #[serde(default = "default_bind")]
    pub bind: IpAddr,
    /// `0` asks the OS for a free port.
    #[serde(default = "default_port")]
    pub port: u16,
    #[serde(default = "default_root")]
    pub project_root: PathBuf,
    /// Append-only session log.
    pub persistence_path: PathBuf,
    /// Directory served under `/ui`.
    #[serde(default)]
    pub static_dir: Option<PathBuf>,
    pub dataset: PathBuf,
    #[serde(default = "default_format")]
    pub dataset_format: String,
    /// Rule file; the bundled rules when absent.
    #[serde(default)]
    pub rules: Option<PathBuf>,
    /// Taxonomy file; the bundled taxonomy when absent.
    #[serde(default)]
    pub taxonomy: Option<PathBuf>,
}

fn default_bind() -> IpAddr {
    IpAddr::V4(Ipv4Addr::LOCALHOST)
}

fn default_port() -> u16 {
    8080
}

fn default_root() -> PathBuf {
    PathBuf::from(".")
}

fn default_format() -> String {
    "canonical".into()
}

impl ServerConfig {
    /// A config with defaults for everything but the two required paths.
    pub fn new(dataset: impl Into<PathBuf>, persistence_path: impl Into<PathBuf>) -> Self {
        Self {
            bind: default_bind(),
            port: default_port(),
            project_root: default_root(),
            persistence_path: persistence_path.into(),
            static_dir: None,
            dataset: dataset.into(),
            dataset_format: default_format(),
            rules: None,
            taxonomy: None,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg: ServerConfig = toml::from_str(&text).map_err(|e| ConfigError::Invalid {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        if cfg.project_root.is_relative() {
            let base = path.parent().unwrap_or(Path::new("."));
            cfg.project_root = base.join(&cfg.project_root);
        }
        cfg.validate().map_err(|message| ConfigError::Invalid {
            path: path.to_path_buf(),
            message,
        })?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        self.dataset_format()?;
        if self.persistence_path.as_os_str().is_empty() {
            return Err("persistence_path is empty".into());
        }
        Ok(())
    }

    pub fn dataset_format(&self) -> Result<DatasetFormat, String> {
        self.dataset_format.parse().map_err(|e| format!("{e}"))
    }

    pub fn socket_addr(&self) -> SocketAddr {
        SocketAddr::new(self.bind, self.port)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.project_root.join(p)
        }
    }
}
