//! HTTP service for annotation sessions and live analysis.
//!
//! All session state lives in an append-only event log; the service replays
//! it at start-up and appends one line per state-changing request. A single
//! write lock serializes mutations, so each session sees its requests in a
//! total order while reads run concurrently.

mod config;
mod routes;

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use aiodc_core::annotate::{JournalError, SessionStore};
use aiodc_core::classify::RuleError;
use aiodc_core::ingest::{load_defects, IngestError};
use aiodc_core::taxonomy::TaxonomyError;
use aiodc_core::{bundled, DefectRecord, RuleSet, Taxonomy};
use thiserror::Error;
use tokio::net::TcpListener;
use tokio::sync::{oneshot, RwLock};
use tokio::task::JoinHandle;

pub use config::{ConfigError, ServerConfig};
pub use routes::app;

#[derive(Debug, Error)]
pub enum ServerError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot bind {addr}: {source}")]
    BindFailure {
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },
    #[error("session log {path} cannot be replayed: {source}")]
    CorruptPersistence {
        path: PathBuf,
        #[source]
        source: JournalError,
    },
    #[error("loading dataset: {0}")]
    Dataset(#[from] IngestError),
    #[error("loading taxonomy: {0}")]
    Taxonomy(#[from] TaxonomyError),
    #[error("loading rules: {0}")]
    Rules(#[from] RuleError),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("server stopped: {0}")]
    Runtime(std::io::Error),
}

/// Immutable project data plus the mutable session store.
pub struct AppState {
    pub(crate) records: BTreeMap<String, DefectRecord>,
    pub(crate) rules: RuleSet,
    pub(crate) taxonomy: Taxonomy,
    pub(crate) log_path: PathBuf,
    pub(crate) store: RwLock<SessionStore>,
}

impl AppState {
    /// Loads the dataset, rules and taxonomy named by `config` and replays
    /// the session log.
    pub fn load(config: &ServerConfig) -> Result<Self, ServerError> {
        let format = config.dataset_format().map_err(ServerError::Invalid)?;
        let report = load_defects(config.resolve(&config.dataset), format, None)?;
        let taxonomy = match &config.taxonomy {
            Some(p) => Taxonomy::load(config.resolve(p))?,
            None => bundled::taxonomy(),
        };
        let rules = match &config.rules {
            Some(p) => RuleSet::load(config.resolve(p), &taxonomy)?,
            None => bundled::rules(),
        };
        let log_path = config.resolve(&config.persistence_path);
        let store = SessionStore::load(&log_path).map_err(|source| ServerError::CorruptPersistence {
            path: log_path.clone(),
            source,
        })?;
        Ok(Self::new(report.records, rules, taxonomy, log_path, store))
    }

    pub fn new(
        records: Vec<DefectRecord>,
        rules: RuleSet,
        taxonomy: Taxonomy,
        log_path: PathBuf,
        store: SessionStore,
    ) -> Self {
        Self {
            records: records.into_iter().map(|r| (r.id.clone(), r)).collect(),
            rules,
            taxonomy,
            log_path,
            store: RwLock::new(store),
        }
    }
}

/// A running service. Dropping the handle leaves the server running;
/// call [`ServerHandle::shutdown`] to stop it.
pub struct ServerHandle {
    addr: SocketAddr,
    stop: Option<oneshot::Sender<()>>,
    task: JoinHandle<std::io::Result<()>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub async fn shutdown(mut self) -> Result<(), ServerError> {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
        self.wait().await
    }

    /// Runs until the server stops on its own.
    pub async fn wait(self) -> Result<(), ServerError> {
        match self.task.await {
            Ok(r) => r.map_err(ServerError::Runtime),
            Err(e) => Err(ServerError::Runtime(std::io::Error::other(e))),
        }
    }
}

pub async fn serve(config: &ServerConfig) -> Result<ServerHandle, ServerError> {
    config.validate().map_err(ServerError::Invalid)?;
    let state = Arc::new(AppState::load(config)?);
    let static_dir = config.static_dir.as_ref().map(|p| config.resolve(p));
    let addr = config.socket_addr();
    let listener = TcpListener::bind(addr)
        .await
        .map_err(|source| ServerError::BindFailure { addr, source })?;
    let addr = listener.local_addr().map_err(|source| ServerError::BindFailure { addr, source })?;
    let router = app(state, static_dir);
    let (tx, rx) = oneshot::channel::<()>();
    let task = tokio::spawn(async move {
        axum::serve(listener, router)
            .with_graceful_shutdown(async {
                let _ = rx.await;
            })
            .await
    });
    tracing::info!(%addr, "listening");
    Ok(ServerHandle {
        addr,
        stop: Some(tx),
        task,
    })
}
