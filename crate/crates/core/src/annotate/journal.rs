//! Append-only session log. Each line is one event; the state of every
//! session is the fold of its events in file order.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{AnnotateError, AnnotationSession};
use crate::classify::ClassificationLabel;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SessionEvent {
    Opened {
        session: String,
        project: String,
        defects: Vec<String>,
        annotators: Vec<String>,
    },
    Labeled {
        session: String,
        annotator: String,
        label: ClassificationLabel,
    },
    Resolved {
        session: String,
        defect_id: String,
        resolver: String,
        label: ClassificationLabel,
    },
}

impl SessionEvent {
    pub fn session(&self) -> &str {
        match self {
            SessionEvent::Opened { session, .. }
            | SessionEvent::Labeled { session, .. }
            | SessionEvent::Resolved { session, .. } => session,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StoreError {
    #[error("no session named {0:?}")]
    UnknownSession(String),
    #[error("session {0:?} already exists with different defects or annotators")]
    SessionExists(String),
    #[error(transparent)]
    Annotate(#[from] AnnotateError),
}

#[derive(Debug, Error)]
pub enum JournalError {
    #[error("session log: {0}")]
    Io(#[from] io::Error),
    #[error("session log line {line} is corrupt: {message}")]
    CorruptPersistence { line: usize, message: String },
}

/// All sessions known to a log.
#[derive(Debug, Clone, Default)]
pub struct SessionStore {
    sessions: BTreeMap<String, AnnotationSession>,
}

impl SessionStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, id: &str) -> Option<&AnnotationSession> {
        self.sessions.get(id)
    }

    pub fn sessions(&self) -> impl Iterator<Item = (&str, &AnnotationSession)> {
        self.sessions.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.sessions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sessions.is_empty()
    }

    fn session_mut(&mut self, id: &str) -> Result<&mut AnnotationSession, StoreError> {
        self.sessions
            .get_mut(id)
            .ok_or_else(|| StoreError::UnknownSession(id.to_string()))
    }

    /// Applies one event. Returns `false` when it changed nothing, so callers
    /// can skip logging repeated requests.
    pub fn apply(&mut self, event: &SessionEvent) -> Result<bool, StoreError> {
        match event {
            SessionEvent::Opened {
                session,
                project,
                defects,
                annotators,
            } => {
                if let Some(existing) = self.sessions.get(session) {
                    return if existing.project == *project
                        && existing.defects() == defects.as_slice()
                        && existing.annotators() == annotators.as_slice()
                    {
                        Ok(false)
                    } else {
                        Err(StoreError::SessionExists(session.clone()))
                    };
                }
                let s = AnnotationSession::open(project.clone(), defects.clone(), annotators.clone())?;
                self.sessions.insert(session.clone(), s);
                Ok(true)
            }
            SessionEvent::Labeled {
                session,
                annotator,
                label,
            } => {
                let s = self.session_mut(session)?;
                let mut stamped = label.clone();
                stamped.annotator = Some(annotator.clone());
                stamped.provenance = crate::Provenance::Human;
                if s.label(&label.defect_id, annotator) == Some(&stamped) {
                    return Ok(false);
                }
                s.submit_label(annotator, label.clone())?;
                Ok(true)
            }
            SessionEvent::Resolved {
                session,
                defect_id,
                resolver,
                label,
            } => {
                let s = self.session_mut(session)?;
                let unchanged = s.resolution(defect_id).is_some_and(|r| {
                    r.resolver == *resolver
                        && r.label.ai == label.ai
                        && r.label.severity == label.severity
                        && r.label.impacts == label.impacts
                        && r.label.rationale == label.rationale
                });
                if unchanged {
                    return Ok(false);
                }
                s.resolve_dispute(defect_id, resolver, label.clone())?;
                Ok(true)
            }
        }
    }

    /// Rebuilds state from log text. A line that does not parse, or an event
    /// that cannot apply, marks the log as corrupt.
    pub fn replay(text: &str) -> Result<Self, JournalError> {
        let mut store = Self::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let corrupt = |message: String| JournalError::CorruptPersistence {
                line: i + 1,
                message,
            };
            let event: SessionEvent = serde_json::from_str(line).map_err(|e| corrupt(e.to_string()))?;
            store.apply(&event).map_err(|e| corrupt(e.to_string()))?;
        }
        Ok(store)
    }

    /// Loads a log file; a missing file is an empty store.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, JournalError> {
        match fs::read_to_string(path) {
            Ok(text) => Self::replay(&text),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(Self::new()),
            Err(e) => Err(e.into()),
        }
    }

    /// Applies `event` and, if it changed anything, appends it to the log at
    /// `path` before returning.
    pub fn record(&mut self, path: impl AsRef<Path>, event: SessionEvent) -> Result<bool, RecordError> {
        let mut trial = self.clone();
        if !trial.apply(&event)? {
            return Ok(false);
        }
        append_event(path, &event)?;
        *self = trial;
        Ok(true)
    }
}

#[derive(Debug, Error)]
pub enum RecordError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("appending to session log: {0}")]
    Io(#[from] io::Error),
}

pub fn append_event(path: impl AsRef<Path>, event: &SessionEvent) -> io::Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut line = serde_json::to_string(event).map_err(io::Error::other)?;
    line.push('\n');
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    f.write_all(line.as_bytes())?;
    f.sync_data()
}
