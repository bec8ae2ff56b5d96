//! Two-annotator labeling sessions with third-party dispute resolution.
//!
//! The first two annotators of a session are its primaries. A defect becomes
//! `Disputed` once both primaries have labeled it and their labels differ on
//! the AI attribute or the severity. Any other identifier may resolve a
//! dispute; after resolution the defect's labels are frozen. Agreement is
//! always computed on the primaries' own labels, never on resolutions.

mod journal;
mod kappa;

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::{ClassificationLabel, Provenance};
use crate::taxonomy::{fold_name, ImpactPath, UnknownValue};

pub use journal::{append_event, JournalError, RecordError, SessionEvent, SessionStore, StoreError};
pub use kappa::{cohen_kappa as cohen_kappa_pairs, Kappa, KappaError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DefectStatus {
    Pending,
    Labeled,
    Disputed,
    Resolved,
}

/// Which part of a label two annotators are compared on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Compared {
    Ai,
    Severity,
    /// The (AI attribute, severity) pair.
    Combined,
}

impl Compared {
    pub const ALL: [Compared; 3] = [Compared::Ai, Compared::Severity, Compared::Combined];

    fn differs(self, a: &ClassificationLabel, b: &ClassificationLabel) -> bool {
        match self {
            Compared::Ai => a.ai != b.ai,
            Compared::Severity => a.severity != b.severity,
            Compared::Combined => a.ai != b.ai || a.severity != b.severity,
        }
    }
}

impl fmt::Display for Compared {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Compared::Ai => "ai",
            Compared::Severity => "severity",
            Compared::Combined => "combined",
        })
    }
}

impl FromStr for Compared {
    type Err = UnknownValue;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match fold_name(s).as_str() {
            "ai" => Ok(Compared::Ai),
            "severity" => Ok(Compared::Severity),
            "combined" | "both" => Ok(Compared::Combined),
            _ => Err(UnknownValue::new("compared attribute", s)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementResult {
    pub attribute: Compared,
    pub observed_agreement: f64,
    pub expected_agreement: f64,
    pub kappa: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnnotateError {
    #[error("a session needs at least two annotators")]
    TooFewAnnotators,
    #[error("defect {0:?} listed twice")]
    DuplicateDefectId(String),
    #[error("annotator {0:?} listed twice")]
    DuplicateAnnotator(String),
    #[error("annotator {0:?} is not enrolled in this session")]
    UnknownAnnotator(String),
    #[error("defect {0:?} is not part of this session")]
    UnknownDefect(String),
    #[error("defect {0:?} is not disputed")]
    NotDisputed(String),
    #[error("{0:?} is one of the disputing annotators")]
    ResolverIsParty(String),
    #[error("defect {0:?} is resolved; its labels are frozen")]
    LabelsFrozen(String),
    #[error("defects without a final label: {0:?}")]
    UnresolvedDisputes(Vec<String>),
    #[error(transparent)]
    Agreement(#[from] KappaError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resolution {
    pub resolver: String,
    pub label: ClassificationLabel,
}

/// Two conflicting labels, plus the impact paths only one side chose.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Dispute {
    pub defect_id: String,
    pub label_a: ClassificationLabel,
    pub label_b: ClassificationLabel,
    pub impacts_only_a: Vec<ImpactPath>,
    pub impacts_only_b: Vec<ImpactPath>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub total: usize,
    pub pending: usize,
    pub labeled: usize,
    pub disputed: usize,
    pub resolved: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotationSession {
    pub project: String,
    defects: Vec<String>,
    defect_set: HashSet<String>,
    annotators: Vec<String>,
    /// defect id → annotator → label
    labels: BTreeMap<String, BTreeMap<String, ClassificationLabel>>,
    resolutions: BTreeMap<String, Resolution>,
}

impl AnnotationSession {
    pub fn open(
        project: impl Into<String>,
        defects: Vec<String>,
        annotators: Vec<String>,
    ) -> Result<Self, AnnotateError> {
        if annotators.len() < 2 {
            return Err(AnnotateError::TooFewAnnotators);
        }
        let mut seen = HashSet::new();
        if let Some(dup) = annotators.iter().find(|a| !seen.insert(a.as_str())) {
            return Err(AnnotateError::DuplicateAnnotator(dup.clone()));
        }
        let mut defect_set = HashSet::with_capacity(defects.len());
        for d in &defects {
            if !defect_set.insert(d.clone()) {
                return Err(AnnotateError::DuplicateDefectId(d.clone()));
            }
        }
        Ok(Self {
            project: project.into(),
            defects,
            defect_set,
            annotators,
            labels: BTreeMap::new(),
            resolutions: BTreeMap::new(),
        })
    }

    pub fn defects(&self) -> &[String] {
        &self.defects
    }

    pub fn annotators(&self) -> &[String] {
        &self.annotators
    }

    pub fn primaries(&self) -> (&str, &str) {
        (&self.annotators[0], &self.annotators[1])
    }

    pub fn contains_defect(&self, id: &str) -> bool {
        self.defect_set.contains(id)
    }

    pub fn is_enrolled(&self, annotator: &str) -> bool {
        self.annotators.iter().any(|a| a == annotator)
    }

    pub fn label(&self, defect_id: &str, annotator: &str) -> Option<&ClassificationLabel> {
        self.labels.get(defect_id)?.get(annotator)
    }

    pub fn resolution(&self, defect_id: &str) -> Option<&Resolution> {
        self.resolutions.get(defect_id)
    }

    /// Labels held for a defect, keyed by annotator.
    pub fn labels_for(&self, defect_id: &str) -> impl Iterator<Item = (&str, &ClassificationLabel)> {
        self.labels
            .get(defect_id)
            .into_iter()
            .flat_map(|m| m.iter().map(|(a, l)| (a.as_str(), l)))
    }

    pub fn label_count(&self) -> usize {
        self.labels.values().map(BTreeMap::len).sum()
    }

    fn primary_pair(&self, defect_id: &str) -> Option<(&ClassificationLabel, &ClassificationLabel)> {
        let (a, b) = self.primaries();
        Some((self.label(defect_id, a)?, self.label(defect_id, b)?))
    }

    pub fn status(&self, defect_id: &str) -> DefectStatus {
        if self.resolutions.contains_key(defect_id) {
            return DefectStatus::Resolved;
        }
        match self.primary_pair(defect_id) {
            Some((a, b)) if Compared::Combined.differs(a, b) => DefectStatus::Disputed,
            Some(_) => DefectStatus::Labeled,
            None => DefectStatus::Pending,
        }
    }

    pub fn progress(&self) -> Progress {
        let mut p = Progress {
            total: self.defects.len(),
            ..Progress::default()
        };
        for d in &self.defects {
            match self.status(d) {
                DefectStatus::Pending => p.pending += 1,
                DefectStatus::Labeled => p.labeled += 1,
                DefectStatus::Disputed => p.disputed += 1,
                DefectStatus::Resolved => p.resolved += 1,
            }
        }
        p
    }

    /// Stores (or overwrites) an annotator's label and returns the defect's
    /// new status.
    pub fn submit_label(
        &mut self,
        annotator: &str,
        mut label: ClassificationLabel,
    ) -> Result<DefectStatus, AnnotateError> {
        if !self.is_enrolled(annotator) {
            return Err(AnnotateError::UnknownAnnotator(annotator.to_string()));
        }
        if !self.contains_defect(&label.defect_id) {
            return Err(AnnotateError::UnknownDefect(label.defect_id));
        }
        if self.resolutions.contains_key(&label.defect_id) {
            return Err(AnnotateError::LabelsFrozen(label.defect_id));
        }
        label.annotator = Some(annotator.to_string());
        label.provenance = Provenance::Human;
        let id = label.defect_id.clone();
        self.labels
            .entry(id.clone())
            .or_default()
            .insert(annotator.to_string(), label);
        Ok(self.status(&id))
    }

    /// Disputed defects that disagree on `attribute`, sorted by id.
    pub fn list_disputes(&self, attribute: Compared) -> Vec<Dispute> {
        let mut out: Vec<Dispute> = self
            .labels
            .keys()
            .filter(|d| self.status(d) == DefectStatus::Disputed)
            .filter_map(|d| {
                let (a, b) = self.primary_pair(d)?;
                attribute.differs(a, b).then(|| Dispute {
                    defect_id: d.clone(),
                    label_a: a.clone(),
                    label_b: b.clone(),
                    impacts_only_a: difference(&a.impacts, &b.impacts),
                    impacts_only_b: difference(&b.impacts, &a.impacts),
                })
            })
            .collect();
        out.sort_by(|x, y| x.defect_id.cmp(&y.defect_id));
        out
    }

    pub fn resolve_dispute(
        &mut self,
        defect_id: &str,
        resolver: &str,
        mut label: ClassificationLabel,
    ) -> Result<(), AnnotateError> {
        if !self.contains_defect(defect_id) {
            return Err(AnnotateError::UnknownDefect(defect_id.to_string()));
        }
        label.defect_id = defect_id.to_string();
        label.annotator = Some(resolver.to_string());
        label.provenance = Provenance::Resolved;
        let resolution = Resolution {
            resolver: resolver.to_string(),
            label,
        };
        if self.resolutions.get(defect_id) == Some(&resolution) {
            return Ok(());
        }
        if self.status(defect_id) != DefectStatus::Disputed {
            return Err(AnnotateError::NotDisputed(defect_id.to_string()));
        }
        let (a, b) = self.primaries();
        if resolver == a || resolver == b {
            return Err(AnnotateError::ResolverIsParty(resolver.to_string()));
        }
        self.resolutions.insert(defect_id.to_string(), resolution);
        Ok(())
    }

    /// Kappa between the two primaries over defects both have labeled.
    ///
    /// For severity only pairs where both gave a severity count.
    pub fn cohen_kappa(&self, attribute: Compared) -> Result<AgreementResult, AnnotateError> {
        let pairs = self.labels.keys().filter_map(|d| self.primary_pair(d));
        let k = match attribute {
            Compared::Ai => cohen_kappa_pairs(&pairs.map(|(a, b)| (a.ai, b.ai)).collect::<Vec<_>>()),
            Compared::Severity => cohen_kappa_pairs(
                &pairs
                    .filter_map(|(a, b)| Some((a.severity?, b.severity?)))
                    .collect::<Vec<_>>(),
            ),
            Compared::Combined => cohen_kappa_pairs(
                &pairs
                    .map(|(a, b)| ((a.ai, a.severity), (b.ai, b.severity)))
                    .collect::<Vec<_>>(),
            ),
        }?;
        Ok(AgreementResult {
            attribute,
            observed_agreement: k.observed,
            expected_agreement: k.expected,
            kappa: k.kappa,
            n: k.n,
        })
    }

    fn final_label(&self, defect_id: &str) -> Option<ClassificationLabel> {
        match self.status(defect_id) {
            DefectStatus::Resolved => Some(self.resolutions[defect_id].label.clone()),
            DefectStatus::Labeled => {
                let (a, b) = self.primary_pair(defect_id)?;
                let mut impacts = a.impacts.clone();
                impacts.extend(difference(&b.impacts, &a.impacts));
                Some(ClassificationLabel {
                    defect_id: defect_id.to_string(),
                    annotator: None,
                    ai: a.ai,
                    severity: a.severity,
                    impacts,
                    provenance: Provenance::Human,
                    rationale: a.rationale.clone().or_else(|| b.rationale.clone()),
                })
            }
            _ => None,
        }
    }

    /// One final label per defect, in session order.
    ///
    /// Agreed defects yield a `Human` label whose impact paths are the union
    /// of both annotators' paths; resolved defects yield the resolution.
    pub fn consolidate(&self) -> Result<Vec<ClassificationLabel>, AnnotateError> {
        let mut out = Vec::with_capacity(self.defects.len());
        let mut open = Vec::new();
        for d in &self.defects {
            match self.final_label(d) {
                Some(l) => out.push(l),
                None => open.push(d.clone()),
            }
        }
        if open.is_empty() {
            Ok(out)
        } else {
            Err(AnnotateError::UnresolvedDisputes(open))
        }
    }

    /// Final labels for the defects that already have one.
    pub fn consolidated_so_far(&self) -> Vec<ClassificationLabel> {
        self.defects.iter().filter_map(|d| self.final_label(d)).collect()
    }
}

fn difference(a: &[ImpactPath], b: &[ImpactPath]) -> Vec<ImpactPath> {
    a.iter().filter(|p| !b.contains(p)).cloned().collect()
}
