//! Defect classification for AI-based software systems.
//!
//! The crate is organised around the classification pipeline:
//!
//! * [`taxonomy`]: the attribute universe: AI attribute, five-tier severity,
//!   ODC base attributes and the AI/AIP quality-characteristic hierarchy.
//! * [`ingest`]: loading, filtering and de-duplicating defect datasets.
//! * [`classify`]: the rule engine producing [`ClassificationLabel`]s.
//! * [`annotate`]: two-annotator labeling sessions, disputes and agreement.
//! * [`analyze`]: one-way and two-way distributions, chi-square testing and
//!   impact frequencies.
//! * [`report`]: text/CSV/structured rendering and analysis bundles.
//!
//! [`bundled`] exposes the default taxonomy, rule file and case-study fixtures
//! compiled into the crate.

pub mod analyze;
pub mod annotate;
pub mod bundled;
pub mod classify;
pub mod ingest;
pub mod report;
pub mod taxonomy;

pub use analyze::{ContingencyTable, Distribution, IndependenceTest, Percent};
pub use annotate::{AgreementResult, AnnotationSession, DefectStatus};
pub use classify::{
    ClassificationLabel, Criticality, Provenance, Reversibility, RuleSet, Scope, SeverityContext,
    SeverityMatrix,
};
pub use ingest::{DefectRecord, Platform};
pub use report::{OutputFormat, ReportBundle};
pub use taxonomy::{AiAttribute, ImpactPath, QualityModel, Severity, Taxonomy};
