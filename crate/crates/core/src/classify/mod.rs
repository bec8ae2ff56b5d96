//! The rule engine: AI attribute, severity and impact paths per defect.

mod labels;
mod rules;
mod severity;

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{normalize_label, DefectRecord};
use crate::taxonomy::{AiAttribute, ImpactPath, Severity};

pub use labels::{parse_labels, read_labels, to_labels_string, write_labels, LabelFileError};
pub use rules::{AiRule, ImpactRule, KeywordRule, RuleError, RuleSet, DEFAULT_KEYWORDS};
pub use severity::{
    assign_severity, load_contexts, parse_contexts, ContextError, Criticality, Reversibility,
    Scope, SeverityContext, SeverityMatrix,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Provenance {
    /// Produced by the rule engine.
    Rule,
    /// Agreed by the primary annotators.
    Human,
    /// Decided by a third annotator after a dispute.
    Resolved,
}

/// One defect's verdict.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassificationLabel {
    pub defect_id: String,
    #[serde(default)]
    pub annotator: Option<String>,
    pub ai: AiAttribute,
    #[serde(default)]
    pub severity: Option<Severity>,
    #[serde(default)]
    pub impacts: Vec<ImpactPath>,
    pub provenance: Provenance,
    #[serde(default)]
    pub rationale: Option<String>,
}

impl ClassificationLabel {
    /// A bare human label; handy for tests and the annotation API.
    pub fn human(defect_id: impl Into<String>, ai: AiAttribute, severity: Option<Severity>) -> Self {
        Self {
            defect_id: defect_id.into(),
            annotator: None,
            ai,
            severity,
            impacts: Vec::new(),
            provenance: Provenance::Human,
            rationale: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClassifyError {
    #[error("severity context given for unknown defect {0:?}")]
    UnknownContextId(String),
    #[error("defect id {0:?} appears more than once")]
    DuplicateRecordId(String),
}

/// What decided an AI attribute.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AiMatch<'r> {
    Exact(&'r AiRule),
    Keyword(&'r KeywordRule),
    NoMatch,
}

impl AiMatch<'_> {
    pub fn attribute(&self) -> AiAttribute {
        match self {
            AiMatch::Exact(r) => r.attribute,
            AiMatch::Keyword(k) => k.attribute,
            AiMatch::NoMatch => AiAttribute::Unclassified,
        }
    }

    fn rationale(&self) -> String {
        match self {
            AiMatch::Exact(r) => format!("rule: {}", r.pattern),
            AiMatch::Keyword(k) => format!("keyword: {}", k.keyword),
            AiMatch::NoMatch => "no matching rule".to_string(),
        }
    }
}

/// Exact rule first, then keyword substrings in rule order.
///
/// Records without a defect-type label never match.
pub fn match_ai_rule<'r>(record: &DefectRecord, rules: &'r RuleSet) -> AiMatch<'r> {
    let label = normalize_label(&record.defect_type_label);
    if label.is_empty() {
        return AiMatch::NoMatch;
    }
    if let Some(rule) = rules.ai_rules().iter().find(|r| r.pattern == label) {
        return AiMatch::Exact(rule);
    }
    rules
        .keyword_rules()
        .iter()
        .find(|k| label.contains(&k.keyword))
        .map_or(AiMatch::NoMatch, AiMatch::Keyword)
}

pub fn classify_ai_attribute(record: &DefectRecord, rules: &RuleSet) -> AiAttribute {
    match_ai_rule(record, rules).attribute()
}

/// Paths of the first impact rule matching the record's label; empty when
/// unmapped.
pub fn map_impact(record: &DefectRecord, rules: &RuleSet) -> Vec<ImpactPath> {
    let label = normalize_label(&record.defect_type_label);
    rules
        .impact_rules()
        .iter()
        .find(|r| r.pattern == label)
        .map(|r| r.paths.clone())
        .unwrap_or_default()
}

/// Labels every record, in input order.
pub fn classify_dataset(
    records: &[DefectRecord],
    rules: &RuleSet,
    contexts: &BTreeMap<String, SeverityContext>,
) -> Result<Vec<ClassificationLabel>, ClassifyError> {
    let mut ids = HashSet::with_capacity(records.len());
    for r in records {
        if !ids.insert(r.id.as_str()) {
            return Err(ClassifyError::DuplicateRecordId(r.id.clone()));
        }
    }
    if let Some(unknown) = contexts.keys().find(|k| !ids.contains(k.as_str())) {
        return Err(ClassifyError::UnknownContextId(unknown.clone()));
    }
    Ok(records
        .iter()
        .map(|record| {
            let m = match_ai_rule(record, rules);
            ClassificationLabel {
                defect_id: record.id.clone(),
                annotator: None,
                ai: m.attribute(),
                severity: contexts
                    .get(&record.id)
                    .map(|ctx| rules.severity_matrix().assign(ctx)),
                impacts: map_impact(record, rules),
                provenance: Provenance::Rule,
                rationale: Some(m.rationale()),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;
    use crate::taxonomy::{validate_impact_path, OdcAttributes, QualityModel};
    use crate::Platform;
    use proptest::prelude::*;

    fn record(id: &str, label: &str) -> DefectRecord {
        DefectRecord {
            id: id.into(),
            platform: Platform::GitHub,
            framework: "keras".into(),
            title: String::new(),
            description: String::new(),
            defect_type_label: label.into(),
            cross_refs: Default::default(),
            odc: OdcAttributes::default(),
            created_at: None,
        }
    }

    #[test]
    fn ai_attribute_examples() {
        let rules = bundled::rules();
        let ai = |l: &str| classify_ai_attribute(&record("x", l), &rules);
        assert_eq!(ai("suboptimal batch size"), AiAttribute::Learning);
        assert_eq!(ai("deprecated api"), AiAttribute::NotRelated);
        assert_eq!(ai("entirely novel text zzz"), AiAttribute::Unclassified);
        assert_eq!(ai(""), AiAttribute::Unclassified);
        // normalization before exact matching
        assert_eq!(ai("  Wrong   Tensor Shape "), AiAttribute::Data);
    }

    #[test]
    fn keyword_fallback_order() {
        let rules = bundled::rules();
        let ai = |l: &str| classify_ai_attribute(&record("x", l), &rules);
        assert_eq!(ai("corrupted dataset split"), AiAttribute::Data);
        assert_eq!(ai("too many epochs"), AiAttribute::Learning);
        assert_eq!(ai("dead relu activation"), AiAttribute::Thinking);
        assert_eq!(ai("broken build script"), AiAttribute::NotRelated);
        // "data" is checked before "layer"
        assert_eq!(ai("data layer mismatch"), AiAttribute::Data);
        // "loss" (Learning) wins over "network" (Thinking)
        assert_eq!(ai("network loss spikes"), AiAttribute::Learning);
        assert!(matches!(
            match_ai_rule(&record("x", "too many epochs"), &rules),
            AiMatch::Keyword(k) if k.keyword == "epoch"
        ));
    }

    #[test]
    fn impact_examples() {
        let rules = bundled::rules();
        let imp = |l: &str| map_impact(&record("x", l), &rules);
        assert_eq!(
            imp("deprecated api"),
            [ImpactPath::new(QualityModel::Aip, ["Maintainability"])]
        );
        assert_eq!(
            imp("wrong network architecture"),
            [
                ImpactPath::new(QualityModel::Ai, ["Trustworthiness", "Accuracy"]),
                ImpactPath::new(QualityModel::Ai, ["Explainability", "Completeness"]),
                ImpactPath::new(QualityModel::Aip, ["Accuracy"]),
            ]
        );
        assert!(imp("unknown defect kind").is_empty());
    }

    #[test]
    fn keras_attribute_counts() {
        let labels = classify_dataset(
            &bundled::keras_fixture(),
            &bundled::rules(),
            &bundled::keras_contexts(),
        )
        .unwrap();
        assert_eq!(labels.len(), 42);
        let count = |a| labels.iter().filter(|l| l.ai == a).count();
        assert_eq!(count(AiAttribute::Data), 2);
        assert_eq!(count(AiAttribute::Learning), 18);
        assert_eq!(count(AiAttribute::Thinking), 14);
        assert_eq!(count(AiAttribute::NotRelated), 8);
        let sev = |s| labels.iter().filter(|l| l.severity == Some(s)).count();
        assert_eq!(sev(Severity::Catastrophic), 9);
        assert_eq!(sev(Severity::Critical), 10);
        assert_eq!(sev(Severity::High), 12);
        assert_eq!(sev(Severity::Medium), 11);
        assert_eq!(sev(Severity::Low), 0);
        assert!(labels.iter().all(|l| l.provenance == Provenance::Rule));
        let ids: Vec<_> = labels.iter().map(|l| l.defect_id.clone()).collect();
        let expected: Vec<_> = bundled::keras_fixture().into_iter().map(|r| r.id).collect();
        assert_eq!(ids, expected);
    }

    #[test]
    fn dataset_edge_cases() {
        let rules = bundled::rules();
        assert!(classify_dataset(&[], &rules, &BTreeMap::new()).unwrap().is_empty());

        let mut ctx = BTreeMap::new();
        ctx.insert(
            "ghost".to_string(),
            SeverityContext::new(Criticality::Enterprise, Reversibility::Reversible, Scope::Localized),
        );
        assert_eq!(
            classify_dataset(&[record("a", "deprecated api")], &rules, &ctx),
            Err(ClassifyError::UnknownContextId("ghost".into()))
        );
        assert_eq!(
            classify_dataset(&[record("a", "x"), record("a", "y")], &rules, &BTreeMap::new()),
            Err(ClassifyError::DuplicateRecordId("a".into()))
        );
        let labels =
            classify_dataset(&[record("a", "deprecated api")], &rules, &BTreeMap::new()).unwrap();
        assert_eq!(labels[0].severity, None);
    }

    proptest! {
        #[test]
        fn classification_is_deterministic_and_valid(
            picks in prop::collection::vec((0usize..20, any::<bool>()), 0..40)
        ) {
            let rules = bundled::rules();
            let tax = bundled::taxonomy();
            let pool: Vec<String> = rules
                .ai_rules()
                .iter()
                .map(|r| r.pattern.clone())
                .chain(["mystery".into(), "bad batch norm".into(), String::new()])
                .collect();
            let records: Vec<DefectRecord> = picks
                .iter()
                .enumerate()
                .map(|(i, (p, _))| record(&format!("d{i}"), &pool[*p % pool.len()]))
                .collect();
            let contexts: BTreeMap<String, SeverityContext> = picks
                .iter()
                .enumerate()
                .filter(|(_, (_, with))| *with)
                .map(|(i, (p, _))| {
                    let all: Vec<_> = SeverityContext::all().collect();
                    (format!("d{i}"), all[*p % all.len()])
                })
                .collect();
            let a = classify_dataset(&records, &rules, &contexts).unwrap();
            let b = classify_dataset(&records, &rules, &contexts).unwrap();
            prop_assert_eq!(to_labels_string(&a), to_labels_string(&b));
            for l in &a {
                prop_assert_eq!(l.severity.is_some(), contexts.contains_key(&l.defect_id));
                for p in &l.impacts {
                    prop_assert_eq!(validate_impact_path(p, &tax), Ok(()));
                }
            }
        }
    }
}
