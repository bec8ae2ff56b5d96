//! Data files compiled into the crate: the default taxonomy, the case-study
//! rule file and the reconstructed benchmark fixtures.

use std::collections::BTreeMap;

use crate::classify::{parse_contexts, RuleSet, SeverityContext};
use crate::ingest::{parse_canonical, DefectRecord};
use crate::taxonomy::Taxonomy;

pub const TAXONOMY_TEXT: &str = include_str!("../../../taxonomy/quality-subset.taxonomy");
pub const RULES_TEXT: &str = include_str!("../../../rules/aiodc-paper.rules");
pub const KERAS_FIXTURE_TEXT: &str = include_str!("../../../fixtures/keras-github.jsonl");
pub const KERAS_CONTEXTS_TEXT: &str = include_str!("../../../fixtures/keras-github.contexts");
pub const BENCHMARK_FIXTURE_TEXT: &str =
    include_str!("../../../fixtures/defect4ml-reconstructed.jsonl");

pub fn taxonomy() -> Taxonomy {
    Taxonomy::parse(TAXONOMY_TEXT).expect("bundled taxonomy is valid")
}

pub fn rules() -> RuleSet {
    RuleSet::parse(RULES_TEXT, &taxonomy()).expect("bundled rules are valid")
}

/// The 42 Keras defects reported on GitHub.
pub fn keras_fixture() -> Vec<DefectRecord> {
    parse_canonical(KERAS_FIXTURE_TEXT)
        .expect("bundled Keras fixture is valid")
        .records
}

/// Curated severity contexts for [`keras_fixture`].
pub fn keras_contexts() -> BTreeMap<String, SeverityContext> {
    parse_contexts(KERAS_CONTEXTS_TEXT).expect("bundled contexts are valid")
}

/// All 100 benchmark defects across both platforms and frameworks.
pub fn benchmark_fixture() -> Vec<DefectRecord> {
    parse_canonical(BENCHMARK_FIXTURE_TEXT)
        .expect("bundled benchmark fixture is valid")
        .records
}
