//! Workload builders shared by the benchmarks.

use std::collections::BTreeMap;

use aiodc_core::{bundled, ClassificationLabel, DefectRecord, SeverityContext};

/// The Keras case study repeated `copies` times with distinct ids.
pub fn scaled_keras(copies: usize) -> (Vec<DefectRecord>, BTreeMap<String, SeverityContext>) {
    let base = bundled::keras_fixture();
    let contexts = bundled::keras_contexts();
    let mut records = Vec::with_capacity(base.len() * copies);
    let mut scaled = BTreeMap::new();
    for k in 0..copies {
        for r in &base {
            let mut r = r.clone();
            let id = format!("{}#{k}", r.id);
            if let Some(ctx) = contexts.get(&r.id) {
                scaled.insert(id.clone(), *ctx);
            }
            r.id = id;
            r.cross_refs.clear();
            records.push(r);
        }
    }
    (records, scaled)
}

/// Rule-engine labels for [`scaled_keras`].
pub fn scaled_labels(copies: usize) -> Vec<ClassificationLabel> {
    let (records, contexts) = scaled_keras(copies);
    aiodc_core::classify::classify_dataset(&records, &bundled::rules(), &contexts)
        .expect("bundled fixture classifies")
}
