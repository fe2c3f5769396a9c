use std::collections::{BTreeSet, HashSet};

use log::warn;

use crate::error::{Error, Result};
use crate::manifest::{DatasetManifest, ImageRecord, Partition};

/// Combines three sources into one manifest with train/valid/test taken
/// from the source, dropping `exclusions`.
///
/// Returns the manifest and the exclusion ids that matched nothing.
pub fn build_extended(
    train: &DatasetManifest,
    valid: &DatasetManifest,
    test: &DatasetManifest,
    exclusions: &[String],
) -> Result<(DatasetManifest, Vec<String>)> {
    let excluded: HashSet<&str> = exclusions.iter().map(String::as_str).collect();
    let mut seen: HashSet<&str> = HashSet::new();
    let mut records = Vec::with_capacity(train.len() + valid.len() + test.len());
    let mut label_space = BTreeSet::new();
    let mut matched = HashSet::new();

    for (source, partition) in [(train, Partition::Train), (valid, Partition::Valid), (test, Partition::Test)] {
        label_space.extend(source.label_space().iter().cloned());
        for r in source.records() {
            if !seen.insert(&r.image_id) {
                return Err(Error::Integrity(format!(
                    "image_id {} appears in more than one source",
                    r.image_id
                )));
            }
            if excluded.contains(r.image_id.as_str()) {
                matched.insert(r.image_id.as_str());
                continue;
            }
            records.push(ImageRecord {
                partition,
                ..r.clone()
            });
        }
    }

    let unmatched: Vec<String> = exclusions
        .iter()
        .filter(|id| !matched.contains(id.as_str()))
        .cloned()
        .collect();
    for id in &unmatched {
        warn!("exclusion {id} is not present in any source");
    }
    let name = format!("{}-extended", train.name());
    Ok((DatasetManifest::new(name, records, label_space)?, unmatched))
}
