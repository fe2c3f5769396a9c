//! Label conflicts among high-similarity pairs.
//!
//! For each threshold the pairs scoring at or above it are split into
//! conflict sets: diagnosis disagreement (`D`), skin-type disagreement by at
//! least one step (`F>=1`) or by more than one step (`F>1`), and the unions
//! and intersections of `D` with both skin-type sets. Pairs with an unknown
//! skin type (FST 0) on either side never enter an `F` set.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::embeddings::SimilarityPair;
use crate::error::{Error, Result};
use crate::manifest::DatasetManifest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FstAgreement {
    Agree,
    OffByOne,
    OffByMore,
}

/// Compares two known skin types (1..=6).
pub fn fst_off_by_one(a: u8, b: u8) -> Result<FstAgreement> {
    if !(1..=6).contains(&a) || !(1..=6).contains(&b) {
        return Err(Error::Domain(format!("skin types must be known (1..=6), got {a} and {b}")));
    }
    Ok(match a.abs_diff(b) {
        0 => FstAgreement::Agree,
        1 => FstAgreement::OffByOne,
        _ => FstAgreement::OffByMore,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConflictKind {
    Diagnosis,
    FstAtLeastOne,
    FstMoreThanOne,
    DiagnosisOrFstAtLeastOne,
    DiagnosisOrFstMoreThanOne,
    DiagnosisAndFstAtLeastOne,
    DiagnosisAndFstMoreThanOne,
}

impl ConflictKind {
    pub const ALL: [ConflictKind; 7] = [
        ConflictKind::Diagnosis,
        ConflictKind::FstAtLeastOne,
        ConflictKind::FstMoreThanOne,
        ConflictKind::DiagnosisOrFstAtLeastOne,
        ConflictKind::DiagnosisOrFstMoreThanOne,
        ConflictKind::DiagnosisAndFstAtLeastOne,
        ConflictKind::DiagnosisAndFstMoreThanOne,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ConflictKind::Diagnosis => "diagnosis",
            ConflictKind::FstAtLeastOne => "fst_ge1",
            ConflictKind::FstMoreThanOne => "fst_gt1",
            ConflictKind::DiagnosisOrFstAtLeastOne => "diagnosis_or_fst_ge1",
            ConflictKind::DiagnosisOrFstMoreThanOne => "diagnosis_or_fst_gt1",
            ConflictKind::DiagnosisAndFstAtLeastOne => "diagnosis_and_fst_ge1",
            ConflictKind::DiagnosisAndFstMoreThanOne => "diagnosis_and_fst_gt1",
        }
    }

    fn holds(self, diagnosis: bool, fst_ge1: bool, fst_gt1: bool) -> bool {
        match self {
            ConflictKind::Diagnosis => diagnosis,
            ConflictKind::FstAtLeastOne => fst_ge1,
            ConflictKind::FstMoreThanOne => fst_gt1,
            ConflictKind::DiagnosisOrFstAtLeastOne => diagnosis || fst_ge1,
            ConflictKind::DiagnosisOrFstMoreThanOne => diagnosis || fst_gt1,
            ConflictKind::DiagnosisAndFstAtLeastOne => diagnosis && fst_ge1,
            ConflictKind::DiagnosisAndFstMoreThanOne => diagnosis && fst_gt1,
        }
    }
}

/// Conflict sets for one threshold. Every list is in input pair order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdConflicts {
    pub threshold: f64,
    /// Pairs scoring at or above the threshold.
    pub evaluated: usize,
    pub sets: Vec<(ConflictKind, Vec<SimilarityPair>)>,
}

impl ThresholdConflicts {
    pub fn set(&self, kind: ConflictKind) -> &[SimilarityPair] {
        self.sets
            .iter()
            .find(|(k, _)| *k == kind)
            .map(|(_, v)| v.as_slice())
            .unwrap_or(&[])
    }

    pub fn count(&self, kind: ConflictKind) -> usize {
        self.set(kind).len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConflictSets {
    pub per_threshold: Vec<ThresholdConflicts>,
}

impl ConflictSets {
    pub fn at(&self, threshold: f64) -> Option<&ThresholdConflicts> {
        self.per_threshold.iter().find(|t| t.threshold == threshold)
    }
}

/// Builds the conflict sets of `pairs` for each threshold in `thresholds`.
pub fn conflict_sets(
    pairs: &[SimilarityPair],
    m: &DatasetManifest,
    thresholds: &[f64],
) -> Result<ConflictSets> {
    let mut flags = Vec::with_capacity(pairs.len());
    for p in pairs {
        let (ra, rb) = (m.require(&p.a)?, m.require(&p.b)?);
        let diagnosis = ra.diagnosis != rb.diagnosis;
        let fst = if ra.fst == 0 || rb.fst == 0 {
            None
        } else {
            Some(fst_off_by_one(ra.fst, rb.fst)?)
        };
        let fst_ge1 = matches!(fst, Some(FstAgreement::OffByOne | FstAgreement::OffByMore));
        let fst_gt1 = matches!(fst, Some(FstAgreement::OffByMore));
        flags.push((diagnosis, fst_ge1, fst_gt1));
    }

    let per_threshold = thresholds
        .iter()
        .map(|&threshold| {
            let selected: Vec<usize> = (0..pairs.len()).filter(|&i| pairs[i].score >= threshold).collect();
            let sets = ConflictKind::ALL
                .iter()
                .map(|&kind| {
                    let members = selected
                        .iter()
                        .filter(|&&i| {
                            let (d, f1, f2) = flags[i];
                            kind.holds(d, f1, f2)
                        })
                        .map(|&i| pairs[i].clone())
                        .collect();
                    (kind, members)
                })
                .collect();
            ThresholdConflicts {
                threshold,
                evaluated: selected.len(),
                sets,
            }
        })
        .collect();
    Ok(ConflictSets { per_threshold })
}

/// Writes the count matrix: one row per conflict kind, one column per threshold.
pub fn write_summary_csv(c: &ConflictSets, writer: impl Write) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["set".to_string()];
    header.extend(c.per_threshold.iter().map(|t| t.threshold.to_string()));
    w.write_record(&header)?;
    let mut evaluated = vec!["evaluated".to_string()];
    evaluated.extend(c.per_threshold.iter().map(|t| t.evaluated.to_string()));
    w.write_record(&evaluated)?;
    for kind in ConflictKind::ALL {
        let mut row = vec![kind.as_str().to_string()];
        row.extend(c.per_threshold.iter().map(|t| t.count(kind).to_string()));
        w.write_record(&row)?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifest::ImageRecord;

    fn manifest(rows: &[(&str, &str, u8)]) -> DatasetManifest {
        DatasetManifest::from_records(
            "t",
            rows.iter()
                .map(|(id, d, f)| ImageRecord {
                    fst: *f,
                    ..ImageRecord::new(*id, *d)
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn off_by_one_semantics() {
        assert_eq!(fst_off_by_one(3, 3).unwrap(), FstAgreement::Agree);
        assert_eq!(fst_off_by_one(3, 4).unwrap(), FstAgreement::OffByOne);
        assert_eq!(fst_off_by_one(1, 5).unwrap(), FstAgreement::OffByMore);
        assert!(matches!(fst_off_by_one(0, 2), Err(Error::Domain(_))));
    }

    #[test]
    fn identical_labels_conflict_nowhere() {
        let m = manifest(&[("a", "ps", 2), ("b", "ps", 2)]);
        let c = conflict_sets(&[SimilarityPair::new("a", "b", 0.97)], &m, &[0.9]).unwrap();
        assert!(ConflictKind::ALL.iter().all(|&k| c.per_threshold[0].count(k) == 0));
    }

    #[test]
    fn skin_type_gap_of_three() {
        let m = manifest(&[("a", "ps", 2), ("b", "ps", 5)]);
        let c = conflict_sets(&[SimilarityPair::new("a", "b", 0.97)], &m, &[0.9]).unwrap();
        let t = &c.per_threshold[0];
        assert_eq!(t.count(ConflictKind::FstAtLeastOne), 1);
        assert_eq!(t.count(ConflictKind::FstMoreThanOne), 1);
        assert_eq!(t.count(ConflictKind::Diagnosis), 0);
    }

    #[test]
    fn unknown_skin_type_counts_only_for_diagnosis() {
        let m = manifest(&[("a", "ps", 0), ("b", "ro", 5)]);
        let c = conflict_sets(&[SimilarityPair::new("a", "b", 0.97)], &m, &[0.9]).unwrap();
        let t = &c.per_threshold[0];
        assert_eq!(t.count(ConflictKind::Diagnosis), 1);
        assert_eq!(t.count(ConflictKind::FstAtLeastOne), 0);
        assert_eq!(t.count(ConflictKind::DiagnosisOrFstAtLeastOne), 1);
        assert_eq!(t.count(ConflictKind::DiagnosisAndFstAtLeastOne), 0);
    }

    #[test]
    fn thresholds_filter_pairs() {
        let m = manifest(&[("a", "ps", 1), ("b", "ro", 1), ("c", "ps", 3)]);
        let pairs = [SimilarityPair::new("a", "b", 0.96), SimilarityPair::new("a", "c", 0.91)];
        let c = conflict_sets(&pairs, &m, &[0.90, 0.95]).unwrap();
        assert_eq!(c.at(0.90).unwrap().evaluated, 2);
        assert_eq!(c.at(0.95).unwrap().evaluated, 1);
        assert_eq!(c.at(0.90).unwrap().count(ConflictKind::DiagnosisOrFstMoreThanOne), 2);
        assert_eq!(c.at(0.95).unwrap().count(ConflictKind::FstMoreThanOne), 0);
    }
}
