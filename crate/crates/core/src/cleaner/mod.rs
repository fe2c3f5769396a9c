//! End-to-end cleaning of a dataset into a release.
//!
//! [`clean`] runs the removal stages in order:
//!
//! 1. near-exact duplicates: for each pair scoring above
//!    `near_exact_threshold` whose images both survive, the larger image id is
//!    removed (or, with [`NearExactPolicy::RemoveAll`], every image in such a
//!    pair is removed);
//! 2. duplicate clusters: a cluster whose members disagree on diagnosis or on
//!    known skin type is removed entirely; otherwise only the member with the
//!    largest pixel area survives (ties go to the smallest id);
//! 3. erroneous images, from an explicit id list and/or an outlier-score cutoff;
//! 4. optionally, images with unknown skin type.
//!
//! Every removed id lands in the [`RemovalLedger`] exactly once.

mod extend;
mod resize;
mod split;

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

pub use extend::build_extended;
pub use resize::{resize_export, resize_tree};
pub use split::{apportion, stratified_split, SplitReport};

use crate::duplicates::{homogeneity_of, DuplicateCluster};
use crate::embeddings::{scan_pairs, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::manifest::{DatasetManifest, ImageRecord};
use crate::outliers::{below_cutoff, outlier_scores, DEFAULT_NEIGHBORS};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeepRule {
    /// Keep the member with the largest width × height.
    #[default]
    LargestResolution,
}

/// What stage 1 does with a pair above the near-exact threshold.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NearExactPolicy {
    /// Keep the smaller image id of the pair.
    #[default]
    KeepSmallerId,
    /// Remove every image whose best match scores above the threshold.
    RemoveAll,
}

fn default_near_exact() -> f64 {
    0.99
}

fn default_ratios() -> [f64; 3] {
    [0.70, 0.10, 0.20]
}

fn default_neighbors() -> usize {
    DEFAULT_NEIGHBORS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CleaningConfig {
    #[serde(default = "default_near_exact")]
    pub near_exact_threshold: f64,
    #[serde(default)]
    pub near_exact_policy: NearExactPolicy,
    #[serde(default)]
    pub keep_rule: KeepRule,
    #[serde(default)]
    pub remove_unknown_fst: bool,
    /// Images known to be erroneous.
    #[serde(default)]
    pub outlier_ids: Vec<String>,
    /// Remove images whose outlier score is below this value. No default.
    #[serde(default)]
    pub outlier_threshold: Option<f64>,
    #[serde(default = "default_neighbors")]
    pub outlier_neighbors: usize,
    /// Train, valid and test fractions.
    #[serde(default = "default_ratios")]
    pub split_ratios: [f64; 3],
    #[serde(default)]
    pub seed: u64,
}

impl Default for CleaningConfig {
    fn default() -> Self {
        CleaningConfig {
            near_exact_threshold: default_near_exact(),
            near_exact_policy: NearExactPolicy::default(),
            keep_rule: KeepRule::default(),
            remove_unknown_fst: false,
            outlier_ids: Vec::new(),
            outlier_threshold: None,
            outlier_neighbors: default_neighbors(),
            split_ratios: default_ratios(),
            seed: 0,
        }
    }
}

pub(crate) fn validate_ratios(ratios: &[f64; 3]) -> Result<()> {
    if ratios.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
        return Err(Error::Config(format!("split ratios {ratios:?} must all be positive")));
    }
    let sum: f64 = ratios.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("split ratios sum to {sum}, not 1")));
    }
    Ok(())
}

impl CleaningConfig {
    pub fn validate(&self) -> Result<()> {
        validate_ratios(&self.split_ratios)?;
        if !(-1.0..=1.0).contains(&self.near_exact_threshold) {
            return Err(Error::Config(format!(
                "near_exact_threshold {} outside [-1, 1]",
                self.near_exact_threshold
            )));
        }
        if self.outlier_neighbors == 0 {
            return Err(Error::Config("outlier_neighbors must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RemovalStage {
    NearExact,
    HeterogeneousCluster,
    HomogeneousClusterNonkeeper,
    Erroneous,
    UnknownFst,
}

impl fmt::Display for RemovalStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RemovalStage::NearExact => "near_exact",
            RemovalStage::HeterogeneousCluster => "heterogeneous_cluster",
            RemovalStage::HomogeneousClusterNonkeeper => "homogeneous_cluster_nonkeeper",
            RemovalStage::Erroneous => "erroneous",
            RemovalStage::UnknownFst => "unknown_fst",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Removal {
    pub image_id: String,
    pub stage: RemovalStage,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RemovalLedger {
    pub entries: Vec<Removal>,
}

impl RemovalLedger {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn count(&self, stage: RemovalStage) -> usize {
        self.entries.iter().filter(|e| e.stage == stage).count()
    }

    pub fn write_csv(&self, writer: impl Write) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["image_id", "stage", "detail"])?;
        for e in &self.entries {
            w.write_record([e.image_id.as_str(), &e.stage.to_string(), &e.detail])?;
        }
        w.flush()
    }
}

struct Removals {
    removed: HashSet<String>,
    ledger: RemovalLedger,
}

impl Removals {
    fn contains(&self, id: &str) -> bool {
        self.removed.contains(id)
    }

    fn remove(&mut self, id: &str, stage: RemovalStage, detail: String) {
        if self.removed.insert(id.to_string()) {
            self.ledger.entries.push(Removal {
                image_id: id.to_string(),
                stage,
                detail,
            });
        }
    }
}

fn keeper<'a>(members: &[&'a ImageRecord]) -> Option<&'a ImageRecord> {
    // Largest area, then smallest id; members arrive sorted by id.
    members
        .iter()
        .copied()
        .fold(None, |best: Option<&ImageRecord>, r| match best {
            Some(b) if b.area() >= r.area() => Some(b),
            _ => Some(r),
        })
}

/// Runs the cleaning stages; returns the surviving manifest and the ledger.
///
/// `clusters` are the final (coalesced) duplicate clusters; their
/// homogeneity is recomputed from `m`.
pub fn clean(
    m: &DatasetManifest,
    e: &EmbeddingMatrix,
    clusters: &[DuplicateCluster],
    cfg: &CleaningConfig,
) -> Result<(DatasetManifest, RemovalLedger)> {
    cfg.validate()?;
    e.check_bound_to(m)?;
    for c in clusters {
        for id in &c.members {
            m.require(id)?;
        }
    }
    for id in &cfg.outlier_ids {
        m.require(id)?;
    }

    let mut rm = Removals {
        removed: HashSet::new(),
        ledger: RemovalLedger::default(),
    };

    for p in scan_pairs(e, cfg.near_exact_threshold) {
        if p.score <= cfg.near_exact_threshold {
            continue;
        }
        match cfg.near_exact_policy {
            NearExactPolicy::KeepSmallerId => {
                if !rm.contains(&p.a) && !rm.contains(&p.b) {
                    rm.remove(&p.b, RemovalStage::NearExact, format!("similarity {} to {}", p.score, p.a));
                }
            }
            NearExactPolicy::RemoveAll => {
                rm.remove(&p.a, RemovalStage::NearExact, format!("similarity {} to {}", p.score, p.b));
                rm.remove(&p.b, RemovalStage::NearExact, format!("similarity {} to {}", p.score, p.a));
            }
        }
    }

    for (cid, c) in clusters.iter().enumerate() {
        let h = homogeneity_of(&c.members, m)?;
        let alive: Vec<&ImageRecord> = c
            .members
            .iter()
            .filter(|id| !rm.contains(id))
            .map(|id| m.require(id))
            .collect::<Result<_>>()?;
        if !h.is_homogeneous() {
            let why = match (h.diagnosis, h.fst) {
                (false, false) => "diagnosis and fst differ",
                (false, true) => "diagnosis differs",
                _ => "fst differs",
            };
            for r in alive {
                rm.remove(&r.image_id, RemovalStage::HeterogeneousCluster, format!("cluster {cid}: {why}"));
            }
            continue;
        }
        let KeepRule::LargestResolution = cfg.keep_rule;
        if let Some(keep) = keeper(&alive) {
            for r in alive.iter().filter(|r| r.image_id != keep.image_id) {
                rm.remove(
                    &r.image_id,
                    RemovalStage::HomogeneousClusterNonkeeper,
                    format!("cluster {cid}: kept {}", keep.image_id),
                );
            }
        }
    }

    let mut erroneous: BTreeSet<String> = cfg.outlier_ids.iter().cloned().collect();
    if let Some(cutoff) = cfg.outlier_threshold {
        let scores = outlier_scores(e, cfg.outlier_neighbors)?;
        erroneous.extend(below_cutoff(&scores, cutoff));
    }
    for id in &erroneous {
        let detail = if cfg.outlier_ids.contains(id) {
            "listed as erroneous".to_string()
        } else {
            format!("outlier score below {}", cfg.outlier_threshold.unwrap_or_default())
        };
        rm.remove(id, RemovalStage::Erroneous, detail);
    }

    if cfg.remove_unknown_fst {
        for r in m.records().iter().filter(|r| r.fst == 0) {
            rm.remove(&r.image_id, RemovalStage::UnknownFst, "fst unknown".into());
        }
    }

    let survivors = m.retain(|r| !rm.contains(&r.image_id));
    Ok((survivors, rm.ledger))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, diag: &str, fst: u8, side: u32) -> ImageRecord {
        ImageRecord {
            fst,
            width: Some(side),
            height: Some(side),
            ..ImageRecord::new(id, diag)
        }
    }

    fn cluster(ids: &[&str]) -> DuplicateCluster {
        DuplicateCluster {
            members: ids.iter().map(|s| s.to_string()).collect(),
            mean_similarity: 0.95,
            homogeneity: None,
        }
    }

    /// Unit vectors at distinct angles: no pair above 0.99.
    fn spread(ids: &[&str]) -> EmbeddingMatrix {
        EmbeddingMatrix::from_rows(ids.iter().enumerate().map(|(i, id)| {
            let t = (i as f32) * 0.6;
            (*id, vec![t.cos(), t.sin(), 0.1])
        }))
        .unwrap()
    }

    #[test]
    fn homogeneous_cluster_keeps_largest() {
        let m = DatasetManifest::from_records(
            "t",
            vec![rec("a", "ps", 2, 100), rec("b", "ps", 2, 200), rec("c", "ps", 2, 150)],
        )
        .unwrap();
        let e = spread(&["a", "b", "c"]);
        let (out, ledger) = clean(&m, &e, &[cluster(&["a", "b", "c"])], &CleaningConfig::default()).unwrap();
        assert_eq!(out.ids().collect::<Vec<_>>(), ["b"]);
        assert_eq!(ledger.count(RemovalStage::HomogeneousClusterNonkeeper), 2);
    }

    #[test]
    fn keeper_ties_go_to_smallest_id() {
        let m = DatasetManifest::from_records("t", vec![rec("b", "ps", 2, 100), rec("a", "ps", 2, 100)]).unwrap();
        let e = spread(&["a", "b"]);
        let (out, _) = clean(&m, &e, &[cluster(&["a", "b"])], &CleaningConfig::default()).unwrap();
        assert_eq!(out.ids().collect::<Vec<_>>(), ["a"]);
    }

    #[test]
    fn heterogeneous_cluster_is_removed() {
        let m = DatasetManifest::from_records("t", vec![rec("a", "ps", 2, 100), rec("b", "ro", 2, 200), rec("z", "ro", 1, 9)]).unwrap();
        let e = spread(&["a", "b", "z"]);
        let (out, ledger) = clean(&m, &e, &[cluster(&["a", "b"])], &CleaningConfig::default()).unwrap();
        assert_eq!(out.ids().collect::<Vec<_>>(), ["z"]);
        assert_eq!(ledger.count(RemovalStage::HeterogeneousCluster), 2);
    }

    #[test]
    fn near_exact_keeps_smaller_id() {
        let m = DatasetManifest::from_records("t", vec![rec("a", "ps", 2, 10), rec("b", "ps", 2, 10), rec("c", "ro", 3, 10)]).unwrap();
        let e = EmbeddingMatrix::from_rows([
            ("a", vec![1.0f32, 0.0]),
            ("b", vec![1.0, 0.001]),
            ("c", vec![0.0, 1.0]),
        ])
        .unwrap();
        let (out, ledger) = clean(&m, &e, &[], &CleaningConfig::default()).unwrap();
        assert_eq!(out.ids().collect::<Vec<_>>(), ["a", "c"]);
        assert_eq!(ledger.entries[0].stage, RemovalStage::NearExact);
        assert_eq!(ledger.entries[0].image_id, "b");

        let cfg = CleaningConfig {
            near_exact_policy: NearExactPolicy::RemoveAll,
            ..CleaningConfig::default()
        };
        let (out, ledger) = clean(&m, &e, &[], &cfg).unwrap();
        assert_eq!(out.ids().collect::<Vec<_>>(), ["c"]);
        assert_eq!(ledger.count(RemovalStage::NearExact), 2);
    }

    #[test]
    fn outliers_and_unknown_fst() {
        let m = DatasetManifest::from_records("t", vec![rec("a", "ps", 0, 10), rec("b", "ps", 2, 10), rec("c", "ro", 3, 10)]).unwrap();
        let e = spread(&["a", "b", "c"]);
        let cfg = CleaningConfig {
            outlier_ids: vec!["c".into()],
            remove_unknown_fst: true,
            ..Default::default()
        };
        let (out, ledger) = clean(&m, &e, &[], &cfg).unwrap();
        assert_eq!(out.ids().collect::<Vec<_>>(), ["b"]);
        assert_eq!(ledger.count(RemovalStage::Erroneous), 1);
        assert_eq!(ledger.count(RemovalStage::UnknownFst), 1);
    }

    #[test]
    fn cluster_with_unknown_member_is_an_error() {
        let m = DatasetManifest::from_records("t", vec![rec("a", "ps", 2, 10), rec("b", "ps", 2, 10)]).unwrap();
        let e = spread(&["a", "b"]);
        let err = clean(&m, &e, &[cluster(&["a", "gone"])], &CleaningConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Integrity(_)));
    }

    #[test]
    fn config_from_toml() {
        let cfg: CleaningConfig = toml::from_str(
            "near_exact_threshold = 0.98\nsplit_ratios = [0.8, 0.1, 0.1]\nseed = 7\noutlier_ids = [\"x\"]\n",
        )
        .unwrap();
        assert_eq!(cfg.near_exact_threshold, 0.98);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.outlier_neighbors, 5);
        cfg.validate().unwrap();
        let bad = CleaningConfig {
            split_ratios: [0.5, 0.2, 0.2],
            ..Default::default()
        };
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
    }
}
