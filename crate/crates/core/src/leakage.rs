//! Cross-partition group overlap and its repair.
//!
//! A group leaks when its images sit in more than one of train, valid and
//! test. Repair moves images toward train rather than deleting them, so the
//! record set is never changed, only partitions.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::embeddings::SimilarityPair;
use crate::error::{Error, Result};
use crate::manifest::{DatasetManifest, Partition};

/// A set of two or three assigned partitions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Combination {
    TrainValid,
    TrainTest,
    ValidTest,
    TrainValidTest,
}

impl Combination {
    pub const ALL: [Combination; 4] = [
        Combination::TrainValid,
        Combination::TrainTest,
        Combination::ValidTest,
        Combination::TrainValidTest,
    ];

    pub fn partitions(self) -> &'static [Partition] {
        use Partition::*;
        match self {
            Combination::TrainValid => &[Train, Valid],
            Combination::TrainTest => &[Train, Test],
            Combination::ValidTest => &[Valid, Test],
            Combination::TrainValidTest => &[Train, Valid, Test],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Combination::TrainValid => "train-valid",
            Combination::TrainTest => "train-test",
            Combination::ValidTest => "valid-test",
            Combination::TrainValidTest => "train-valid-test",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Overlap {
    pub image_count: usize,
    pub group_count: usize,
    pub groups: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlapReport {
    pub combinations: BTreeMap<Combination, Overlap>,
}

impl OverlapReport {
    pub fn get(&self, c: Combination) -> &Overlap {
        &self.combinations[&c]
    }

    pub fn is_clean(&self) -> bool {
        self.combinations.values().all(|o| o.group_count == 0 && o.image_count == 0)
    }
}

/// Counts groups present in every partition of each combination.
///
/// A group spanning all three partitions counts toward all four
/// combinations. The image count of a combination counts the images of its
/// groups that sit in the combination's partitions.
pub fn detect_overlap(m: &DatasetManifest) -> OverlapReport {
    let mut combinations: BTreeMap<Combination, Overlap> =
        Combination::ALL.iter().map(|&c| (c, Overlap::default())).collect();
    for (key, members) in m.groups() {
        let mut per_partition: BTreeMap<Partition, usize> = BTreeMap::new();
        for r in &members {
            if r.partition.is_assigned() {
                *per_partition.entry(r.partition).or_insert(0) += 1;
            }
        }
        if per_partition.len() < 2 {
            continue;
        }
        for c in Combination::ALL {
            let parts = c.partitions();
            if parts.iter().all(|p| per_partition.contains_key(p)) {
                let o = combinations.get_mut(&c).unwrap();
                o.group_count += 1;
                o.image_count += parts.iter().map(|p| per_partition[p]).sum::<usize>();
                o.groups.push(key.as_str().to_string());
            }
        }
    }
    OverlapReport { combinations }
}

/// Where to send groups that span valid and test but have no train image.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpanningNoTrain {
    #[default]
    ToTrain,
    ToValid,
    ToTest,
}

impl SpanningNoTrain {
    fn target(self) -> Partition {
        match self {
            SpanningNoTrain::ToTrain => Partition::Train,
            SpanningNoTrain::ToValid => Partition::Valid,
            SpanningNoTrain::ToTest => Partition::Test,
        }
    }
}

impl FromStr for SpanningNoTrain {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "to_train" => Ok(SpanningNoTrain::ToTrain),
            "to_valid" => Ok(SpanningNoTrain::ToValid),
            "to_test" => Ok(SpanningNoTrain::ToTest),
            other => Err(format!("expected to_train, to_valid or to_test, got {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MoveReason {
    /// The image's group has at least one training image.
    GroupInTrain,
    /// The group spanned valid and test only.
    GroupSpansValidTest,
    /// The image is one side of a duplicate pair crossing partitions.
    DuplicatePair,
}

impl fmt::Display for MoveReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MoveReason::GroupInTrain => "group_in_train",
            MoveReason::GroupSpansValidTest => "group_spans_valid_test",
            MoveReason::DuplicatePair => "duplicate_pair",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Move {
    pub image_id: String,
    pub from: Partition,
    pub to: Partition,
    pub reason: MoveReason,
}

/// Moves images until no group and no supplied duplicate pair spans partitions.
///
/// Rules, applied repeatedly until nothing changes:
/// 1. every image of a group with a training image goes to train;
/// 2. a group spanning valid and test only goes to `spanning_no_train`'s target;
/// 3. both images of a duplicate pair in different partitions go to train.
///
/// Unassigned images are never moved and never count as leakage.
pub fn repair(
    m: &DatasetManifest,
    extra_duplicate_pairs: &[SimilarityPair],
    spanning_no_train: SpanningNoTrain,
) -> Result<(DatasetManifest, Vec<Move>)> {
    for p in extra_duplicate_pairs {
        m.require(&p.a)?;
        m.require(&p.b)?;
    }
    let mut current: HashMap<&str, Partition> =
        m.records().iter().map(|r| (r.image_id.as_str(), r.partition)).collect();
    let groups = m.groups();
    let mut ledger = Vec::new();

    let mut relocate = |current: &mut HashMap<&str, Partition>, id: &str, to: Partition, reason| {
        let from = current[id];
        if from != to {
            ledger.push(Move {
                image_id: id.to_string(),
                from,
                to,
                reason,
            });
            *current.get_mut(id).unwrap() = to;
            true
        } else {
            false
        }
    };

    loop {
        let mut changed = false;
        for members in groups.values() {
            let present: BTreeSet<Partition> = members
                .iter()
                .map(|r| current[r.image_id.as_str()])
                .filter(|p| p.is_assigned())
                .collect();
            if present.len() < 2 {
                continue;
            }
            let (target, reason) = if present.contains(&Partition::Train) {
                (Partition::Train, MoveReason::GroupInTrain)
            } else {
                (spanning_no_train.target(), MoveReason::GroupSpansValidTest)
            };
            for r in members {
                if current[r.image_id.as_str()].is_assigned() {
                    changed |= relocate(&mut current, &r.image_id, target, reason);
                }
            }
        }
        for p in extra_duplicate_pairs {
            let (pa, pb) = (current[p.a.as_str()], current[p.b.as_str()]);
            if pa.is_assigned() && pb.is_assigned() && pa != pb {
                changed |= relocate(&mut current, &p.a, Partition::Train, MoveReason::DuplicatePair);
                changed |= relocate(&mut current, &p.b, Partition::Train, MoveReason::DuplicatePair);
            }
        }
        if !changed {
            break;
        }
    }

    Ok((m.with_partitions(&current), ledger))
}

/// Writes the move ledger as `image_id,from,to,reason`.
pub fn write_moves_csv(moves: &[Move], writer: impl Write) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["image_id", "from", "to", "reason"])?;
    for mv in moves {
        w.write_record([
            mv.image_id.as_str(),
            mv.from.as_str(),
            mv.to.as_str(),
            &mv.reason.to_string(),
        ])?;
    }
    w.flush()
}

/// Writes `combination,image_count,group_count`.
pub fn write_overlap_csv(report: &OverlapReport, writer: impl Write) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["combination", "image_count", "group_count"])?;
    for (c, o) in &report.combinations {
        w.write_record([c.as_str(), &o.image_count.to_string(), &o.group_count.to_string()])?;
    }
    w.flush()
}

pub fn check_no_overlap(m: &DatasetManifest) -> Result<()> {
    let report = detect_overlap(m);
    match report.combinations.iter().find(|(_, o)| o.group_count > 0) {
        Some((c, o)) => Err(Error::Integrity(format!(
            "{} groups leak across {}",
            o.group_count,
            c.as_str()
        ))),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifest::ImageRecord;

    fn manifest(rows: &[(&str, Option<&str>, Partition)]) -> DatasetManifest {
        DatasetManifest::from_records(
            "t",
            rows.iter()
                .map(|(id, g, p)| ImageRecord {
                    group_id: g.map(str::to_string),
                    partition: *p,
                    ..ImageRecord::new(*id, "nv")
                })
                .collect(),
        )
        .unwrap()
    }

    use Partition::*;

    #[test]
    fn confined_groups_do_not_leak() {
        let m = manifest(&[("a", Some("g"), Train), ("b", Some("g"), Train), ("c", Some("h"), Test)]);
        assert!(detect_overlap(&m).is_clean());
    }

    #[test]
    fn train_test_group_is_counted() {
        let m = manifest(&[("A", Some("g"), Train), ("B", Some("g"), Test)]);
        let r = detect_overlap(&m);
        assert_eq!(r.get(Combination::TrainTest).group_count, 1);
        assert_eq!(r.get(Combination::TrainTest).image_count, 2);
        assert_eq!(r.get(Combination::TrainValid).group_count, 0);
    }

    #[test]
    fn triple_overlap_counts_in_every_pairwise_entry() {
        let m = manifest(&[
            ("a", Some("g"), Train),
            ("b", Some("g"), Train),
            ("c", Some("g"), Valid),
            ("d", Some("g"), Test),
        ]);
        let r = detect_overlap(&m);
        assert_eq!(r.get(Combination::TrainValidTest).image_count, 4);
        assert_eq!(r.get(Combination::TrainValid).image_count, 3);
        assert_eq!(r.get(Combination::TrainTest).image_count, 3);
        assert_eq!(r.get(Combination::ValidTest).image_count, 2);
        assert!(r.combinations.values().all(|o| o.group_count == 1 && o.groups == ["g"]));
    }

    #[test]
    fn repair_moves_group_into_train() {
        let m = manifest(&[("A", Some("g"), Train), ("B", Some("g"), Test), ("C", Some("g"), Valid)]);
        let (fixed, moves) = repair(&m, &[], SpanningNoTrain::ToTrain).unwrap();
        assert!(fixed.records().iter().all(|r| r.partition == Train));
        let moved: Vec<_> = moves.iter().map(|mv| (mv.image_id.as_str(), mv.from)).collect();
        assert_eq!(moved, [("B", Test), ("C", Valid)]);
        assert!(moves.iter().all(|mv| mv.reason == MoveReason::GroupInTrain));
    }

    #[test]
    fn repair_without_leakage_is_identity() {
        let m = manifest(&[("a", None, Train), ("b", None, Valid), ("c", None, Test)]);
        let (fixed, moves) = repair(&m, &[], SpanningNoTrain::ToTrain).unwrap();
        assert_eq!(fixed, m);
        assert!(moves.is_empty());
    }

    #[test]
    fn valid_test_only_groups_follow_rule() {
        let m = manifest(&[("a", Some("g"), Valid), ("b", Some("g"), Test)]);
        for (rule, want) in [
            (SpanningNoTrain::ToTrain, Train),
            (SpanningNoTrain::ToValid, Valid),
            (SpanningNoTrain::ToTest, Test),
        ] {
            let (fixed, _) = repair(&m, &[], rule).unwrap();
            assert!(fixed.records().iter().all(|r| r.partition == want), "{rule:?}");
        }
    }

    #[test]
    fn duplicate_pairs_pull_their_groups_into_train() {
        let m = manifest(&[
            ("a", None, Train),
            ("b", Some("g"), Test),
            ("c", Some("g"), Test),
            ("d", None, Valid),
            ("e", None, Valid),
        ]);
        let pairs = [SimilarityPair::new("a", "b", 0.97), SimilarityPair::new("d", "e", 0.96)];
        let (fixed, moves) = repair(&m, &pairs, SpanningNoTrain::ToTrain).unwrap();
        assert_eq!(fixed.get("b").unwrap().partition, Train);
        assert_eq!(fixed.get("c").unwrap().partition, Train);
        // d and e are already together.
        assert_eq!(fixed.get("d").unwrap().partition, Valid);
        assert!(detect_overlap(&fixed).is_clean());
        assert_eq!(moves[0].reason, MoveReason::DuplicatePair);
        assert_eq!(moves[1].reason, MoveReason::GroupInTrain);
    }

    #[test]
    fn unknown_pair_id_is_an_error() {
        let m = manifest(&[("a", None, Train)]);
        let err = repair(&m, &[SimilarityPair::new("a", "zz", 0.99)], SpanningNoTrain::ToTrain).unwrap_err();
        assert!(matches!(err, Error::Integrity(_)));
    }

    #[test]
    fn unassigned_images_are_left_alone() {
        let m = manifest(&[("a", Some("g"), Train), ("b", Some("g"), Unassigned)]);
        assert!(detect_overlap(&m).is_clean());
        let (fixed, moves) = repair(&m, &[], SpanningNoTrain::ToTrain).unwrap();
        assert_eq!(fixed.get("b").unwrap().partition, Unassigned);
        assert!(moves.is_empty());
    }
}
