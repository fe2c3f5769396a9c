//! Human review of duplicate candidates and inter-annotator agreement.
//!
//! A [`ReviewSession`] is fully determined by its queue of candidate pairs
//! and its [`VerdictLog`]; restarting the service and replaying the log
//! reproduces the session exactly.

pub mod server;
mod store;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use store::{read_verdicts, VerdictLog};

use crate::embeddings::{pair_order, PairKey, SimilarityPair};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerdictValue {
    Duplicate,
    Unclear,
    Different,
}

impl VerdictValue {
    pub const ALL: [VerdictValue; 3] = [VerdictValue::Duplicate, VerdictValue::Unclear, VerdictValue::Different];

    pub fn as_str(self) -> &'static str {
        match self {
            VerdictValue::Duplicate => "duplicate",
            VerdictValue::Unclear => "unclear",
            VerdictValue::Different => "different",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for VerdictValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VerdictValue {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "duplicate" => Ok(VerdictValue::Duplicate),
            "unclear" => Ok(VerdictValue::Unclear),
            "different" => Ok(VerdictValue::Different),
            other => Err(format!("verdict must be duplicate, unclear or different, got {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub pair: PairKey,
    pub annotator: String,
    pub value: VerdictValue,
    /// Milliseconds since the Unix epoch.
    pub timestamp: u64,
}

impl Verdict {
    pub fn now(pair: PairKey, annotator: impl Into<String>, value: VerdictValue) -> Self {
        let timestamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0);
        Verdict {
            pair,
            annotator: annotator.into(),
            value,
            timestamp,
        }
    }
}

/// Raw agreement and Cohen's kappa between two annotators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    pub common: usize,
    pub matching: usize,
    /// Fraction of common pairs with the same verdict.
    pub agreement: f64,
    pub kappa: f64,
}

/// Cohen's kappa over the pairs both annotators judged.
///
/// Expected agreement comes from each annotator's marginal verdict
/// frequencies over those pairs. When expected agreement is 1 (both used one
/// and the same category throughout) kappa is defined as 1.
pub fn cohen_kappa(
    a: &HashMap<PairKey, VerdictValue>,
    b: &HashMap<PairKey, VerdictValue>,
) -> Result<Agreement> {
    let mut confusion = [[0usize; 3]; 3];
    for (pair, va) in a {
        if let Some(vb) = b.get(pair) {
            confusion[va.index()][vb.index()] += 1;
        }
    }
    let common: usize = confusion.iter().flatten().sum();
    if common == 0 {
        return Err(Error::Argument("annotators share no judged pairs".into()));
    }
    let matching: usize = (0..3).map(|i| confusion[i][i]).sum();
    let n = common as f64;
    let p_o = matching as f64 / n;
    let p_e: f64 = (0..3)
        .map(|i| {
            let row: usize = confusion[i].iter().sum();
            let col: usize = confusion.iter().map(|r| r[i]).sum();
            (row as f64 / n) * (col as f64 / n)
        })
        .sum();
    let kappa = if (1.0 - p_e).abs() < 1e-12 {
        1.0
    } else {
        (p_o - p_e) / (1.0 - p_e)
    };
    Ok(Agreement {
        common,
        matching,
        agreement: p_o,
        kappa,
    })
}

/// Which verdicts make a pair a confirmed duplicate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Adjudication {
    /// The named annotator said duplicate.
    Primary(String),
    /// At least two annotators judged the pair and all said duplicate.
    Consensus,
}

/// All verdicts of one annotator.
pub fn verdicts_of(verdicts: &[Verdict], annotator: &str) -> HashMap<PairKey, VerdictValue> {
    verdicts
        .iter()
        .filter(|v| v.annotator == annotator)
        .map(|v| (v.pair.clone(), v.value))
        .collect()
}

/// Annotator ids in first-seen order.
pub fn annotators(verdicts: &[Verdict]) -> Vec<String> {
    let mut seen = Vec::new();
    for v in verdicts {
        if !seen.contains(&v.annotator) {
            seen.push(v.annotator.clone());
        }
    }
    seen
}

/// Pairs that are confirmed duplicates under `rule`.
pub fn confirmed_pairs(verdicts: &[Verdict], rule: &Adjudication) -> BTreeSet<PairKey> {
    match rule {
        Adjudication::Primary(who) => verdicts
            .iter()
            .filter(|v| &v.annotator == who && v.value == VerdictValue::Duplicate)
            .map(|v| v.pair.clone())
            .collect(),
        Adjudication::Consensus => {
            let mut by_pair: BTreeMap<&PairKey, Vec<VerdictValue>> = BTreeMap::new();
            for v in verdicts {
                by_pair.entry(&v.pair).or_default().push(v.value);
            }
            by_pair
                .into_iter()
                .filter(|(_, vs)| vs.len() >= 2 && vs.iter().all(|v| *v == VerdictValue::Duplicate))
                .map(|(p, _)| p.clone())
                .collect()
        }
    }
}

/// Per-verdict effective value under `rule`, for feeding pair classification:
/// the primary annotator's verdict, or the shared verdict when all annotators
/// agree (`unclear` otherwise).
pub fn adjudicated_verdicts(verdicts: &[Verdict], rule: &Adjudication) -> HashMap<PairKey, VerdictValue> {
    match rule {
        Adjudication::Primary(who) => verdicts_of(verdicts, who),
        Adjudication::Consensus => {
            let mut by_pair: HashMap<PairKey, Vec<VerdictValue>> = HashMap::new();
            for v in verdicts {
                by_pair.entry(v.pair.clone()).or_default().push(v.value);
            }
            by_pair
                .into_iter()
                .map(|(p, vs)| {
                    let agreed = vs.len() >= 2 && vs.iter().all(|v| *v == vs[0]);
                    (p, if agreed { vs[0] } else { VerdictValue::Unclear })
                })
                .collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnotatorProgress {
    pub annotator: String,
    pub answered: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairAgreement {
    pub annotators: [String; 2],
    pub common: usize,
    /// `None` when the two annotators share no pairs.
    pub agreement: Option<f64>,
    pub kappa: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionStats {
    pub session_id: String,
    pub total: usize,
    pub annotators: Vec<AnnotatorProgress>,
    pub agreement: Vec<PairAgreement>,
}

/// A fixed queue of candidate pairs and the verdicts recorded against it.
#[derive(Debug)]
pub struct ReviewSession {
    id: String,
    queue: Vec<SimilarityPair>,
    positions: HashMap<PairKey, usize>,
    log: VerdictLog,
    cursors: HashMap<String, usize>,
}

impl ReviewSession {
    /// The queue is ordered by descending score at creation and never reordered.
    pub fn new(mut pairs: Vec<SimilarityPair>, log: VerdictLog) -> Result<Self> {
        pairs.sort_by(pair_order);
        let mut positions = HashMap::with_capacity(pairs.len());
        let mut hasher = Sha256::new();
        for (i, p) in pairs.iter().enumerate() {
            if positions.insert(p.key(), i).is_some() {
                return Err(Error::Integrity(format!("pair {} {} queued twice", p.a, p.b)));
            }
            hasher.update(format!("{}\t{}\n", p.a, p.b).as_bytes());
        }
        let digest = hasher.finalize();
        let id: String = digest.iter().take(8).map(|b| format!("{b:02x}")).collect();
        Ok(ReviewSession {
            id,
            queue: pairs,
            positions,
            log,
            cursors: HashMap::new(),
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn queue(&self) -> &[SimilarityPair] {
        &self.queue
    }

    pub fn verdicts(&self) -> &[Verdict] {
        self.log.verdicts()
    }

    pub fn answered_by(&self, annotator: &str) -> usize {
        self.log.verdicts().iter().filter(|v| v.annotator == annotator).count()
    }

    fn first_open(&self, annotator: &str, from: usize) -> usize {
        (from..self.queue.len())
            .find(|&i| !self.log.contains(&self.queue[i].key(), annotator))
            .unwrap_or(self.queue.len())
    }

    /// The first queued pair this annotator has not judged, with its position.
    ///
    /// Fetching does not advance; only recording a verdict does.
    pub fn next_pair(&self, annotator: &str) -> Option<(usize, &SimilarityPair)> {
        let from = self.cursors.get(annotator).copied().unwrap_or(0);
        let i = self.first_open(annotator, from);
        self.queue.get(i).map(|p| (i, p))
    }

    /// Records a verdict; returns the number of verdicts now stored.
    pub fn record_verdict(&mut self, v: Verdict) -> Result<usize> {
        if !self.positions.contains_key(&v.pair) {
            return Err(Error::NotFound(format!("pair {} {} is not in the queue", v.pair.a, v.pair.b)));
        }
        let annotator = v.annotator.clone();
        self.log.append(v)?;
        let from = self.cursors.get(&annotator).copied().unwrap_or(0);
        let next = self.first_open(&annotator, from);
        self.cursors.insert(annotator, next);
        Ok(self.log.len())
    }

    pub fn stats(&self) -> SessionStats {
        let names = annotators(self.log.verdicts());
        let progress = names
            .iter()
            .map(|a| AnnotatorProgress {
                annotator: a.clone(),
                answered: self.answered_by(a),
                total: self.queue.len(),
            })
            .collect();
        let per: Vec<HashMap<PairKey, VerdictValue>> =
            names.iter().map(|a| verdicts_of(self.log.verdicts(), a)).collect();
        let mut agreement = Vec::new();
        for i in 0..names.len() {
            for j in i + 1..names.len() {
                let result = cohen_kappa(&per[i], &per[j]).ok();
                agreement.push(PairAgreement {
                    annotators: [names[i].clone(), names[j].clone()],
                    common: result.map_or(0, |r| r.common),
                    agreement: result.map(|r| r.agreement),
                    kappa: result.map(|r| r.kappa),
                });
            }
        }
        SessionStats {
            session_id: self.id.clone(),
            total: self.queue.len(),
            annotators: progress,
            agreement,
        }
    }
}
