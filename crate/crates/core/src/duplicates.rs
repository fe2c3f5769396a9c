//! Duplicate pairs and clusters, and the forensic analyses run over them.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embeddings::{pair_order, scan_pairs, EmbeddingMatrix, PairKey, SimilarityPair};
use crate::error::{Error, Result};
use crate::manifest::DatasetManifest;
use crate::review::VerdictValue;
use crate::union_find::DisjointSet;

/// Group sizes inspected by [`least_similar_within_groups`].
pub const LOW_SIMILARITY_BUCKETS: std::ops::RangeInclusive<usize> = 2..=6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Homogeneity {
    pub diagnosis: bool,
    /// All known skin types agree (unknown FST 0 is ignored).
    pub fst: bool,
}

impl Homogeneity {
    pub fn is_homogeneous(&self) -> bool {
        self.diagnosis && self.fst
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DuplicateCluster {
    /// Sorted, at least two ids.
    pub members: Vec<String>,
    /// Mean cosine similarity over all member pairs.
    pub mean_similarity: f64,
    /// Filled in by [`label_clusters`]; `None` until labels are known.
    pub homogeneity: Option<Homogeneity>,
}

impl DuplicateCluster {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn is_homogeneous(&self) -> Option<bool> {
        self.homogeneity.map(|h| h.is_homogeneous())
    }
}

fn cluster_order(x: &DuplicateCluster, y: &DuplicateCluster) -> std::cmp::Ordering {
    crate::embeddings::cmp_score(y.mean_similarity, x.mean_similarity)
        .then_with(|| x.members[0].cmp(&y.members[0]))
}

/// Mean of the `C(n, 2)` pairwise similarities among `rows`.
pub fn mean_pairwise_similarity(e: &EmbeddingMatrix, rows: &[usize]) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for (k, &i) in rows.iter().enumerate() {
        for &j in &rows[k + 1..] {
            sum += e.cosine_rows(i, j);
            count += 1;
        }
    }
    if count == 0 {
        1.0
    } else {
        sum / count as f64
    }
}

fn build_cluster(e: &EmbeddingMatrix, mut members: Vec<String>) -> Result<DuplicateCluster> {
    members.sort();
    let rows = members
        .iter()
        .map(|id| e.require_position(id))
        .collect::<Result<Vec<_>>>()?;
    Ok(DuplicateCluster {
        mean_similarity: mean_pairwise_similarity(e, &rows),
        members,
        homogeneity: None,
    })
}

/// Connected components of the `score >= threshold` graph with at least
/// `min_size` members whose mean pairwise similarity exceeds `threshold`.
///
/// Components failing the mean criterion are dropped whole, not split.
pub fn detect_clusters(e: &EmbeddingMatrix, threshold: f64, min_size: usize) -> Result<Vec<DuplicateCluster>> {
    if min_size < 2 {
        return Err(Error::Argument(format!("min_size {min_size} must be at least 2")));
    }
    let pairs = scan_pairs(e, threshold);
    let mut ds = DisjointSet::new(e.len());
    for p in &pairs {
        ds.union(e.require_position(&p.a)?, e.require_position(&p.b)?);
    }
    let mut clusters = Vec::new();
    for rows in ds.components() {
        if rows.len() < min_size {
            continue;
        }
        let mean = mean_pairwise_similarity(e, &rows);
        if mean > threshold {
            let mut members: Vec<String> = rows.iter().map(|&i| e.ids()[i].clone()).collect();
            members.sort();
            clusters.push(DuplicateCluster {
                members,
                mean_similarity: mean,
                homogeneity: None,
            });
        }
    }
    clusters.sort_by(cluster_order);
    Ok(clusters)
}

/// Merges verified pairs and clusters into maximal clusters with union-find.
///
/// The result does not depend on the order of `pairs` or `clusters`.
pub fn coalesce(
    pairs: &[SimilarityPair],
    clusters: &[DuplicateCluster],
    e: &EmbeddingMatrix,
) -> Result<Vec<DuplicateCluster>> {
    let ids: BTreeSet<&str> = pairs
        .iter()
        .flat_map(|p| [p.a.as_str(), p.b.as_str()])
        .chain(clusters.iter().flat_map(|c| c.members.iter().map(String::as_str)))
        .collect();
    let ids: Vec<&str> = ids.into_iter().collect();
    let pos: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();

    let mut ds = DisjointSet::new(ids.len());
    for p in pairs {
        ds.union(pos[p.a.as_str()], pos[p.b.as_str()]);
    }
    for c in clusters {
        if let Some((first, rest)) = c.members.split_first() {
            for m in rest {
                ds.union(pos[first.as_str()], pos[m.as_str()]);
            }
        }
    }
    let mut out = ds
        .components()
        .into_iter()
        .filter(|c| c.len() >= 2)
        .map(|c| build_cluster(e, c.into_iter().map(|i| ids[i].to_string()).collect()))
        .collect::<Result<Vec<_>>>()?;
    out.sort_by(cluster_order);
    Ok(out)
}

/// Diagnosis and skin-type agreement among `members`.
pub fn homogeneity_of(members: &[String], m: &DatasetManifest) -> Result<Homogeneity> {
    let records = members.iter().map(|id| m.require(id)).collect::<Result<Vec<_>>>()?;
    let diagnosis = records.windows(2).all(|w| w[0].diagnosis == w[1].diagnosis);
    let known: BTreeSet<u8> = records.iter().map(|r| r.fst).filter(|&f| f != 0).collect();
    Ok(Homogeneity {
        diagnosis,
        fst: known.len() <= 1,
    })
}

/// Fills in the homogeneity flags of every cluster from manifest labels.
pub fn label_clusters(clusters: &mut [DuplicateCluster], m: &DatasetManifest) -> Result<()> {
    for c in clusters {
        c.homogeneity = Some(homogeneity_of(&c.members, m)?);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairCategory {
    /// Same group in metadata, confirmed as duplicates.
    ConfirmedDuplicate,
    /// Different groups, confirmed as different images.
    TrueNonDuplicate,
    /// Different groups, but the images are duplicates.
    MissedDuplicate,
    /// Same group, but the images are not duplicates.
    FalseDuplicate,
    Unclear,
}

impl PairCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            PairCategory::ConfirmedDuplicate => "confirmed_duplicate",
            PairCategory::TrueNonDuplicate => "true_non_duplicate",
            PairCategory::MissedDuplicate => "missed_duplicate",
            PairCategory::FalseDuplicate => "false_duplicate",
            PairCategory::Unclear => "unclear",
        }
    }
}

/// Review outcome of pairs against group metadata.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PairConfusion {
    pub confirmed_duplicates: Vec<SimilarityPair>,
    pub true_non_duplicates: Vec<SimilarityPair>,
    pub missed_duplicates: Vec<SimilarityPair>,
    pub false_duplicates: Vec<SimilarityPair>,
    /// Pairs reviewed as unclear; not part of the four categories.
    pub unclear: Vec<SimilarityPair>,
}

impl PairConfusion {
    /// Pairs in the four categories (unclear excluded).
    pub fn evaluated(&self) -> usize {
        self.confirmed_duplicates.len()
            + self.true_non_duplicates.len()
            + self.missed_duplicates.len()
            + self.false_duplicates.len()
    }

    pub fn categorized(&self) -> impl Iterator<Item = (PairCategory, &SimilarityPair)> {
        [
            (PairCategory::ConfirmedDuplicate, &self.confirmed_duplicates),
            (PairCategory::TrueNonDuplicate, &self.true_non_duplicates),
            (PairCategory::MissedDuplicate, &self.missed_duplicates),
            (PairCategory::FalseDuplicate, &self.false_duplicates),
            (PairCategory::Unclear, &self.unclear),
        ]
        .into_iter()
        .flat_map(|(c, v)| v.iter().map(move |p| (c, p)))
    }
}

pub fn same_group(m: &DatasetManifest, a: &str, b: &str) -> Result<bool> {
    Ok(m.require(a)?.group_key() == m.require(b)?.group_key())
}

pub fn categorize(same_group: bool, verdict: VerdictValue) -> PairCategory {
    match (same_group, verdict) {
        (_, VerdictValue::Unclear) => PairCategory::Unclear,
        (true, VerdictValue::Duplicate) => PairCategory::ConfirmedDuplicate,
        (true, VerdictValue::Different) => PairCategory::FalseDuplicate,
        (false, VerdictValue::Duplicate) => PairCategory::MissedDuplicate,
        (false, VerdictValue::Different) => PairCategory::TrueNonDuplicate,
    }
}

fn verdict_for(verdicts: &HashMap<PairKey, VerdictValue>, p: &SimilarityPair) -> Result<VerdictValue> {
    verdicts
        .get(&p.key())
        .copied()
        .ok_or_else(|| Error::Integrity(format!("no verdict for pair {} {}", p.a, p.b)))
}

/// Assigns every reviewed pair to one confusion category.
pub fn classify_pairs(
    pairs: &[SimilarityPair],
    verdicts: &HashMap<PairKey, VerdictValue>,
    m: &DatasetManifest,
) -> Result<PairConfusion> {
    let mut out = PairConfusion::default();
    for p in pairs {
        let category = categorize(same_group(m, &p.a, &p.b)?, verdict_for(verdicts, p)?);
        let bucket = match category {
            PairCategory::ConfirmedDuplicate => &mut out.confirmed_duplicates,
            PairCategory::TrueNonDuplicate => &mut out.true_non_duplicates,
            PairCategory::MissedDuplicate => &mut out.missed_duplicates,
            PairCategory::FalseDuplicate => &mut out.false_duplicates,
            PairCategory::Unclear => &mut out.unclear,
        };
        bucket.push(p.clone());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalCounts {
    /// 1-based rank of the first pair in the interval.
    pub first_rank: usize,
    pub last_rank: usize,
    /// Same group in metadata (no review needed).
    pub already_in_metadata: usize,
    pub missed_duplicate: usize,
    pub true_non_duplicate: usize,
    /// Cross-group pairs reviewed as unclear.
    pub unclear: usize,
}

impl IntervalCounts {
    pub fn total(&self) -> usize {
        self.already_in_metadata + self.missed_duplicate + self.true_non_duplicate + self.unclear
    }
}

/// Breaks the `top_k` most similar pairs into consecutive rank intervals of
/// `width` pairs; the last interval may be shorter.
///
/// Cross-group pairs need a verdict; same-group pairs do not.
pub fn interval_analysis(
    pairs: &[SimilarityPair],
    top_k: usize,
    width: usize,
    m: &DatasetManifest,
    verdicts: &HashMap<PairKey, VerdictValue>,
) -> Result<Vec<IntervalCounts>> {
    if width == 0 {
        return Err(Error::Argument("interval width must be positive".into()));
    }
    let mut ranked = pairs.to_vec();
    ranked.sort_by(pair_order);
    ranked.truncate(top_k);
    let mut out = Vec::new();
    for (chunk_no, chunk) in ranked.chunks(width).enumerate() {
        let first_rank = chunk_no * width + 1;
        let mut counts = IntervalCounts {
            first_rank,
            last_rank: first_rank + chunk.len() - 1,
            already_in_metadata: 0,
            missed_duplicate: 0,
            true_non_duplicate: 0,
            unclear: 0,
        };
        for p in chunk {
            if same_group(m, &p.a, &p.b)? {
                counts.already_in_metadata += 1;
                continue;
            }
            match verdict_for(verdicts, p)? {
                VerdictValue::Duplicate => counts.missed_duplicate += 1,
                VerdictValue::Different => counts.true_non_duplicate += 1,
                VerdictValue::Unclear => counts.unclear += 1,
            }
        }
        out.push(counts);
    }
    Ok(out)
}

/// For each group size in [`LOW_SIMILARITY_BUCKETS`], the `per_bucket`
/// lowest-scoring pairs of images sharing a group, lowest first.
///
/// These are the candidates for false duplicates in the group metadata.
pub fn least_similar_within_groups(
    m: &DatasetManifest,
    e: &EmbeddingMatrix,
    per_bucket: usize,
) -> Result<BTreeMap<usize, Vec<SimilarityPair>>> {
    let mut buckets: BTreeMap<usize, Vec<SimilarityPair>> = BTreeMap::new();
    for members in m.groups().values() {
        if !LOW_SIMILARITY_BUCKETS.contains(&members.len()) {
            continue;
        }
        let bucket = buckets.entry(members.len()).or_default();
        for (k, x) in members.iter().enumerate() {
            for y in &members[k + 1..] {
                let score = e.similarity(&x.image_id, &y.image_id)?;
                bucket.push(SimilarityPair::new(x.image_id.as_str(), y.image_id.as_str(), score));
            }
        }
    }
    for bucket in buckets.values_mut() {
        bucket.sort_by(|x, y| {
            crate::embeddings::cmp_score(x.score, y.score)
                .then_with(|| x.a.cmp(&y.a))
                .then_with(|| x.b.cmp(&y.b))
        });
        bucket.truncate(per_bucket);
    }
    Ok(buckets)
}

/// Writes `a,b,score,category`.
pub fn write_pairs_csv<'a>(
    pairs: impl IntoIterator<Item = (&'a SimilarityPair, &'a str)>,
    writer: impl Write,
) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["a", "b", "score", "category"])?;
    for (p, category) in pairs {
        w.write_record([p.a.as_str(), &p.b, &p.score.to_string(), category])?;
    }
    w.flush()
}

pub fn save_pairs_csv<'a>(
    pairs: impl IntoIterator<Item = (&'a SimilarityPair, &'a str)>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_pairs_csv(pairs, &mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

/// Reads a pair file (`a,b,score[,category]`), returning pairs with their category cell.
pub fn read_pairs_csv(reader: impl Read, name: &str) -> Result<Vec<(SimilarityPair, String)>> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let header = rdr.headers().map_err(|e| Error::parse(name, 1, e.to_string()))?.clone();
    if header.len() < 3 || &header[0] != "a" || &header[1] != "b" || &header[2] != "score" {
        return Err(Error::parse(name, 1, "header must start with a,b,score"));
    }
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| Error::parse(name, line, e.to_string()))?;
        if row.len() < 3 {
            return Err(Error::parse(name, line, "expected at least 3 columns"));
        }
        if row[0] == row[1] {
            return Err(Error::parse(name, line, "pair of an image with itself"));
        }
        let score: f64 = row[2]
            .parse()
            .map_err(|_| Error::parse(name, line, format!("bad score {:?}", &row[2])))?;
        let category = row.get(3).unwrap_or("").to_string();
        out.push((SimilarityPair::new(&row[0], &row[1], score), category));
    }
    Ok(out)
}

pub fn load_pairs_csv(path: impl AsRef<Path>) -> Result<Vec<(SimilarityPair, String)>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_pairs_csv(BufReader::new(file), &path.display().to_string())
}

/// Writes `cluster_id,image_id,mean_similarity,homogeneous`, one row per member.
pub fn write_clusters_csv(clusters: &[DuplicateCluster], writer: impl Write) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["cluster_id", "image_id", "mean_similarity", "homogeneous"])?;
    for (cid, c) in clusters.iter().enumerate() {
        let homogeneous = c.is_homogeneous().map(|h| h.to_string()).unwrap_or_default();
        for id in &c.members {
            w.write_record([&cid.to_string(), id.as_str(), &c.mean_similarity.to_string(), &homogeneous])?;
        }
    }
    w.flush()
}

pub fn save_clusters_csv(clusters: &[DuplicateCluster], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_clusters_csv(clusters, &mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

/// Reads cluster membership back; homogeneity flags are not restored.
pub fn read_clusters_csv(reader: impl Read, name: &str) -> Result<Vec<DuplicateCluster>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut by_id: BTreeMap<u64, DuplicateCluster> = BTreeMap::new();
    for (i, row) in rdr.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| Error::parse(name, line, e.to_string()))?;
        let cid: u64 = row[0]
            .parse()
            .map_err(|_| Error::parse(name, line, "bad cluster_id"))?;
        let mean: f64 = row[2]
            .parse()
            .map_err(|_| Error::parse(name, line, "bad mean_similarity"))?;
        let c = by_id.entry(cid).or_insert_with(|| DuplicateCluster {
            members: Vec::new(),
            mean_similarity: mean,
            homogeneity: None,
        });
        c.members.push(row[1].to_string());
    }
    Ok(by_id
        .into_values()
        .map(|mut c| {
            c.members.sort();
            c
        })
        .collect())
}

pub fn load_clusters_csv(path: impl AsRef<Path>) -> Result<Vec<DuplicateCluster>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_clusters_csv(BufReader::new(file), &path.display().to_string())
}
