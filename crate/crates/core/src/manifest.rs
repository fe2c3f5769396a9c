//! Dataset metadata: image records, group identity, labels and partitions.
//!
//! Manifests are read from and written to the `tabular-v1` format, a UTF-8
//! CSV file with the header
//!
//! ```text
//! image_id,file_path,group_id,diagnosis,fst,partition,width,height,checksum
//! ```
//!
//! Empty cells mean "absent". Records are kept sorted by `image_id`, which is
//! the canonical order every downstream enumeration relies on.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MANIFEST_HEADER: [&str; 9] = [
    "image_id",
    "file_path",
    "group_id",
    "diagnosis",
    "fst",
    "partition",
    "width",
    "height",
    "checksum",
];

/// Largest valid Fitzpatrick skin type. Zero stands for "unknown".
pub const MAX_FST: u8 = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Partition {
    Train,
    Valid,
    Test,
    Unassigned,
}

impl Partition {
    /// The three evaluation-relevant partitions, in reporting order.
    pub const ASSIGNED: [Partition; 3] = [Partition::Train, Partition::Valid, Partition::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Partition::Train => "train",
            Partition::Valid => "valid",
            Partition::Test => "test",
            Partition::Unassigned => "unassigned",
        }
    }

    pub fn is_assigned(self) -> bool {
        self != Partition::Unassigned
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Partition {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "train" => Ok(Partition::Train),
            "valid" => Ok(Partition::Valid),
            "test" => Ok(Partition::Test),
            "unassigned" | "" => Ok(Partition::Unassigned),
            other => Err(format!("unknown partition {other:?}")),
        }
    }
}

/// One image of a dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub image_id: String,
    pub file_path: String,
    /// Lesion identity. `None` means the image forms its own group.
    pub group_id: Option<String>,
    pub diagnosis: String,
    /// Fitzpatrick skin type 1..=6, 0 when unknown.
    pub fst: u8,
    pub partition: Partition,
    pub width: Option<u32>,
    pub height: Option<u32>,
    /// Hex digest of the image file (32 characters).
    pub checksum: Option<String>,
}

/// Identity of the group an image belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GroupKey<'a> {
    Group(&'a str),
    /// Image without a group id, keyed by its own image id.
    Singleton(&'a str),
}

impl GroupKey<'_> {
    pub fn as_str(&self) -> &str {
        match self {
            GroupKey::Group(g) | GroupKey::Singleton(g) => g,
        }
    }
}

impl ImageRecord {
    /// Minimal record; remaining fields default to absent / unknown.
    pub fn new(image_id: impl Into<String>, diagnosis: impl Into<String>) -> Self {
        let image_id = image_id.into();
        ImageRecord {
            file_path: String::new(),
            image_id,
            group_id: None,
            diagnosis: diagnosis.into(),
            fst: 0,
            partition: Partition::Unassigned,
            width: None,
            height: None,
            checksum: None,
        }
    }

    pub fn group_key(&self) -> GroupKey<'_> {
        match &self.group_id {
            Some(g) => GroupKey::Group(g),
            None => GroupKey::Singleton(&self.image_id),
        }
    }

    /// Pixel area, 0 when dimensions are unknown.
    pub fn area(&self) -> u64 {
        match (self.width, self.height) {
            (Some(w), Some(h)) => u64::from(w) * u64::from(h),
            _ => 0,
        }
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if self.image_id.is_empty() {
            return Err("empty image_id".into());
        }
        if self.fst > MAX_FST {
            return Err(format!("fst {} of {} outside 0..=6", self.fst, self.image_id));
        }
        match (self.width, self.height) {
            (Some(0), _) | (_, Some(0)) => {
                return Err(format!("zero dimension on {}", self.image_id));
            }
            (Some(_), None) | (None, Some(_)) => {
                return Err(format!("{} has only one of width/height", self.image_id));
            }
            _ => {}
        }
        if let Some(c) = &self.checksum {
            if c.len() != 32 || !c.bytes().all(|b| b.is_ascii_hexdigit()) {
                return Err(format!("checksum of {} is not 32 hex characters", self.image_id));
            }
        }
        Ok(())
    }
}

/// An ordered, validated collection of image records.
///
/// Immutable after construction: transformations return a new manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    name: String,
    records: Vec<ImageRecord>,
    label_space: BTreeSet<String>,
    index: HashMap<String, usize>,
}

impl DatasetManifest {
    /// Builds a manifest whose label space is the set of diagnoses present.
    pub fn from_records(name: impl Into<String>, records: Vec<ImageRecord>) -> Result<Self> {
        let label_space = records.iter().map(|r| r.diagnosis.clone()).collect();
        Self::new(name, records, label_space)
    }

    pub fn new(
        name: impl Into<String>,
        mut records: Vec<ImageRecord>,
        label_space: BTreeSet<String>,
    ) -> Result<Self> {
        records.sort_by(|a, b| a.image_id.cmp(&b.image_id));
        for pair in records.windows(2) {
            if pair[0].image_id == pair[1].image_id {
                return Err(Error::Integrity(format!("duplicate image_id {}", pair[0].image_id)));
            }
        }
        for r in &records {
            r.validate().map_err(Error::Integrity)?;
            if !label_space.contains(&r.diagnosis) {
                return Err(Error::Integrity(format!(
                    "diagnosis {:?} of {} is not in the label space",
                    r.diagnosis, r.image_id
                )));
            }
        }
        let index = records
            .iter()
            .enumerate()
            .map(|(i, r)| (r.image_id.clone(), i))
            .collect();
        Ok(DatasetManifest {
            name: name.into(),
            records,
            label_space,
            index,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn records(&self) -> &[ImageRecord] {
        &self.records
    }

    pub fn label_space(&self) -> &BTreeSet<String> {
        &self.label_space
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, image_id: &str) -> Option<&ImageRecord> {
        self.index.get(image_id).map(|&i| &self.records[i])
    }

    pub fn contains(&self, image_id: &str) -> bool {
        self.index.contains_key(image_id)
    }

    /// Like [`get`](Self::get) but reports unknown ids as integrity errors.
    pub fn require(&self, image_id: &str) -> Result<&ImageRecord> {
        self.get(image_id)
            .ok_or_else(|| Error::Integrity(format!("unknown image_id {image_id}")))
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.records.iter().map(|r| r.image_id.as_str())
    }

    /// Members of every group, in canonical record order.
    pub fn groups(&self) -> BTreeMap<GroupKey<'_>, Vec<&ImageRecord>> {
        let mut groups: BTreeMap<GroupKey<'_>, Vec<&ImageRecord>> = BTreeMap::new();
        for r in &self.records {
            groups.entry(r.group_key()).or_default().push(r);
        }
        groups
    }

    pub fn partition_counts(&self) -> BTreeMap<Partition, usize> {
        let mut counts = BTreeMap::new();
        for r in &self.records {
            *counts.entry(r.partition).or_insert(0) += 1;
        }
        counts
    }

    /// Same name and label space, different records.
    pub fn with_records(&self, records: Vec<ImageRecord>) -> Result<Self> {
        Self::new(self.name.clone(), records, self.label_space.clone())
    }

    /// Keeps only records for which `keep` holds.
    pub fn retain(&self, mut keep: impl FnMut(&ImageRecord) -> bool) -> Self {
        let records: Vec<_> = self.records.iter().filter(|r| keep(r)).cloned().collect();
        // Subsets of a valid manifest are valid and already sorted.
        let index = records
            .iter()
            .enumerate()
            .map(|(i, r)| (r.image_id.clone(), i))
            .collect();
        DatasetManifest {
            name: self.name.clone(),
            records,
            label_space: self.label_space.clone(),
            index,
        }
    }

    /// Returns a copy with the partition of each listed image replaced.
    pub(crate) fn with_partitions(&self, assign: &HashMap<&str, Partition>) -> Self {
        let mut out = self.clone();
        for r in &mut out.records {
            if let Some(&p) = assign.get(r.image_id.as_str()) {
                r.partition = p;
            }
        }
        out
    }
}

fn parse_fst(cell: &str) -> std::result::Result<u8, String> {
    match cell.trim() {
        "" | "N/A" | "NA" | "n/a" | "unknown" | "-1" => Ok(0),
        s => {
            let v: i64 = s.parse().map_err(|_| format!("fst {s:?} is not an integer"))?;
            u8::try_from(v)
                .ok()
                .filter(|&v| v <= MAX_FST)
                .ok_or_else(|| format!("fst {v} outside 0..=6"))
        }
    }
}

fn opt(cell: &str) -> Option<String> {
    (!cell.is_empty()).then(|| cell.to_string())
}

/// Reads a `tabular-v1` manifest file. The manifest is named after the file stem.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    read_manifest(BufReader::new(file), &name)
}

pub fn read_manifest(reader: impl Read, name: &str) -> Result<DatasetManifest> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut rows = rdr.records();
    let header = match rows.next() {
        Some(h) => h.map_err(|e| Error::parse(name, 1, e.to_string()))?,
        None => return Err(Error::parse(name, 1, "missing header row")),
    };
    if header.iter().ne(MANIFEST_HEADER.iter().copied()) {
        return Err(Error::parse(
            name,
            1,
            format!("header must be exactly `{}`", MANIFEST_HEADER.join(",")),
        ));
    }

    let mut records = Vec::new();
    let mut seen = HashMap::new();
    for (i, row) in rows.enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| Error::parse(name, line, e.to_string()))?;
        if row.len() != MANIFEST_HEADER.len() {
            return Err(Error::parse(
                name,
                line,
                format!("expected {} columns, found {}", MANIFEST_HEADER.len(), row.len()),
            ));
        }
        let dim = |cell: &str| -> Result<Option<u32>> {
            if cell.is_empty() {
                return Ok(None);
            }
            cell.parse()
                .map(Some)
                .map_err(|_| Error::parse(name, line, format!("bad dimension {cell:?}")))
        };
        let record = ImageRecord {
            image_id: row[0].to_string(),
            file_path: row[1].to_string(),
            group_id: opt(&row[2]),
            diagnosis: row[3].to_string(),
            fst: parse_fst(&row[4]).map_err(|m| Error::Integrity(format!("row {line}: {m}")))?,
            partition: row[5].parse().map_err(|m: String| Error::parse(name, line, m))?,
            width: dim(&row[6])?,
            height: dim(&row[7])?,
            checksum: opt(&row[8]),
        };
        if let Some(prev) = seen.insert(record.image_id.clone(), line) {
            return Err(Error::Integrity(format!(
                "duplicate image_id {} (rows {prev} and {line})",
                record.image_id
            )));
        }
        records.push(record);
    }
    DatasetManifest::from_records(name, records)
}

pub fn save_manifest(m: &DatasetManifest, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_manifest(m, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_manifest(m: &DatasetManifest, writer: impl Write) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(MANIFEST_HEADER)?;
    for r in m.records() {
        let fst = r.fst.to_string();
        let width = r.width.map(|v| v.to_string()).unwrap_or_default();
        let height = r.height.map(|v| v.to_string()).unwrap_or_default();
        w.write_record([
            r.image_id.as_str(),
            &r.file_path,
            r.group_id.as_deref().unwrap_or(""),
            &r.diagnosis,
            &fst,
            r.partition.as_str(),
            &width,
            &height,
            r.checksum.as_deref().unwrap_or(""),
        ])?;
    }
    w.flush()
}

/// Number of groups for each group size.
///
/// Images without a group id count as groups of size one.
pub fn group_histogram(m: &DatasetManifest) -> BTreeMap<usize, usize> {
    let mut hist = BTreeMap::new();
    for members in m.groups().values() {
        *hist.entry(members.len()).or_insert(0) += 1;
    }
    hist
}

/// Partition membership lists, one list of image ids per partition.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SplitLists {
    pub train: Vec<String>,
    pub valid: Vec<String>,
    pub test: Vec<String>,
}

impl SplitLists {
    pub fn iter(&self) -> impl Iterator<Item = (Partition, &[String])> {
        [
            (Partition::Train, self.train.as_slice()),
            (Partition::Valid, self.valid.as_slice()),
            (Partition::Test, self.test.as_slice()),
        ]
        .into_iter()
    }

    /// Lists of the current partition assignment of `m`.
    pub fn from_manifest(m: &DatasetManifest) -> Self {
        let mut lists = SplitLists::default();
        for r in m.records() {
            let list = match r.partition {
                Partition::Train => &mut lists.train,
                Partition::Valid => &mut lists.valid,
                Partition::Test => &mut lists.test,
                Partition::Unassigned => continue,
            };
            list.push(r.image_id.clone());
        }
        lists
    }
}

/// Normalizes a split-list entry to a bare image id: split lists often
/// carry file names (`ISIC_0024306.jpg`) or paths rather than ids.
fn split_entry_id(entry: &str) -> &str {
    let base = entry.rsplit(['/', '\\']).next().unwrap_or(entry);
    match base.rfind('.') {
        Some(dot) if dot > 0 => &base[..dot],
        _ => base,
    }
}

/// Reads `train.txt`, `valid.txt` and `test.txt` from `dir`; missing files are empty lists.
pub fn load_split_lists(dir: impl AsRef<Path>) -> Result<SplitLists> {
    let dir = dir.as_ref();
    let read = |name: &str| -> Result<Vec<String>> {
        let path = dir.join(name);
        if !path.exists() {
            return Ok(Vec::new());
        }
        let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
        let mut ids = Vec::new();
        for line in BufReader::new(file).lines() {
            let line = line.map_err(|e| Error::io(&path, e))?;
            let entry = line.trim();
            if !entry.is_empty() {
                ids.push(split_entry_id(entry).to_string());
            }
        }
        Ok(ids)
    };
    Ok(SplitLists {
        train: read("train.txt")?,
        valid: read("valid.txt")?,
        test: read("test.txt")?,
    })
}

pub fn save_split_lists(lists: &SplitLists, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (p, ids) in lists.iter() {
        let path = dir.join(format!("{p}.txt"));
        let mut body = ids.join("\n");
        if !body.is_empty() {
            body.push('\n');
        }
        std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

/// Sets partitions from split lists. Unlisted records become `unassigned`.
pub fn apply_split_lists(m: &DatasetManifest, lists: &SplitLists) -> Result<DatasetManifest> {
    let mut assign: HashMap<&str, Partition> = HashMap::new();
    for (p, ids) in lists.iter() {
        for id in ids {
            if !m.contains(id) {
                return Err(Error::Integrity(format!("split list {p} names unknown image_id {id}")));
            }
            if let Some(prev) = assign.insert(id, p) {
                return Err(Error::Integrity(format!("image_id {id} listed in both {prev} and {p}")));
            }
        }
    }
    let records = m
        .records()
        .iter()
        .map(|r| ImageRecord {
            partition: assign
                .get(r.image_id.as_str())
                .copied()
                .unwrap_or(Partition::Unassigned),
            ..r.clone()
        })
        .collect();
    m.with_records(records)
}

/// `<abbrev>_f<fst>_<index>_<first 8 hex of checksum>.jpg`
pub fn interpretable_name(
    r: &ImageRecord,
    diag_abbrev: &HashMap<String, String>,
    index: usize,
) -> Result<String> {
    let abbrev = diag_abbrev
        .get(&r.diagnosis)
        .ok_or_else(|| Error::Config(format!("no abbreviation for diagnosis {:?}", r.diagnosis)))?;
    let checksum = r
        .checksum
        .as_deref()
        .ok_or_else(|| Error::Integrity(format!("{} has no checksum", r.image_id)))?;
    Ok(format!("{abbrev}_f{}_{index}_{}.jpg", r.fst, &checksum[..8]))
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "image_id,file_path,group_id,diagnosis,fst,partition,width,height,checksum\n";

    fn parse(body: &str) -> Result<DatasetManifest> {
        read_manifest(format!("{HEADER}{body}").as_bytes(), "t")
    }

    #[test]
    fn loads_and_sorts_by_image_id() {
        let m = parse(
            "ISIC_3,a/3.jpg,HAM_1,nv,2,train,600,450,\n\
             ISIC_1,a/1.jpg,HAM_1,nv,,test,600,450,\n\
             ISIC_2,a/2.jpg,,mel,N/A,,,,\n",
        )
        .unwrap();
        assert_eq!(m.ids().collect::<Vec<_>>(), ["ISIC_1", "ISIC_2", "ISIC_3"]);
        assert_eq!(m.get("ISIC_1").unwrap().fst, 0);
        assert_eq!(m.get("ISIC_2").unwrap().fst, 0);
        assert_eq!(m.get("ISIC_2").unwrap().partition, Partition::Unassigned);
        assert_eq!(m.get("ISIC_2").unwrap().group_id, None);
        assert_eq!(m.label_space().len(), 2);
    }

    #[test]
    fn duplicate_image_id_is_an_integrity_error() {
        let err = parse(
            "ISIC_0024306,x,,nv,1,,,,\n\
             ISIC_0024306,y,,nv,1,,,,\n",
        )
        .unwrap_err();
        assert!(matches!(&err, Error::Integrity(m) if m.contains("ISIC_0024306")), "{err}");
    }

    #[test]
    fn column_mismatch_reports_row() {
        let err = parse("a,x,,nv,1,,,,\nb,x,,nv\n").unwrap_err();
        assert!(matches!(err, Error::Parse { row: 3, .. }), "{err}");
    }

    #[test]
    fn fst_out_of_range_is_rejected() {
        assert!(matches!(parse("a,x,,nv,7,,,,\n"), Err(Error::Integrity(_))));
    }

    #[test]
    fn wrong_header_is_rejected() {
        let err = read_manifest("image_id,path\n".as_bytes(), "t").unwrap_err();
        assert!(matches!(err, Error::Parse { row: 1, .. }));
    }

    #[test]
    fn half_known_dimensions_are_rejected() {
        assert!(matches!(parse("a,x,,nv,1,,600,,\n"), Err(Error::Integrity(_))));
    }

    #[test]
    fn round_trip_is_byte_stable() {
        let m = parse(
            "b,p/b.jpg,g1,nv,3,valid,10,20,0a94359e7eaacd7178e06b2823777789\n\
             a,\"p/a,1.jpg\",,mel,0,train,,,\n",
        )
        .unwrap();
        let mut first = Vec::new();
        write_manifest(&m, &mut first).unwrap();
        let again = read_manifest(first.as_slice(), "t").unwrap();
        assert_eq!(again, m);
        let mut second = Vec::new();
        write_manifest(&again, &mut second).unwrap();
        assert_eq!(first, second);
    }

    fn grouped(rows: &[(&str, Option<&str>)]) -> DatasetManifest {
        let records = rows
            .iter()
            .map(|(id, g)| ImageRecord {
                group_id: g.map(str::to_string),
                ..ImageRecord::new(*id, "nv")
            })
            .collect();
        DatasetManifest::from_records("t", records).unwrap()
    }

    #[test]
    fn histogram_of_unique_groups() {
        let m = grouped(&[("a", None), ("b", None), ("c", Some("g"))]);
        assert_eq!(group_histogram(&m), BTreeMap::from([(1, 3)]));
    }

    #[test]
    fn histogram_hand_built() {
        let m = grouped(&[("A", Some("g1")), ("B", Some("g1")), ("C", Some("g2"))]);
        assert_eq!(group_histogram(&m), BTreeMap::from([(2, 1), (1, 1)]));
    }

    #[test]
    fn singleton_key_does_not_collide_with_group_named_like_an_image() {
        let m = grouped(&[("x", Some("y")), ("y", None)]);
        assert_eq!(group_histogram(&m), BTreeMap::from([(1, 2)]));
    }

    #[test]
    fn split_lists_assign_partitions() {
        let m = grouped(&[("a", None), ("b", None), ("c", None), ("d", None)]);
        let empty = apply_split_lists(&m, &SplitLists::default()).unwrap();
        assert!(empty.records().iter().all(|r| r.partition == Partition::Unassigned));

        let lists = SplitLists {
            train: vec!["a".into(), "b".into()],
            valid: vec!["c".into()],
            test: vec!["d".into()],
        };
        let out = apply_split_lists(&m, &lists).unwrap();
        let counts = out.partition_counts();
        assert_eq!(counts[&Partition::Train], 2);
        assert_eq!(counts[&Partition::Valid], 1);
        assert_eq!(counts[&Partition::Test], 1);
    }

    #[test]
    fn split_lists_reject_overlap_and_unknown_ids() {
        let m = grouped(&[("a", None), ("b", None)]);
        let both = SplitLists {
            train: vec!["a".into()],
            test: vec!["a".into()],
            ..Default::default()
        };
        assert!(matches!(apply_split_lists(&m, &both), Err(Error::Integrity(_))));
        let unknown = SplitLists {
            valid: vec!["zzz".into()],
            ..Default::default()
        };
        let err = apply_split_lists(&m, &unknown).unwrap_err();
        assert!(err.to_string().contains("zzz"));
    }

    #[test]
    fn split_entries_are_normalized_to_ids() {
        assert_eq!(split_entry_id("ISIC_0024306.jpg"), "ISIC_0024306");
        assert_eq!(split_entry_id("imgs/ISIC_0024306.png"), "ISIC_0024306");
        assert_eq!(split_entry_id("ISIC_0024306"), "ISIC_0024306");
    }

    fn abbrevs() -> HashMap<String, String> {
        HashMap::from([
            ("psoriasis".to_string(), "ps".to_string()),
            ("rosacea".to_string(), "ro".to_string()),
        ])
    }

    #[test]
    fn interpretable_names() {
        let mut r = ImageRecord::new("0a94359e7eaacd7178e06b2823777789", "psoriasis");
        r.fst = 1;
        r.checksum = Some("0a94359e7eaacd7178e06b2823777789".into());
        assert_eq!(interpretable_name(&r, &abbrevs(), 0).unwrap(), "ps_f1_0_0a94359e.jpg");

        let mut r = ImageRecord::new("x", "rosacea");
        r.fst = 2;
        r.checksum = Some("0d586f26000000000000000000000000".into());
        assert_eq!(interpretable_name(&r, &abbrevs(), 90).unwrap(), "ro_f2_90_0d586f26.jpg");

        r.fst = 0;
        assert!(interpretable_name(&r, &abbrevs(), 3).unwrap().starts_with("ro_f0_3_"));
    }

    #[test]
    fn interpretable_name_needs_abbreviation() {
        let mut r = ImageRecord::new("x", "eczema");
        r.checksum = Some("0d586f26000000000000000000000000".into());
        assert!(matches!(interpretable_name(&r, &abbrevs(), 0), Err(Error::Config(_))));
    }
}
