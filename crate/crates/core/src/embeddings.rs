//! Per-image feature vectors and the similarity computations built on them.
//!
//! Vectors are stored as `f32`; every dot product accumulates in `f64` in a
//! fixed order so that scores are reproducible and `cosine(u, v)` equals
//! `cosine(v, u)` bit for bit.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use image::DynamicImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifest::DatasetManifest;
use crate::resample::{self, Filter};

pub const EMB_MAGIC: &[u8; 4] = b"EMB1";

/// Dimension of [`baseline_features`] vectors: 8 × 8 pixels × 3 channels.
pub const BASELINE_DIM: usize = 192;

/// Rows per work unit of the pair scan.
const SCAN_BLOCK_ROWS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingFormat {
    /// `emb-bin-v1` binary layout.
    Binary,
    /// CSV with header `image_id,v0,...,v{dim-1}`.
    Tabular,
}

/// An `n × dim` matrix of embeddings, one row per image id.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    ids: Vec<String>,
    dim: usize,
    values: Vec<f32>,
    norms: Vec<f64>,
    index: HashMap<String, usize>,
}

#[inline]
fn dot(u: &[f32], v: &[f32]) -> f64 {
    // Four independent accumulators, combined in a fixed order.
    let mut acc = [0.0f64; 4];
    let mut uc = u.chunks_exact(4);
    let mut vc = v.chunks_exact(4);
    for (a, b) in (&mut uc).zip(&mut vc) {
        acc[0] += f64::from(a[0]) * f64::from(b[0]);
        acc[1] += f64::from(a[1]) * f64::from(b[1]);
        acc[2] += f64::from(a[2]) * f64::from(b[2]);
        acc[3] += f64::from(a[3]) * f64::from(b[3]);
    }
    let mut tail = 0.0;
    for (a, b) in uc.remainder().iter().zip(vc.remainder()) {
        tail += f64::from(*a) * f64::from(*b);
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
fn cosine_with_norms(u: &[f32], v: &[f32], nu: f64, nv: f64) -> f64 {
    (dot(u, v) / (nu * nv)).clamp(-1.0, 1.0)
}

/// Cosine similarity `<u,v> / (|u| |v|)`.
pub fn cosine(u: &[f32], v: &[f32]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::Domain(format!(
            "dimension mismatch: {} vs {}",
            u.len(),
            v.len()
        )));
    }
    let nu = dot(u, u).sqrt();
    let nv = dot(v, v).sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::Domain("cosine of a zero-norm vector".into()));
    }
    Ok(cosine_with_norms(u, v, nu, nv))
}

impl EmbeddingMatrix {
    /// Validates and wraps row-major `values`.
    pub fn new(ids: Vec<String>, dim: usize, values: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Argument("embedding dimension must be positive".into()));
        }
        if values.len() != ids.len() * dim {
            return Err(Error::Argument(format!(
                "{} values do not fill {} rows of dimension {dim}",
                values.len(),
                ids.len()
            )));
        }
        let mut index = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::Integrity(format!("duplicate embedding id {id}")));
            }
        }
        let mut norms = Vec::with_capacity(ids.len());
        for (i, row) in values.chunks_exact(dim).enumerate() {
            if let Some(bad) = row.iter().find(|v| !v.is_finite()) {
                return Err(Error::Integrity(format!("non-finite value {bad} in row of {}", ids[i])));
            }
            let norm = dot(row, row).sqrt();
            if norm == 0.0 {
                return Err(Error::Integrity(format!("all-zero embedding for {}", ids[i])));
            }
            norms.push(norm);
        }
        Ok(EmbeddingMatrix {
            ids,
            dim,
            values,
            norms,
            index,
        })
    }

    /// Builds a matrix from `(id, vector)` rows.
    pub fn from_rows<I, S>(rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Vec<f32>)>,
        S: Into<String>,
    {
        let mut ids = Vec::new();
        let mut values = Vec::new();
        let mut dim = None;
        for (id, row) in rows {
            let id = id.into();
            match dim {
                None => dim = Some(row.len()),
                Some(d) if d != row.len() => {
                    return Err(Error::Argument(format!(
                        "row {id} has dimension {}, expected {d}",
                        row.len()
                    )))
                }
                _ => {}
            }
            ids.push(id);
            values.extend(row);
        }
        Self::new(ids, dim.unwrap_or(1), values)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn vector(&self, id: &str) -> Option<&[f32]> {
        self.position(id).map(|i| self.row(i))
    }

    pub(crate) fn require_position(&self, id: &str) -> Result<usize> {
        self.position(id)
            .ok_or_else(|| Error::Integrity(format!("no embedding for image_id {id}")))
    }

    /// Cosine similarity between rows `i` and `j`.
    pub fn cosine_rows(&self, i: usize, j: usize) -> f64 {
        cosine_with_norms(self.row(i), self.row(j), self.norms[i], self.norms[j])
    }

    /// Cosine similarity between two images by id.
    pub fn similarity(&self, a: &str, b: &str) -> Result<f64> {
        Ok(self.cosine_rows(self.require_position(a)?, self.require_position(b)?))
    }

    /// Checks that the ids are exactly the image ids of `m`.
    pub fn check_bound_to(&self, m: &DatasetManifest) -> Result<()> {
        if let Some(id) = self.ids.iter().find(|id| !m.contains(id)) {
            return Err(Error::Integrity(format!("embedding id {id} is not in the manifest")));
        }
        if let Some(id) = m.ids().find(|id| self.position(id).is_none()) {
            return Err(Error::Integrity(format!("manifest image {id} has no embedding")));
        }
        Ok(())
    }

    /// Rows restricted to `keep`, in current order.
    pub fn select(&self, keep: &BTreeSet<&str>) -> Result<Self> {
        let mut ids = Vec::new();
        let mut values = Vec::new();
        for (i, id) in self.ids.iter().enumerate() {
            if keep.contains(id.as_str()) {
                ids.push(id.clone());
                values.extend_from_slice(self.row(i));
            }
        }
        Self::new(ids, self.dim, values)
    }
}

/// Canonically oriented pair of image ids (`a < b`).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PairKey {
    pub a: String,
    pub b: String,
}

impl PairKey {
    /// Orients the ids; panics if they are equal.
    pub fn new(x: impl Into<String>, y: impl Into<String>) -> Self {
        let (x, y) = (x.into(), y.into());
        assert_ne!(x, y, "a pair needs two distinct images");
        if x < y {
            PairKey { a: x, b: y }
        } else {
            PairKey { a: y, b: x }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityPair {
    pub a: String,
    pub b: String,
    pub score: f64,
}

impl SimilarityPair {
    pub fn new(x: impl Into<String>, y: impl Into<String>, score: f64) -> Self {
        let PairKey { a, b } = PairKey::new(x, y);
        SimilarityPair { a, b, score }
    }

    pub fn key(&self) -> PairKey {
        PairKey {
            a: self.a.clone(),
            b: self.b.clone(),
        }
    }
}

/// Orders scores, treating `-0.0` and `0.0` as equal. Scores are never NaN.
pub(crate) fn cmp_score(x: f64, y: f64) -> Ordering {
    x.partial_cmp(&y).unwrap_or(Ordering::Equal)
}

/// Descending score, then ascending `(a, b)`.
pub fn pair_order(x: &SimilarityPair, y: &SimilarityPair) -> Ordering {
    cmp_score(y.score, x.score)
        .then_with(|| x.a.cmp(&y.a))
        .then_with(|| x.b.cmp(&y.b))
}

/// Every pair with cosine similarity `>= threshold`, sorted by [`pair_order`].
///
/// Rows are processed in fixed-size blocks in parallel; per-block results
/// are concatenated in block order before the final sort.
pub fn scan_pairs(e: &EmbeddingMatrix, threshold: f64) -> Vec<SimilarityPair> {
    let n = e.len();
    let blocks: Vec<Vec<SimilarityPair>> = (0..n.div_ceil(SCAN_BLOCK_ROWS))
        .into_par_iter()
        .map(|block| {
            let mut found = Vec::new();
            let start = block * SCAN_BLOCK_ROWS;
            for i in start..(start + SCAN_BLOCK_ROWS).min(n) {
                for j in i + 1..n {
                    let score = e.cosine_rows(i, j);
                    if score >= threshold {
                        found.push(SimilarityPair::new(e.ids[i].as_str(), e.ids[j].as_str(), score));
                    }
                }
            }
            found
        })
        .collect();
    let mut pairs: Vec<SimilarityPair> = blocks.into_iter().flatten().collect();
    pairs.sort_by(pair_order);
    pairs
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub id: String,
    pub score: f64,
}

/// The `k` nearest neighbors of every image, in matrix row order.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborList {
    pub k: usize,
    pub lists: Vec<(String, Vec<Neighbor>)>,
}

impl NeighborList {
    pub fn get(&self, id: &str) -> Option<&[Neighbor]> {
        self.lists
            .iter()
            .find(|(i, _)| i == id)
            .map(|(_, n)| n.as_slice())
    }
}

/// Exact top-`k` neighbors by cosine similarity, ties broken by ascending id.
pub fn knn(e: &EmbeddingMatrix, k: usize) -> Result<NeighborList> {
    let n = e.len();
    if k == 0 || k >= n {
        return Err(Error::Argument(format!("k = {k} must be in 1..{n}")));
    }
    let lists = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut scored: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (e.cosine_rows(i, j), j))
                .collect();
            let order =
                |x: &(f64, usize), y: &(f64, usize)| cmp_score(y.0, x.0).then_with(|| e.ids[x.1].cmp(&e.ids[y.1]));
            if k < scored.len() {
                scored.select_nth_unstable_by(k - 1, order);
                scored.truncate(k);
            }
            scored.sort_by(order);
            let neighbors = scored
                .into_iter()
                .map(|(score, j)| Neighbor {
                    id: e.ids[j].clone(),
                    score,
                })
                .collect();
            (e.ids[i].clone(), neighbors)
        })
        .collect();
    Ok(NeighborList { k, lists })
}

/// Reads an embedding file, choosing the format from the leading bytes.
pub fn load_embeddings_any(path: impl AsRef<Path>) -> Result<EmbeddingMatrix> {
    let path = path.as_ref();
    let mut head = [0u8; 4];
    let mut f = File::open(path).map_err(|e| Error::io(path, e))?;
    let format = match f.read_exact(&mut head) {
        Ok(()) if &head == EMB_MAGIC => EmbeddingFormat::Binary,
        _ => EmbeddingFormat::Tabular,
    };
    load_embeddings(path, format)
}

pub fn load_embeddings(path: impl AsRef<Path>, format: EmbeddingFormat) -> Result<EmbeddingMatrix> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path.display().to_string();
    match format {
        EmbeddingFormat::Binary => {
            let mut bytes = Vec::new();
            BufReader::new(file)
                .read_to_end(&mut bytes)
                .map_err(|e| Error::io(path, e))?;
            decode_binary(&bytes, &name)
        }
        EmbeddingFormat::Tabular => read_tabular(BufReader::new(file), &name),
    }
}

/// Parses an `emb-bin-v1` buffer.
pub fn decode_binary(bytes: &[u8], name: &str) -> Result<EmbeddingMatrix> {
    let header_err = |msg: &str| Error::parse(name, 0, msg);
    if bytes.len() < 12 || &bytes[..4] != EMB_MAGIC {
        return Err(header_err("missing EMB1 header"));
    }
    let n = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let dim = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    if dim == 0 {
        return Err(header_err("dimension is zero"));
    }
    let mut pos = 12;
    let mut ids = Vec::with_capacity(n);
    for row in 0..n {
        let end = bytes[pos..]
            .iter()
            .position(|&b| b == 0)
            .ok_or_else(|| Error::parse(name, row + 1, "unterminated id"))?;
        let id = std::str::from_utf8(&bytes[pos..pos + end])
            .map_err(|_| Error::parse(name, row + 1, "id is not UTF-8"))?;
        ids.push(id.to_string());
        pos += end + 1;
    }
    let body = &bytes[pos..];
    let expected = n * dim * 4;
    if body.len() != expected {
        let row = (body.len() / (dim * 4)).min(n.saturating_sub(1)) + 1;
        return Err(Error::parse(
            name,
            row,
            format!("value block has {} bytes, header requires {expected}", body.len()),
        ));
    }
    let values: Vec<f32> = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if let Some(i) = values.iter().position(|v| v.is_nan()) {
        return Err(Error::parse(name, i / dim + 1, "NaN value"));
    }
    EmbeddingMatrix::new(ids, dim, values)
}

pub fn encode_binary(e: &EmbeddingMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + e.values.len() * 4 + e.ids.iter().map(|s| s.len() + 1).sum::<usize>());
    out.extend_from_slice(EMB_MAGIC);
    out.extend_from_slice(&(e.len() as u32).to_le_bytes());
    out.extend_from_slice(&(e.dim as u32).to_le_bytes());
    for id in &e.ids {
        out.extend_from_slice(id.as_bytes());
        out.push(0);
    }
    for v in &e.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn read_tabular(reader: impl Read, name: &str) -> Result<EmbeddingMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut rows = rdr.records();
    let header = rows
        .next()
        .ok_or_else(|| Error::parse(name, 1, "missing header"))?
        .map_err(|e| Error::parse(name, 1, e.to_string()))?;
    let dim = header.len().saturating_sub(1);
    let header_ok = header.get(0) == Some("image_id")
        && dim > 0
        && header.iter().skip(1).enumerate().all(|(i, h)| h == format!("v{i}"));
    if !header_ok {
        return Err(Error::parse(name, 1, "header must be image_id,v0,...,v{dim-1}"));
    }
    let mut ids = Vec::new();
    let mut values = Vec::new();
    for (i, row) in rows.enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| Error::parse(name, line, e.to_string()))?;
        if row.len() != dim + 1 {
            return Err(Error::parse(
                name,
                line,
                format!("expected {dim} values, found {}", row.len().saturating_sub(1)),
            ));
        }
        ids.push(row[0].to_string());
        for cell in row.iter().skip(1) {
            let v: f32 = cell
                .trim()
                .parse()
                .map_err(|_| Error::parse(name, line, format!("bad value {cell:?}")))?;
            if v.is_nan() {
                return Err(Error::parse(name, line, "NaN value"));
            }
            values.push(v);
        }
    }
    EmbeddingMatrix::new(ids, dim, values)
}

pub fn write_tabular(e: &EmbeddingMatrix, writer: impl Write) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["image_id".to_string()];
    header.extend((0..e.dim).map(|i| format!("v{i}")));
    w.write_record(&header)?;
    for (i, id) in e.ids.iter().enumerate() {
        let mut row = vec![id.clone()];
        row.extend(e.row(i).iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()
}

pub fn save_embeddings(e: &EmbeddingMatrix, path: impl AsRef<Path>, format: EmbeddingFormat) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    match format {
        EmbeddingFormat::Binary => w.write_all(&encode_binary(e)),
        EmbeddingFormat::Tabular => write_tabular(e, &mut w),
    }
    .and_then(|_| w.flush())
    .map_err(|err| Error::io(path, err))
}

/// Cheap deterministic image descriptor.
///
/// The image is bicubically reduced to 8 × 8 RGB, each channel is
/// mean-centered, and the channels are concatenated (R, G, B).
pub fn baseline_features_image(img: &DynamicImage) -> Vec<f32> {
    let rgb = img.to_rgb8();
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    let src: Vec<f64> = rgb.as_raw().iter().map(|&v| f64::from(v)).collect();
    let small = resample::resample_f64(&src, (w, h), 3, (8, 8), Filter::Bicubic);
    let mut out = Vec::with_capacity(BASELINE_DIM);
    for c in 0..3 {
        let channel: Vec<f64> = small.iter().skip(c).step_by(3).copied().collect();
        let mean = channel.iter().sum::<f64>() / channel.len() as f64;
        out.extend(channel.iter().map(|v| (v - mean) as f32));
    }
    out
}

pub fn baseline_features(image_path: impl AsRef<Path>) -> Result<Vec<f32>> {
    let path = image_path.as_ref();
    let img = image::open(path).map_err(|e| Error::Decode {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok(baseline_features_image(&img))
}

/// Baseline features for every manifest image, with files resolved under `image_root`.
pub fn extract_baseline(m: &DatasetManifest, image_root: impl AsRef<Path>) -> Result<EmbeddingMatrix> {
    let root = image_root.as_ref();
    let rows: Vec<(String, Vec<f32>)> = m
        .records()
        .par_iter()
        .map(|r| Ok((r.image_id.clone(), baseline_features(root.join(&r.file_path))?)))
        .collect::<Result<_>>()?;
    EmbeddingMatrix::from_rows(rows)
}
