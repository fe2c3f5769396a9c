//! Generators and brute-force oracles shared by the integration tests.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use dermaudit::manifest::{DatasetManifest, ImageRecord, Partition};
use dermaudit::EmbeddingMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vector(rng: &mut impl Rng, dim: usize) -> Vec<f32> {
    (0..dim).map(|_| rng.random_range(-1.0f32..1.0)).collect()
}

/// Naive f64 cosine, independent of the library's accumulation order.
pub fn oracle_cosine(u: &[f32], v: &[f32]) -> f64 {
    let (mut uv, mut uu, mut vv) = (0.0f64, 0.0f64, 0.0f64);
    for (a, b) in u.iter().zip(v) {
        let (a, b) = (f64::from(*a), f64::from(*b));
        uv += a * b;
        uu += a * a;
        vv += b * b;
    }
    uv / (uu.sqrt() * vv.sqrt())
}

/// Every pair at or above `threshold`, keyed by (smaller id, larger id).
pub fn oracle_pairs(e: &EmbeddingMatrix, threshold: f64) -> BTreeMap<(String, String), f64> {
    let ids = e.ids();
    let mut out = BTreeMap::new();
    for i in 0..ids.len() {
        for j in i + 1..ids.len() {
            let s = oracle_cosine(e.row(i), e.row(j));
            if s >= threshold {
                let (a, b) = if ids[i] < ids[j] { (i, j) } else { (j, i) };
                out.insert((ids[a].clone(), ids[b].clone()), s);
            }
        }
    }
    out
}

/// k nearest neighbors by full sort, ties by id.
pub fn oracle_knn(e: &EmbeddingMatrix, k: usize) -> HashMap<String, Vec<(String, f64)>> {
    let ids = e.ids();
    (0..ids.len())
        .map(|i| {
            let mut all: Vec<(String, f64)> = (0..ids.len())
                .filter(|&j| j != i)
                .map(|j| (ids[j].clone(), oracle_cosine(e.row(i), e.row(j))))
                .collect();
            all.sort_by(|x, y| y.1.partial_cmp(&x.1).unwrap().then_with(|| x.0.cmp(&y.0)));
            all.truncate(k);
            (ids[i].clone(), all)
        })
        .collect()
}

/// Connected components by breadth-first search over an adjacency list.
pub fn oracle_components(n: usize, edges: &[(usize, usize)]) -> BTreeSet<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut seen = vec![false; n];
    let mut out = BTreeSet::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        let mut comp = vec![start];
        seen[start] = true;
        let mut k = 0;
        while k < comp.len() {
            for &next in &adj[comp[k]] {
                if !seen[next] {
                    seen[next] = true;
                    comp.push(next);
                }
            }
            k += 1;
        }
        comp.sort();
        out.insert(comp);
    }
    out
}

/// Random background vectors plus planted groups of near-copies.
pub struct Planted {
    pub embeddings: EmbeddingMatrix,
    /// Planted groups (size >= 2), each sorted.
    pub groups: Vec<Vec<String>>,
}

impl Planted {
    pub fn pairs(&self) -> BTreeSet<(String, String)> {
        let mut out = BTreeSet::new();
        for g in &self.groups {
            for i in 0..g.len() {
                for j in i + 1..g.len() {
                    out.insert((g[i].clone(), g[j].clone()));
                }
            }
        }
        out
    }
}

/// `n` points in `dim` dimensions. Copies are `base + δ` with
/// `|δ| = 0.1 |base|`, so two copies of one base have cosine at least
/// `1 - 2 · 0.1² = 0.98`.
pub fn planted(seed: u64, n: usize, dim: usize) -> Planted {
    let mut rng = rng(seed);
    let mut rows: Vec<(String, Vec<f32>)> = Vec::with_capacity(n);
    let mut groups = Vec::new();
    let mut next_id = 0usize;
    let mut id = |rng: &mut ChaCha8Rng| {
        next_id += 1;
        // Shuffled-looking ids so row order and id order differ.
        format!("img{:05}_{:03}", (next_id * 7919) % 100_000, rng.random_range(0..1000))
    };
    while rows.len() < n {
        let base = random_vector(&mut rng, dim);
        let size = match rng.random_range(0..10) {
            0..=5 => 1,
            6 | 7 => 2,
            8 => 3,
            _ => rng.random_range(4..=6),
        }
        .min(n - rows.len());
        let norm = base.iter().map(|x| x * x).sum::<f32>().sqrt();
        let mut members = Vec::new();
        for _ in 0..size {
            let mut v = base.clone();
            if size > 1 {
                let d = random_vector(&mut rng, dim);
                let dn = d.iter().map(|x| x * x).sum::<f32>().sqrt();
                for (x, y) in v.iter_mut().zip(&d) {
                    *x += 0.1 * norm * y / dn;
                }
            }
            let name = id(&mut rng);
            members.push(name.clone());
            rows.push((name, v));
        }
        if size > 1 {
            members.sort();
            groups.push(members);
        }
    }
    Planted {
        embeddings: EmbeddingMatrix::from_rows(rows).unwrap(),
        groups,
    }
}

/// Manifest with random groups, diagnoses, skin types and partitions.
pub fn random_manifest(seed: u64, n: usize) -> DatasetManifest {
    let mut rng = rng(seed);
    let groups = (n / 2).max(1);
    let records = (0..n)
        .map(|i| {
            let mut r = ImageRecord::new(format!("im{i:04}"), ["mel", "nv", "bcc"][rng.random_range(0..3)]);
            if rng.random_bool(0.8) {
                r.group_id = Some(format!("g{}", rng.random_range(0..groups)));
            }
            r.fst = rng.random_range(0..=6);
            r.partition = match rng.random_range(0..10) {
                0..=5 => Partition::Train,
                6 | 7 => Partition::Valid,
                8 => Partition::Test,
                _ => Partition::Unassigned,
            };
            r
        })
        .collect();
    DatasetManifest::from_records(format!("random{seed}"), records).unwrap()
}

/// Fixture root: `$DERMAUDIT_FIXTURES`, else `tests/fixtures` under this crate.
pub fn fixture_root() -> PathBuf {
    std::env::var_os("DERMAUDIT_FIXTURES")
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures"))
}

/// `Some(path)` when the fixture exists.
pub fn fixture(rel: &str) -> Option<PathBuf> {
    let p = fixture_root().join(rel);
    p.exists().then_some(p)
}

/// Reads the public HAM10000 metadata table (`lesion_id,image_id,dx,...`).
pub fn load_ham_metadata(path: &Path) -> DatasetManifest {
    let mut r = csv::Reader::from_path(path).unwrap();
    let headers = r.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let (lesion, image, dx) = (col("lesion_id"), col("image_id"), col("dx"));
    let records = r
        .records()
        .map(|row| {
            let row = row.unwrap();
            let mut rec = ImageRecord::new(&row[image], &row[dx]);
            rec.group_id = Some(row[lesion].to_string());
            rec.file_path = format!("{}.jpg", &row[image]);
            rec
        })
        .collect();
    DatasetManifest::from_records("ham10000", records).unwrap()
}

/// A smooth image with fine texture, standing in for a dermoscopic photo.
pub fn textured_image(w: u32, h: u32) -> image::RgbImage {
    image::RgbImage::from_fn(w, h, |x, y| {
        let (fx, fy) = (x as f64 / w as f64, y as f64 / h as f64);
        let r = ((fx - 0.5).powi(2) + (fy - 0.5).powi(2)).sqrt();
        let lesion = if r < 0.3 { 90.0 } else { 0.0 };
        let texture = 25.0 * ((x as f64 * 0.9).sin() * (y as f64 * 1.3).cos());
        let c = |base: f64| (base - lesion + texture).clamp(0.0, 255.0) as u8;
        image::Rgb([c(210.0), c(160.0 + 40.0 * fx), c(140.0 + 30.0 * fy)])
    })
}
