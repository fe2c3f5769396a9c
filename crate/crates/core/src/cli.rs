//! Command-line front end: one subcommand per pipeline step.
//!
//! Exit codes: 0 on success, 1 on a usage or validation error, 2 on an I/O
//! error. Every output file is written under `--out`; inputs are never
//! modified. Log verbosity comes from `DERMAUDIT_LOG` (error, warn, info, debug).

use std::collections::HashMap;
use std::io::{BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};

use crate::cleaner::{self, CleaningConfig};
use crate::duplicates::{self, DuplicateCluster, PairConfusion};
use crate::embeddings::{self, pair_order, EmbeddingMatrix, PairKey, SimilarityPair};
use crate::error::{Error, Result};
use crate::labels;
use crate::leakage::{self, SpanningNoTrain};
use crate::manifest::{self, DatasetManifest};
use crate::outliers::{self, OutlierScore};
use crate::reporting::{self, ReportInputs};
use crate::resample::Filter;
use crate::review::{self, server, Adjudication, ReviewSession, VerdictLog, VerdictValue};

const PAIR_THRESHOLDS: [f64; 2] = [0.90, 0.95];
const CLUSTER_THRESHOLD: f64 = 0.90;
const CLUSTER_MIN_SIZE: usize = 3;

#[derive(Debug, Parser)]
#[command(name = "dermaudit", version, about = "Audit and repair labeled image datasets")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct OutArgs {
    /// Directory receiving every output file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ManifestArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Directory with train.txt / valid.txt / test.txt overriding manifest partitions.
    #[arg(long)]
    pub splits: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AdjudicationArg {
    Primary,
    Consensus,
}

#[derive(Debug, Args)]
pub struct VerdictArgs {
    /// Verdict log written by `serve`.
    #[arg(long)]
    pub verdicts: Option<PathBuf>,
    /// Primary annotator; defaults to the first annotator in the log.
    #[arg(long, requires = "verdicts")]
    pub annotator: Option<String>,
    #[arg(long, value_enum, default_value = "primary", requires = "verdicts")]
    pub adjudication: AdjudicationArg,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Full audit: overlap, similar pairs, conflicts, clusters, outliers, report.
    Audit {
        #[command(flatten)]
        manifest: ManifestArgs,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        /// Pair thresholds; the lowest one bounds the scan.
        #[arg(long = "threshold", num_args = 1.., default_values_t = PAIR_THRESHOLDS)]
        thresholds: Vec<f64>,
        #[arg(long, default_value_t = 1000)]
        top_k: usize,
        #[arg(long, default_value_t = 100)]
        interval: usize,
        #[arg(long, default_value_t = CLUSTER_MIN_SIZE)]
        min_size: usize,
        #[arg(long, default_value_t = outliers::DEFAULT_NEIGHBORS)]
        neighbors: usize,
        #[command(flatten)]
        verdicts: VerdictArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// All pairs at or above a similarity threshold.
    Pairs {
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long, default_value_t = PAIR_THRESHOLDS[0])]
        threshold: f64,
        #[arg(long)]
        top_k: Option<usize>,
        /// Fills the category column from review verdicts.
        #[arg(long, requires = "verdicts")]
        manifest: Option<PathBuf>,
        #[command(flatten)]
        verdicts: VerdictArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Duplicate clusters, optionally merged with confirmed pairs.
    Clusters {
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long, default_value_t = CLUSTER_THRESHOLD)]
        threshold: f64,
        #[arg(long, default_value_t = CLUSTER_MIN_SIZE)]
        min_size: usize,
        /// Adds homogeneity flags.
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Duplicate pairs to merge into the clusters.
        #[arg(long)]
        pairs: Option<PathBuf>,
        #[command(flatten)]
        verdicts: VerdictArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Group overlap between partitions.
    Leakage {
        #[command(flatten)]
        manifest: ManifestArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Moves images until no group or duplicate pair spans partitions.
    Repair {
        #[command(flatten)]
        manifest: ManifestArgs,
        /// Duplicate pairs that must share a partition.
        #[arg(long)]
        pairs: Option<PathBuf>,
        #[command(flatten)]
        verdicts: VerdictArgs,
        #[arg(long, default_value = "to_train")]
        spanning_no_train: SpanningNoTrain,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Diagnosis and skin-type disagreements among similar pairs.
    Conflicts {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, conflicts_with = "pairs", required_unless_present = "pairs")]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        pairs: Option<PathBuf>,
        #[arg(long = "threshold", num_args = 1.., default_values_t = PAIR_THRESHOLDS)]
        thresholds: Vec<f64>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Images ranked by similarity to their nearest neighbors, lowest first.
    Outliers {
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long, default_value_t = outliers::DEFAULT_NEIGHBORS)]
        neighbors: usize,
        #[arg(long)]
        top_k: Option<usize>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Cleaning stages followed by a stratified split.
    Clean {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides `near_exact_threshold`.
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Precomputed clusters; detected at 0.90 / size 3 otherwise.
        #[arg(long)]
        clusters: Option<PathBuf>,
        /// Confirmed duplicate pairs merged into the clusters.
        #[arg(long)]
        pairs: Option<PathBuf>,
        #[command(flatten)]
        verdicts: VerdictArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Stratified train/valid/test assignment.
    Split {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Resamples an image tree in one step.
    Resize {
        #[arg(long)]
        images: PathBuf,
        /// `N` or `WxH`.
        #[arg(long, value_parser = parse_size)]
        size: (u32, u32),
        #[arg(long, value_enum, default_value = "bicubic")]
        method: FilterArg,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Merges train, valid and test manifests into one release.
    Extend {
        /// Training manifest.
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        valid_manifest: PathBuf,
        #[arg(long)]
        test_manifest: PathBuf,
        /// Image ids to drop.
        #[arg(long, value_delimiter = ',')]
        exclude: Vec<String>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Review service for candidate pairs; the verdict log lives in `--out`.
    Serve {
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        top_k: Option<usize>,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        images: Option<PathBuf>,
        /// Directory with the review UI bundle.
        #[arg(long)]
        ui: Option<PathBuf>,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
        #[command(flatten)]
        out: OutArgs,
    },
    /// JSON and HTML report from the tabular outputs of other subcommands.
    Report {
        #[command(flatten)]
        manifest: ManifestArgs,
        /// Pairs with categories, as written by `pairs` or `audit`.
        #[arg(long)]
        pairs: Option<PathBuf>,
        #[arg(long = "threshold", num_args = 1.., default_values_t = PAIR_THRESHOLDS)]
        thresholds: Vec<f64>,
        #[arg(long)]
        clusters: Option<PathBuf>,
        /// Ranked outliers as written by `outliers`.
        #[arg(long)]
        outliers: Option<PathBuf>,
        #[arg(long, default_value_t = reporting::DEFAULT_TOP_OUTLIERS)]
        top_k: usize,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FilterArg {
    Bicubic,
    Nearest,
}

impl From<FilterArg> for Filter {
    fn from(f: FilterArg) -> Self {
        match f {
            FilterArg::Bicubic => Filter::Bicubic,
            FilterArg::Nearest => Filter::Nearest,
        }
    }
}

fn parse_size(s: &str) -> std::result::Result<(u32, u32), String> {
    let parse = |t: &str| t.trim().parse::<u32>().ok().filter(|&v| v > 0);
    let size = match s.split_once(['x', 'X']) {
        Some((w, h)) => parse(w).zip(parse(h)),
        None => parse(s).map(|v| (v, v)),
    };
    size.ok_or_else(|| format!("expected N or WxH with positive integers, got {s:?}"))
}

/// Parses arguments from the process, runs, and maps errors to exit codes.
pub fn run() -> ExitCode {
    run_from(std::env::args_os())
}

pub fn run_from<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or("DERMAUDIT_LOG", "warn")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() { 2 } else { 1 })
        }
    }
}

fn input<'a>(flag: &str, path: &'a Path) -> Result<&'a Path> {
    if path.exists() {
        Ok(path)
    } else {
        Err(Error::Argument(format!("--{flag}: {} does not exist", path.display())))
    }
}

fn prepare_out(out: &OutArgs) -> Result<&Path> {
    std::fs::create_dir_all(&out.out).map_err(|e| Error::io(&out.out, e))?;
    Ok(&out.out)
}

fn write_file(
    dir: &Path,
    name: &str,
    f: impl FnOnce(&mut BufWriter<std::fs::File>) -> std::io::Result<()>,
) -> Result<()> {
    let path = dir.join(name);
    let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(&path, e))?;
    info!("wrote {}", path.display());
    Ok(())
}

fn write_json(dir: &Path, name: &str, value: &impl serde::Serialize) -> Result<()> {
    write_file(dir, name, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        w.write_all(b"\n")
    })
}

fn load_manifest_args(a: &ManifestArgs) -> Result<DatasetManifest> {
    let m = manifest::load_manifest(input("manifest", &a.manifest)?)?;
    match &a.splits {
        Some(dir) => manifest::apply_split_lists(&m, &manifest::load_split_lists(input("splits", dir)?)?),
        None => Ok(m),
    }
}

fn load_embeddings(path: &Path) -> Result<EmbeddingMatrix> {
    embeddings::load_embeddings_any(input("embeddings", path)?)
}

fn load_config(path: Option<&PathBuf>) -> Result<CleaningConfig> {
    let Some(path) = path else {
        return Ok(CleaningConfig::default());
    };
    let text = std::fs::read_to_string(input("config", path)?).map_err(|e| Error::io(path, e))?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn load_verdicts(a: &VerdictArgs) -> Result<Option<HashMap<PairKey, VerdictValue>>> {
    let Some(path) = &a.verdicts else {
        return Ok(None);
    };
    let log = review::read_verdicts(input("verdicts", path)?)?;
    let rule = match a.adjudication {
        AdjudicationArg::Consensus => Adjudication::Consensus,
        AdjudicationArg::Primary => {
            let who = match &a.annotator {
                Some(who) => who.clone(),
                None => review::annotators(&log)
                    .into_iter()
                    .next()
                    .ok_or_else(|| Error::Argument("--verdicts: log has no verdicts".into()))?,
            };
            Adjudication::Primary(who)
        }
    };
    Ok(Some(review::adjudicated_verdicts(&log, &rule)))
}

fn category_of(p: &SimilarityPair, m: Option<&DatasetManifest>, v: Option<&HashMap<PairKey, VerdictValue>>) -> Result<String> {
    match (m, v.and_then(|v| v.get(&p.key()))) {
        (Some(m), Some(value)) => Ok(duplicates::categorize(duplicates::same_group(m, &p.a, &p.b)?, *value)
            .as_str()
            .to_string()),
        _ => Ok(String::new()),
    }
}

/// Pairs treated as duplicates: with verdicts, those adjudicated duplicate;
/// otherwise every pair not categorized as a non-duplicate.
fn duplicate_pairs(rows: Vec<(SimilarityPair, String)>, verdicts: Option<&HashMap<PairKey, VerdictValue>>) -> Vec<SimilarityPair> {
    rows.into_iter()
        .filter(|(p, category)| match verdicts {
            Some(v) => v.get(&p.key()) == Some(&VerdictValue::Duplicate),
            None => matches!(category.as_str(), "" | "confirmed_duplicate" | "missed_duplicate"),
        })
        .map(|(p, _)| p)
        .collect()
}

fn confusion_from_categories(rows: &[(SimilarityPair, String)]) -> Option<PairConfusion> {
    let mut out = PairConfusion::default();
    let mut any = false;
    for (p, c) in rows {
        let bucket = match c.as_str() {
            "confirmed_duplicate" => &mut out.confirmed_duplicates,
            "true_non_duplicate" => &mut out.true_non_duplicates,
            "missed_duplicate" => &mut out.missed_duplicates,
            "false_duplicate" => &mut out.false_duplicates,
            "unclear" => &mut out.unclear,
            _ => continue,
        };
        any = true;
        bucket.push(p.clone());
    }
    any.then_some(out)
}

fn read_outliers_csv(path: &Path) -> Result<Vec<OutlierScore>> {
    let name = path.display().to_string();
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::parse(&name, 1, e.to_string()))?;
    let mut out = Vec::new();
    for (i, row) in r.records().enumerate() {
        let row = row.map_err(|e| Error::parse(&name, i + 2, e.to_string()))?;
        let score = row
            .get(2)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::parse(&name, i + 2, "bad score"))?;
        out.push(OutlierScore {
            image_id: row.get(1).unwrap_or_default().to_string(),
            score,
        });
    }
    Ok(out)
}

fn save_pairs(dir: &Path, pairs: &[SimilarityPair], categories: &[String]) -> Result<()> {
    write_file(dir, "pairs.csv", |w| {
        duplicates::write_pairs_csv(pairs.iter().zip(categories.iter().map(String::as_str)), w)
    })
}

fn save_splits(dir: &Path, m: &DatasetManifest) -> Result<()> {
    manifest::save_split_lists(&manifest::SplitLists::from_manifest(m), dir.join("splits"))
}

fn check_thresholds(thresholds: &[f64]) -> Result<f64> {
    if let Some(t) = thresholds.iter().find(|t| !(-1.0..=1.0).contains(*t)) {
        return Err(Error::Argument(format!("--threshold: {t} outside [-1, 1]")));
    }
    thresholds
        .iter()
        .copied()
        .reduce(f64::min)
        .ok_or_else(|| Error::Argument("--threshold: at least one value required".into()))
}

fn clusters_for(
    e: &EmbeddingMatrix,
    threshold: f64,
    min_size: usize,
    extra_pairs: &[SimilarityPair],
    m: Option<&DatasetManifest>,
) -> Result<Vec<DuplicateCluster>> {
    let mut clusters = duplicates::detect_clusters(e, threshold, min_size)?;
    if !extra_pairs.is_empty() {
        clusters = duplicates::coalesce(extra_pairs, &clusters, e)?;
    }
    if let Some(m) = m {
        duplicates::label_clusters(&mut clusters, m)?;
    }
    Ok(clusters)
}

pub fn execute(command: Command) -> Result<()> {
    match command {
        Command::Audit {
            manifest,
            embeddings,
            thresholds,
            top_k,
            interval,
            min_size,
            neighbors,
            verdicts,
            out,
        } => {
            let m = load_manifest_args(&manifest)?;
            let e = embeddings.as_deref().map(load_embeddings).transpose()?;
            let scan_at = check_thresholds(&thresholds)?;
            let verdicts = load_verdicts(&verdicts)?;
            let dir = prepare_out(&out)?;

            let overlap = leakage::detect_overlap(&m);
            write_file(dir, "overlap.csv", |w| leakage::write_overlap_csv(&overlap, w))?;
            write_file(dir, "group_histogram.csv", |w| {
                let mut c = csv::Writer::from_writer(w);
                c.write_record(["group_size", "groups"])?;
                for (size, n) in manifest::group_histogram(&m) {
                    c.write_record([size.to_string(), n.to_string()])?;
                }
                c.flush()
            })?;

            let (mut conflicts, mut clusters, mut scores, mut confusion) = (None, None, None, None);
            if let Some(e) = &e {
                e.check_bound_to(&m)?;
                let pairs = embeddings::scan_pairs(e, scan_at);
                let categories = pairs
                    .iter()
                    .map(|p| category_of(p, Some(&m), verdicts.as_ref()))
                    .collect::<Result<Vec<_>>>()?;
                save_pairs(dir, &pairs, &categories)?;

                let cs = labels::conflict_sets(&pairs, &m, &thresholds)?;
                write_file(dir, "conflicts.csv", |w| labels::write_summary_csv(&cs, w))?;
                conflicts = Some(cs);

                let cl = clusters_for(e, CLUSTER_THRESHOLD, min_size, &[], Some(&m))?;
                write_file(dir, "clusters.csv", |w| duplicates::write_clusters_csv(&cl, w))?;
                clusters = Some(cl);

                let sc = outliers::outlier_scores(e, neighbors)?;
                write_file(dir, "outliers.csv", |w| outliers::write_outliers_csv(&sc, w))?;
                scores = Some(sc);

                if let Some(v) = &verdicts {
                    let reviewed: Vec<SimilarityPair> =
                        pairs.iter().filter(|p| v.contains_key(&p.key())).cloned().collect();
                    confusion = Some(duplicates::classify_pairs(&reviewed, v, &m)?);
                    let intervals = duplicates::interval_analysis(&pairs, top_k, interval, &m, v)?;
                    write_json(dir, "intervals.json", &intervals)?;
                }
            }
            let report = reporting::audit_report(
                &m,
                ReportInputs {
                    overlap: Some(&overlap),
                    confusion: confusion.as_ref(),
                    conflicts: conflicts.as_ref(),
                    clusters: clusters.as_deref(),
                    outliers: scores.as_deref(),
                    top_outliers: None,
                },
            );
            report.save(dir)
        }

        Command::Pairs {
            embeddings,
            threshold,
            top_k,
            manifest,
            verdicts,
            out,
        } => {
            check_thresholds(&[threshold])?;
            let e = load_embeddings(&embeddings)?;
            let m = manifest
                .as_deref()
                .map(|p| manifest::load_manifest(input("manifest", p)?))
                .transpose()?;
            let verdicts = load_verdicts(&verdicts)?;
            let dir = prepare_out(&out)?;
            let mut pairs = embeddings::scan_pairs(&e, threshold);
            if let Some(k) = top_k {
                pairs.truncate(k);
            }
            let categories = pairs
                .iter()
                .map(|p| category_of(p, m.as_ref(), verdicts.as_ref()))
                .collect::<Result<Vec<_>>>()?;
            info!("{} pairs at or above {threshold}", pairs.len());
            save_pairs(dir, &pairs, &categories)
        }

        Command::Clusters {
            embeddings,
            threshold,
            min_size,
            manifest,
            pairs,
            verdicts,
            out,
        } => {
            check_thresholds(&[threshold])?;
            let e = load_embeddings(&embeddings)?;
            let m = manifest
                .as_deref()
                .map(|p| manifest::load_manifest(input("manifest", p)?))
                .transpose()?;
            let verdicts = load_verdicts(&verdicts)?;
            let extra = match &pairs {
                Some(p) => duplicate_pairs(duplicates::load_pairs_csv(input("pairs", p)?)?, verdicts.as_ref()),
                None => Vec::new(),
            };
            let dir = prepare_out(&out)?;
            let clusters = clusters_for(&e, threshold, min_size, &extra, m.as_ref())?;
            write_file(dir, "clusters.csv", |w| duplicates::write_clusters_csv(&clusters, w))
        }

        Command::Leakage { manifest, out } => {
            let m = load_manifest_args(&manifest)?;
            let dir = prepare_out(&out)?;
            let overlap = leakage::detect_overlap(&m);
            write_file(dir, "overlap.csv", |w| leakage::write_overlap_csv(&overlap, w))?;
            write_json(dir, "overlap.json", &overlap)
        }

        Command::Repair {
            manifest,
            pairs,
            verdicts,
            spanning_no_train,
            out,
        } => {
            let m = load_manifest_args(&manifest)?;
            let verdicts = load_verdicts(&verdicts)?;
            let extra = match &pairs {
                Some(p) => duplicate_pairs(duplicates::load_pairs_csv(input("pairs", p)?)?, verdicts.as_ref()),
                None => Vec::new(),
            };
            let dir = prepare_out(&out)?;
            let (repaired, moves) = leakage::repair(&m, &extra, spanning_no_train)?;
            leakage::check_no_overlap(&repaired)?;
            info!("{} images moved", moves.len());
            manifest::save_manifest(&repaired, dir.join("manifest.csv"))?;
            write_file(dir, "moves.csv", |w| leakage::write_moves_csv(&moves, w))?;
            save_splits(dir, &repaired)
        }

        Command::Conflicts {
            manifest,
            embeddings,
            pairs,
            thresholds,
            out,
        } => {
            let scan_at = check_thresholds(&thresholds)?;
            let m = manifest::load_manifest(input("manifest", &manifest)?)?;
            let candidates = match (&embeddings, &pairs) {
                (Some(e), _) => {
                    let e = load_embeddings(e)?;
                    e.check_bound_to(&m)?;
                    embeddings::scan_pairs(&e, scan_at)
                }
                (None, Some(p)) => duplicates::load_pairs_csv(input("pairs", p)?)?.into_iter().map(|(p, _)| p).collect(),
                (None, None) => return Err(Error::Argument("one of --embeddings or --pairs is required".into())),
            };
            let dir = prepare_out(&out)?;
            let cs = labels::conflict_sets(&candidates, &m, &thresholds)?;
            write_file(dir, "conflicts.csv", |w| labels::write_summary_csv(&cs, w))?;
            write_file(dir, "conflict_pairs.csv", |w| {
                let mut c = csv::Writer::from_writer(w);
                c.write_record(["threshold", "set", "a", "b", "score"])?;
                for t in &cs.per_threshold {
                    for (kind, set) in &t.sets {
                        for p in set {
                            c.write_record([t.threshold.to_string(), kind.as_str().into(), p.a.clone(), p.b.clone(), p.score.to_string()])?;
                        }
                    }
                }
                c.flush()
            })
        }

        Command::Outliers {
            embeddings,
            neighbors,
            top_k,
            out,
        } => {
            let e = load_embeddings(&embeddings)?;
            let dir = prepare_out(&out)?;
            let mut scores = outliers::outlier_scores(&e, neighbors)?;
            if let Some(k) = top_k {
                scores.truncate(k);
            }
            write_file(dir, "outliers.csv", |w| outliers::write_outliers_csv(&scores, w))
        }

        Command::Clean {
            manifest,
            embeddings,
            config,
            threshold,
            seed,
            clusters,
            pairs,
            verdicts,
            out,
        } => {
            let mut cfg = load_config(config.as_ref())?;
            if let Some(t) = threshold {
                cfg.near_exact_threshold = t;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            cfg.validate()?;
            let m = manifest::load_manifest(input("manifest", &manifest)?)?;
            let e = load_embeddings(&embeddings)?;
            let verdicts = load_verdicts(&verdicts)?;
            let extra = match &pairs {
                Some(p) => duplicate_pairs(duplicates::load_pairs_csv(input("pairs", p)?)?, verdicts.as_ref()),
                None => Vec::new(),
            };
            let cl = match &clusters {
                Some(p) => {
                    let base = duplicates::load_clusters_csv(input("clusters", p)?)?;
                    if extra.is_empty() {
                        base
                    } else {
                        duplicates::coalesce(&extra, &base, &e)?
                    }
                }
                None => clusters_for(&e, CLUSTER_THRESHOLD, CLUSTER_MIN_SIZE, &extra, None)?,
            };
            let dir = prepare_out(&out)?;
            let (survivors, ledger) = cleaner::clean(&m, &e, &cl, &cfg)?;
            let (split, report) = cleaner::stratified_split(&survivors, cfg.split_ratios, cfg.seed)?;
            info!("{} of {} images survive cleaning", split.len(), m.len());
            manifest::save_manifest(&split, dir.join("manifest.csv"))?;
            write_file(dir, "removals.csv", |w| ledger.write_csv(w))?;
            write_json(dir, "split.json", &report)?;
            save_splits(dir, &split)
        }

        Command::Split {
            manifest,
            config,
            seed,
            out,
        } => {
            let mut cfg = load_config(config.as_ref())?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            cfg.validate()?;
            let m = manifest::load_manifest(input("manifest", &manifest)?)?;
            let dir = prepare_out(&out)?;
            let (split, report) = cleaner::stratified_split(&m, cfg.split_ratios, cfg.seed)?;
            for class in &report.infeasible {
                warn!("class {class} is too small to appear in every partition");
            }
            manifest::save_manifest(&split, dir.join("manifest.csv"))?;
            write_json(dir, "split.json", &report)?;
            save_splits(dir, &split)
        }

        Command::Resize {
            images,
            size,
            method,
            out,
        } => {
            let src = input("images", &images)?;
            let dir = prepare_out(&out)?;
            if dir.canonicalize().ok() == src.canonicalize().ok() {
                return Err(Error::Argument("--out must differ from --images".into()));
            }
            let n = cleaner::resize_tree(src, dir, size, method.into())?;
            info!("resized {n} images");
            Ok(())
        }

        Command::Extend {
            manifest,
            valid_manifest,
            test_manifest,
            exclude,
            out,
        } => {
            let train = manifest::load_manifest(input("manifest", &manifest)?)?;
            let valid = manifest::load_manifest(input("valid-manifest", &valid_manifest)?)?;
            let test = manifest::load_manifest(input("test-manifest", &test_manifest)?)?;
            let dir = prepare_out(&out)?;
            let (extended, unmatched) = cleaner::build_extended(&train, &valid, &test, &exclude)?;
            manifest::save_manifest(&extended, dir.join("manifest.csv"))?;
            save_splits(dir, &extended)?;
            let counts: std::collections::BTreeMap<String, usize> = extended
                .partition_counts()
                .into_iter()
                .map(|(p, n)| (p.to_string(), n))
                .collect();
            write_json(dir, "extend.json", &serde_json::json!({ "counts": counts, "unmatched_exclusions": unmatched }))
        }

        Command::Serve {
            pairs,
            threshold,
            top_k,
            manifest,
            images,
            ui,
            port,
            host,
            out,
        } => {
            let mut queue: Vec<SimilarityPair> = duplicates::load_pairs_csv(input("pairs", &pairs)?)?
                .into_iter()
                .map(|(p, _)| p)
                .filter(|p| threshold.is_none_or(|t| p.score >= t))
                .collect();
            queue.sort_by(pair_order);
            if let Some(k) = top_k {
                queue.truncate(k);
            }
            let m = manifest
                .as_deref()
                .map(|p| manifest::load_manifest(input("manifest", p)?))
                .transpose()?;
            let dir = prepare_out(&out)?;
            let log = VerdictLog::open(dir.join("verdicts.log"))?;
            let session = ReviewSession::new(queue, log)?;
            info!("session {} with {} pairs", session.id(), session.queue().len());
            let mut state = server::ReviewState::new(session);
            if let Some(m) = m {
                state = state.with_manifest(m);
            }
            if let Some(images) = images {
                state = state.with_image_root(input("images", &images)?);
            }
            if let Some(ui) = ui {
                state = state.with_ui_dir(input("ui", &ui)?);
            }
            let addr = SocketAddr::new(host, port);
            let rt = tokio::runtime::Builder::new_multi_thread()
                .enable_all()
                .build()
                .map_err(|e| Error::io("tokio runtime", e))?;
            rt.block_on(server::serve(Arc::new(state), addr))
                .map_err(|e| Error::io(addr.to_string(), e))
        }

        Command::Report {
            manifest,
            pairs,
            thresholds,
            clusters,
            outliers,
            top_k,
            out,
        } => {
            check_thresholds(&thresholds)?;
            let m = load_manifest_args(&manifest)?;
            let rows = pairs
                .as_deref()
                .map(|p| duplicates::load_pairs_csv(input("pairs", p)?))
                .transpose()?;
            let mut cl = clusters
                .as_deref()
                .map(|p| duplicates::load_clusters_csv(input("clusters", p)?))
                .transpose()?;
            let scores = outliers
                .as_deref()
                .map(|p| read_outliers_csv(input("outliers", p)?))
                .transpose()?;
            let dir = prepare_out(&out)?;

            let overlap = leakage::detect_overlap(&m);
            let conflicts = rows
                .as_ref()
                .map(|rows| {
                    let ps: Vec<SimilarityPair> = rows.iter().map(|(p, _)| p.clone()).collect();
                    labels::conflict_sets(&ps, &m, &thresholds)
                })
                .transpose()?;
            let confusion = rows.as_deref().and_then(confusion_from_categories);
            if let Some(cl) = &mut cl {
                duplicates::label_clusters(cl, &m)?;
            }
            let report = reporting::audit_report(
                &m,
                ReportInputs {
                    overlap: Some(&overlap),
                    confusion: confusion.as_ref(),
                    conflicts: conflicts.as_ref(),
                    clusters: cl.as_deref(),
                    outliers: scores.as_deref(),
                    top_outliers: Some(top_k),
                },
            );
            report.save(dir)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn size_parsing() {
        assert_eq!(parse_size("28").unwrap(), (28, 28));
        assert_eq!(parse_size("64x32").unwrap(), (64, 32));
        assert!(parse_size("0").is_err());
        assert!(parse_size("ax3").is_err());
    }

    #[test]
    fn unknown_flag_is_a_usage_error() {
        assert_eq!(run_from(["dermaudit", "pairs", "--bogus"]), ExitCode::from(1));
        assert_eq!(run_from(["dermaudit", "--help"]), ExitCode::SUCCESS);
    }

    #[test]
    fn duplicate_pair_selection() {
        let rows = vec![
            (SimilarityPair::new("a", "b", 0.99), String::new()),
            (SimilarityPair::new("a", "c", 0.98), "true_non_duplicate".into()),
            (SimilarityPair::new("b", "c", 0.97), "missed_duplicate".into()),
        ];
        let kept = duplicate_pairs(rows.clone(), None);
        assert_eq!(kept.len(), 2);
        let v: HashMap<_, _> = [(PairKey::new("a", "c"), VerdictValue::Duplicate)].into();
        assert_eq!(duplicate_pairs(rows, Some(&v)), [SimilarityPair::new("a", "c", 0.98)]);
    }

    #[test]
    fn confusion_needs_categories() {
        let rows = vec![(SimilarityPair::new("a", "b", 0.9), String::new())];
        assert!(confusion_from_categories(&rows).is_none());
    }
}
