//! Audit reports rendered as JSON and as a static HTML page.
//!
//! Both renderings come from one [`AuditReport`]; every number in it is a
//! count over one of the tabular outputs (manifest, overlap, pairs, clusters,
//! outliers), so the report can be re-derived from those files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::duplicates::{DuplicateCluster, PairConfusion};
use crate::error::{Error, Result};
use crate::labels::{ConflictKind, ConflictSets};
use crate::leakage::{Combination, OverlapReport};
use crate::manifest::{DatasetManifest, Partition};
use crate::outliers::OutlierScore;

pub const DEFAULT_TOP_OUTLIERS: usize = 20;

const PARTITIONS: [Partition; 4] = [Partition::Train, Partition::Valid, Partition::Test, Partition::Unassigned];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub diagnosis: String,
    /// Train, valid, test, unassigned.
    pub counts: [usize; 4],
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub dataset: String,
    pub images: usize,
    pub groups: usize,
    pub rows: Vec<SummaryRow>,
    pub totals: [usize; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapRow {
    pub combination: String,
    pub images: usize,
    pub groups: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub confirmed_duplicate: usize,
    pub missed_duplicate: usize,
    pub true_non_duplicate: usize,
    pub false_duplicate: usize,
    pub unclear: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConflictRow {
    pub threshold: f64,
    pub evaluated: usize,
    /// Count per conflict kind, in [`ConflictKind::ALL`] order.
    pub counts: Vec<(String, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub clusters: usize,
    pub images: usize,
    pub homogeneous: usize,
    pub heterogeneous: usize,
    /// Cluster size to number of clusters of that size.
    pub size_histogram: BTreeMap<usize, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub summary: Summary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub overlap: Option<Vec<OverlapRow>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confusion: Option<ConfusionCounts>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conflicts: Option<Vec<ConflictRow>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clusters: Option<ClusterSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub top_outliers: Option<Vec<OutlierScore>>,
}

/// Optional report inputs; absent ones leave their section out.
#[derive(Debug, Clone, Copy, Default)]
pub struct ReportInputs<'a> {
    pub overlap: Option<&'a OverlapReport>,
    pub confusion: Option<&'a PairConfusion>,
    pub conflicts: Option<&'a ConflictSets>,
    pub clusters: Option<&'a [DuplicateCluster]>,
    /// Scores in rank order; the first `top_outliers` are reported.
    pub outliers: Option<&'a [OutlierScore]>,
    pub top_outliers: Option<usize>,
}

pub fn summarize(m: &DatasetManifest) -> Summary {
    let mut by_class: BTreeMap<&str, [usize; 4]> = BTreeMap::new();
    for r in m.records() {
        let col = PARTITIONS.iter().position(|p| *p == r.partition).unwrap_or(3);
        by_class.entry(&r.diagnosis).or_default()[col] += 1;
    }
    let mut totals = [0; 4];
    let rows = by_class
        .into_iter()
        .map(|(d, counts)| {
            for (t, c) in totals.iter_mut().zip(counts) {
                *t += c;
            }
            SummaryRow {
                diagnosis: d.to_string(),
                counts,
                total: counts.iter().sum(),
            }
        })
        .collect();
    Summary {
        dataset: m.name().to_string(),
        images: m.len(),
        groups: m.groups().len(),
        rows,
        totals,
    }
}

pub fn audit_report(m: &DatasetManifest, inputs: ReportInputs<'_>) -> AuditReport {
    let overlap = inputs.overlap.map(|o| {
        Combination::ALL
            .iter()
            .map(|c| OverlapRow {
                combination: c.as_str().to_string(),
                images: o.get(*c).image_count,
                groups: o.get(*c).group_count,
            })
            .collect()
    });
    let confusion = inputs.confusion.map(|c| ConfusionCounts {
        confirmed_duplicate: c.confirmed_duplicates.len(),
        missed_duplicate: c.missed_duplicates.len(),
        true_non_duplicate: c.true_non_duplicates.len(),
        false_duplicate: c.false_duplicates.len(),
        unclear: c.unclear.len(),
    });
    let conflicts = inputs.conflicts.map(|cs| {
        cs.per_threshold
            .iter()
            .map(|t| ConflictRow {
                threshold: t.threshold,
                evaluated: t.evaluated,
                counts: ConflictKind::ALL.iter().map(|k| (k.as_str().to_string(), t.count(*k))).collect(),
            })
            .collect()
    });
    let clusters = inputs.clusters.map(|cl| {
        let mut size_histogram = BTreeMap::new();
        for c in cl {
            *size_histogram.entry(c.len()).or_insert(0) += 1;
        }
        ClusterSummary {
            clusters: cl.len(),
            images: cl.iter().map(|c| c.len()).sum(),
            homogeneous: cl.iter().filter(|c| c.is_homogeneous() == Some(true)).count(),
            heterogeneous: cl.iter().filter(|c| c.is_homogeneous() == Some(false)).count(),
            size_histogram,
        }
    });
    let top = inputs.top_outliers.unwrap_or(DEFAULT_TOP_OUTLIERS);
    let top_outliers = inputs.outliers.map(|s| s.iter().take(top).cloned().collect());
    AuditReport {
        summary: summarize(m),
        overlap,
        confusion,
        conflicts,
        clusters,
        top_outliers,
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

fn table(out: &mut String, head: &[&str], rows: &[Vec<String>]) {
    out.push_str("<table>\n<tr>");
    for h in head {
        let _ = write!(out, "<th>{}</th>", escape(h));
    }
    out.push_str("</tr>\n");
    for row in rows {
        out.push_str("<tr>");
        for cell in row {
            let _ = write!(out, "<td>{}</td>", escape(cell));
        }
        out.push_str("</tr>\n");
    }
    out.push_str("</table>\n");
}

impl AuditReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report is always serializable");
        s.push('\n');
        s
    }

    /// Self-contained page with static tables and no scripts.
    pub fn to_html(&self) -> String {
        let s = &self.summary;
        let mut out = String::new();
        let _ = write!(
            out,
            "<!doctype html>\n<html><head><meta charset=\"utf-8\"><title>Audit: {0}</title>\n\
             <style>body{{font-family:sans-serif;margin:2em}}table{{border-collapse:collapse;margin-bottom:1.5em}}\
             td,th{{border:1px solid #999;padding:2px 8px;text-align:right}}th{{background:#eee}}</style>\n\
             </head><body>\n<h1>Audit: {0}</h1>\n<p>{1} images in {2} groups.</p>\n",
            escape(&s.dataset),
            s.images,
            s.groups
        );

        out.push_str("<h2>Images per partition</h2>\n");
        let mut rows: Vec<Vec<String>> = s
            .rows
            .iter()
            .map(|r| {
                let mut v = vec![r.diagnosis.clone()];
                v.extend(r.counts.iter().map(|c| c.to_string()));
                v.push(r.total.to_string());
                v
            })
            .collect();
        let mut total = vec!["total".to_string()];
        total.extend(s.totals.iter().map(|c| c.to_string()));
        total.push(s.images.to_string());
        rows.push(total);
        table(&mut out, &["diagnosis", "train", "valid", "test", "unassigned", "total"], &rows);

        if let Some(o) = &self.overlap {
            out.push_str("<h2>Partition overlap</h2>\n");
            let rows: Vec<_> = o
                .iter()
                .map(|r| vec![r.combination.clone(), r.images.to_string(), r.groups.to_string()])
                .collect();
            table(&mut out, &["partitions", "images", "groups"], &rows);
        }
        if let Some(c) = &self.confusion {
            out.push_str("<h2>Reviewed pairs</h2>\n");
            let rows = vec![
                vec!["confirmed duplicate".into(), c.confirmed_duplicate.to_string()],
                vec!["missed duplicate".into(), c.missed_duplicate.to_string()],
                vec!["true non-duplicate".into(), c.true_non_duplicate.to_string()],
                vec!["false duplicate".into(), c.false_duplicate.to_string()],
                vec!["unclear".into(), c.unclear.to_string()],
            ];
            table(&mut out, &["category", "pairs"], &rows);
        }
        if let Some(cs) = &self.conflicts {
            out.push_str("<h2>Label conflicts among similar pairs</h2>\n");
            let mut head = vec!["threshold", "pairs"];
            head.extend(ConflictKind::ALL.iter().map(|k| k.as_str()));
            let rows: Vec<_> = cs
                .iter()
                .map(|r| {
                    let mut v = vec![format!("{:.2}", r.threshold), r.evaluated.to_string()];
                    v.extend(r.counts.iter().map(|(_, n)| n.to_string()));
                    v
                })
                .collect();
            table(&mut out, &head, &rows);
        }
        if let Some(c) = &self.clusters {
            let _ = writeln!(
                out,
                "<h2>Duplicate clusters</h2>\n<p>{} clusters covering {} images; {} homogeneous, {} heterogeneous.</p>",
                c.clusters, c.images, c.homogeneous, c.heterogeneous
            );
            let rows: Vec<_> = c
                .size_histogram
                .iter()
                .map(|(size, n)| vec![size.to_string(), n.to_string()])
                .collect();
            table(&mut out, &["size", "clusters"], &rows);
        }
        if let Some(o) = &self.top_outliers {
            out.push_str("<h2>Lowest neighbor similarity</h2>\n");
            let rows: Vec<_> = o
                .iter()
                .enumerate()
                .map(|(i, s)| vec![(i + 1).to_string(), s.image_id.clone(), format!("{:.4}", s.score)])
                .collect();
            table(&mut out, &["rank", "image", "score"], &rows);
        }
        out.push_str("</body></html>\n");
        out
    }

    /// Writes `report.json` and `report.html` into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, text) in [("report.json", self.to_json()), ("report.html", self.to_html())] {
            let path = dir.join(name);
            std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}
