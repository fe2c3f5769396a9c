//! Ranking of likely erroneous images by nearest-neighbor similarity.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::embeddings::{cmp_score, knn, EmbeddingMatrix};
use crate::error::Result;

pub const DEFAULT_NEIGHBORS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierScore {
    pub image_id: String,
    /// Lowest similarity among the image's nearest neighbors.
    pub score: f64,
}

/// Scores every image by the minimum cosine similarity to its `neighbors`
/// nearest neighbors, most suspicious (lowest score) first.
pub fn outlier_scores(e: &EmbeddingMatrix, neighbors: usize) -> Result<Vec<OutlierScore>> {
    let nl = knn(e, neighbors)?;
    let mut scores: Vec<OutlierScore> = nl
        .lists
        .into_iter()
        .map(|(image_id, list)| OutlierScore {
            image_id,
            // Sorted descending, so the last neighbor is the minimum.
            score: list.last().map(|n| n.score).unwrap_or(1.0),
        })
        .collect();
    scores.sort_by(|x, y| cmp_score(x.score, y.score).then_with(|| x.image_id.cmp(&y.image_id)));
    Ok(scores)
}

/// Ids whose score is strictly below `cutoff`.
pub fn below_cutoff(scores: &[OutlierScore], cutoff: f64) -> Vec<String> {
    scores
        .iter()
        .filter(|s| s.score < cutoff)
        .map(|s| s.image_id.clone())
        .collect()
}

/// Writes `rank,image_id,score` with 1-based ranks.
pub fn write_outliers_csv(scores: &[OutlierScore], writer: impl Write) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["rank", "image_id", "score"])?;
    for (i, s) in scores.iter().enumerate() {
        w.write_record([(i + 1).to_string(), s.image_id.clone(), s.score.to_string()])?;
    }
    w.flush()
}
