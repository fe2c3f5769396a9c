//! Ranks images by how far they sit from their nearest neighbours.

use dermaudit::outliers::{below_cutoff, outlier_scores, DEFAULT_NEIGHBORS};
use dermaudit::EmbeddingMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let centre: Vec<f32> = (0..16).map(|_| rng.random_range(0.5..1.0)).collect();
    let mut rows: Vec<(String, Vec<f32>)> = (0..40)
        .map(|i| {
            let v = centre.iter().map(|x| x + rng.random_range(-0.1..0.1)).collect();
            (format!("skin{i:02}"), v)
        })
        .collect();
    // A mis-filed image pointing in an unrelated direction.
    rows.push(("stray".into(), centre.iter().enumerate().map(|(i, x)| if i % 2 == 0 { -x } else { *x }).collect()));
    let e = EmbeddingMatrix::from_rows(rows)?;

    let scores = outlier_scores(&e, DEFAULT_NEIGHBORS)?;
    for s in scores.iter().take(3) {
        println!("{:<8} {:.4}", s.image_id, s.score);
    }
    println!("below 0.5: {:?}", below_cutoff(&scores, 0.5));
    Ok(())
}
