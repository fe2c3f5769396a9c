//! Counts near-duplicate pairs whose diagnosis or skin type labels disagree.

use dermaudit::labels::{conflict_sets, fst_off_by_one, ConflictKind};
use dermaudit::manifest::{DatasetManifest, ImageRecord};
use dermaudit::SimilarityPair;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let labels = [("a", "psoriasis", 2), ("b", "psoriasis", 3), ("c", "eczema", 2), ("d", "eczema", 5), ("e", "eczema", 0)];
    let records = labels
        .iter()
        .map(|(id, dx, fst)| {
            let mut r = ImageRecord::new(*id, *dx);
            r.fst = *fst;
            r
        })
        .collect();
    let m = DatasetManifest::from_records("toy", records)?;
    let pairs = vec![
        SimilarityPair::new("a", "b", 0.97),
        SimilarityPair::new("a", "c", 0.96),
        SimilarityPair::new("c", "d", 0.93),
        SimilarityPair::new("d", "e", 0.91),
    ];
    println!("fst 2 vs 3: {:?}", fst_off_by_one(2, 3)?);

    let sets = conflict_sets(&pairs, &m, &[0.90, 0.95])?;
    for t in &sets.per_threshold {
        println!("threshold {:.2}: {} pairs evaluated", t.threshold, t.evaluated);
        for kind in ConflictKind::ALL {
            println!("  {:<24} {}", kind.as_str(), t.count(kind));
        }
    }
    Ok(())
}
