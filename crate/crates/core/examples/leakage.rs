//! Finds lesions that span partitions and moves them until the split is clean.

use dermaudit::leakage::{detect_overlap, repair, Combination, SpanningNoTrain};
use dermaudit::manifest::{group_histogram, DatasetManifest, ImageRecord, Partition};
use dermaudit::SimilarityPair;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    use Partition::*;
    let rows = [
        ("img01", Some("lesion_a"), Train),
        ("img02", Some("lesion_a"), Test),
        ("img03", Some("lesion_b"), Valid),
        ("img04", Some("lesion_b"), Test),
        ("img05", Some("lesion_c"), Train),
        ("img06", Some("lesion_c"), Valid),
        ("img07", Some("lesion_c"), Test),
        ("img08", None, Valid),
        ("img09", None, Test),
    ];
    let records = rows
        .iter()
        .map(|(id, group, p)| {
            let mut r = ImageRecord::new(*id, "nv");
            r.group_id = group.map(String::from);
            r.partition = *p;
            r
        })
        .collect();
    let m = DatasetManifest::from_records("toy", records)?;

    println!("images per group: {:?}", group_histogram(&m));
    let before = detect_overlap(&m);
    for c in Combination::ALL {
        let o = before.get(c);
        println!("{:<18} {} groups, {} images", c.as_str(), o.group_count, o.image_count);
    }

    // img08 and img09 have no lesion id but look identical.
    let dup = [SimilarityPair::new("img08", "img09", 0.998)];
    let (fixed, moves) = repair(&m, &dup, SpanningNoTrain::ToTrain)?;
    for mv in &moves {
        println!("move {} {} -> {} ({})", mv.image_id, mv.from, mv.to, mv.reason);
    }
    assert!(detect_overlap(&fixed).is_clean());
    println!("after repair: {:?}", fixed.partition_counts());
    Ok(())
}
