//! Builds the audit report for a small dataset and writes JSON and HTML.

use dermaudit::duplicates::{detect_clusters, label_clusters};
use dermaudit::leakage::detect_overlap;
use dermaudit::manifest::{DatasetManifest, ImageRecord, Partition};
use dermaudit::outliers::outlier_scores;
use dermaudit::reporting::{audit_report, ReportInputs};
use dermaudit::EmbeddingMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut rows = Vec::new();
    let mut records = Vec::new();
    for i in 0..30 {
        let v: Vec<f32> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
        for c in 0..if i < 4 { 3 } else { 1 } {
            let id = format!("x{i:02}_{c}");
            rows.push((id.clone(), v.iter().map(|x| x * (1.0 + 0.001 * c as f32)).collect::<Vec<f32>>()));
            let mut r = ImageRecord::new(id, ["mel", "nv", "bkl"][i % 3]);
            r.group_id = Some(format!("lesion{}", i / 2));
            r.partition = [Partition::Train, Partition::Valid, Partition::Test][(i + c) % 3];
            r.fst = (1 + i % 6) as u8;
            records.push(r);
        }
    }
    let e = EmbeddingMatrix::from_rows(rows)?;
    let m = DatasetManifest::from_records("toy", records)?;

    let overlap = detect_overlap(&m);
    let mut clusters = detect_clusters(&e, 0.9, 3)?;
    label_clusters(&mut clusters, &m)?;
    let outliers = outlier_scores(&e, 5)?;
    let report = audit_report(
        &m,
        ReportInputs { overlap: Some(&overlap), clusters: Some(&clusters), outliers: Some(&outliers), ..Default::default() },
    );
    let dir = std::env::temp_dir().join("dermaudit_report_example");
    report.save(&dir)?;
    println!("{}", report.to_json());
    println!("wrote {}", dir.display());
    Ok(())
}
