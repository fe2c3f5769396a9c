//! Runs the cleaning stages, then redraws a stratified train/valid/test split.

use dermaudit::cleaner::{clean, stratified_split, CleaningConfig, RemovalStage};
use dermaudit::duplicates::detect_clusters;
use dermaudit::manifest::{DatasetManifest, ImageRecord};
use dermaudit::EmbeddingMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut rows = Vec::new();
    let mut records = Vec::new();
    for i in 0..60 {
        let v: Vec<f32> = (0..24).map(|_| rng.random_range(-1.0..1.0)).collect();
        let dx = ["acne", "psoriasis", "vitiligo"][i % 3];
        // Every tenth image has an exact copy and a lightly perturbed one.
        let copies = if i % 10 == 0 { 3 } else { 1 };
        for c in 0..copies {
            let id = format!("im{i:02}{}", ["", "b", "c"][c]);
            let jitter = if c == 2 { 0.15 } else { 0.0 };
            rows.push((id.clone(), v.iter().map(|x| x + rng.random_range(-jitter..=jitter)).collect::<Vec<f32>>()));
            let mut r = ImageRecord::new(id, if i == 20 && c == 2 { "eczema" } else { dx });
            r.fst = (i % 7) as u8;
            r.width = Some(200 + 10 * c as u32);
            r.height = Some(200);
            records.push(r);
        }
    }
    let e = EmbeddingMatrix::from_rows(rows)?;
    let m = DatasetManifest::from_records("toy", records)?;

    let clusters = detect_clusters(&e, 0.95, 3)?;
    let cfg = CleaningConfig { remove_unknown_fst: true, ..Default::default() };
    let (cleaned, ledger) = clean(&m, &e, &clusters, &cfg)?;
    for stage in [
        RemovalStage::NearExact,
        RemovalStage::HeterogeneousCluster,
        RemovalStage::HomogeneousClusterNonkeeper,
        RemovalStage::UnknownFst,
    ] {
        println!("{:<32} {}", stage.to_string(), ledger.count(stage));
    }
    println!("{} of {} images kept", cleaned.len(), m.len());

    let (split, report) = stratified_split(&cleaned, [0.7, 0.1, 0.2], 42)?;
    println!("totals {:?}", report.totals);
    for (dx, counts) in &report.per_class {
        println!("  {dx:<10} {counts:?}");
    }
    assert_eq!(split.len(), cleaned.len());
    Ok(())
}
