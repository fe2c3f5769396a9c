//! Merges separately published train, valid and test lists into one manifest.

use dermaudit::cleaner::build_extended;
use dermaudit::manifest::{write_manifest, DatasetManifest, ImageRecord};

fn part(name: &str, ids: &[&str]) -> dermaudit::Result<DatasetManifest> {
    DatasetManifest::from_records(name, ids.iter().map(|id| ImageRecord::new(*id, "mel")).collect())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let train = part("train", &["ISIC_0000001", "ISIC_0000002", "ISIC_0000003"])?;
    let valid = part("valid", &["ISIC_0034321"])?;
    let test = part("test", &["ISIC_0035068", "ISIC_0035069"])?;
    let exclusions = vec!["ISIC_0035068".to_string(), "ISIC_9999999".to_string()];
    let (m, unmatched) = build_extended(&train, &valid, &test, &exclusions)?;
    println!("{:?}", m.partition_counts());
    println!("exclusions that matched nothing: {unmatched:?}");
    write_manifest(&m, std::io::stdout().lock())?;
    Ok(())
}
