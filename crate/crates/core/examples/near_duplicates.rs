//! Scans embeddings for near-duplicate pairs and groups them into clusters.

use dermaudit::duplicates::{coalesce, detect_clusters, label_clusters};
use dermaudit::manifest::{DatasetManifest, ImageRecord};
use dermaudit::{knn, scan_pairs, EmbeddingMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let dim = 32;
    let mut rows = Vec::new();
    // Eight base images; the first three get two or three jittered copies.
    for base in 0..8 {
        let v: Vec<f32> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let copies = if base < 3 { 2 + base % 2 } else { 1 };
        for c in 0..copies {
            let jittered = v.iter().map(|x| x + rng.random_range(-0.02..0.02)).collect::<Vec<f32>>();
            rows.push((format!("img{base}_{c}"), jittered));
        }
    }
    let e = EmbeddingMatrix::from_rows(rows)?;

    let pairs = scan_pairs(&e, 0.95);
    println!("{} pairs at or above 0.95", pairs.len());
    for p in pairs.iter().take(5) {
        println!("  {} {} {:.4}", p.a, p.b, p.score);
    }

    let nn = knn(&e, 2)?;
    println!("neighbours of img0_0: {:?}", nn.get("img0_0").unwrap());

    let mut clusters = detect_clusters(&e, 0.95, 3)?;
    println!("{} clusters of three or more", clusters.len());
    clusters = coalesce(&pairs, &clusters, &e)?;

    // Give one copy a different diagnosis to make its cluster heterogeneous.
    let records = e
        .ids()
        .iter()
        .map(|id| ImageRecord::new(id.clone(), if id == "img1_1" { "bcc" } else { "nv" }))
        .collect();
    let m = DatasetManifest::from_records("toy", records)?;
    label_clusters(&mut clusters, &m)?;
    for c in &clusters {
        println!("{:?} mean {:.4} homogeneous {:?}", c.members, c.mean_similarity, c.is_homogeneous());
    }
    Ok(())
}
