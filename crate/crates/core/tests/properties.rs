mod common;

use std::collections::{BTreeSet, HashMap};

use dermaudit::duplicates::{coalesce, DuplicateCluster};
use dermaudit::embeddings::{scan_pairs, PairKey, SimilarityPair};
use dermaudit::leakage::{detect_overlap, repair, SpanningNoTrain};
use dermaudit::manifest::{read_manifest, write_manifest, DatasetManifest, ImageRecord, Partition};
use dermaudit::review::{cohen_kappa, VerdictValue};
use dermaudit::EmbeddingMatrix;
use proptest::prelude::*;

fn matrix(rows: Vec<Vec<f32>>) -> Option<EmbeddingMatrix> {
    let rows: Vec<(String, Vec<f32>)> = rows
        .into_iter()
        .enumerate()
        .filter(|(_, v)| v.iter().any(|x| *x != 0.0))
        .map(|(i, v)| (format!("r{i:03}"), v))
        .collect();
    (rows.len() >= 2).then(|| EmbeddingMatrix::from_rows(rows).unwrap())
}

fn vectors() -> impl Strategy<Value = Vec<Vec<f32>>> {
    // A small value alphabet makes exact ties and repeated vectors common.
    let value = prop_oneof![Just(0.0f32), Just(1.0), Just(-1.0), -2.0f32..2.0];
    prop::collection::vec(prop::collection::vec(value, 4), 2..40)
}

fn partition() -> impl Strategy<Value = Partition> {
    prop_oneof![
        Just(Partition::Train),
        Just(Partition::Valid),
        Just(Partition::Test),
        Just(Partition::Unassigned)
    ]
}

fn manifest() -> impl Strategy<Value = DatasetManifest> {
    prop::collection::vec((0..8u8, prop::option::of(0..6u8), 0..=6u8, partition(), 0..3usize), 1..40).prop_map(|rows| {
        let records = rows
            .into_iter()
            .enumerate()
            .map(|(i, (_, group, fst, p, dx))| {
                let mut r = ImageRecord::new(format!("id{i:03}"), ["mel", "nv", "bcc"][dx]);
                r.group_id = group.map(|g| format!("g{g}"));
                r.fst = fst;
                r.partition = p;
                r
            })
            .collect();
        DatasetManifest::from_records("prop", records).unwrap()
    })
}

fn verdict() -> impl Strategy<Value = VerdictValue> {
    prop_oneof![
        Just(VerdictValue::Duplicate),
        Just(VerdictValue::Unclear),
        Just(VerdictValue::Different)
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scan_matches_brute_force(rows in vectors(), t in -1.0f64..1.0) {
        let Some(e) = matrix(rows) else { return Ok(()) };
        let got: BTreeSet<(String, String)> = scan_pairs(&e, t).into_iter().map(|p| (p.a, p.b)).collect();
        let want: BTreeSet<(String, String)> = common::oracle_pairs(&e, t).into_keys().collect();
        // Scores within rounding of the threshold may land on either side.
        for k in got.symmetric_difference(&want) {
            let s = e.similarity(&k.0, &k.1).unwrap();
            prop_assert!((s - t).abs() < 1e-9, "{k:?} score {s} vs {t}");
        }
    }

    #[test]
    fn scan_is_monotone_and_sorted(rows in vectors(), lo in -1.0f64..1.0, step in 0.0f64..0.5) {
        let Some(e) = matrix(rows) else { return Ok(()) };
        let low = scan_pairs(&e, lo);
        let high = scan_pairs(&e, lo + step);
        let low_keys: BTreeSet<PairKey> = low.iter().map(|p| p.key()).collect();
        prop_assert!(high.iter().all(|p| low_keys.contains(&p.key())));
        for w in low.windows(2) {
            prop_assert!(w[0].score > w[1].score || (w[0].score == w[1].score && (&w[0].a, &w[0].b) < (&w[1].a, &w[1].b)));
        }
    }

    #[test]
    fn coalesce_ignores_input_order(rows in vectors(), seed in any::<u64>()) {
        let Some(e) = matrix(rows) else { return Ok(()) };
        let pairs = scan_pairs(&e, 0.5);
        let clusters: Vec<DuplicateCluster> = coalesce(&pairs[pairs.len() / 2..], &[], &e).unwrap();
        let a = coalesce(&pairs, &clusters, &e).unwrap();
        let mut shuffled = pairs.clone();
        let mut rev = clusters.clone();
        rev.reverse();
        use rand::seq::SliceRandom;
        shuffled.shuffle(&mut common::rng(seed));
        let b = coalesce(&shuffled, &rev, &e).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn repair_reaches_a_clean_fixed_point(m in manifest(), picks in prop::collection::vec((0..40usize, 0..40usize), 0..8)) {
        let ids: Vec<String> = m.ids().map(String::from).collect();
        let pairs: Vec<SimilarityPair> = picks
            .into_iter()
            .map(|(x, y)| (ids[x % ids.len()].clone(), ids[y % ids.len()].clone()))
            .filter(|(a, b)| a != b)
            .map(|(a, b)| SimilarityPair::new(a, b, 0.99))
            .collect();
        let (fixed, _) = repair(&m, &pairs, SpanningNoTrain::ToTrain).unwrap();
        prop_assert!(detect_overlap(&fixed).is_clean());
        let (again, moves) = repair(&fixed, &pairs, SpanningNoTrain::ToTrain).unwrap();
        prop_assert!(moves.is_empty());
        prop_assert_eq!(again, fixed);
    }

    #[test]
    fn kappa_ignores_pair_order(values in prop::collection::vec((verdict(), verdict()), 1..60), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let build = |vs: &[(VerdictValue, VerdictValue)]| {
            let a: HashMap<PairKey, VerdictValue> =
                vs.iter().enumerate().map(|(i, v)| (PairKey::new(format!("a{i}"), format!("b{i}")), v.0)).collect();
            let b: HashMap<PairKey, VerdictValue> =
                vs.iter().enumerate().map(|(i, v)| (PairKey::new(format!("a{i}"), format!("b{i}")), v.1)).collect();
            cohen_kappa(&a, &b).unwrap()
        };
        let mut shuffled = values.clone();
        shuffled.shuffle(&mut common::rng(seed));
        let (x, y) = (build(&values), build(&shuffled));
        prop_assert_eq!(x.matching, y.matching);
        prop_assert!((x.kappa - y.kappa).abs() < 1e-12);
        prop_assert!(x.kappa <= 1.0 + 1e-12 && x.kappa >= -1.0 - 1e-12);
    }

    #[test]
    fn manifest_round_trips(m in manifest()) {
        let mut buf = Vec::new();
        write_manifest(&m, &mut buf).unwrap();
        let back = read_manifest(buf.as_slice(), "prop").unwrap();
        prop_assert_eq!(back.records(), m.records());
    }
}
