use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::validate_ratios;
use crate::error::Result;
use crate::manifest::{DatasetManifest, Partition};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitReport {
    pub ratios: [f64; 3],
    pub seed: u64,
    /// Train, valid, test counts for each diagnosis.
    pub per_class: BTreeMap<String, [usize; 3]>,
    pub totals: [usize; 3],
    /// Classes too small to give every partition an image.
    pub infeasible: Vec<String>,
}

/// Largest-remainder apportionment of `n` items over `ratios`.
///
/// `carry` holds each partition's running shortfall (quota minus assigned)
/// across earlier calls. Leftover seats go to partitions with a fractional
/// quota, ranked by carried shortfall plus fraction, so totals over many
/// classes stay close to the global ratio. Each count is the floor or the
/// ceiling of its quota, so it deviates from the exact share by less than one.
/// A single item always goes to train.
pub fn apportion(n: usize, ratios: &[f64; 3], carry: &mut [f64; 3]) -> [usize; 3] {
    let quota: [f64; 3] = std::array::from_fn(|i| ((n as f64 * ratios[i]) * 1e9).round() / 1e9);
    if n == 1 {
        for i in 0..3 {
            carry[i] += quota[i] - if i == 0 { 1.0 } else { 0.0 };
        }
        return [1, 0, 0];
    }
    let mut counts: [usize; 3] = std::array::from_fn(|i| quota[i].floor() as usize);
    let mut leftover = n.saturating_sub(counts.iter().sum());

    let mut order: Vec<usize> = (0..3).filter(|&i| quota[i].fract() > 0.0).collect();
    if order.len() < leftover {
        order = (0..3).collect();
    }
    let priority = |i: usize| carry[i] + quota[i].fract();
    order.sort_by(|&x, &y| priority(y).total_cmp(&priority(x)).then(x.cmp(&y)));
    for &i in &order {
        if leftover == 0 {
            break;
        }
        counts[i] += 1;
        leftover -= 1;
    }
    for i in 0..3 {
        carry[i] += quota[i] - counts[i] as f64;
    }
    counts
}

/// Assigns every record to train, valid or test, stratified on diagnosis.
///
/// Classes are processed in sorted order; within a class, ids are shuffled
/// with a ChaCha8 stream seeded by `seed` before being cut into partitions.
pub fn stratified_split(
    m: &DatasetManifest,
    ratios: [f64; 3],
    seed: u64,
) -> Result<(DatasetManifest, SplitReport)> {
    validate_ratios(&ratios)?;
    let mut by_class: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for r in m.records() {
        by_class.entry(&r.diagnosis).or_default().push(&r.image_id);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut carry = [0.0; 3];
    let mut assign = std::collections::HashMap::new();
    let mut report = SplitReport {
        ratios,
        seed,
        per_class: BTreeMap::new(),
        totals: [0; 3],
        infeasible: Vec::new(),
    };
    for (class, mut ids) in by_class {
        ids.shuffle(&mut rng);
        let counts = apportion(ids.len(), &ratios, &mut carry);
        let mut rest = ids.as_slice();
        for (p, &k) in Partition::ASSIGNED.iter().zip(&counts) {
            let (head, tail) = rest.split_at(k);
            for id in head {
                assign.insert(*id, *p);
            }
            rest = tail;
        }
        if counts.contains(&0) {
            report.infeasible.push(class.to_string());
        }
        for (t, c) in report.totals.iter_mut().zip(&counts) {
            *t += c;
        }
        report.per_class.insert(class.to_string(), counts);
    }
    Ok((m.with_partitions(&assign), report))
}
