//! Stratified hold-out splits and k-fold partitions.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ArgusError, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub heldout: Vec<usize>,
}

fn strata<K: Ord + Copy>(labels: &[K], seed: u64) -> BTreeMap<K, Vec<usize>> {
    let mut groups: BTreeMap<K, Vec<usize>> = BTreeMap::new();
    for (i, &k) in labels.iter().enumerate() {
        groups.entry(k).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for members in groups.values_mut() {
        members.shuffle(&mut rng);
    }
    groups
}

/// Proportional allocation per stratum by largest remainders: every stratum
/// gets `floor(m * fraction)` or one more, and the total training size is
/// `round(n * fraction)`. Returned index lists are sorted.
pub fn stratified_split<K: Ord + Copy>(labels: &[K], fraction: f64, seed: u64) -> Result<Split> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(ArgusError::invalid(format!(
            "split fraction must lie in (0, 1), got {fraction}"
        )));
    }
    if labels.is_empty() {
        return Err(ArgusError::invalid("cannot split an empty dataset"));
    }
    let groups = strata(labels, seed);
    let target = (labels.len() as f64 * fraction).round() as usize;
    let mut alloc: Vec<(usize, f64)> = groups
        .values()
        .map(|m| {
            let exact = m.len() as f64 * fraction;
            (exact.floor() as usize, exact - exact.floor())
        })
        .collect();
    let mut remaining = target.saturating_sub(alloc.iter().map(|a| a.0).sum());
    let mut order: Vec<usize> = (0..alloc.len()).collect();
    // Largest remainder first; ties go to the earlier stratum.
    order.sort_by(|&a, &b| alloc[b].1.total_cmp(&alloc[a].1).then(a.cmp(&b)));
    for &g in &order {
        if remaining == 0 {
            break;
        }
        if alloc[g].1 > 0.0 {
            alloc[g].0 += 1;
            remaining -= 1;
        }
    }
    let mut split = Split {
        train: Vec::new(),
        heldout: Vec::new(),
    };
    for (members, (n_train, _)) in groups.values().zip(alloc) {
        split.train.extend_from_slice(&members[..n_train]);
        split.heldout.extend_from_slice(&members[n_train..]);
    }
    split.train.sort_unstable();
    split.heldout.sort_unstable();
    Ok(split)
}

/// `k` disjoint test folds covering every index. Each stratum is shuffled and
/// dealt round-robin, continuing the deal across strata, so per-class counts
/// and fold sizes differ by at most one.
pub fn stratified_kfold<K: Ord + Copy>(
    labels: &[K],
    k: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(ArgusError::invalid("k-fold needs k >= 2"));
    }
    if labels.len() < k {
        return Err(ArgusError::invalid(format!(
            "{} items cannot fill {k} folds",
            labels.len()
        )));
    }
    let mut folds = vec![Vec::new(); k];
    let mut slot = 0;
    for members in strata(labels, seed).into_values() {
        for i in members {
            folds[slot % k].push(i);
            slot += 1;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Complement of `fold` within `0..n`.
pub fn complement(n: usize, fold: &[usize]) -> Vec<usize> {
    let mut mask = vec![true; n];
    for &i in fold {
        mask[i] = false;
    }
    (0..n).filter(|&i| mask[i]).collect()
}
