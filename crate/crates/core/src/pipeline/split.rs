//! Stratified k-fold and holdout splits.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Complementary train/test membership over all patients.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldMasks {
    pub train: Vec<bool>,
    pub test: Vec<bool>,
}

impl FoldMasks {
    fn from_test(test: Vec<bool>) -> Self {
        let train = test.iter().map(|t| !t).collect();
        Self { train, test }
    }

    pub fn train_indices(&self) -> Vec<usize> {
        indices(&self.train)
    }

    pub fn test_indices(&self) -> Vec<usize> {
        indices(&self.test)
    }
}

fn indices(mask: &[bool]) -> Vec<usize> {
    mask.iter().enumerate().filter_map(|(i, &m)| m.then_some(i)).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Folds {
    pub folds: Vec<FoldMasks>,
    /// False when some class was too small to stratify and the split fell
    /// back to a plain shuffled partition.
    pub stratified: bool,
}

fn class_groups(labels: &[usize], rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let n_classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut groups = vec![Vec::new(); n_classes];
    for (i, &c) in labels.iter().enumerate() {
        groups[c].push(i);
    }
    for g in &mut groups {
        g.shuffle(rng);
    }
    groups.retain(|g| !g.is_empty());
    groups
}

/// Splits `labels.len()` patients into `folds` test sets. Each class is
/// shuffled and dealt round-robin, continuing the rotation across classes,
/// so both the per-class and overall fold sizes differ by at most one.
pub fn kfold_split(labels: &[usize], folds: usize, seed: u64) -> Result<Folds> {
    let n = labels.len();
    if folds < 2 || folds > n {
        return Err(Error::Parameter(format!("cannot make {folds} folds from {n} patients")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let groups = class_groups(labels, &mut rng);
    let stratified = groups.iter().all(|g| g.len() >= folds);
    let order: Vec<usize> = if stratified {
        groups.into_iter().flatten().collect()
    } else {
        let mut all: Vec<usize> = (0..n).collect();
        all.shuffle(&mut rng);
        all
    };
    let mut test = vec![vec![false; n]; folds];
    for (slot, &i) in order.iter().enumerate() {
        test[slot % folds][i] = true;
    }
    Ok(Folds {
        folds: test.into_iter().map(FoldMasks::from_test).collect(),
        stratified,
    })
}

/// Single stratified split with `test_size` test patients.
pub fn holdout_split(labels: &[usize], test_size: usize, seed: u64) -> Result<FoldMasks> {
    let n = labels.len();
    if test_size == 0 || test_size >= n {
        return Err(Error::Parameter(format!("test size {test_size} invalid for {n} patients")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let groups = class_groups(labels, &mut rng);
    let mut test = vec![false; n];
    // proportional allocation by largest remainder
    let mut quota: Vec<(usize, f64, usize)> = groups
        .iter()
        .enumerate()
        .map(|(g, members)| {
            let exact = test_size as f64 * members.len() as f64 / n as f64;
            let base = libm::floor(exact) as usize;
            (base, exact - base as f64, g)
        })
        .collect();
    let mut remaining = test_size - quota.iter().map(|q| q.0).sum::<usize>();
    let mut by_remainder: Vec<usize> = (0..quota.len()).collect();
    by_remainder.sort_by(|&a, &b| quota[b].1.total_cmp(&quota[a].1).then(a.cmp(&b)));
    for &q in &by_remainder {
        if remaining == 0 {
            break;
        }
        quota[q].0 += 1;
        remaining -= 1;
    }
    for (take, _, g) in quota {
        for &i in groups[g].iter().take(take) {
            test[i] = true;
        }
    }
    Ok(FoldMasks::from_test(test))
}
