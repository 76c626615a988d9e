//! Deterministic dataset splitting and cross-validation folds.

use crate::error::{Error, Result};
use crate::numeric::SeededRng;

/// Seeded shuffle followed by a contiguous train/val/test partition.
///
/// Sizes are floor-based for val and test with the remainder going to train,
/// so a 10-item corpus at (0.6, 0.2, 0.2) splits 6/2/2 and an 11-item corpus
/// splits 7/2/2.
pub fn split_dataset<T: Clone>(
    data: &[T],
    ratios: (f64, f64, f64),
    rng: &mut SeededRng,
) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
    let (r_train, r_val, r_test) = ratios;
    let sum = r_train + r_val + r_test;
    if (sum - 1.0).abs() > 1e-9 || r_train < 0.0 || r_val < 0.0 || r_test < 0.0 {
        return Err(Error::config(format!(
            "split ratios must be non-negative and sum to 1, got ({r_train}, {r_val}, {r_test})"
        )));
    }
    if data.is_empty() {
        return Err(Error::EmptyInput("split_dataset"));
    }

    let shuffled = shuffled_indices(data.len(), rng);
    let n = data.len();
    let n_val = (r_val * n as f64).floor() as usize;
    let n_test = (r_test * n as f64).floor() as usize;
    let n_train = n - n_val - n_test;

    let pick = |range: std::ops::Range<usize>| -> Vec<T> {
        shuffled[range].iter().map(|&i| data[i].clone()).collect()
    };
    Ok((
        pick(0..n_train),
        pick(n_train..n_train + n_val),
        pick(n_train + n_val..n),
    ))
}

/// Seeded k-fold partition: each entry is (train-part, held-out-part).
/// Folds are disjoint, cover the data, and differ in size by at most one.
pub fn kfold<T: Clone>(data: &[T], k: usize, rng: &mut SeededRng) -> Result<Vec<(Vec<T>, Vec<T>)>> {
    if k < 2 {
        return Err(Error::config(format!("kfold needs k >= 2, got {k}")));
    }
    if data.len() < k {
        return Err(Error::config(format!(
            "kfold needs at least k items, got {} items for k = {k}",
            data.len()
        )));
    }

    let shuffled = shuffled_indices(data.len(), rng);
    let base = data.len() / k;
    let extra = data.len() % k;

    let mut bounds = Vec::with_capacity(k + 1);
    bounds.push(0);
    for fold in 0..k {
        let size = base + usize::from(fold < extra);
        bounds.push(bounds[fold] + size);
    }

    Ok((0..k)
        .map(|fold| {
            let held: Vec<T> = shuffled[bounds[fold]..bounds[fold + 1]]
                .iter()
                .map(|&i| data[i].clone())
                .collect();
            let train: Vec<T> = shuffled[..bounds[fold]]
                .iter()
                .chain(&shuffled[bounds[fold + 1]..])
                .map(|&i| data[i].clone())
                .collect();
            (train, held)
        })
        .collect())
}

fn shuffled_indices(n: usize, rng: &mut SeededRng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut idx);
    idx
}
