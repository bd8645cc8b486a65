use rand::seq::index::sample;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::rng::{rng_from, salt};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImbalanceMode {
    /// Every minority class keeps exactly `k` rows.
    Fixed(usize),
    /// Each minority class keeps an independent uniform draw from `[lo, hi]`.
    Range(usize, usize),
}

/// Downsamples every class except `majority_class`, without replacement.
/// Kept rows stay in their original order.
pub fn simulate_imbalance(data: &Dataset, mode: ImbalanceMode, majority_class: usize, seed: u64) -> Result<Dataset> {
    if majority_class >= data.n_classes() {
        return Err(Error::Config(format!("majority class {majority_class} out of range")));
    }
    if let ImbalanceMode::Range(lo, hi) = mode {
        if lo > hi {
            return Err(Error::Config(format!("imbalance range [{lo}, {hi}] is empty")));
        }
    }
    let mut rng = rng_from(seed, salt::IMBALANCE);
    let mut keep = Vec::with_capacity(data.n_rows());
    for c in 0..data.n_classes() {
        let idx = data.class_indices(c);
        if c == majority_class || idx.is_empty() {
            keep.extend(idx);
            continue;
        }
        let (need, target) = match mode {
            ImbalanceMode::Fixed(k) => (k, k),
            ImbalanceMode::Range(lo, hi) => (hi, rng.random_range(lo..=hi)),
        };
        if need > idx.len() {
            return Err(Error::Data(format!(
                "class {c} has {} rows but {need} were requested",
                idx.len()
            )));
        }
        let mut chosen: Vec<usize> = sample(&mut rng, idx.len(), target).into_iter().map(|j| idx[j]).collect();
        chosen.sort_unstable();
        keep.extend(chosen);
    }
    keep.sort_unstable();
    Ok(data.select(&keep))
}
