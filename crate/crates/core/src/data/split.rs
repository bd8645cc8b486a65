use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::rng::{rng_from, salt};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    #[serde(default)]
    pub stratified: bool,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train_fraction: f64, seed: u64) -> Self {
        SplitSpec {
            train_fraction,
            stratified: false,
            seed,
        }
    }
}

fn n_train(n: usize, frac: f64) -> usize {
    ((n as f64 * frac).round() as usize).clamp(1, n - 1)
}

/// Sorted, disjoint train/test row indices covering every row.
pub fn split_indices(data: &Dataset, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train fraction {} must lie in (0, 1)",
            spec.train_fraction
        )));
    }
    let n = data.n_rows();
    if n < 2 {
        return Err(Error::Data(format!("cannot split {n} rows")));
    }
    let mut rng = rng_from(spec.seed, salt::SPLIT);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    if spec.stratified {
        for c in data.present_classes() {
            let mut idx = data.class_indices(c);
            if idx.len() < 2 {
                return Err(Error::Data(format!(
                    "class {c} has {} row(s); stratified splitting needs at least 2",
                    idx.len()
                )));
            }
            idx.shuffle(&mut rng);
            let k = n_train(idx.len(), spec.train_fraction);
            train.extend_from_slice(&idx[..k]);
            test.extend_from_slice(&idx[k..]);
        }
    } else {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng);
        let k = n_train(n, spec.train_fraction);
        train.extend_from_slice(&idx[..k]);
        test.extend_from_slice(&idx[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn split(data: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    let (train, test) = split_indices(data, spec)?;
    Ok((data.select(&train), data.select(&test)))
}
