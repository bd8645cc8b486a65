use rand::seq::SliceRandom;
use rand_distr::{Beta, Distribution};

use super::{Provenance, Resampled};
use crate::data::Dataset;
use crate::rng::{rng_from, salt, Rng};
use crate::{Error, Result};

/// Convex combination of each row with row `perm[i]`:
/// `x = lambda x_i + (1 - lambda) x_perm[i]`, and likewise for the label
/// distributions. Hard labels follow the dominant partner.
pub fn mixup_with(batch: &Dataset, lambda: f64, perm: &[usize]) -> Result<Resampled> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Config(format!("mixup weight {lambda} outside [0, 1]")));
    }
    let n = batch.n_rows();
    if perm.len() != n || perm.iter().any(|&j| j >= n) {
        return Err(Error::Data("mixup permutation does not match the batch".into()));
    }
    let c = batch.n_classes();
    let soft: Vec<f64> = match batch.soft_labels() {
        Some(s) => s.to_vec(),
        None => {
            let mut s = vec![0.0; n * c];
            for (i, &y) in batch.labels().iter().enumerate() {
                s[i * c + y] = 1.0;
            }
            s
        }
    };
    let d = batch.n_features();
    let mut features = Vec::with_capacity(n * d);
    let mut mixed_soft = Vec::with_capacity(n * c);
    let mut labels = Vec::with_capacity(n);
    for (i, &j) in perm.iter().enumerate() {
        features.extend(batch.row(i).iter().zip(batch.row(j)).map(|(a, b)| lambda * a + (1.0 - lambda) * b));
        mixed_soft.extend(
            soft[i * c..(i + 1) * c]
                .iter()
                .zip(&soft[j * c..(j + 1) * c])
                .map(|(p, q)| lambda * p + (1.0 - lambda) * q),
        );
        labels.push(if lambda >= 0.5 { batch.labels()[i] } else { batch.labels()[j] });
    }
    let dataset = Dataset::new(features, d, labels, c)?.with_soft_labels(mixed_soft)?;
    let provenance = perm
        .iter()
        .enumerate()
        .map(|(i, &j)| Provenance::Mixed {
            first: i,
            second: j,
            lambda,
        })
        .collect();
    Ok(Resampled { dataset, provenance })
}

/// One `lambda ~ Beta(alpha, alpha)` and one random pairing for the batch.
pub(crate) fn mixup_draw(batch: &Dataset, alpha: f64, rng: &mut Rng) -> Result<Resampled> {
    let beta = Beta::new(alpha, alpha).map_err(|e| Error::Config(format!("mixup alpha {alpha}: {e}")))?;
    let lambda: f64 = beta.sample(rng);
    let mut perm: Vec<usize> = (0..batch.n_rows()).collect();
    perm.shuffle(rng);
    mixup_with(batch, lambda, &perm)
}

pub fn mixup_batch(batch: &Dataset, alpha: f64, seed: u64) -> Result<Resampled> {
    mixup_draw(batch, alpha, &mut rng_from(seed, salt::MIXUP))
}
