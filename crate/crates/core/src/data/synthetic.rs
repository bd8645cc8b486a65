use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::rng::{rng_from, salt};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_classes: usize,
    pub per_class_counts: Vec<usize>,
    pub dim: usize,
    pub separation: f64,
    pub seed: u64,
}

/// Class means with pairwise distance `separation`.
///
/// When `dim >= n_classes - 1` the means are the vertices of a regular
/// simplex (Helmert coordinates of the scaled standard basis). Otherwise they
/// sit on the first axis, `separation` apart, and only neighbours are at
/// that distance.
pub fn class_means(n_classes: usize, dim: usize, separation: f64) -> Vec<Vec<f64>> {
    let mut means = vec![vec![0.0; dim]; n_classes];
    if dim + 1 >= n_classes {
        let scale = separation / std::f64::consts::SQRT_2;
        for k in 1..n_classes {
            let norm = ((k * (k + 1)) as f64).sqrt();
            for (i, m) in means.iter_mut().enumerate() {
                let h = match i.cmp(&k) {
                    std::cmp::Ordering::Less => 1.0,
                    std::cmp::Ordering::Equal => -(k as f64),
                    std::cmp::Ordering::Greater => 0.0,
                };
                m[k - 1] = scale * h / norm;
            }
        }
    } else {
        let mid = (n_classes as f64 - 1.0) / 2.0;
        for (i, m) in means.iter_mut().enumerate() {
            m[0] = separation * (i as f64 - mid);
        }
    }
    means
}

/// Gaussian blobs with unit covariance around [`class_means`]. Rows are
/// grouped by class.
pub fn make_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    if spec.n_classes < 2 || spec.per_class_counts.len() != spec.n_classes {
        return Err(Error::Config(format!(
            "need >= 2 classes and one count per class, got {} counts for {} classes",
            spec.per_class_counts.len(),
            spec.n_classes
        )));
    }
    if spec.per_class_counts.contains(&0) || spec.dim == 0 || !spec.separation.is_finite() || spec.separation < 0.0 {
        return Err(Error::Config("counts and dim must be >= 1, separation finite and >= 0".into()));
    }
    let means = class_means(spec.n_classes, spec.dim, spec.separation);
    let mut rng = rng_from(spec.seed, salt::SYNTHETIC);
    let total: usize = spec.per_class_counts.iter().sum();
    let mut features = Vec::with_capacity(total * spec.dim);
    let mut labels = Vec::with_capacity(total);
    for (c, &count) in spec.per_class_counts.iter().enumerate() {
        for _ in 0..count {
            for &mu in &means[c] {
                let z: f64 = StandardNormal.sample(&mut rng);
                features.push(mu + z);
            }
            labels.push(c);
        }
    }
    Dataset::new(features, spec.dim, labels, spec.n_classes)
}
