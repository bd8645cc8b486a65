//! Datasets and their preparation.

mod imbalance;
mod io;
mod split;
mod synthetic;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::autodiff::Tensor;
use crate::{Error, Result};

pub use imbalance::{simulate_imbalance, ImbalanceMode};
pub use io::{
    load_csv, prepare_tabular, save_csv, DatasetManifest, LoadOptions, Normalize, PreparedData, ZScore,
};
pub use split::{split, split_indices, SplitSpec};
pub use synthetic::{class_means, make_synthetic, SyntheticSpec};

/// Row-major feature matrix with integer class labels.
///
/// `n_classes` is fixed at construction and survives row selection, so a
/// resampled dataset can report zero rows for a class it lost.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    features: Vec<f64>,
    n_features: usize,
    labels: Vec<usize>,
    n_classes: usize,
    class_counts: BTreeMap<usize, usize>,
    feature_names: Option<Vec<String>>,
    soft_labels: Option<Vec<f64>>,
}

impl Dataset {
    pub fn new(features: Vec<f64>, n_features: usize, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        if n_features == 0 {
            return Err(Error::Data("datasets need at least one feature".into()));
        }
        if features.len() != labels.len() * n_features {
            return Err(Error::Data(format!(
                "{} feature values for {} rows of {n_features} features",
                features.len(),
                labels.len()
            )));
        }
        if let Some(pos) = features.iter().position(|x| !x.is_finite()) {
            return Err(Error::Data(format!(
                "non-finite feature at row {}, column {}",
                pos / n_features,
                pos % n_features
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= n_classes) {
            return Err(Error::Data(format!("label {bad} but only {n_classes} classes")));
        }
        let mut class_counts: BTreeMap<usize, usize> = (0..n_classes).map(|c| (c, 0)).collect();
        for &y in &labels {
            *class_counts.entry(y).or_default() += 1;
        }
        Ok(Dataset {
            features,
            n_features,
            labels,
            n_classes,
            class_counts,
            feature_names: None,
            soft_labels: None,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        let n_features = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_features) {
            return Err(Error::Data("rows have different lengths".into()));
        }
        Self::new(rows.concat(), n_features, labels, n_classes)
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n_features {
            return Err(Error::Data(format!(
                "{} names for {} features",
                names.len(),
                self.n_features
            )));
        }
        self.feature_names = Some(names);
        Ok(self)
    }

    /// Attaches per-row class distributions (`[n, n_classes]`, rows summing to 1).
    pub fn with_soft_labels(mut self, soft: Vec<f64>) -> Result<Self> {
        if soft.len() != self.n_rows() * self.n_classes {
            return Err(Error::Data("soft label matrix has the wrong size".into()));
        }
        for (i, row) in soft.chunks(self.n_classes).enumerate() {
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-9 || row.iter().any(|&p| p < 0.0) {
                return Err(Error::Data(format!("soft label row {i} is not a distribution")));
            }
        }
        self.soft_labels = Some(soft);
        Ok(self)
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    pub fn soft_labels(&self) -> Option<&[f64]> {
        self.soft_labels.as_deref()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    /// Count per class, including classes with zero rows.
    pub fn class_counts(&self) -> &BTreeMap<usize, usize> {
        &self.class_counts
    }

    pub fn count(&self, class: usize) -> usize {
        self.class_counts.get(&class).copied().unwrap_or(0)
    }

    /// Classes with at least one row.
    pub fn present_classes(&self) -> Vec<usize> {
        self.class_counts
            .iter()
            .filter(|(_, &n)| n > 0)
            .map(|(&c, _)| c)
            .collect()
    }

    /// Largest class; ties go to the lower class index.
    pub fn majority_class(&self) -> usize {
        let mut best = 0;
        for (&c, &n) in &self.class_counts {
            if n > self.count(best) {
                best = c;
            }
        }
        best
    }

    /// Smallest non-empty class; ties go to the lower class index.
    pub fn minority_class(&self) -> usize {
        let mut best: Option<usize> = None;
        for (&c, &n) in &self.class_counts {
            if n > 0 && best.is_none_or(|b| n < self.count(b)) {
                best = Some(c);
            }
        }
        best.unwrap_or(0)
    }

    pub fn class_indices(&self, class: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &y)| y == class)
            .map(|(i, _)| i)
            .collect()
    }

    /// Empirical class frequencies over all `n_classes`.
    pub fn class_frequencies(&self) -> Vec<f64> {
        let n = self.n_rows().max(1) as f64;
        (0..self.n_classes).map(|c| self.count(c) as f64 / n).collect()
    }

    /// Rows at `indices`, in that order (repeats allowed).
    pub fn select(&self, indices: &[usize]) -> Dataset {
        let d = self.n_features;
        let mut features = Vec::with_capacity(indices.len() * d);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        let soft_labels = self.soft_labels.as_ref().map(|s| {
            let c = self.n_classes;
            indices.iter().flat_map(|&i| s[i * c..(i + 1) * c].iter().copied()).collect()
        });
        let mut out = Dataset::new(features, d, labels, self.n_classes)
            .expect("selection of a valid dataset is valid");
        out.feature_names = self.feature_names.clone();
        out.soft_labels = soft_labels;
        out
    }

    /// Appends synthetic rows (features row-major).
    pub fn extend(&mut self, features: &[f64], labels: &[usize]) -> Result<()> {
        if features.len() != labels.len() * self.n_features {
            return Err(Error::Data("extension rows have the wrong width".into()));
        }
        if self.soft_labels.is_some() {
            return Err(Error::Data("cannot extend a soft-labelled dataset with hard labels".into()));
        }
        if features.iter().any(|x| !x.is_finite()) || labels.iter().any(|&y| y >= self.n_classes) {
            return Err(Error::Data("extension rows contain invalid values".into()));
        }
        self.features.extend_from_slice(features);
        for &y in labels {
            self.labels.push(y);
            *self.class_counts.entry(y).or_default() += 1;
        }
        Ok(())
    }

    pub fn features_tensor(&self) -> Tensor {
        Tensor::matrix(self.n_rows(), self.n_features, self.features.clone())
            .expect("non-empty dataset has a valid matrix shape")
    }

    /// Content hash over shape, features, labels and soft labels.
    pub fn checksum(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.n_rows() as u64).to_le_bytes());
        h.update((self.n_features as u64).to_le_bytes());
        h.update((self.n_classes as u64).to_le_bytes());
        for x in &self.features {
            h.update(x.to_bits().to_le_bytes());
        }
        for &y in &self.labels {
            h.update((y as u64).to_le_bytes());
        }
        if let Some(s) = &self.soft_labels {
            for x in s {
                h.update(x.to_bits().to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }
}

pub(crate) fn indices_checksum(indices: &[usize]) -> String {
    let mut h = Sha256::new();
    for &i in indices {
        h.update((i as u64).to_le_bytes());
    }
    hex::encode(h.finalize())
}
