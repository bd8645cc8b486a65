//! Data-level rebalancing: whole-dataset resamplers and batch streams.
//!
//! Oversamplers raise every non-majority class to the majority count.
//! Undersamplers shrink every class above the smallest one towards it. All
//! neighbour searches are exact Euclidean k-NN with ties going to the lower
//! row index.

mod kmeans;
mod knn;
mod mixup;
mod over;
mod stream;
mod svm;
mod under;

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::{Error, Result};

pub use kmeans::{kmeans, KMeans};
pub use mixup::{mixup_batch, mixup_with};
pub use over::{adasyn, borderline_smote, danger_points, random_over, smote, svm_smote};
pub use stream::BatchStream;
pub use svm::{LinearSvm, SvmParams};
pub use under::{all_knn, cluster_centroids, enn, near_miss, random_under, smote_enn};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    #[default]
    Natural,
    RandomOver,
    RandomUnder,
    Smote,
    BorderlineSmote,
    SvmSmote,
    Adasyn,
    Enn,
    AllKnn,
    NearMiss,
    ClusterCentroids,
    SmoteEnn,
    Mixup,
}

impl SamplerKind {
    pub const ALL: [SamplerKind; 13] = [
        SamplerKind::Natural,
        SamplerKind::RandomOver,
        SamplerKind::RandomUnder,
        SamplerKind::Smote,
        SamplerKind::BorderlineSmote,
        SamplerKind::SvmSmote,
        SamplerKind::Adasyn,
        SamplerKind::Enn,
        SamplerKind::AllKnn,
        SamplerKind::NearMiss,
        SamplerKind::ClusterCentroids,
        SamplerKind::SmoteEnn,
        SamplerKind::Mixup,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SamplerKind::Natural => "natural",
            SamplerKind::RandomOver => "random_over",
            SamplerKind::RandomUnder => "random_under",
            SamplerKind::Smote => "smote",
            SamplerKind::BorderlineSmote => "borderline_smote",
            SamplerKind::SvmSmote => "svm_smote",
            SamplerKind::Adasyn => "adasyn",
            SamplerKind::Enn => "enn",
            SamplerKind::AllKnn => "all_knn",
            SamplerKind::NearMiss => "near_miss",
            SamplerKind::ClusterCentroids => "cluster_centroids",
            SamplerKind::SmoteEnn => "smote_enn",
            SamplerKind::Mixup => "mixup",
        }
    }

    /// Kinds that synthesize new rows by interpolation.
    pub fn is_smote_family(self) -> bool {
        matches!(
            self,
            SamplerKind::Smote
                | SamplerKind::BorderlineSmote
                | SamplerKind::SvmSmote
                | SamplerKind::Adasyn
                | SamplerKind::SmoteEnn
        )
    }

    fn default_k(self) -> usize {
        match self {
            SamplerKind::Enn | SamplerKind::AllKnn | SamplerKind::NearMiss => 3,
            _ => 5,
        }
    }
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SamplerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SamplerKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown sampler {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerSpec {
    pub kind: SamplerKind,
    /// Neighbour count; `None` means 5 for SMOTE-style kinds, 3 for ENN, AllKNN and NearMiss.
    pub k_neighbors: Option<usize>,
    pub mixup_alpha: f64,
    pub svm: SvmParams,
    /// For `random_over`/`random_under` streams: resample a concrete pool
    /// each epoch instead of drawing class-balanced batches directly.
    pub materialize: bool,
}

impl Default for SamplerSpec {
    fn default() -> Self {
        SamplerSpec {
            kind: SamplerKind::Natural,
            k_neighbors: None,
            mixup_alpha: 1.0,
            svm: SvmParams::default(),
            materialize: false,
        }
    }
}

impl SamplerSpec {
    pub fn new(kind: SamplerKind) -> Self {
        SamplerSpec {
            kind,
            ..Default::default()
        }
    }

    pub fn k(&self) -> usize {
        self.k_neighbors.unwrap_or_else(|| self.kind.default_k())
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_neighbors == Some(0) {
            return Err(Error::Config("k_neighbors must be >= 1".into()));
        }
        if !(self.mixup_alpha > 0.0 && self.mixup_alpha.is_finite()) {
            return Err(Error::Config(format!("mixup alpha {} must be > 0", self.mixup_alpha)));
        }
        self.svm.validate()
    }
}

/// Where an output row came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Provenance {
    Original(usize),
    /// `x = x_base + lambda * (x_neighbor - x_base)`, or
    /// `x_base + lambda * (x_base - x_neighbor)` when `extrapolated`.
    Synthetic {
        base: usize,
        neighbor: usize,
        lambda: f64,
        extrapolated: bool,
    },
    /// Mean of the listed rows.
    Centroid(Vec<usize>),
    Mixed {
        first: usize,
        second: usize,
        lambda: f64,
    },
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Original(i) => write!(f, "row:{i}"),
            Provenance::Synthetic {
                base,
                neighbor,
                lambda,
                extrapolated,
            } => {
                let op = if *extrapolated { "extrapolate" } else { "interpolate" };
                write!(f, "{op}:{base}:{neighbor}:{lambda:?}")
            }
            Provenance::Centroid(rows) => write!(f, "centroid:{}", rows.len()),
            Provenance::Mixed { first, second, lambda } => write!(f, "mix:{first}:{second}:{lambda:?}"),
        }
    }
}

/// A resampled dataset plus the origin of each of its rows.
#[derive(Clone, Debug)]
pub struct Resampled {
    pub dataset: Dataset,
    pub provenance: Vec<Provenance>,
}

impl Resampled {
    pub(crate) fn identity(data: &Dataset) -> Self {
        Resampled {
            dataset: data.clone(),
            provenance: (0..data.n_rows()).map(Provenance::Original).collect(),
        }
    }

    pub(crate) fn subset(data: &Dataset, rows: Vec<usize>) -> Self {
        Resampled {
            dataset: data.select(&rows),
            provenance: rows.into_iter().map(Provenance::Original).collect(),
        }
    }

    /// Re-expresses provenance of a second resampling stage in terms of the
    /// rows of the first stage's input.
    pub(crate) fn then(self, next: Resampled) -> Resampled {
        let lookup = |i: usize| match &self.provenance[i] {
            Provenance::Original(j) => *j,
            _ => i,
        };
        let provenance = next
            .provenance
            .into_iter()
            .map(|p| match p {
                Provenance::Original(i) => self.provenance[i].clone(),
                Provenance::Synthetic {
                    base,
                    neighbor,
                    lambda,
                    extrapolated,
                } => Provenance::Synthetic {
                    base: lookup(base),
                    neighbor: lookup(neighbor),
                    lambda,
                    extrapolated,
                },
                other => other,
            })
            .collect();
        Resampled {
            dataset: next.dataset,
            provenance,
        }
    }

    /// Writes features, label and a provenance column.
    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let io_err = |e: csv::Error| Error::io(path, std::io::Error::other(e.to_string()));
        let mut w = csv::Writer::from_path(path).map_err(io_err)?;
        let d = &self.dataset;
        let mut header: Vec<String> = match d.feature_names() {
            Some(n) => n.to_vec(),
            None => (0..d.n_features()).map(|j| format!("x{j}")).collect(),
        };
        header.push("label".into());
        header.push("provenance".into());
        w.write_record(&header)?;
        for i in 0..d.n_rows() {
            let mut rec: Vec<String> = d.row(i).iter().map(|x| format!("{x:?}")).collect();
            rec.push(d.labels()[i].to_string());
            rec.push(self.provenance[i].to_string());
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Runs the sampler named by `spec` over the whole dataset.
pub fn resample(data: &Dataset, spec: &SamplerSpec, seed: u64) -> Result<Resampled> {
    spec.validate()?;
    if spec.kind != SamplerKind::Natural && data.present_classes().len() < 2 {
        return Err(Error::Data(format!("{} needs at least two classes present", spec.kind)));
    }
    let k = spec.k();
    match spec.kind {
        SamplerKind::Natural => Ok(Resampled::identity(data)),
        SamplerKind::RandomOver => Ok(random_over(data, seed)),
        SamplerKind::RandomUnder => Ok(random_under(data, seed)),
        SamplerKind::Smote => smote(data, k, seed),
        SamplerKind::BorderlineSmote => borderline_smote(data, k, seed),
        SamplerKind::SvmSmote => svm_smote(data, k, &spec.svm, seed),
        SamplerKind::Adasyn => adasyn(data, k, seed),
        SamplerKind::Enn => enn(data, k),
        SamplerKind::AllKnn => all_knn(data, k),
        SamplerKind::NearMiss => near_miss(data, k),
        SamplerKind::ClusterCentroids => cluster_centroids(data, seed),
        SamplerKind::SmoteEnn => smote_enn(data, k, seed),
        SamplerKind::Mixup => mixup_batch(data, spec.mixup_alpha, seed),
    }
}

/// [`resample`] without provenance.
pub fn apply(data: &Dataset, spec: &SamplerSpec, seed: u64) -> Result<Dataset> {
    resample(data, spec, seed).map(|r| r.dataset)
}
