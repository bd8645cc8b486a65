//! Meta-learned training for class-imbalanced classification.
//!
//! The crate bundles everything needed to train small feed-forward networks on
//! imbalanced tabular data and compare them against data-level rebalancing:
//!
//! - [`autodiff`]: a reverse-mode tape that can differentiate its own gradient
//!   computation, which the meta update needs.
//! - [`nn`]: MLP builder, losses and checkpoints.
//! - [`optim`]: Adam, Nesterov SGD and learning-rate schedules.
//! - [`data`]: CSV ingestion, splits, imbalance simulation and synthetic blobs.
//! - [`resampling`]: over/under-samplers (SMOTE family, ENN, cluster centroids, ...),
//!   mixup and the batch streams used by the trainers.
//! - [`trainers`]: the baseline loop and the meta-balanced inner/outer loop.
//! - [`evaluation`]: ROC-AUC, per-class accuracy, prior adjustment, threshold matching.
//! - [`experiment`]: config files, presets, multi-seed runs, grids and curves.

pub mod autodiff;
pub mod data;
mod error;
pub mod evaluation;
pub mod experiment;
pub mod nn;
pub mod optim;
pub mod resampling;
pub mod rng;
pub mod trainers;

pub use error::{Error, Result};
