//! Built-in experiments.
//!
//! Tabular presets read `data/creditcard.csv` (label `Class`, the `Time`
//! column dropped, 29 features) and `data/loan_data.csv` (label
//! `not.fully.paid`; the text column `purpose` is skipped, 12 features),
//! relative to the working directory. Baselines are named after their
//! sampler (`fraud_naive`, `fraud_smote`, ...); `*_metabal` undersamples the
//! query batches only, `*_msmetabal` uses the best inner/outer pair.
//!
//! Synthetic presets are 10-class Gaussian blobs with 5000 rows in class 0
//! and either 5 (`severe`) or 5 to 50 (`moderate`) rows in the others. All
//! three trainers take the same number of optimizer updates, and MetaBalance
//! averages its meta steps so its outer rate matches the baselines' rate.

use super::config::{DataSource, ExperimentConfig, GridSpec, ModelChoice, TrainerConfig};
use crate::data::{ImbalanceMode, Normalize};
use crate::nn::{LossSpec, MlpSpec};
use crate::optim::{OptimizerSpec, ScheduleSpec};
use crate::resampling::{SamplerKind, SamplerSpec};
use crate::trainers::{Accumulation, BaselineConfig, MetaConfig};
use crate::{Error, Result};

pub const FRAUD_CSV: &str = "data/creditcard.csv";
pub const LOAN_CSV: &str = "data/loan_data.csv";

/// Inner and outer kinds of the loan strategy grid.
pub const GRID_KINDS: [SamplerKind; 7] = [
    SamplerKind::Natural,
    SamplerKind::RandomOver,
    SamplerKind::RandomUnder,
    SamplerKind::Smote,
    SamplerKind::SvmSmote,
    SamplerKind::Enn,
    SamplerKind::ClusterCentroids,
];

const TABULAR_EPOCHS: usize = 100;

pub const SYNTHETIC_CLASSES: usize = 10;
pub const SYNTHETIC_DIM: usize = 16;
pub const SYNTHETIC_SEPARATION: f64 = 3.0;
pub const SYNTHETIC_EPOCHS: usize = 20;
pub const SYNTHETIC_UPDATES_PER_EPOCH: usize = 50;

fn ten_seeds() -> Vec<u64> {
    (0..10).collect()
}

fn baseline_suffix(kind: SamplerKind) -> &'static str {
    match kind {
        SamplerKind::Natural => "naive",
        k => k.name(),
    }
}

pub fn names() -> Vec<String> {
    let mut v = Vec::new();
    for task in ["fraud", "loan"] {
        for k in SamplerKind::ALL {
            v.push(format!("{task}_{}", baseline_suffix(k)));
        }
        v.push(format!("{task}_metabal"));
        v.push(format!("{task}_msmetabal"));
    }
    v.push("loan_grid".into());
    for level in ["severe", "moderate"] {
        for method in ["naive", "oversample", "metabal"] {
            v.push(format!("synthetic_{level}_{method}"));
        }
    }
    v
}

pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let unknown = || Error::Config(format!("unknown preset {name:?}; known presets: {}", names().join(", ")));
    let (task, rest) = name.split_once('_').ok_or_else(unknown)?;
    match task {
        "fraud" | "loan" => tabular(task, rest).ok_or_else(unknown),
        "synthetic" => {
            let (level, method) = rest.split_once('_').ok_or_else(unknown)?;
            synthetic(level, method).ok_or_else(unknown)
        }
        _ => Err(unknown()),
    }
}

fn tabular_data(task: &str) -> DataSource {
    let (path, label, drop) = match task {
        "fraud" => (FRAUD_CSV, "Class", vec!["Time".to_string()]),
        _ => (LOAN_CSV, "not.fully.paid", vec![]),
    };
    DataSource::Csv {
        path: path.into(),
        label_column: label.into(),
        drop_columns: drop,
        normalize: Normalize::Zscore,
        train_fraction: 0.8,
        stratified: false,
        split_seed: 0,
    }
}

fn tabular_meta(task: &str, inner: SamplerKind, outer: SamplerKind) -> MetaConfig {
    let weight_decay = if task == "fraud" { 5e-2 } else { 5e-4 };
    let beta = if task == "fraud" { 0.0 } else { 0.01 };
    MetaConfig {
        inner_sampler: SamplerSpec::new(inner),
        outer_sampler: SamplerSpec::new(outer),
        gamma: 0.01,
        beta,
        meta_steps: 80,
        support_batch: 24,
        query_batch: 16,
        epochs: TABULAR_EPOCHS,
        outer_steps_per_epoch: None,
        first_order: false,
        optimizer: OptimizerSpec::sgd_nesterov(0.1, 0.9, weight_decay),
        schedule: ScheduleSpec::constant(TABULAR_EPOCHS),
        loss: LossSpec::bce(),
        accumulation: Accumulation::Sum,
        grad_norm_cap: 1e4,
        seed: 0,
    }
}

fn tabular(task: &str, method: &str) -> Option<ExperimentConfig> {
    let trainer = match method {
        "metabal" => TrainerConfig::Metabalance(tabular_meta(task, SamplerKind::Natural, SamplerKind::RandomUnder)),
        "msmetabal" | "grid" => {
            let (inner, outer) = if task == "fraud" {
                (SamplerKind::RandomUnder, SamplerKind::RandomUnder)
            } else {
                (SamplerKind::Natural, SamplerKind::Enn)
            };
            TrainerConfig::Metabalance(tabular_meta(task, inner, outer))
        }
        m => {
            let kind = if m == "naive" {
                SamplerKind::Natural
            } else {
                m.parse().ok().filter(|k| *k != SamplerKind::Natural)?
            };
            TrainerConfig::Baseline(BaselineConfig {
                sampler: SamplerSpec::new(kind),
                optimizer: OptimizerSpec::adam(1e-3),
                schedule: ScheduleSpec::constant(TABULAR_EPOCHS),
                loss: LossSpec::bce(),
                epochs: TABULAR_EPOCHS,
                batch_size: 24,
                updates_per_epoch: None,
                accumulate_steps: 1,
                accumulation: Accumulation::Sum,
                seed: 0,
            })
        }
    };
    if method == "grid" && task != "loan" {
        return None;
    }
    Some(ExperimentConfig {
        name: format!("{task}_{method}"),
        seeds: ten_seeds(),
        monitor_every: 10,
        output_dir: None,
        data: tabular_data(task),
        model: ModelChoice::Preset { preset: task.into() },
        trainer,
        grid: (method == "grid").then(|| GridSpec {
            inner: GRID_KINDS.to_vec(),
            outer: GRID_KINDS.to_vec(),
        }),
    })
}

pub fn synthetic_model() -> MlpSpec {
    MlpSpec {
        input_dim: SYNTHETIC_DIM,
        hidden_widths: vec![64, 64],
        output_dim: SYNTHETIC_CLASSES,
        dropout: None,
        activation: Default::default(),
    }
}

fn synthetic(level: &str, method: &str) -> Option<ExperimentConfig> {
    let imbalance = match level {
        "severe" => ImbalanceMode::Fixed(5),
        "moderate" => ImbalanceMode::Range(5, 50),
        _ => return None,
    };
    let optimizer = OptimizerSpec::sgd_nesterov(0.01, 0.9, 5e-4);
    let schedule = ScheduleSpec::cosine(SYNTHETIC_EPOCHS);
    let baseline = |kind| {
        TrainerConfig::Baseline(BaselineConfig {
            sampler: SamplerSpec::new(kind),
            optimizer: optimizer.clone(),
            schedule: schedule.clone(),
            loss: LossSpec::cross_entropy(),
            epochs: SYNTHETIC_EPOCHS,
            batch_size: 20,
            updates_per_epoch: Some(SYNTHETIC_UPDATES_PER_EPOCH),
            accumulate_steps: 1,
            accumulation: Accumulation::Sum,
            seed: 0,
        })
    };
    let trainer = match method {
        "naive" => baseline(SamplerKind::Natural),
        "oversample" => baseline(SamplerKind::RandomOver),
        "metabal" => TrainerConfig::Metabalance(MetaConfig {
            inner_sampler: SamplerSpec::new(SamplerKind::Natural),
            outer_sampler: SamplerSpec::new(SamplerKind::RandomUnder),
            gamma: 0.01,
            beta: 0.0,
            meta_steps: 80,
            support_batch: 20,
            query_batch: 30,
            epochs: SYNTHETIC_EPOCHS,
            outer_steps_per_epoch: Some(SYNTHETIC_UPDATES_PER_EPOCH),
            first_order: false,
            optimizer: optimizer.clone(),
            schedule: schedule.clone(),
            loss: LossSpec::cross_entropy(),
            // summed over 80 steps at the baseline rate the outer step is 80x too large
            accumulation: Accumulation::Mean,
            grad_norm_cap: 1e4,
            seed: 0,
        }),
        _ => return None,
    };
    Some(ExperimentConfig {
        name: format!("synthetic_{level}_{method}"),
        seeds: (0..3).collect(),
        monitor_every: 1,
        output_dir: None,
        data: DataSource::Synthetic {
            n_classes: SYNTHETIC_CLASSES,
            dim: SYNTHETIC_DIM,
            separation: SYNTHETIC_SEPARATION,
            majority_count: 5000,
            imbalance,
            test_per_class: 500,
            seed: 0,
        },
        model: ModelChoice::Spec(synthetic_model()),
        trainer,
        grid: None,
    })
}
