//! Experiment configs, built-in presets, multi-seed runs, strategy grids and
//! curve export.
//!
//! A config is a TOML file:
//!
//! ```toml
//! name = "loan_msmetabal"
//! seeds = [0, 1, 2]
//! monitor_every = 10
//!
//! [data]
//! kind = "csv"
//! path = "data/loan_data.csv"
//! label_column = "not.fully.paid"
//!
//! [model]
//! preset = "loan"
//!
//! [trainer]
//! mode = "metabalance"
//! gamma = 0.01
//! beta = 0.01
//! # ... remaining MetaConfig fields
//! ```
//!
//! `preset(name).to_toml()` prints a complete example for any built-in.

mod config;
mod presets;
mod runner;

pub use config::{DataSource, ExperimentConfig, GridSpec, ModelChoice, TrainerConfig};
pub use presets::{names as preset_names, preset, synthetic_model, FRAUD_CSV, GRID_KINDS, LOAN_CSV};
pub use runner::{
    headline_metric_name, load_data, prepare_dataset, run_experiment, run_grid, test_metrics, train_one, write_curves, DataSummary,
    GridManifest, LoadedData, RunManifest, RunOptions, SeedResult, DATA_MANIFEST, GRID_MANIFEST, RUN_MANIFEST,
};
