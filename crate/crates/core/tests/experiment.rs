use std::io::Write;
use std::path::Path;

use metabalance::data::ImbalanceMode;
use metabalance::experiment::*;
use metabalance::nn::{LossSpec, MlpSpec};
use metabalance::optim::{OptimizerSpec, ScheduleSpec};
use metabalance::resampling::{SamplerKind, SamplerSpec};
use metabalance::trainers::{Accumulation, BaselineConfig, MetaConfig};
use metabalance::Error;

fn small_meta() -> MetaConfig {
    MetaConfig {
        inner_sampler: SamplerSpec::default(),
        outer_sampler: SamplerSpec::new(SamplerKind::RandomUnder),
        gamma: 0.01,
        beta: 0.01,
        meta_steps: 4,
        support_batch: 16,
        query_batch: 12,
        epochs: 3,
        outer_steps_per_epoch: Some(5),
        first_order: false,
        optimizer: OptimizerSpec::sgd_nesterov(0.05, 0.9, 5e-4),
        schedule: ScheduleSpec::cosine(3),
        loss: LossSpec::cross_entropy(),
        accumulation: Accumulation::Mean,
        grad_norm_cap: 1e4,
        seed: 0,
    }
}

fn small_config(seeds: Vec<u64>) -> ExperimentConfig {
    ExperimentConfig {
        name: "small".into(),
        seeds,
        monitor_every: 1,
        output_dir: None,
        data: DataSource::Synthetic {
            n_classes: 3,
            dim: 4,
            separation: 3.0,
            majority_count: 200,
            imbalance: ImbalanceMode::Range(8, 20),
            test_per_class: 40,
            seed: 11,
        },
        model: ModelChoice::Spec(MlpSpec {
            input_dim: 4,
            hidden_widths: vec![12],
            output_dim: 3,
            dropout: None,
            activation: Default::default(),
        }),
        trainer: TrainerConfig::Metabalance(small_meta()),
        grid: None,
    }
}

#[test]
fn config_round_trips_through_toml() {
    let mut cfg = small_config(vec![3, 1, 4]);
    cfg.grid = Some(GridSpec {
        inner: vec![SamplerKind::Natural, SamplerKind::Smote],
        outer: vec![SamplerKind::Enn],
    });
    let text = cfg.to_toml().unwrap();
    let once = ExperimentConfig::from_toml(&text).unwrap();
    assert_eq!(once, cfg);
    assert_eq!(ExperimentConfig::from_toml(&once.to_toml().unwrap()).unwrap(), once);

    let mut base = small_config(vec![0]);
    base.trainer = TrainerConfig::Baseline(BaselineConfig {
        sampler: SamplerSpec::new(SamplerKind::Mixup),
        optimizer: OptimizerSpec::adam(1e-3),
        schedule: ScheduleSpec::multi_step(10, vec![3, 6], 0.1),
        loss: LossSpec::focal(2.0),
        epochs: 10,
        batch_size: 8,
        updates_per_epoch: None,
        accumulate_steps: 2,
        accumulation: Accumulation::Sum,
        seed: 0,
    });
    assert_eq!(ExperimentConfig::from_toml(&base.to_toml().unwrap()).unwrap(), base);
}

#[test]
fn handwritten_config_parses() {
    let text = r#"
name = "hand"
seeds = [0, 1]

[data]
kind = "csv"
path = "loan.csv"
label_column = "not.fully.paid"

[model]
preset = "loan"

[trainer]
mode = "baseline"
sampler = { kind = "smote", k_neighbors = 3 }
optimizer = { kind = "adam", lr = 0.001 }
schedule = { kind = "constant", total_epochs = 5 }
epochs = 5
batch_size = 24
"#;
    let cfg = ExperimentConfig::from_toml(text).unwrap();
    let TrainerConfig::Baseline(b) = &cfg.trainer else { panic!() };
    assert_eq!(b.sampler.k(), 3);
    assert_eq!(b.accumulate_steps, 1);
    assert_eq!(cfg.model.resolve().unwrap(), MlpSpec::loan());
    match cfg.data {
        DataSource::Csv { train_fraction, ref normalize, .. } => {
            assert_eq!(train_fraction, 0.8);
            assert_eq!(*normalize, metabalance::data::Normalize::Zscore);
        }
        _ => panic!(),
    }
}

#[test]
fn invalid_configs_are_rejected() {
    let mut cfg = small_config(vec![]);
    assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    cfg.seeds = vec![0];
    cfg.model = ModelChoice::Preset { preset: "resnet".into() };
    assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    assert!(matches!(ExperimentConfig::from_toml("name = 3"), Err(Error::Config(_))));
}

#[test]
fn run_is_reproducible_and_lists_its_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(vec![0, 1]);
    let a = run_experiment(
        &cfg,
        &RunOptions {
            output_dir: Some(dir.path().to_path_buf()),
            parallel: true,
        },
    )
    .unwrap();
    let b = run_experiment(&cfg, &RunOptions::default()).unwrap();
    assert!(a.failed_seeds.is_empty());
    assert_eq!(a.headline_metric, "balanced_accuracy");
    for (x, y) in a.seeds.iter().zip(&b.seeds) {
        assert_eq!(x.metrics, y.metrics);
        assert_eq!(x.epochs_logged, 3);
    }
    assert_eq!(a.summary, b.summary);
    let s = a.headline().unwrap();
    assert_eq!(s.n, 2);
    let vals: Vec<f64> = a.seeds.iter().map(|r| r.metrics["balanced_accuracy"]).collect();
    let mean = (vals[0] + vals[1]) / 2.0;
    let sd = (((vals[0] - mean).powi(2) + (vals[1] - mean).powi(2)) / 1.0).sqrt();
    assert!((s.std_err.unwrap() - sd / 2f64.sqrt()).abs() < 1e-15);

    let loaded = RunManifest::load(dir.path()).unwrap();
    assert_eq!(loaded.summary, a.summary);
    let mut all = loaded.artifacts.clone();
    for s in &loaded.seeds {
        all.extend(s.artifacts.iter().cloned());
    }
    assert!(all.len() >= 2 + 2 * 4);
    for p in &all {
        assert!(dir.path().join(p).exists(), "{}", p.display());
    }
    let reloaded = ExperimentConfig::load(&dir.path().join("config.toml")).unwrap();
    assert_eq!(reloaded.trainer, cfg.trainer);
}

#[test]
fn single_seed_has_no_standard_error() {
    let m = run_experiment(&small_config(vec![7]), &RunOptions::default()).unwrap();
    assert_eq!(m.headline().unwrap().std_err, None);
}

#[test]
fn curves_cover_every_epoch_and_class() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(vec![0, 1]);
    run_experiment(
        &cfg,
        &RunOptions {
            output_dir: Some(dir.path().to_path_buf()),
            parallel: false,
        },
    )
    .unwrap();
    let written = write_curves(dir.path()).unwrap();
    assert_eq!(written.len(), 3);
    let text = std::fs::read_to_string(dir.path().join("curves_mean.csv")).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header[1], "majority_class0_train");
    assert_eq!(header[2], "majority_class0_test");
    assert_eq!(header[3], "minority_class1_train");
    assert_eq!(*header.last().unwrap(), "minority_mean_test");
    assert_eq!(lines.count(), 3);
    let manifest = RunManifest::load(dir.path()).unwrap();
    for p in &written {
        assert!(manifest.artifacts.contains(p));
    }
}

#[test]
fn one_by_one_grid_equals_a_run() {
    let cfg = small_config(vec![2]);
    let TrainerConfig::Metabalance(m) = &cfg.trainer else { panic!() };
    let g = run_grid(&cfg, &[m.inner_sampler.kind], &[m.outer_sampler.kind], None).unwrap();
    let r = run_experiment(&cfg, &RunOptions::default()).unwrap();
    assert_eq!(g.result.cells.len(), 1);
    assert_eq!(g.result.cell(0, 0).values[0].1, r.seeds[0].metrics["balanced_accuracy"]);
}

#[test]
fn grid_writes_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(vec![0]);
    let inner = [SamplerKind::Natural, SamplerKind::RandomUnder];
    let outer = [SamplerKind::Natural, SamplerKind::RandomUnder, SamplerKind::Enn];
    let g = run_grid(&cfg, &inner, &outer, Some(dir.path())).unwrap();
    let text = std::fs::read_to_string(dir.path().join("grid.csv")).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.split(',').count() == 4));
    assert!(rows[1].starts_with("natural,"));
    assert!(g.result.argmax().is_some());
    for p in &g.artifacts {
        assert!(dir.path().join(p).exists());
    }
}

#[test]
fn baseline_needs_metabalance_for_grid() {
    let mut cfg = small_config(vec![0]);
    cfg.trainer = TrainerConfig::Baseline(BaselineConfig {
        sampler: SamplerSpec::default(),
        optimizer: OptimizerSpec::adam(1e-3),
        schedule: ScheduleSpec::constant(1),
        loss: LossSpec::cross_entropy(),
        epochs: 1,
        batch_size: 8,
        updates_per_epoch: None,
        accumulate_steps: 1,
        accumulation: Accumulation::Sum,
        seed: 0,
    });
    assert!(matches!(run_grid(&cfg, &[SamplerKind::Natural], &[SamplerKind::Natural], None), Err(Error::Config(_))));
    // baselines run fine
    assert!(run_experiment(&cfg, &RunOptions::default()).unwrap().failed_seeds.is_empty());
}

#[test]
fn failing_seed_is_recorded_and_others_continue() {
    let mut cfg = small_config(vec![0, 1]);
    if let TrainerConfig::Metabalance(m) = &mut cfg.trainer {
        m.grad_norm_cap = 1e-12;
    }
    let r = run_experiment(&cfg, &RunOptions::default()).unwrap();
    assert_eq!(r.failed_seeds, vec![0, 1]);
    assert!(r.summary.is_empty());
    assert!(r.seeds.iter().all(|s| s.error.as_deref().unwrap().contains("cap")));
}

fn write_csv(path: &Path, rows: usize) {
    let mut f = std::fs::File::create(path).unwrap();
    writeln!(f, "Time,a,b,kind,Class").unwrap();
    for i in 0..rows {
        let y = usize::from(i % 10 == 0);
        writeln!(f, "{i},{},{},x{},{y}", (i as f64 * 0.37).sin() + y as f64, (i as f64 * 0.11).cos(), i % 3).unwrap();
    }
}

fn csv_source(path: &Path) -> DataSource {
    DataSource::Csv {
        path: path.to_path_buf(),
        label_column: "Class".into(),
        drop_columns: vec!["Time".into()],
        normalize: Default::default(),
        train_fraction: 0.8,
        stratified: false,
        split_seed: 5,
    }
}

#[test]
fn prepare_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("d.csv");
    write_csv(&csv, 200);
    let m1 = prepare_dataset(&csv_source(&csv), &dir.path().join("p1")).unwrap();
    let m2 = prepare_dataset(&csv_source(&csv), &dir.path().join("p2")).unwrap();
    let a: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(m1).unwrap()).unwrap();
    let b: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(m2).unwrap()).unwrap();
    assert_eq!(a["split_checksum"], b["split_checksum"]);
    assert_eq!(a["train_checksum"], b["train_checksum"]);
    assert_eq!(a["class_counts"]["1"], 20);
    assert_eq!(a["n_features"], 2);
    assert!(dir.path().join("p1/train.csv").exists());
}

#[test]
fn missing_dataset_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let err = prepare_dataset(&csv_source(&dir.path().join("absent.csv")), dir.path()).unwrap_err();
    assert!(matches!(err, Error::Io { .. }));
    assert!(err.to_string().contains("absent.csv"));
}
