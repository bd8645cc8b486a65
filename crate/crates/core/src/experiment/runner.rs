use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{DataSource, ExperimentConfig, TrainerConfig};
use crate::data::{make_synthetic, prepare_tabular, save_csv, simulate_imbalance, Dataset, SplitSpec, SyntheticSpec};
use crate::evaluation::{evaluate, predict_proba, prior_adjust, roc_curve, save_roc_csv, MetricsReport};
use crate::nn::checkpoint::save_checkpoint;
use crate::nn::{Mlp, MlpSpec};
use crate::resampling::SamplerKind;
use crate::rng::{derive_seed, salt};
use crate::trainers::{strategy_grid, summarize, train_baseline, train_metabalance, GridResult, Monitor, Summary, TrainLog};
use crate::{Error, Result};

pub const RUN_MANIFEST: &str = "run_manifest.json";
pub const GRID_MANIFEST: &str = "grid_manifest.json";
pub const DATA_MANIFEST: &str = "dataset_manifest.json";

/// Shape and checksums of the data a run trained and tested on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataSummary {
    pub source: String,
    pub n_features: usize,
    pub n_classes: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub train_class_counts: BTreeMap<usize, usize>,
    pub test_class_counts: BTreeMap<usize, usize>,
    pub train_checksum: String,
    pub test_checksum: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split_checksum: Option<String>,
}

#[derive(Clone, Debug)]
pub struct LoadedData {
    pub train: Dataset,
    pub test: Dataset,
    pub summary: DataSummary,
    /// Set for CSV sources.
    pub tabular: Option<crate::data::DatasetManifest>,
}

pub fn load_data(source: &DataSource) -> Result<LoadedData> {
    match source {
        DataSource::Csv {
            path,
            train_fraction,
            stratified,
            split_seed,
            ..
        } => {
            if !path.exists() {
                return Err(Error::io(
                    path,
                    std::io::Error::new(std::io::ErrorKind::NotFound, "dataset file not found"),
                ));
            }
            let opts = source.load_options().expect("csv source");
            let split = SplitSpec {
                train_fraction: *train_fraction,
                stratified: *stratified,
                seed: *split_seed,
            };
            let p = prepare_tabular(path, &opts, &split)?;
            let summary = summarize_data(path.display().to_string(), &p.train, &p.test, Some(p.manifest.split_checksum.clone()));
            Ok(LoadedData {
                train: p.train,
                test: p.test,
                summary,
                tabular: Some(p.manifest),
            })
        }
        DataSource::Synthetic {
            n_classes,
            dim,
            separation,
            majority_count,
            imbalance,
            test_per_class,
            seed,
        } => {
            let pool = make_synthetic(&SyntheticSpec {
                n_classes: *n_classes,
                per_class_counts: vec![*majority_count; *n_classes],
                dim: *dim,
                separation: *separation,
                seed: *seed,
            })?;
            let train = simulate_imbalance(&pool, *imbalance, 0, *seed)?;
            let test = make_synthetic(&SyntheticSpec {
                n_classes: *n_classes,
                per_class_counts: vec![*test_per_class; *n_classes],
                dim: *dim,
                separation: *separation,
                seed: derive_seed(*seed, salt::SPLIT),
            })?;
            let summary = summarize_data(format!("synthetic({n_classes} classes, dim {dim})"), &train, &test, None);
            Ok(LoadedData {
                train,
                test,
                summary,
                tabular: None,
            })
        }
    }
}

fn summarize_data(source: String, train: &Dataset, test: &Dataset, split_checksum: Option<String>) -> DataSummary {
    DataSummary {
        source,
        n_features: train.n_features(),
        n_classes: train.n_classes(),
        n_train: train.n_rows(),
        n_test: test.n_rows(),
        train_class_counts: train.class_counts().clone(),
        test_class_counts: test.class_counts().clone(),
        train_checksum: train.checksum(),
        test_checksum: test.checksum(),
        split_checksum,
    }
}

/// Writes `train.csv`, `test.csv` and a dataset manifest into `dir`.
/// Returns the manifest path.
pub fn prepare_dataset(source: &DataSource, dir: &Path) -> Result<PathBuf> {
    let data = load_data(source)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    save_csv(&data.train, &dir.join("train.csv"))?;
    save_csv(&data.test, &dir.join("test.csv"))?;
    let path = dir.join(DATA_MANIFEST);
    let json = match &data.tabular {
        Some(m) => serde_json::to_string_pretty(m)?,
        None => serde_json::to_string_pretty(&data.summary)?,
    };
    std::fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Test metrics of one trained model, keyed by name.
///
/// `accuracy`, `balanced_accuracy`, `majority_accuracy`, `minority_accuracy`
/// (mean over the classes that are not the training majority) and
/// `roc_auc` for binary models; the `prior_adjusted_*` variants divide the
/// predicted probabilities by the training class frequencies first.
pub fn test_metrics(model: &Mlp, train: &Dataset, test: &Dataset) -> Result<(BTreeMap<String, f64>, MetricsReport, MetricsReport)> {
    let report = evaluate(model, test)?;
    let c = test.n_classes();
    let freqs = train.class_frequencies();
    let probs = predict_proba(model, test)?;
    let adjusted_preds = prior_adjust(&probs, &freqs)?;
    let adjusted = MetricsReport::from_predictions(&adjusted_preds, test.labels(), c, None)?;
    let majority = train.majority_class();
    let mut m = BTreeMap::new();
    for (prefix, r) in [("", &report), ("prior_adjusted_", &adjusted)] {
        m.insert(format!("{prefix}accuracy"), r.overall_accuracy);
        m.insert(format!("{prefix}balanced_accuracy"), r.balanced_accuracy);
        if let Some(&a) = r.per_class_accuracy.get(&majority) {
            m.insert(format!("{prefix}majority_accuracy"), a);
        }
        let minority: Vec<f64> = r
            .per_class_accuracy
            .iter()
            .filter(|(&k, _)| k != majority)
            .map(|(_, &v)| v)
            .collect();
        if !minority.is_empty() {
            m.insert(format!("{prefix}minority_accuracy"), minority.iter().sum::<f64>() / minority.len() as f64);
        }
    }
    if let Some(auc) = report.roc_auc {
        m.insert("roc_auc".into(), auc);
    }
    Ok((m, report, adjusted))
}

/// The metric a run is judged by: ROC-AUC for binary tasks, else balanced accuracy.
pub fn headline_metric_name(n_classes: usize) -> &'static str {
    if n_classes == 2 {
        "roc_auc"
    } else {
        "balanced_accuracy"
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    /// Empty when the seed failed.
    pub metrics: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub epochs_logged: usize,
    pub wall_time_s: f64,
    /// Relative to the run directory.
    pub artifacts: Vec<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub name: String,
    pub config: ExperimentConfig,
    pub model: MlpSpec,
    pub data: DataSummary,
    pub headline_metric: String,
    pub seeds: Vec<SeedResult>,
    /// Mean and standard error over successful seeds, per metric.
    pub summary: BTreeMap<String, Summary>,
    pub failed_seeds: Vec<u64>,
    pub wall_time_s: f64,
    /// Run-level artifacts, relative to the run directory.
    pub artifacts: Vec<PathBuf>,
}

impl RunManifest {
    pub fn headline(&self) -> Option<Summary> {
        self.summary.get(&self.headline_metric).copied()
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(RUN_MANIFEST);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let path = dir.join(RUN_MANIFEST);
        std::fs::write(&path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(&path, e))
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Where artifacts go; nothing is written when unset.
    pub output_dir: Option<PathBuf>,
    /// Train seeds concurrently on the rayon pool.
    pub parallel: bool,
}

/// Trains one model per seed and evaluates it on the test split. A failing
/// seed is recorded and the others still run; config and data errors abort.
pub fn run_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunManifest> {
    cfg.validate()?;
    let start = Instant::now();
    let spec = cfg.model.resolve()?;
    let data = load_data(&cfg.data)?;
    check_fit(&spec, &data.train)?;
    if let Some(dir) = &opts.output_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let job = |&seed: &u64| run_seed(cfg, &spec, &data, seed, opts.output_dir.as_deref());
    let seeds: Vec<SeedResult> = if opts.parallel {
        cfg.seeds.par_iter().map(job).collect()
    } else {
        cfg.seeds.iter().map(job).collect()
    };
    let summary = summarize_metrics(&seeds);
    let failed_seeds: Vec<u64> = seeds.iter().filter(|s| s.error.is_some()).map(|s| s.seed).collect();
    let mut manifest = RunManifest {
        name: cfg.name.clone(),
        config: cfg.clone(),
        model: spec,
        headline_metric: headline_metric_name(data.summary.n_classes).into(),
        data: data.summary,
        seeds,
        summary,
        failed_seeds,
        wall_time_s: 0.0,
        artifacts: Vec::new(),
    };
    if let Some(dir) = &opts.output_dir {
        cfg.save(&dir.join("config.toml"))?;
        manifest.artifacts = vec!["config.toml".into(), RUN_MANIFEST.into()];
    }
    manifest.wall_time_s = start.elapsed().as_secs_f64();
    if let Some(dir) = &opts.output_dir {
        manifest.save(dir)?;
    }
    Ok(manifest)
}

fn check_fit(spec: &MlpSpec, train: &Dataset) -> Result<()> {
    if spec.input_dim != train.n_features() || spec.n_classes() != train.n_classes() {
        return Err(Error::Config(format!(
            "model takes {} features and predicts {} classes, data has {} features and {} classes",
            spec.input_dim,
            spec.n_classes(),
            train.n_features(),
            train.n_classes()
        )));
    }
    Ok(())
}

fn summarize_metrics(seeds: &[SeedResult]) -> BTreeMap<String, Summary> {
    let mut by_name: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for s in seeds.iter().filter(|s| s.error.is_none()) {
        for (k, &v) in &s.metrics {
            by_name.entry(k.clone()).or_default().push(v);
        }
    }
    by_name.into_iter().filter_map(|(k, v)| summarize(&v).map(|s| (k, s))).collect()
}

pub fn train_one(model: &mut Mlp, train: &Dataset, test: &Dataset, trainer: &TrainerConfig, every: usize) -> Result<TrainLog> {
    let monitor = Monitor { test: Some(test), every };
    match trainer {
        TrainerConfig::Baseline(c) => train_baseline(model, train, c, monitor),
        TrainerConfig::Metabalance(c) => train_metabalance(model, train, c, monitor),
    }
}

fn run_seed(cfg: &ExperimentConfig, spec: &MlpSpec, data: &LoadedData, seed: u64, out: Option<&Path>) -> SeedResult {
    let start = Instant::now();
    let mut result = SeedResult {
        seed,
        metrics: BTreeMap::new(),
        error: None,
        epochs_logged: 0,
        wall_time_s: 0.0,
        artifacts: Vec::new(),
    };
    let outcome = (|| -> Result<()> {
        let mut model = Mlp::new(spec.clone(), seed)?;
        let log = train_one(&mut model, &data.train, &data.test, &cfg.trainer.with_seed(seed), cfg.monitor_every)?;
        result.epochs_logged = log.records.len();
        let (metrics, report, adjusted) = test_metrics(&model, &data.train, &data.test)?;
        result.metrics = metrics;
        if let Some(dir) = out {
            let rel = PathBuf::from(format!("seed_{seed}"));
            std::fs::create_dir_all(dir.join(&rel)).map_err(|e| Error::io(dir.join(&rel), e))?;
            let mut emit = |name: &str| {
                let p = rel.join(name);
                result.artifacts.push(p.clone());
                dir.join(p)
            };
            log.save_csv(&emit("train_log.csv"))?;
            report.save_json(&emit("metrics.json"))?;
            adjusted.save_json(&emit("prior_adjusted_metrics.json"))?;
            save_checkpoint(&emit("model.ckpt"), &model, None)?;
            if data.summary.n_classes == 2 && report.roc_auc.is_some() {
                let probs = predict_proba(&model, &data.test)?;
                let pos: Vec<f64> = probs.chunks(2).map(|r| r[1]).collect();
                save_roc_csv(&roc_curve(&pos, data.test.labels())?, &emit("roc.csv"))?;
            }
        }
        Ok(())
    })();
    if let Err(e) = outcome {
        log::error!("{} seed {seed} failed: {e}", cfg.name);
        result.error = Some(e.to_string());
        result.metrics.clear();
    }
    result.wall_time_s = start.elapsed().as_secs_f64();
    result
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridManifest {
    pub name: String,
    pub config: ExperimentConfig,
    pub data: DataSummary,
    pub result: GridResult,
    pub wall_time_s: f64,
    pub artifacts: Vec<PathBuf>,
}

/// Runs the strategy grid named in `cfg.grid` (or the given kinds) with
/// `cfg`'s MetaBalance trainer as the template.
pub fn run_grid(cfg: &ExperimentConfig, inner: &[SamplerKind], outer: &[SamplerKind], output_dir: Option<&Path>) -> Result<GridManifest> {
    cfg.validate()?;
    let TrainerConfig::Metabalance(template) = &cfg.trainer else {
        return Err(Error::Config("a strategy grid needs a metabalance trainer".into()));
    };
    let start = Instant::now();
    let spec = cfg.model.resolve()?;
    let data = load_data(&cfg.data)?;
    check_fit(&spec, &data.train)?;
    let result = strategy_grid(&data.train, &data.test, inner, outer, template, &spec, &cfg.seeds)?;
    let mut manifest = GridManifest {
        name: cfg.name.clone(),
        config: cfg.clone(),
        data: data.summary,
        result,
        wall_time_s: start.elapsed().as_secs_f64(),
        artifacts: Vec::new(),
    };
    if let Some(dir) = output_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        manifest.result.save_csv(&dir.join("grid.csv"))?;
        cfg.save(&dir.join("config.toml"))?;
        manifest.artifacts = vec!["grid.csv".into(), "config.toml".into(), GRID_MANIFEST.into()];
        let path = dir.join(GRID_MANIFEST);
        std::fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&path, e))?;
    }
    Ok(manifest)
}

/// Per-class accuracy curves from a run directory.
///
/// Writes `seed_<s>/curves.csv` for every successful seed and
/// `curves_mean.csv` averaged over seeds. Columns are `epoch`, then
/// `<role>_class<c>_train` and `<role>_class<c>_test` per class (role is
/// `majority` or `minority`, by training counts), then the minority means.
/// Only epochs where metrics were measured appear. The new files are added
/// to the run manifest.
pub fn write_curves(run_dir: &Path) -> Result<Vec<PathBuf>> {
    let mut manifest = RunManifest::load(run_dir)?;
    let n_classes = manifest.data.n_classes;
    let majority = manifest
        .data
        .train_class_counts
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
        .map(|(&c, _)| c)
        .unwrap_or(0);
    let role = |c: usize| if c == majority { "majority" } else { "minority" };
    let mut header = vec!["epoch".to_string()];
    for c in 0..n_classes {
        header.push(format!("{}_class{c}_train", role(c)));
        header.push(format!("{}_class{c}_test", role(c)));
    }
    header.push("minority_mean_train".into());
    header.push("minority_mean_test".into());

    let mut written = Vec::new();
    let mut per_seed: Vec<BTreeMap<usize, Vec<Option<f64>>>> = Vec::new();
    for s in manifest.seeds.iter().filter(|s| s.error.is_none()) {
        let rel = PathBuf::from(format!("seed_{}", s.seed));
        let log = TrainLog::load_csv(&run_dir.join(&rel).join("train_log.csv"))?;
        let mut rows = BTreeMap::new();
        for r in &log.records {
            let (Some(tr), Some(te)) = (&r.train, &r.test) else {
                continue;
            };
            let mut row = Vec::with_capacity(2 * n_classes + 2);
            for c in 0..n_classes {
                row.push(tr.per_class.get(c).copied().flatten());
                row.push(te.per_class.get(c).copied().flatten());
            }
            let mean = |snap: &crate::trainers::Snapshot| {
                let v: Vec<f64> = (0..n_classes)
                    .filter(|&c| c != majority)
                    .filter_map(|c| snap.per_class.get(c).copied().flatten())
                    .collect();
                (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
            };
            row.push(mean(tr));
            row.push(mean(te));
            rows.insert(r.epoch, row);
        }
        let p = rel.join("curves.csv");
        write_curve_csv(&run_dir.join(&p), &header, &rows)?;
        written.push(p);
        per_seed.push(rows);
    }
    if let Some(first) = per_seed.first() {
        let mut mean_rows = BTreeMap::new();
        for (&epoch, row) in first {
            let mut out = Vec::with_capacity(row.len());
            for j in 0..row.len() {
                let vals: Option<Vec<f64>> = per_seed.iter().map(|s| s.get(&epoch).and_then(|r| r[j])).collect();
                out.push(vals.map(|v| v.iter().sum::<f64>() / v.len() as f64));
            }
            mean_rows.insert(epoch, out);
        }
        let p = PathBuf::from("curves_mean.csv");
        write_curve_csv(&run_dir.join(&p), &header, &mean_rows)?;
        written.push(p);
    }
    for p in &written {
        if !manifest.artifacts.contains(p) {
            manifest.artifacts.push(p.clone());
        }
    }
    manifest.save(run_dir)?;
    Ok(written)
}

fn write_curve_csv(path: &Path, header: &[String], rows: &BTreeMap<usize, Vec<Option<f64>>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))?;
    w.write_record(header)?;
    for (epoch, row) in rows {
        let mut rec = vec![epoch.to_string()];
        rec.extend(row.iter().map(|v| v.map(|x| format!("{x:?}")).unwrap_or_default()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
