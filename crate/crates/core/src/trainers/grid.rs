use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::log::Monitor;
use super::meta::{train_metabalance, MetaConfig};
use crate::data::Dataset;
use crate::evaluation::evaluate;
use crate::nn::{Mlp, MlpSpec};
use crate::resampling::{SamplerKind, SamplerSpec};
use crate::{Error, Result};

/// Mean and standard error (sample std / √k) of per-seed values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// `None` with a single value.
    pub std_err: Option<f64>,
    pub n: usize,
}

pub fn summarize(values: &[f64]) -> Option<Summary> {
    let k = values.len();
    if k == 0 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / k as f64;
    let std_err = (k > 1).then(|| {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
        (var / k as f64).sqrt()
    });
    Some(Summary { mean, std_err, n: k })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub inner: SamplerKind,
    pub outer: SamplerKind,
    /// Metric per successful seed, in seed order.
    pub values: Vec<(u64, f64)>,
    /// Failed seeds with their error message.
    pub failures: Vec<(u64, String)>,
    pub summary: Option<Summary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub inner: Vec<SamplerKind>,
    pub outer: Vec<SamplerKind>,
    /// `"roc_auc"` for binary tasks, `"balanced_accuracy"` otherwise.
    pub metric: String,
    /// Row-major: `cells[i * outer.len() + j]` is inner `i`, outer `j`.
    pub cells: Vec<GridCell>,
}

impl GridResult {
    pub fn cell(&self, inner: usize, outer: usize) -> &GridCell {
        &self.cells[inner * self.outer.len() + outer]
    }

    /// Cell with the highest mean, ties to the first in row-major order.
    pub fn argmax(&self) -> Option<(usize, usize)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, c) in self.cells.iter().enumerate() {
            if let Some(s) = c.summary {
                if best.is_none_or(|(_, b)| s.mean > b) {
                    best = Some((i, s.mean));
                }
            }
        }
        best.map(|(i, _)| (i / self.outer.len(), i % self.outer.len()))
    }

    pub fn has_failures(&self) -> bool {
        self.cells.iter().any(|c| !c.failures.is_empty())
    }

    /// Matrix with inner kinds as rows and outer kinds as columns. Each cell
    /// is `mean` or `mean±std_err`; failed cells are `failed`.
    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))?;
        let mut header = vec![format!("inner\\outer ({})", self.metric)];
        header.extend(self.outer.iter().map(|k| k.to_string()));
        w.write_record(&header)?;
        for (i, inner) in self.inner.iter().enumerate() {
            let mut row = vec![inner.to_string()];
            for j in 0..self.outer.len() {
                row.push(match self.cell(i, j).summary {
                    None => "failed".to_string(),
                    Some(Summary { mean, std_err: None, .. }) => format!("{mean:.4}"),
                    Some(Summary {
                        mean,
                        std_err: Some(se),
                        ..
                    }) => format!("{mean:.4}±{se:.4}"),
                });
            }
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Test metric of a trained model: ROC-AUC when binary, else balanced accuracy.
pub(crate) fn headline_metric(model: &Mlp, test: &Dataset) -> Result<f64> {
    let report = evaluate(model, test)?;
    if test.n_classes() == 2 {
        report
            .roc_auc
            .ok_or_else(|| Error::Evaluation("test set has a single class".into()))
    } else {
        Ok(report.balanced_accuracy)
    }
}

/// Trains one MetaBalance model per (inner, outer, seed) and aggregates the
/// test metric. Each cell copies `template` with its samplers swapped in
/// (keeping the template's `k_neighbors` and sampler options) and its seed
/// set; the model is initialized from that seed. Cells run in parallel. A
/// failing cell is recorded and the rest of the grid still runs.
pub fn strategy_grid(
    train: &Dataset,
    test: &Dataset,
    inner: &[SamplerKind],
    outer: &[SamplerKind],
    template: &MetaConfig,
    model: &MlpSpec,
    seeds: &[u64],
) -> Result<GridResult> {
    if inner.is_empty() || outer.is_empty() || seeds.is_empty() {
        return Err(Error::Config("grid needs at least one inner kind, outer kind and seed".into()));
    }
    template.validate()?;
    model.validate()?;
    let jobs: Vec<(usize, usize, u64)> = (0..inner.len())
        .flat_map(|i| (0..outer.len()).flat_map(move |j| seeds.iter().map(move |&s| (i, j, s))))
        .collect();
    let outcomes: Vec<Result<f64>> = jobs
        .par_iter()
        .map(|&(i, j, seed)| {
            let cfg = cell_config(template, inner[i], outer[j], seed);
            let mut m = Mlp::new(model.clone(), seed)?;
            train_metabalance(&mut m, train, &cfg, Monitor { test: None, every: 0 })?;
            headline_metric(&m, test)
        })
        .collect();
    let mut cells: Vec<GridCell> = (0..inner.len())
        .flat_map(|i| {
            (0..outer.len()).map(move |j| GridCell {
                inner: inner[i],
                outer: outer[j],
                values: Vec::new(),
                failures: Vec::new(),
                summary: None,
            })
        })
        .collect();
    for (&(i, j, seed), out) in jobs.iter().zip(outcomes) {
        let cell = &mut cells[i * outer.len() + j];
        match out {
            Ok(v) => cell.values.push((seed, v)),
            Err(e) => {
                log::warn!("grid cell ({}, {}) seed {seed} failed: {e}", inner[i], outer[j]);
                cell.failures.push((seed, e.to_string()));
            }
        }
    }
    for c in &mut cells {
        let vals: Vec<f64> = c.values.iter().map(|v| v.1).collect();
        c.summary = summarize(&vals);
    }
    Ok(GridResult {
        inner: inner.to_vec(),
        outer: outer.to_vec(),
        metric: if train.n_classes() == 2 { "roc_auc" } else { "balanced_accuracy" }.into(),
        cells,
    })
}

pub(crate) fn cell_config(template: &MetaConfig, inner: SamplerKind, outer: SamplerKind, seed: u64) -> MetaConfig {
    let swap = |base: &SamplerSpec, kind| SamplerSpec { kind, ..base.clone() };
    MetaConfig {
        inner_sampler: swap(&template.inner_sampler, inner),
        outer_sampler: swap(&template.outer_sampler, outer),
        seed,
        ..template.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::super::Accumulation;
    use super::*;
    use crate::data::{make_synthetic, SyntheticSpec};
    use crate::nn::LossSpec;
    use crate::optim::{OptimizerSpec, ScheduleSpec};

    #[test]
    fn summary_matches_definition() {
        let s = summarize(&[1.0, 2.0, 4.0]).unwrap();
        assert!((s.mean - 7.0 / 3.0).abs() < 1e-15);
        // sample variance = ((4/3)^2 + (1/3)^2 + (5/3)^2) / 2 = 7/3
        assert!((s.std_err.unwrap() - (7.0f64 / 3.0 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(summarize(&[0.5]).unwrap().std_err, None);
        assert!(summarize(&[]).is_none());
    }

    fn data(seed: u64) -> Dataset {
        make_synthetic(&SyntheticSpec {
            n_classes: 2,
            per_class_counts: vec![80, 10],
            dim: 3,
            separation: 2.0,
            seed,
        })
        .unwrap()
    }

    fn template() -> MetaConfig {
        MetaConfig {
            inner_sampler: SamplerSpec::default(),
            outer_sampler: SamplerSpec::default(),
            gamma: 0.05,
            beta: 0.0,
            meta_steps: 3,
            support_batch: 8,
            query_batch: 6,
            epochs: 2,
            outer_steps_per_epoch: None,
            first_order: false,
            optimizer: OptimizerSpec::sgd_nesterov(0.05, 0.9, 5e-4),
            schedule: ScheduleSpec::constant(2),
            loss: LossSpec::bce(),
            accumulation: Accumulation::Sum,
            grad_norm_cap: 1e4,
            seed: 0,
        }
    }

    fn spec() -> MlpSpec {
        MlpSpec {
            input_dim: 3,
            hidden_widths: vec![6],
            output_dim: 1,
            dropout: None,
            activation: Default::default(),
        }
    }

    #[test]
    fn single_cell_equals_single_run() {
        let (train, test) = (data(1), data(2));
        let g = strategy_grid(&train, &test, &[SamplerKind::Natural], &[SamplerKind::RandomUnder], &template(), &spec(), &[5])
            .unwrap();
        let cfg = cell_config(&template(), SamplerKind::Natural, SamplerKind::RandomUnder, 5);
        let mut m = Mlp::new(spec(), 5).unwrap();
        train_metabalance(&mut m, &train, &cfg, Monitor::default()).unwrap();
        assert_eq!(g.cell(0, 0).values, vec![(5, headline_metric(&m, &test).unwrap())]);
        assert_eq!(g.cell(0, 0).summary.unwrap().std_err, None);
    }

    #[test]
    fn grid_shape_and_failure_isolation() {
        let (train, test) = (data(1), data(2));
        let inner = [SamplerKind::Natural, SamplerKind::RandomUnder];
        let mut t = template();
        // minority has 10 rows, so SMOTE with k = 20 fails while other cells train
        t.outer_sampler.k_neighbors = Some(20);
        let outer = [SamplerKind::Natural, SamplerKind::Smote, SamplerKind::RandomOver];
        let g = strategy_grid(&train, &test, &inner, &outer, &t, &spec(), &[1, 2]).unwrap();
        assert_eq!(g.cells.len(), 6);
        assert_eq!(g.metric, "roc_auc");
        for i in 0..2 {
            assert_eq!(g.cell(i, 1).failures.len(), 2);
            assert!(g.cell(i, 1).summary.is_none());
            assert_eq!(g.cell(i, 0).values.len(), 2);
            assert!(g.cell(i, 2).summary.unwrap().std_err.is_some());
        }
        assert!(g.has_failures());
        let (bi, bj) = g.argmax().unwrap();
        assert_ne!(bj, 1);
        assert!(bi < 2);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("grid.csv");
        g.save_csv(&p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.contains("failed"));
    }
}
