//! Baseline mini-batch training and the meta-balanced inner/outer loop.

mod baseline;
mod grid;
mod log;
mod meta;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Tensor, Var};
use crate::data::Dataset;
use crate::nn::{loss, ForwardMode, LossSpec, Mlp, Targets};
use crate::{Error, Result};

pub use baseline::{train_baseline, BaselineConfig};
pub use grid::{strategy_grid, summarize, GridCell, GridResult, Summary};
pub use log::{EpochRecord, Monitor, Snapshot, TrainLog};
pub use meta::{meta_gradient, metabalance_step, train_metabalance, MetaConfig, MetaGradient, MetaRngs, StepStats};

/// How per-batch (or per-meta-step) gradients are combined into one update.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Accumulation {
    #[default]
    Sum,
    Mean,
}

pub(crate) fn add_into(acc: &mut Option<Vec<Tensor>>, grads: Vec<Tensor>) {
    match acc {
        None => *acc = Some(grads),
        Some(a) => {
            for (s, g) in a.iter_mut().zip(&grads) {
                s.data_mut().iter_mut().zip(g.data()).for_each(|(x, y)| *x += y);
            }
        }
    }
}

pub(crate) fn finish(acc: Option<Vec<Tensor>>, mode: Accumulation, count: usize) -> Vec<Tensor> {
    let mut grads = acc.expect("at least one gradient accumulated");
    if mode == Accumulation::Mean && count > 1 {
        let s = 1.0 / count as f64;
        for g in &mut grads {
            g.data_mut().iter_mut().for_each(|x| *x *= s);
        }
    }
    grads
}

pub(crate) fn grad_norm(grads: &[Tensor]) -> f64 {
    grads
        .iter()
        .flat_map(|g| g.data())
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
}

/// Training-mode loss of `model` under parameter handles `params` on `batch`.
pub(crate) fn batch_loss(
    tape: &mut Tape,
    model: &Mlp,
    params: &[Var],
    batch: &Dataset,
    spec: &LossSpec,
    mode: &mut ForwardMode<'_>,
) -> Result<Var> {
    let x = tape.constant(batch.features_tensor());
    let logits = model.forward(tape, params, x, mode)?;
    let targets = match batch.soft_labels() {
        Some(probs) => Targets::Soft {
            probs,
            n_classes: batch.n_classes(),
        },
        None => Targets::Hard(batch.labels()),
    };
    loss(tape, logits, targets, spec)
}

pub(crate) fn check_model_data(model: &Mlp, data: &Dataset) -> Result<()> {
    if data.is_empty() {
        return Err(Error::Data("training set is empty".into()));
    }
    if model.spec().input_dim != data.n_features() {
        return Err(Error::Config(format!(
            "model expects {} features, data has {}",
            model.spec().input_dim,
            data.n_features()
        )));
    }
    if model.spec().n_classes() != data.n_classes() {
        return Err(Error::Config(format!(
            "model predicts {} classes, data has {}",
            model.spec().n_classes(),
            data.n_classes()
        )));
    }
    Ok(())
}
