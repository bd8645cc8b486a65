use serde::{Deserialize, Serialize};

use super::log::{Monitor, Recorder, TrainLog};
use super::{add_into, batch_loss, check_model_data, finish, Accumulation};
use crate::nn::{ForwardMode, LossSpec, Mlp};
use crate::optim::{Optimizer, OptimizerSpec, ScheduleSpec};
use crate::resampling::{resample, BatchStream, SamplerKind, SamplerSpec};
use crate::rng::{rng_from, salt};
use crate::data::Dataset;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    #[serde(default)]
    pub sampler: SamplerSpec,
    pub optimizer: OptimizerSpec,
    pub schedule: ScheduleSpec,
    #[serde(default)]
    pub loss: LossSpec,
    pub epochs: usize,
    pub batch_size: usize,
    /// Fixed number of optimizer updates per epoch over full batches.
    /// Unset means one pass over the data, `ceil(n / batch_size)` batches,
    /// the last one possibly short.
    #[serde(default)]
    pub updates_per_epoch: Option<usize>,
    /// Batches whose gradients are combined into each update.
    #[serde(default = "one")]
    pub accumulate_steps: usize,
    #[serde(default)]
    pub accumulation: Accumulation,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> usize {
    1
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        self.sampler.validate()?;
        self.optimizer.validate()?;
        self.schedule.validate()?;
        if self.epochs == 0 || self.batch_size == 0 || self.accumulate_steps == 0 {
            return Err(Error::Config("epochs, batch size and accumulate steps must be >= 1".into()));
        }
        if self.updates_per_epoch == Some(0) {
            return Err(Error::Config("updates per epoch must be >= 1".into()));
        }
        if self.schedule.total_epochs < self.epochs {
            return Err(Error::Config(format!(
                "schedule covers {} epochs but training runs {}",
                self.schedule.total_epochs, self.epochs
            )));
        }
        Ok(())
    }
}

/// Resamples the training set once with `config.sampler`, then runs plain
/// mini-batch epochs. Mixup is applied per batch instead.
pub fn train_baseline(model: &mut Mlp, train: &Dataset, config: &BaselineConfig, monitor: Monitor<'_>) -> Result<TrainLog> {
    config.validate()?;
    check_model_data(model, train)?;
    let (pool, stream_spec) = if config.sampler.kind == SamplerKind::Mixup {
        (train.clone(), config.sampler.clone())
    } else {
        (resample(train, &config.sampler, config.seed)?.dataset, SamplerSpec::default())
    };
    log::info!("baseline pool: {:?} rows per class", pool.class_counts());
    let fixed = config.updates_per_epoch;
    let mut stream =
        BatchStream::new(&pool, &stream_spec, config.batch_size, config.seed, salt::DATA)?.with_partial_batches(fixed.is_none());
    let batches_per_epoch = match fixed {
        Some(u) => u * config.accumulate_steps,
        None => pool.n_rows().div_ceil(config.batch_size),
    };
    let mut dropout = rng_from(config.seed, salt::DROPOUT);
    let mut optimizer = Optimizer::new(config.optimizer.clone())?;
    let names = model.param_names();
    let mut recorder = Recorder::new(config.seed, train, monitor, &config.loss, config.epochs);

    for epoch in 0..config.epochs {
        let lr = config.schedule.lr_at(epoch, config.optimizer.lr)?;
        let (mut updates, mut objective_sum) = (0, 0.0);
        let mut acc = None;
        let mut in_acc = 0;
        let mut acc_objective = 0.0;
        for b in 0..batches_per_epoch {
            let batch = stream.next_batch()?;
            let mut tape = crate::autodiff::Tape::new();
            let params = model.bind(&mut tape);
            let l = batch_loss(&mut tape, model, &params, &batch, &config.loss, &mut ForwardMode::Train(&mut dropout))
                .map_err(|e| match e {
                    Error::NonFinite(m) => Error::Diverged(format!("epoch {epoch}, batch {b}: {m}")),
                    other => other,
                })?;
            let value = tape.value(l).item();
            if !value.is_finite() {
                return Err(Error::Diverged(format!("epoch {epoch}, batch {b}: loss is {value}")));
            }
            add_into(&mut acc, tape.grad_values(l, &params)?);
            in_acc += 1;
            acc_objective += value;
            if in_acc == config.accumulate_steps || b + 1 == batches_per_epoch {
                let grads = finish(acc.take(), config.accumulation, in_acc);
                optimizer
                    .step(model.params_mut(), &grads, &names, lr)
                    .map_err(|e| Error::Diverged(format!("epoch {epoch}, batch {b}: {e}")))?;
                objective_sum += if config.accumulation == Accumulation::Mean {
                    acc_objective / in_acc as f64
                } else {
                    acc_objective
                };
                updates += 1;
                in_acc = 0;
                acc_objective = 0.0;
            }
        }
        recorder.record(model, epoch, lr, updates, objective_sum / updates as f64)?;
    }
    Ok(recorder.log)
}
