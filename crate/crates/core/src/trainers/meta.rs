use serde::{Deserialize, Serialize};

use super::log::{Monitor, Recorder, TrainLog};
use super::{add_into, batch_loss, check_model_data, finish, grad_norm, Accumulation};
use crate::autodiff::{Tape, Tensor, Var};
use crate::data::Dataset;
use crate::nn::{ForwardMode, LossSpec, Mlp};
use crate::optim::{Optimizer, OptimizerSpec, ScheduleSpec};
use crate::resampling::{BatchStream, SamplerSpec};
use crate::rng::{rng_from, salt, Rng};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetaConfig {
    /// Sampler for support batches (the inner adaptation).
    #[serde(default)]
    pub inner_sampler: SamplerSpec,
    /// Sampler for query batches (the loss the outer update minimizes).
    pub outer_sampler: SamplerSpec,
    /// Inner step size.
    pub gamma: f64,
    /// Weight of the support loss at the unadapted parameters.
    #[serde(default)]
    pub beta: f64,
    pub meta_steps: usize,
    pub support_batch: usize,
    pub query_batch: usize,
    pub epochs: usize,
    /// Outer updates per epoch; unset means one pass of the support stream,
    /// `ceil(n / (support_batch * meta_steps))`.
    #[serde(default)]
    pub outer_steps_per_epoch: Option<usize>,
    #[serde(default)]
    pub first_order: bool,
    /// Outer optimizer; its learning rate is the outer rate.
    pub optimizer: OptimizerSpec,
    pub schedule: ScheduleSpec,
    #[serde(default)]
    pub loss: LossSpec,
    #[serde(default)]
    pub accumulation: Accumulation,
    #[serde(default = "default_cap")]
    pub grad_norm_cap: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_cap() -> f64 {
    1e4
}

impl MetaConfig {
    pub fn validate(&self) -> Result<()> {
        self.inner_sampler.validate()?;
        self.outer_sampler.validate()?;
        self.optimizer.validate()?;
        self.schedule.validate()?;
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::Config(format!("gamma {} must be finite and >= 0", self.gamma)));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::Config(format!("beta {} must be finite and >= 0", self.beta)));
        }
        if self.meta_steps == 0 || self.support_batch == 0 || self.query_batch == 0 || self.epochs == 0 {
            return Err(Error::Config("meta steps, batch sizes and epochs must be >= 1".into()));
        }
        if self.outer_steps_per_epoch == Some(0) {
            return Err(Error::Config("outer steps per epoch must be >= 1".into()));
        }
        if !(self.grad_norm_cap > 0.0) {
            return Err(Error::Config("gradient norm cap must be > 0".into()));
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

#[derive(Clone, Debug)]
pub struct MetaGradient {
    pub grads: Vec<Tensor>,
    /// Accumulated `L_Z(θ') + β L_X(θ)` (summed or averaged like the gradient).
    pub objective: f64,
    pub grad_norm: f64,
}

/// Gradient of the accumulated meta objective
/// `Σ_m [ L_Z,m(θ − γ ∇L_X,m(θ)) + β L_X,m(θ) ]` with respect to `θ`.
///
/// Every step adapts from the same `θ`, so the gradient of the sum is the
/// sum of per-step gradients; each step gets its own tape. Unless
/// `first_order`, the inner gradient stays on the graph and the result
/// includes the Hessian term `−γ H_X ∇L_Z(θ')`.
///
/// `support_loss(tape, θ, m)` and `query_loss(tape, θ', m)` build the losses
/// of meta step `m`.
pub fn meta_gradient<FX, FZ>(
    theta: &[Tensor],
    gamma: f64,
    beta: f64,
    meta_steps: usize,
    first_order: bool,
    accumulation: Accumulation,
    mut support_loss: FX,
    mut query_loss: FZ,
) -> Result<MetaGradient>
where
    FX: FnMut(&mut Tape, &[Var], usize) -> Result<Var>,
    FZ: FnMut(&mut Tape, &[Var], usize) -> Result<Var>,
{
    let mut acc = None;
    let mut objective = 0.0;
    for m in 0..meta_steps {
        let mut tape = Tape::new();
        let th: Vec<Var> = theta.iter().map(|p| tape.leaf(p.clone())).collect();
        let lx = support_loss(&mut tape, &th, m)?;
        let g = tape.grad(lx, &th, !first_order)?;
        let mut adapted = Vec::with_capacity(th.len());
        for (&p, &gi) in th.iter().zip(&g) {
            let step = tape.scale(gi, gamma);
            adapted.push(tape.sub(p, step)?);
        }
        let lz = query_loss(&mut tape, &adapted, m)?;
        let total = if beta != 0.0 {
            let weighted = tape.scale(lx, beta);
            tape.add(lz, weighted)?
        } else {
            lz
        };
        let value = tape.value(total).item();
        if !value.is_finite() {
            return Err(Error::Diverged(format!("meta step {m}: objective is {value}")));
        }
        objective += value;
        add_into(&mut acc, tape.grad_values(total, &th)?);
    }
    let grads = finish(acc, accumulation, meta_steps);
    if accumulation == Accumulation::Mean {
        objective /= meta_steps as f64;
    }
    let norm = grad_norm(&grads);
    Ok(MetaGradient {
        grads,
        objective,
        grad_norm: norm,
    })
}

/// Dropout streams for the support and query forwards.
pub struct MetaRngs {
    pub support_dropout: Rng,
    pub query_dropout: Rng,
}

impl MetaRngs {
    pub fn new(seed: u64) -> Self {
        MetaRngs {
            support_dropout: rng_from(seed, salt::SUPPORT_DROPOUT),
            query_dropout: rng_from(seed, salt::DROPOUT),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepStats {
    pub objective: f64,
    pub grad_norm: f64,
}

/// One outer update: `meta_steps` support/query batch pairs, all adapted
/// from the current parameters, then a single optimizer step on the
/// accumulated gradient.
pub fn metabalance_step(
    model: &mut Mlp,
    optimizer: &mut Optimizer,
    support: &mut BatchStream,
    query: &mut BatchStream,
    rngs: &mut MetaRngs,
    config: &MetaConfig,
    lr: f64,
) -> Result<StepStats> {
    let support_batches = (0..config.meta_steps)
        .map(|_| support.next_batch())
        .collect::<Result<Vec<_>>>()?;
    let query_batches = (0..config.meta_steps)
        .map(|_| query.next_batch())
        .collect::<Result<Vec<_>>>()?;
    let net: &Mlp = model;
    let MetaRngs {
        support_dropout,
        query_dropout,
    } = rngs;
    let mg = meta_gradient(
        net.params(),
        config.gamma,
        config.beta,
        config.meta_steps,
        config.first_order,
        config.accumulation,
        |tape, th, m| {
            batch_loss(tape, net, th, &support_batches[m], &config.loss, &mut ForwardMode::Train(support_dropout))
        },
        |tape, th, m| batch_loss(tape, net, th, &query_batches[m], &config.loss, &mut ForwardMode::Train(query_dropout)),
    )?;
    if !mg.grad_norm.is_finite() || mg.grad_norm > config.grad_norm_cap {
        return Err(Error::Diverged(format!(
            "meta-gradient norm {:.4e} exceeds cap {:.1e} (objective {:.6})",
            mg.grad_norm, config.grad_norm_cap, mg.objective
        )));
    }
    let names = model.param_names();
    optimizer.step(model.params_mut(), &mg.grads, &names, lr)?;
    Ok(StepStats {
        objective: mg.objective,
        grad_norm: mg.grad_norm,
    })
}

/// Runs `epochs` epochs of [`metabalance_step`]. Support batches come from
/// `inner_sampler`, query batches from `outer_sampler`, both over `train`.
pub fn train_metabalance(model: &mut Mlp, train: &Dataset, config: &MetaConfig, monitor: Monitor<'_>) -> Result<TrainLog> {
    config.validate()?;
    check_model_data(model, train)?;
    let mut support = BatchStream::new(train, &config.inner_sampler, config.support_batch, config.seed, salt::SUPPORT)?;
    let mut query = BatchStream::new(train, &config.outer_sampler, config.query_batch, config.seed, salt::DATA)?;
    let steps = config
        .outer_steps_per_epoch
        .unwrap_or_else(|| support.pool_len().div_ceil(config.support_batch * config.meta_steps));
    let mut rngs = MetaRngs::new(config.seed);
    let mut optimizer = Optimizer::new(config.optimizer.clone())?;
    let mut recorder = Recorder::new(config.seed, train, monitor, &config.loss, config.epochs);
    for epoch in 0..config.epochs {
        let lr = config.schedule.lr_at(epoch, config.optimizer.lr)?;
        let mut objective = 0.0;
        for s in 0..steps {
            let stats = metabalance_step(model, &mut optimizer, &mut support, &mut query, &mut rngs, config, lr)
                .map_err(|e| match e {
                    Error::Diverged(m) | Error::NonFinite(m) => Error::Diverged(format!("epoch {epoch}, outer step {s}: {m}")),
                    other => other,
                })?;
            objective += stats.objective;
        }
        recorder.record(model, epoch, lr, steps, objective / steps as f64)?;
    }
    Ok(recorder.log)
}
