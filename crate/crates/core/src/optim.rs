//! Parameter updates and learning-rate schedules.

use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Adam,
    SgdNesterov,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSpec {
    pub kind: OptimizerKind,
    pub lr: f64,
    #[serde(default)]
    pub momentum: f64,
    #[serde(default)]
    pub weight_decay: f64,
    #[serde(default = "default_betas")]
    pub adam_betas: (f64, f64),
    #[serde(default = "default_eps")]
    pub adam_eps: f64,
}

fn default_betas() -> (f64, f64) {
    (0.9, 0.999)
}

fn default_eps() -> f64 {
    1e-8
}

impl OptimizerSpec {
    pub fn adam(lr: f64) -> Self {
        OptimizerSpec {
            kind: OptimizerKind::Adam,
            lr,
            momentum: 0.0,
            weight_decay: 0.0,
            adam_betas: default_betas(),
            adam_eps: default_eps(),
        }
    }

    pub fn sgd_nesterov(lr: f64, momentum: f64, weight_decay: f64) -> Self {
        OptimizerSpec {
            kind: OptimizerKind::SgdNesterov,
            lr,
            momentum,
            weight_decay,
            adam_betas: default_betas(),
            adam_eps: default_eps(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.lr, self.momentum, self.weight_decay, self.adam_betas.0, self.adam_betas.1, self.adam_eps]
            .iter()
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::Config(format!("non-finite optimizer setting in {self:?}")));
        }
        if self.lr < 0.0 {
            return Err(Error::Config(format!("learning rate {} is negative", self.lr)));
        }
        if self.weight_decay < 0.0 {
            return Err(Error::Config(format!("weight decay {} is negative", self.weight_decay)));
        }
        match self.kind {
            OptimizerKind::SgdNesterov if !(0.0..1.0).contains(&self.momentum) => {
                Err(Error::Config(format!("momentum {} outside [0, 1)", self.momentum)))
            }
            OptimizerKind::Adam
                if !(0.0..1.0).contains(&self.adam_betas.0)
                    || !(0.0..1.0).contains(&self.adam_betas.1)
                    || self.adam_eps <= 0.0 =>
            {
                Err(Error::Config(format!("invalid adam betas/eps in {self:?}")))
            }
            _ => Ok(()),
        }
    }
}

/// Per-parameter running statistics. `first` holds the momentum buffer (SGD)
/// or first moment (Adam); `second` the Adam second moment.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub step: u64,
    pub first: Vec<Vec<f64>>,
    pub second: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Optimizer {
    spec: OptimizerSpec,
    state: OptimizerState,
}

impl Optimizer {
    pub fn new(spec: OptimizerSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Optimizer {
            spec,
            state: OptimizerState::default(),
        })
    }

    pub fn with_state(spec: OptimizerSpec, state: OptimizerState) -> Result<Self> {
        spec.validate()?;
        Ok(Optimizer { spec, state })
    }

    pub fn spec(&self) -> &OptimizerSpec {
        &self.spec
    }

    pub fn state(&self) -> &OptimizerState {
        &self.state
    }

    /// One update with learning rate `lr`. Weight decay is added to the
    /// gradient as an L2 term before the moment updates.
    pub fn step(&mut self, params: &mut [Tensor], grads: &[Tensor], names: &[String], lr: f64) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::Config(format!(
                "{} parameters but {} gradients",
                params.len(),
                grads.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.shape() != g.shape() {
                return Err(Error::shape(
                    "optimizer step",
                    format!("parameter {} {:?} vs gradient {:?}", name(names, i), p.shape(), g.shape()),
                ));
            }
            if g.has_non_finite() {
                return Err(Error::NonFinite(format!("gradient of parameter {}", name(names, i))));
            }
        }
        if self.state.first.is_empty() {
            self.state.first = params.iter().map(|p| vec![0.0; p.len()]).collect();
            if self.spec.kind == OptimizerKind::Adam {
                self.state.second = params.iter().map(|p| vec![0.0; p.len()]).collect();
            }
        }
        self.state.step += 1;
        let wd = self.spec.weight_decay;
        match self.spec.kind {
            OptimizerKind::SgdNesterov => {
                let mu = self.spec.momentum;
                for ((p, g), buf) in params.iter_mut().zip(grads).zip(&mut self.state.first) {
                    for ((w, &gi), b) in p.data_mut().iter_mut().zip(g.data()).zip(buf.iter_mut()) {
                        let d = gi + wd * *w;
                        *b = mu * *b + d;
                        *w -= lr * (d + mu * *b);
                    }
                }
            }
            OptimizerKind::Adam => {
                let (b1, b2) = self.spec.adam_betas;
                let eps = self.spec.adam_eps;
                let t = self.state.step as i32;
                let c1 = 1.0 - b1.powi(t);
                let c2 = 1.0 - b2.powi(t);
                for (((p, g), m), v) in params
                    .iter_mut()
                    .zip(grads)
                    .zip(&mut self.state.first)
                    .zip(&mut self.state.second)
                {
                    for (((w, &gi), mi), vi) in
                        p.data_mut().iter_mut().zip(g.data()).zip(m.iter_mut()).zip(v.iter_mut())
                    {
                        let d = gi + wd * *w;
                        *mi = b1 * *mi + (1.0 - b1) * d;
                        *vi = b2 * *vi + (1.0 - b2) * d * d;
                        let m_hat = *mi / c1;
                        let v_hat = *vi / c2;
                        *w -= lr * m_hat / (v_hat.sqrt() + eps);
                    }
                }
            }
        }
        Ok(())
    }
}

fn name(names: &[String], i: usize) -> String {
    names.get(i).cloned().unwrap_or_else(|| format!("#{i}"))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    #[default]
    Constant,
    CosineAnnealing,
    MultiStep,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSpec {
    pub kind: ScheduleKind,
    pub total_epochs: usize,
    #[serde(default)]
    pub milestones: Vec<usize>,
    #[serde(default = "default_decay")]
    pub decay_factor: f64,
}

fn default_decay() -> f64 {
    0.1
}

impl ScheduleSpec {
    pub fn constant(total_epochs: usize) -> Self {
        ScheduleSpec {
            kind: ScheduleKind::Constant,
            total_epochs,
            milestones: Vec::new(),
            decay_factor: default_decay(),
        }
    }

    pub fn cosine(total_epochs: usize) -> Self {
        ScheduleSpec {
            kind: ScheduleKind::CosineAnnealing,
            ..Self::constant(total_epochs)
        }
    }

    pub fn multi_step(total_epochs: usize, milestones: Vec<usize>, decay_factor: f64) -> Self {
        ScheduleSpec {
            kind: ScheduleKind::MultiStep,
            total_epochs,
            milestones,
            decay_factor,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.total_epochs == 0 {
            return Err(Error::Config("schedule needs at least one epoch".into()));
        }
        if self.kind == ScheduleKind::MultiStep {
            let increasing = self.milestones.windows(2).all(|w| w[0] < w[1]);
            let in_range = self.milestones.iter().all(|&m| m < self.total_epochs);
            if !increasing || !in_range {
                return Err(Error::Config(format!(
                    "milestones {:?} must be strictly increasing and below {}",
                    self.milestones, self.total_epochs
                )));
            }
        }
        if !self.decay_factor.is_finite() {
            return Err(Error::Config("decay factor must be finite".into()));
        }
        Ok(())
    }

    /// Learning rate for 0-based `epoch`.
    pub fn lr_at(&self, epoch: usize, base_lr: f64) -> Result<f64> {
        if epoch >= self.total_epochs {
            return Err(Error::Config(format!(
                "epoch {epoch} outside schedule of {} epochs",
                self.total_epochs
            )));
        }
        Ok(match self.kind {
            ScheduleKind::Constant => base_lr,
            ScheduleKind::CosineAnnealing => {
                let frac = epoch as f64 / self.total_epochs as f64;
                base_lr * 0.5 * (1.0 + (std::f64::consts::PI * frac).cos())
            }
            ScheduleKind::MultiStep => {
                let passed = self.milestones.iter().filter(|&&m| epoch >= m).count();
                base_lr * self.decay_factor.powi(passed as i32)
            }
        })
    }
}
