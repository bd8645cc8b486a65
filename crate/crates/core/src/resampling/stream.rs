use rand::seq::SliceRandom;
use rand::Rng as _;

use super::mixup::mixup_draw;
use super::{resample, SamplerKind, SamplerSpec};
use crate::data::Dataset;
use crate::rng::{rng_from, Rng};
use crate::{Error, Result};

enum Mode {
    /// Class chosen uniformly, then a row uniformly within it.
    Balanced(Vec<Vec<usize>>),
    /// Shuffled passes over a (possibly resampled) pool.
    Pool { rematerialize: bool, mix: bool },
}

/// Endless, deterministic sequence of mini-batches drawn from a dataset
/// under a sampler spec.
///
/// Pool-based streams walk shuffled passes over their pool. By default a
/// batch that straddles the end of a pass is completed from the next pass so
/// every batch is full; [`with_partial_batches`](Self::with_partial_batches)
/// instead ends each pass with a short batch.
pub struct BatchStream {
    source: Dataset,
    spec: SamplerSpec,
    batch_size: usize,
    rng: Rng,
    mode: Mode,
    pool: Dataset,
    order: Vec<usize>,
    cursor: usize,
    passes: usize,
    partial: bool,
}

impl BatchStream {
    pub fn new(source: &Dataset, spec: &SamplerSpec, batch_size: usize, seed: u64, salt: u64) -> Result<Self> {
        spec.validate()?;
        if batch_size == 0 {
            return Err(Error::Config("batch size must be >= 1".into()));
        }
        if source.is_empty() {
            return Err(Error::Data("cannot stream batches from an empty dataset".into()));
        }
        let rng = rng_from(seed, salt);
        let balanced = matches!(spec.kind, SamplerKind::RandomUnder | SamplerKind::RandomOver) && !spec.materialize;
        let mode = if balanced {
            let by_class: Vec<Vec<usize>> = (0..source.n_classes()).map(|c| source.class_indices(c)).collect();
            if let Some(c) = by_class.iter().position(Vec::is_empty) {
                return Err(Error::Sampler {
                    class: c,
                    message: "balanced sampling needs every class to have rows".into(),
                });
            }
            Mode::Balanced(by_class)
        } else {
            Mode::Pool {
                rematerialize: spec.kind.is_smote_family()
                    || matches!(spec.kind, SamplerKind::RandomUnder | SamplerKind::RandomOver),
                mix: spec.kind == SamplerKind::Mixup,
            }
        };
        let mut stream = BatchStream {
            source: source.clone(),
            spec: spec.clone(),
            batch_size,
            rng,
            mode,
            pool: source.clone(),
            order: Vec::new(),
            cursor: 0,
            passes: 0,
            partial: false,
        };
        if let Mode::Pool { .. } = stream.mode {
            if !matches!(spec.kind, SamplerKind::Natural | SamplerKind::Mixup) {
                let s = stream.rng.random();
                stream.pool = resample(source, spec, s)?.dataset;
            }
            stream.start_pass(false)?;
        }
        Ok(stream)
    }

    pub fn with_partial_batches(mut self, partial: bool) -> Self {
        self.partial = partial;
        self
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    /// Rows in the current pool (the source size for balanced streams).
    pub fn pool_len(&self) -> usize {
        match self.mode {
            Mode::Balanced(_) => self.source.n_rows(),
            Mode::Pool { .. } => self.pool.n_rows(),
        }
    }

    /// Number of pool passes started so far.
    pub fn passes(&self) -> usize {
        self.passes
    }

    fn start_pass(&mut self, refresh: bool) -> Result<()> {
        if refresh {
            let s = self.rng.random();
            self.pool = resample(&self.source, &self.spec, s)?.dataset;
        }
        self.order = (0..self.pool.n_rows()).collect();
        self.order.shuffle(&mut self.rng);
        self.cursor = 0;
        self.passes += 1;
        Ok(())
    }

    pub fn next_batch(&mut self) -> Result<Dataset> {
        let (rematerialize, mix) = match &self.mode {
            Mode::Balanced(by_class) => {
                let rows: Vec<usize> = (0..self.batch_size)
                    .map(|_| {
                        let c = self.rng.random_range(0..by_class.len());
                        by_class[c][self.rng.random_range(0..by_class[c].len())]
                    })
                    .collect();
                return Ok(self.source.select(&rows));
            }
            Mode::Pool { rematerialize, mix } => (*rematerialize, *mix),
        };
        let mut batch: Option<Dataset> = None;
        let mut need = self.batch_size;
        while need > 0 {
            if self.cursor == self.order.len() {
                if self.partial && batch.is_some() {
                    break;
                }
                self.start_pass(rematerialize)?;
            }
            let take = need.min(self.order.len() - self.cursor);
            let part = self.pool.select(&self.order[self.cursor..self.cursor + take]);
            self.cursor += take;
            need -= take;
            batch = Some(match batch {
                None => part,
                Some(mut b) => {
                    b.extend(part.features(), part.labels())?;
                    b
                }
            });
        }
        let batch = batch.expect("batch size >= 1");
        if mix {
            return Ok(mixup_draw(&batch, self.spec.mixup_alpha, &mut self.rng)?.dataset);
        }
        Ok(batch)
    }
}
