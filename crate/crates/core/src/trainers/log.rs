use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::evaluation::{evaluate, mean_loss};
use crate::nn::{LossSpec, Mlp};
use crate::{Error, Result};

/// Metrics of one dataset at the end of an epoch, dropout off.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub loss: f64,
    pub accuracy: f64,
    pub roc_auc: Option<f64>,
    /// One entry per class; `None` when the class has no rows.
    pub per_class: Vec<Option<f64>>,
}

impl Snapshot {
    pub fn measure(model: &Mlp, data: &Dataset, loss: &LossSpec) -> Result<Self> {
        let report = evaluate(model, data)?;
        Ok(Snapshot {
            loss: mean_loss(model, data, loss)?,
            accuracy: report.overall_accuracy,
            roc_auc: report.roc_auc,
            per_class: (0..data.n_classes())
                .map(|c| report.per_class_accuracy.get(&c).copied())
                .collect(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    /// Optimizer updates taken in this epoch.
    pub updates: usize,
    /// Mean training objective over the epoch's updates.
    pub objective: f64,
    pub train: Option<Snapshot>,
    pub test: Option<Snapshot>,
    pub wall_time_s: f64,
}

/// Per-epoch training curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub seed: u64,
    pub n_classes: usize,
    pub records: Vec<EpochRecord>,
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:?}")).unwrap_or_default()
}

fn parse_opt(s: &str) -> Result<Option<f64>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse()
        .map(Some)
        .map_err(|_| Error::Data(format!("bad number {s:?} in training log")))
}

impl TrainLog {
    pub fn new(seed: u64, n_classes: usize) -> Self {
        TrainLog {
            seed,
            n_classes,
            records: Vec::new(),
        }
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }

    fn header(&self) -> Vec<String> {
        let mut h: Vec<String> = ["epoch", "seed", "lr", "updates", "objective", "wall_time_s"]
            .map(String::from)
            .to_vec();
        for split in ["train", "test"] {
            for f in ["loss", "accuracy", "roc_auc"] {
                h.push(format!("{split}_{f}"));
            }
            for c in 0..self.n_classes {
                h.push(format!("{split}_acc_class{c}"));
            }
        }
        h
    }

    /// One row per epoch; metrics that were not measured are empty cells.
    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let io_err = |e: csv::Error| Error::io(path, std::io::Error::other(e.to_string()));
        let mut w = csv::Writer::from_path(path).map_err(io_err)?;
        w.write_record(self.header())?;
        for r in &self.records {
            let mut row = vec![
                r.epoch.to_string(),
                self.seed.to_string(),
                format!("{:?}", r.lr),
                r.updates.to_string(),
                format!("{:?}", r.objective),
                format!("{:?}", r.wall_time_s),
            ];
            for snap in [&r.train, &r.test] {
                match snap {
                    Some(s) => {
                        row.push(format!("{:?}", s.loss));
                        row.push(format!("{:?}", s.accuracy));
                        row.push(opt(s.roc_auc));
                        row.extend((0..self.n_classes).map(|c| opt(s.per_class.get(c).copied().flatten())));
                    }
                    None => row.extend(std::iter::repeat_n(String::new(), 3 + self.n_classes)),
                }
            }
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load_csv(path: &Path) -> Result<TrainLog> {
        let mut r = csv::Reader::from_path(path).map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))?;
        let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
        let n_classes = header.iter().filter(|h| h.starts_with("train_acc_class")).count();
        let mut log = TrainLog::new(0, n_classes);
        for rec in r.records() {
            let rec = rec?;
            let f = |i: usize| rec.get(i).unwrap_or("");
            let num = |i: usize| -> Result<f64> { parse_opt(f(i))?.ok_or_else(|| Error::Data(format!("missing {}", header[i]))) };
            log.seed = f(1).parse().map_err(|_| Error::Data("bad seed in training log".into()))?;
            let mut snaps = Vec::new();
            for s in 0..2 {
                let base = 6 + s * (3 + n_classes);
                let loss = parse_opt(f(base))?;
                snaps.push(match loss {
                    None => None,
                    Some(loss) => Some(Snapshot {
                        loss,
                        accuracy: num(base + 1)?,
                        roc_auc: parse_opt(f(base + 2))?,
                        per_class: (0..n_classes).map(|c| parse_opt(f(base + 3 + c))).collect::<Result<_>>()?,
                    }),
                });
            }
            let test = snaps.pop().unwrap();
            let train = snaps.pop().unwrap();
            log.records.push(EpochRecord {
                epoch: num(0)? as usize,
                lr: num(2)?,
                updates: num(3)? as usize,
                objective: num(4)?,
                wall_time_s: num(5)?,
                train,
                test,
            });
        }
        Ok(log)
    }
}

/// What to measure at the end of each epoch.
#[derive(Clone, Copy)]
pub struct Monitor<'a> {
    pub test: Option<&'a Dataset>,
    /// Measure every this many epochs (and always after the last); 0 measures only the last.
    pub every: usize,
}

impl Default for Monitor<'_> {
    fn default() -> Self {
        Monitor { test: None, every: 1 }
    }
}

pub(crate) struct Recorder<'a> {
    pub log: TrainLog,
    monitor: Monitor<'a>,
    train: &'a Dataset,
    loss: LossSpec,
    epochs: usize,
    start: Instant,
}

impl<'a> Recorder<'a> {
    pub fn new(seed: u64, train: &'a Dataset, monitor: Monitor<'a>, loss: &LossSpec, epochs: usize) -> Self {
        Recorder {
            log: TrainLog::new(seed, train.n_classes()),
            monitor,
            train,
            loss: loss.clone(),
            epochs,
            start: Instant::now(),
        }
    }

    pub fn record(&mut self, model: &Mlp, epoch: usize, lr: f64, updates: usize, objective: f64) -> Result<()> {
        let last = epoch + 1 == self.epochs;
        let due = last || (self.monitor.every > 0 && (epoch + 1) % self.monitor.every == 0);
        let (train, test) = if due {
            let train = Snapshot::measure(model, self.train, &self.loss)?;
            let test = self.monitor.test.map(|t| Snapshot::measure(model, t, &self.loss)).transpose()?;
            (Some(train), test)
        } else {
            (None, None)
        };
        if let Some(t) = &train {
            log::info!(
                "epoch {epoch}: objective {objective:.5}, train loss {:.5}, train acc {:.4}{}",
                t.loss,
                t.accuracy,
                test.as_ref()
                    .map(|s| format!(", test acc {:.4}", s.accuracy))
                    .unwrap_or_default()
            );
        }
        self.log.records.push(EpochRecord {
            epoch,
            lr,
            updates,
            objective,
            train,
            test,
            wall_time_s: self.start.elapsed().as_secs_f64(),
        });
        Ok(())
    }
}
