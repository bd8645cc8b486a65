use serde::{Deserialize, Serialize};

use crate::autodiff::{Real, Tape, Tensor, Var};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    #[default]
    Bce,
    CrossEntropy,
    Focal,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub kind: LossKind,
    #[serde(default)]
    pub focal_gamma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_weights: Option<Vec<f64>>,
}

impl LossSpec {
    pub fn bce() -> Self {
        LossSpec {
            kind: LossKind::Bce,
            ..Default::default()
        }
    }

    pub fn cross_entropy() -> Self {
        LossSpec {
            kind: LossKind::CrossEntropy,
            ..Default::default()
        }
    }

    pub fn focal(gamma: f64) -> Self {
        LossSpec {
            kind: LossKind::Focal,
            focal_gamma: gamma,
            class_weights: None,
        }
    }

    pub fn validate(&self, n_classes: usize) -> Result<()> {
        if self.kind == LossKind::Focal && !(self.focal_gamma >= 0.0 && self.focal_gamma.is_finite()) {
            return Err(Error::Config(format!("focal gamma {} must be finite and >= 0", self.focal_gamma)));
        }
        if let Some(w) = &self.class_weights {
            if w.len() != n_classes || w.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
                return Err(Error::Config(format!(
                    "class weights {w:?} need {n_classes} positive entries"
                )));
            }
        }
        Ok(())
    }
}

/// Training targets: hard class indices or per-row class distributions (`[n, n_classes]` row-major).
#[derive(Clone, Copy, Debug)]
pub enum Targets<'a> {
    Hard(&'a [usize]),
    Soft { probs: &'a [f64], n_classes: usize },
}

impl Targets<'_> {
    fn len(&self) -> usize {
        match self {
            Targets::Hard(l) => l.len(),
            Targets::Soft { probs, n_classes } => probs.len() / n_classes.max(&1),
        }
    }

    /// Dense `[n, n_classes]` target distribution, validated.
    fn dense(&self, n_classes: usize) -> Result<Vec<f64>> {
        match *self {
            Targets::Hard(labels) => {
                let mut out = vec![0.0; labels.len() * n_classes];
                for (i, &y) in labels.iter().enumerate() {
                    if y >= n_classes {
                        return Err(Error::Target(format!(
                            "class index {y} at row {i} but the model predicts {n_classes} classes"
                        )));
                    }
                    out[i * n_classes + y] = 1.0;
                }
                Ok(out)
            }
            Targets::Soft { probs, n_classes: c } => {
                if c != n_classes || probs.len() % c != 0 {
                    return Err(Error::Target(format!(
                        "soft targets have {c} columns, model predicts {n_classes} classes"
                    )));
                }
                for (i, row) in probs.chunks(c).enumerate() {
                    let s: f64 = row.iter().sum();
                    if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) || (s - 1.0).abs() > 1e-9 {
                        return Err(Error::Target(format!("row {i} is not a distribution: {row:?}")));
                    }
                }
                Ok(probs.to_vec())
            }
        }
    }
}

/// Weighted mean loss over the batch, as a differentiable scalar.
///
/// Single-logit models are scored as binary (`σ(z)` is the positive-class
/// probability); `bce` and `cross_entropy` both give binary cross-entropy there.
/// With class weights, each row's weight is `Σ_c w_c y_c` and the loss is
/// normalized by the total weight.
pub fn loss<T: Real>(tape: &mut Tape<T>, logits: Var, targets: Targets<'_>, spec: &LossSpec) -> Result<Var> {
    let (n, out_dim) = match tape.shape(logits) {
        [n, c] => (*n, *c),
        s => return Err(Error::shape("loss", format!("logits must be [n, C], got {s:?}"))),
    };
    if tape.value(logits).has_non_finite() {
        return Err(Error::NonFinite("logits contain NaN or infinity".into()));
    }
    let binary = out_dim == 1;
    let n_classes = if binary { 2 } else { out_dim };
    spec.validate(n_classes)?;
    if targets.len() != n {
        return Err(Error::Target(format!("{} targets for {n} rows", targets.len())));
    }
    if !binary && spec.kind == LossKind::Bce {
        return Err(Error::Config("bce needs a single-logit model".into()));
    }
    let y = targets.dense(n_classes)?;

    // row/class coefficient matrix A with Σ A = 1
    let weights = spec.class_weights.clone().unwrap_or_else(|| vec![1.0; n_classes]);
    let mut coef: Vec<f64> = y
        .chunks(n_classes)
        .flat_map(|row| row.iter().zip(&weights).map(|(p, w)| p * w).collect::<Vec<_>>())
        .collect();
    let total: f64 = coef.iter().sum();
    if total <= 0.0 {
        return Err(Error::Target("targets carry zero total weight".into()));
    }
    coef.iter_mut().for_each(|c| *c /= total);

    let gamma = if spec.kind == LossKind::Focal { spec.focal_gamma } else { 0.0 };

    if binary {
        let col = |c: usize| -> Tensor<T> {
            Tensor::from_parts(vec![n, 1], (0..n).map(|i| T::lit(coef[i * 2 + c])).collect())
        };
        let a0 = tape.constant(col(0));
        let a1 = tape.constant(col(1));
        let neg_z = tape.neg(logits);
        // -log σ(z) = softplus(-z), -log(1 - σ(z)) = softplus(z)
        let mut nll1 = tape.softplus(neg_z);
        let mut nll0 = tape.softplus(logits);
        if gamma > 0.0 {
            let g = T::lit(gamma);
            let p0 = tape.sigmoid(neg_z);
            let p1 = tape.sigmoid(logits);
            let f1 = tape.pow_scalar(p0, g);
            let f0 = tape.pow_scalar(p1, g);
            nll1 = tape.mul(f1, nll1)?;
            nll0 = tape.mul(f0, nll0)?;
        }
        let t1 = tape.mul(a1, nll1)?;
        let t0 = tape.mul(a0, nll0)?;
        let s = tape.add(t1, t0)?;
        return Ok(tape.sum(s));
    }

    let a = tape.constant(Tensor::from_parts(
        vec![n, n_classes],
        coef.iter().map(|&c| T::lit(c)).collect(),
    ));
    let logp = tape.log_softmax_rows(logits)?;
    let mut term = logp;
    if gamma > 0.0 {
        let p = tape.exp(logp);
        let q = tape.neg(p);
        let q = tape.add_scalar(q, T::one());
        let f = tape.pow_scalar(q, T::lit(gamma));
        term = tape.mul(f, logp)?;
    }
    let weighted = tape.mul(a, term)?;
    let s = tape.sum(weighted);
    Ok(tape.neg(s))
}
