//! Metrics and post-hoc decision rules.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::Tape;
use crate::data::Dataset;
use crate::nn::{loss, LossSpec, Mlp, Targets};
use crate::{Error, Result};

fn check_binary(scores: &[f64], labels: &[usize]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::Evaluation(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Evaluation("scores contain NaN".into()));
    }
    if let Some(&y) = labels.iter().find(|&&y| y > 1) {
        return Err(Error::Evaluation(format!("binary metric got label {y}")));
    }
    let pos = labels.iter().filter(|&&y| y == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Evaluation("ROC-AUC needs both classes in the labels".into()));
    }
    Ok((pos, neg))
}

/// Mann-Whitney ROC-AUC: the fraction of (positive, negative) pairs ranked
/// correctly, ties counting one half. Label 1 is the positive class.
pub fn roc_auc(scores: &[f64], labels: &[usize]) -> Result<f64> {
    let (pos, neg) = check_binary(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // sum of average (1-based) ranks of the positives
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += avg * order[i..=j].iter().filter(|&&k| labels[k] == 1).count() as f64;
        i = j + 1;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// ROC points `(fpr, tpr)` from `(0, 0)` to `(1, 1)`, one per distinct score.
pub fn roc_curve(scores: &[f64], labels: &[usize]) -> Result<Vec<(f64, f64)>> {
    let (pos, neg) = check_binary(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }
    Ok(points)
}

pub fn save_roc_csv(points: &[(f64, f64)], path: &Path) -> Result<()> {
    let io_err = |e: csv::Error| Error::io(path, std::io::Error::other(e.to_string()));
    let mut w = csv::Writer::from_path(path).map_err(io_err)?;
    w.write_record(["fpr", "tpr"])?;
    for (f, t) in points {
        w.write_record([format!("{f:?}"), format!("{t:?}")])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `confusion[true][predicted]` counts.
pub fn confusion_matrix(predictions: &[usize], labels: &[usize], n_classes: usize) -> Result<Vec<Vec<usize>>> {
    if predictions.len() != labels.len() {
        return Err(Error::Evaluation(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    let mut m = vec![vec![0; n_classes]; n_classes];
    for (&p, &y) in predictions.iter().zip(labels) {
        if p >= n_classes || y >= n_classes {
            return Err(Error::Evaluation(format!("class index out of range: {p} / {y}")));
        }
        m[y][p] += 1;
    }
    Ok(m)
}

/// Accuracy for every class that occurs in `labels`, plus the confusion matrix.
pub fn per_class_accuracy(
    predictions: &[usize],
    labels: &[usize],
    n_classes: usize,
) -> Result<(BTreeMap<usize, f64>, Vec<Vec<usize>>)> {
    let confusion = confusion_matrix(predictions, labels, n_classes)?;
    let acc = confusion
        .iter()
        .enumerate()
        .filter_map(|(c, row)| {
            let total: usize = row.iter().sum();
            (total > 0).then(|| (c, row[c] as f64 / total as f64))
        })
        .collect();
    Ok((acc, confusion))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub roc_auc: Option<f64>,
    pub overall_accuracy: f64,
    /// Mean of the per-class accuracies.
    pub balanced_accuracy: f64,
    pub per_class_accuracy: BTreeMap<usize, f64>,
    pub confusion: Vec<Vec<usize>>,
    pub n_test: usize,
}

impl MetricsReport {
    /// `positive_scores`, when given for a two-class problem, adds ROC-AUC.
    pub fn from_predictions(
        predictions: &[usize],
        labels: &[usize],
        n_classes: usize,
        positive_scores: Option<&[f64]>,
    ) -> Result<Self> {
        let (per_class, confusion) = per_class_accuracy(predictions, labels, n_classes)?;
        let n = labels.len();
        let correct: usize = (0..n_classes).map(|c| confusion[c][c]).sum();
        let roc_auc = match positive_scores {
            Some(s) if n_classes == 2 => Some(roc_auc(s, labels)?),
            _ => None,
        };
        Ok(MetricsReport {
            roc_auc,
            overall_accuracy: if n == 0 { 0.0 } else { correct as f64 / n as f64 },
            balanced_accuracy: per_class.values().sum::<f64>() / per_class.len().max(1) as f64,
            per_class_accuracy: per_class,
            confusion,
            n_test: n,
        })
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Row-wise argmax; ties go to the lower class index.
pub fn argmax_rows(scores: &[f64], n_classes: usize) -> Vec<usize> {
    scores
        .chunks(n_classes)
        .map(|row| {
            let mut best = 0;
            for (c, &s) in row.iter().enumerate() {
                if s > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect()
}

/// Scores divided by training class frequencies, row-wise.
pub fn prior_adjusted_scores(scores: &[f64], frequencies: &[f64]) -> Result<Vec<f64>> {
    let c = frequencies.len();
    if c == 0 || scores.len() % c != 0 {
        return Err(Error::Evaluation("score matrix width does not match frequencies".into()));
    }
    if frequencies.iter().any(|&f| !(f > 0.0 && f.is_finite())) {
        return Err(Error::Evaluation(format!(
            "class frequencies must be positive, got {frequencies:?}"
        )));
    }
    let total: f64 = frequencies.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::Evaluation(format!("class frequencies sum to {total}, not 1")));
    }
    Ok(scores
        .chunks(c)
        .flat_map(|row| row.iter().zip(frequencies).map(|(s, f)| s / f).collect::<Vec<_>>())
        .collect())
}

/// Predictions after dividing each class score by its training frequency.
pub fn prior_adjust(scores: &[f64], frequencies: &[f64]) -> Result<Vec<usize>> {
    let adjusted = prior_adjusted_scores(scores, frequencies)?;
    Ok(argmax_rows(&adjusted, frequencies.len()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdMatch {
    /// Predict class 1 when `score > threshold`.
    pub threshold: f64,
    pub majority_class: usize,
    pub majority_accuracy: f64,
    pub report: MetricsReport,
}

/// Picks the decision threshold whose majority-class accuracy is closest
/// to `target`. Candidates are `-inf`, the midpoints between consecutive
/// distinct scores, and `+inf`; ties go to the lower threshold. The majority
/// class is the more frequent label (the lower label on a tie).
pub fn threshold_match(scores: &[f64], labels: &[usize], target: f64) -> Result<ThresholdMatch> {
    if !(0.0..=1.0).contains(&target) {
        return Err(Error::Evaluation(format!("target accuracy {target} outside [0, 1]")));
    }
    let (pos, neg) = check_binary(scores, labels)?;
    let majority = if pos > neg { 1 } else { 0 };
    let n_major = pos.max(neg) as f64;

    let mut sorted: Vec<f64> = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let mut candidates = vec![f64::NEG_INFINITY];
    candidates.extend(sorted.windows(2).map(|w| w[0] + (w[1] - w[0]) / 2.0));
    candidates.push(f64::INFINITY);

    // majority rows with score <= t, swept in increasing t
    let mut major_scores: Vec<f64> = scores
        .iter()
        .zip(labels)
        .filter(|(_, &y)| y == majority)
        .map(|(&s, _)| s)
        .collect();
    major_scores.sort_by(f64::total_cmp);
    let mut below = 0;
    let mut best: Option<(f64, f64, f64)> = None; // (gap, threshold, accuracy)
    for &t in &candidates {
        while below < major_scores.len() && major_scores[below] <= t {
            below += 1;
        }
        let correct = if majority == 0 { below } else { major_scores.len() - below };
        let acc = correct as f64 / n_major;
        let gap = (acc - target).abs();
        if best.is_none_or(|b| gap < b.0) {
            best = Some((gap, t, acc));
        }
    }
    let (_, threshold, majority_accuracy) = best.expect("at least two candidates");
    let preds: Vec<usize> = scores.iter().map(|&s| usize::from(s > threshold)).collect();
    let report = MetricsReport::from_predictions(&preds, labels, 2, Some(scores))?;
    Ok(ThresholdMatch {
        threshold,
        majority_class: majority,
        majority_accuracy,
        report,
    })
}

const EVAL_CHUNK: usize = 4096;

/// Eval-mode class probabilities `[n, n_classes]`, computed in chunks.
pub fn predict_proba(model: &Mlp, data: &Dataset) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(data.n_rows() * model.spec().n_classes());
    let rows: Vec<usize> = (0..data.n_rows()).collect();
    for chunk in rows.chunks(EVAL_CHUNK) {
        let x = data.select(chunk).features_tensor();
        out.extend_from_slice(model.class_probabilities(&x)?.data());
    }
    Ok(out)
}

/// Argmax metrics (plus ROC-AUC on the class-1 probability for binary
/// models) with dropout disabled.
pub fn evaluate(model: &Mlp, data: &Dataset) -> Result<MetricsReport> {
    let c = model.spec().n_classes();
    let probs = predict_proba(model, data)?;
    let preds = argmax_rows(&probs, c);
    let positive: Option<Vec<f64>> = (c == 2).then(|| probs.chunks(2).map(|r| r[1]).collect());
    let auc_ok = c == 2 && data.count(0) > 0 && data.count(1) > 0;
    MetricsReport::from_predictions(
        &preds,
        data.labels(),
        c,
        if auc_ok { positive.as_deref() } else { None },
    )
}

/// Mean eval-mode loss over the whole dataset (hard labels).
pub fn mean_loss(model: &Mlp, data: &Dataset, spec: &LossSpec) -> Result<f64> {
    let rows: Vec<usize> = (0..data.n_rows()).collect();
    let (mut total, mut weight) = (0.0, 0.0);
    for chunk in rows.chunks(EVAL_CHUNK) {
        let part = data.select(chunk);
        let logits = model.logits(&part.features_tensor())?;
        let mut tape: Tape = Tape::new();
        let z = tape.constant(logits);
        let l = tape.no_grad(|t| loss(t, z, Targets::Hard(part.labels()), spec))?;
        let w: f64 = match &spec.class_weights {
            Some(cw) => part.labels().iter().map(|&y| cw[y]).sum(),
            None => part.n_rows() as f64,
        };
        total += tape.value(l).item() * w;
        weight += w;
    }
    if weight == 0.0 {
        return Err(Error::Evaluation("loss over an empty dataset".into()));
    }
    Ok(total / weight)
}

/// Probability of class 1 for a binary model, one per row.
pub fn positive_scores(model: &Mlp, data: &Dataset) -> Result<Vec<f64>> {
    if model.spec().n_classes() != 2 {
        return Err(Error::Evaluation("positive-class scores need a two-class model".into()));
    }
    Ok(predict_proba(model, data)?.chunks(2).map(|r| r[1]).collect())
}
