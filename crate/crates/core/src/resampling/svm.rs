use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmParams {
    /// L2 penalty `lambda` in `lambda/2 |w|^2 + mean hinge`.
    pub regularization: f64,
    pub iterations: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            regularization: 1e-2,
            iterations: 300,
        }
    }
}

impl SvmParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.regularization > 0.0 && self.regularization.is_finite()) || self.iterations == 0 {
            return Err(Error::Config(format!(
                "svm needs regularization > 0 and iterations >= 1, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// Linear soft-margin SVM `sign(w.x + b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearSvm {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearSvm {
    /// Full-batch projected subgradient descent (Pegasos step size
    /// `1/(lambda t)`, projection onto `|w| <= 1/sqrt(lambda)`). The bias is
    /// handled as an extra constant feature, so it is regularized too.
    /// Targets are `+1` where `positive[i]` holds, `-1` elsewhere.
    pub fn fit(features: &[f64], dim: usize, positive: &[bool], params: &SvmParams) -> LinearSvm {
        let n = positive.len();
        let lambda = params.regularization;
        let radius = 1.0 / lambda.sqrt();
        let mut w = vec![0.0; dim + 1];
        let mut grad = vec![0.0; dim + 1];
        for t in 1..=params.iterations {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for i in 0..n {
                let x = &features[i * dim..(i + 1) * dim];
                let y = if positive[i] { 1.0 } else { -1.0 };
                let score: f64 = x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + w[dim];
                if y * score < 1.0 {
                    for (g, xi) in grad.iter_mut().zip(x) {
                        *g -= y * xi;
                    }
                    grad[dim] -= y;
                }
            }
            let eta = 1.0 / (lambda * t as f64);
            for (wj, gj) in w.iter_mut().zip(&grad) {
                *wj -= eta * (lambda * *wj + gj / n as f64);
            }
            let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > radius {
                w.iter_mut().for_each(|v| *v *= radius / norm);
            }
        }
        let bias = w.pop().unwrap();
        LinearSvm { weights: w, bias }
    }

    pub fn decision(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>() + self.bias
    }

    /// Unsigned distance from `x` to the separating hyperplane.
    pub fn distance(&self, x: &[f64]) -> f64 {
        let norm = self.weights.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return f64::INFINITY;
        }
        self.decision(x).abs() / norm
    }
}
