use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Real, Tape, Tensor, Var};
use crate::rng::{rng_from, salt, Rng};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
}

/// Dropout placed after hidden layer `after_layer` (1-based, counted over hidden layers).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DropoutSpec {
    pub after_layer: usize,
    pub probability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden_widths: Vec<usize>,
    pub output_dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dropout: Option<DropoutSpec>,
    #[serde(default)]
    pub activation: Activation,
}

impl MlpSpec {
    /// Five fully-connected layers, 29 → 16 → 24 → 20 → 24 → 1, dropout 0.5 after the second.
    pub fn fraud() -> Self {
        MlpSpec {
            input_dim: 29,
            hidden_widths: vec![16, 24, 20, 24],
            output_dim: 1,
            dropout: Some(DropoutSpec {
                after_layer: 2,
                probability: 0.5,
            }),
            activation: Activation::Relu,
        }
    }

    /// Two fully-connected layers, 12 → 25 → 1, no dropout.
    pub fn loan() -> Self {
        MlpSpec {
            input_dim: 12,
            hidden_widths: vec![25],
            output_dim: 1,
            dropout: None,
            activation: Activation::Relu,
        }
    }

    pub fn is_binary(&self) -> bool {
        self.output_dim == 1
    }

    /// Number of classes predicted: 2 in binary (single-logit) mode.
    pub fn n_classes(&self) -> usize {
        if self.is_binary() {
            2
        } else {
            self.output_dim
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden_widths.contains(&0) {
            return Err(Error::Config(format!("zero-width layer in {self:?}")));
        }
        if let Some(d) = self.dropout {
            if d.after_layer == 0 || d.after_layer > self.hidden_widths.len() {
                return Err(Error::Config(format!(
                    "dropout after layer {} but the network has {} hidden layers",
                    d.after_layer,
                    self.hidden_widths.len()
                )));
            }
            if !(0.0..1.0).contains(&d.probability) {
                return Err(Error::Config(format!(
                    "dropout probability {} outside [0, 1)",
                    d.probability
                )));
            }
        }
        Ok(())
    }

    fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden_widths.len() + 1);
        let mut fan_in = self.input_dim;
        for &w in self.hidden_widths.iter().chain(std::iter::once(&self.output_dim)) {
            dims.push((fan_in, w));
            fan_in = w;
        }
        dims
    }

    pub fn param_count(&self) -> usize {
        self.layer_dims().iter().map(|(i, o)| i * o + o).sum()
    }
}

/// Whether a forward pass samples dropout masks.
pub enum ForwardMode<'a> {
    Eval,
    Train(&'a mut Rng),
}

/// Fully-connected ReLU network. Parameters are stored as alternating
/// `weight [fan_in, fan_out]` and `bias [fan_out]` tensors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp<T = f64> {
    spec: MlpSpec,
    params: Vec<Tensor<T>>,
}

impl<T: Real> Mlp<T> {
    /// Fan-in uniform initialization: every weight and bias of a layer is drawn
    /// from `U(-1/√fan_in, 1/√fan_in)`.
    pub fn new(spec: MlpSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = rng_from(seed, salt::INIT);
        let mut params = Vec::new();
        for (fan_in, fan_out) in spec.layer_dims() {
            let bound = 1.0 / (fan_in as f64).sqrt();
            let mut draw = |n: usize| -> Vec<T> {
                (0..n)
                    .map(|_| T::lit(rng.random_range(-bound..bound)))
                    .collect()
            };
            let w = draw(fan_in * fan_out);
            let b = draw(fan_out);
            params.push(Tensor::from_parts(vec![fan_in, fan_out], w));
            params.push(Tensor::from_parts(vec![fan_out], b));
        }
        Ok(Mlp { spec, params })
    }

    pub fn from_params(spec: MlpSpec, params: Vec<Tensor<T>>) -> Result<Self> {
        spec.validate()?;
        let mut mlp = Mlp {
            spec,
            params: Vec::new(),
        };
        mlp.set_params(params)?;
        Ok(mlp)
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn params(&self) -> &[Tensor<T>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor<T>] {
        &mut self.params
    }

    pub fn set_params(&mut self, params: Vec<Tensor<T>>) -> Result<()> {
        let dims = self.spec.layer_dims();
        if params.len() != dims.len() * 2 {
            return Err(Error::Config(format!(
                "expected {} parameter tensors, got {}",
                dims.len() * 2,
                params.len()
            )));
        }
        for (l, &(i, o)) in dims.iter().enumerate() {
            if params[2 * l].shape() != [i, o] || params[2 * l + 1].shape() != [o] {
                return Err(Error::shape(
                    "set_params",
                    format!(
                        "layer {l}: expected [{i}, {o}] and [{o}], got {:?} and {:?}",
                        params[2 * l].shape(),
                        params[2 * l + 1].shape()
                    ),
                ));
            }
        }
        self.params = params;
        Ok(())
    }

    pub fn param_names(&self) -> Vec<String> {
        (0..self.params.len() / 2)
            .flat_map(|l| [format!("layer{l}.weight"), format!("layer{l}.bias")])
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    /// Records the parameters on `tape` as differentiable leaves.
    pub fn bind(&self, tape: &mut Tape<T>) -> Vec<Var> {
        self.params.iter().map(|p| tape.leaf(p.clone())).collect()
    }

    /// Logits `[n, output_dim]` for input `x [n, input_dim]` under the given
    /// parameter handles, which need not be this model's own (adapted copies work).
    pub fn forward(
        &self,
        tape: &mut Tape<T>,
        params: &[Var],
        x: Var,
        mode: &mut ForwardMode<'_>,
    ) -> Result<Var> {
        if params.len() != self.params.len() {
            return Err(Error::Config(format!(
                "forward got {} parameter handles, model has {}",
                params.len(),
                self.params.len()
            )));
        }
        let n_layers = params.len() / 2;
        let mut h = x;
        for l in 0..n_layers {
            h = tape.matmul(h, params[2 * l])?;
            h = tape.add_bias(h, params[2 * l + 1])?;
            if l + 1 == n_layers {
                break;
            }
            h = match self.spec.activation {
                Activation::Relu => tape.relu(h),
            };
            if let (Some(d), ForwardMode::Train(rng)) = (self.spec.dropout, &mut *mode) {
                if d.after_layer == l + 1 {
                    h = tape.dropout(h, d.probability, *rng)?;
                }
            }
        }
        Ok(h)
    }

    /// Eval-mode logits, off the gradient graph.
    pub fn logits(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let mut tape = Tape::new();
        let out = tape.no_grad(|t| {
            let params: Vec<Var> = self.params.iter().map(|p| t.constant(p.clone())).collect();
            let xv = t.constant(x.clone());
            self.forward(t, &params, xv, &mut ForwardMode::Eval)
        })?;
        Ok(tape.value(out).clone())
    }

    /// Class probabilities `[n, n_classes]`; in binary mode `[1 − σ(z), σ(z)]`.
    pub fn class_probabilities(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let logits = self.logits(x)?;
        let n = logits.rows();
        if self.spec.is_binary() {
            let mut data = Vec::with_capacity(2 * n);
            for &z in logits.data() {
                let p = sigmoid(z);
                data.push(T::one() - p);
                data.push(p);
            }
            return Ok(Tensor::from_parts(vec![n, 2], data));
        }
        let c = logits.cols();
        let mut data = logits.into_data();
        for row in data.chunks_mut(c) {
            let max = row.iter().copied().fold(T::neg_infinity(), T::max);
            let mut total = T::zero();
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                total = total + *v;
            }
            for v in row.iter_mut() {
                *v = *v / total;
            }
        }
        Ok(Tensor::from_parts(vec![n, c], data))
    }
}

pub(crate) fn sigmoid<T: Real>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}
