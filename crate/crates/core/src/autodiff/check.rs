//! Numerical validation of tape derivatives against central finite differences.

use rand_distr::{Distribution, StandardNormal};

use super::{Tape, Tensor, Var};
use crate::rng::Rng;
use crate::Result;

/// Normwise relative error `‖a − b‖ / max(‖a‖, ‖b‖)`, 0 when both are zero.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let diff = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Evaluates the scalar `f` at `theta` on a fresh tape.
pub fn eval_scalar<F>(f: &F, theta: &Tensor) -> Result<f64>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    let mut tape = Tape::new();
    let th = tape.leaf(theta.clone());
    let out = f(&mut tape, th)?;
    Ok(tape.value(out).item())
}

/// Tape gradient of `f` at `theta`.
pub fn tape_gradient<F>(f: &F, theta: &Tensor) -> Result<Tensor>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    let mut tape = Tape::new();
    let th = tape.leaf(theta.clone());
    let out = f(&mut tape, th)?;
    Ok(tape.grad_values(out, &[th])?.remove(0))
}

/// Central-difference gradient with step `h`.
pub fn finite_difference_gradient<F>(f: &F, theta: &Tensor, h: f64) -> Result<Tensor>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    let mut grad = Vec::with_capacity(theta.len());
    for i in 0..theta.len() {
        let mut plus = theta.clone();
        plus.data_mut()[i] += h;
        let mut minus = theta.clone();
        minus.data_mut()[i] -= h;
        grad.push((eval_scalar(f, &plus)? - eval_scalar(f, &minus)?) / (2.0 * h));
    }
    Tensor::new(theta.shape().to_vec(), grad)
}

/// Relative error between the tape gradient and central differences.
pub fn gradient_check<F>(f: &F, theta: &Tensor, h: f64) -> Result<f64>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    let analytic = tape_gradient(f, theta)?;
    let numeric = finite_difference_gradient(f, theta, h)?;
    Ok(relative_error(analytic.data(), numeric.data()))
}

/// Hessian-vector product by differentiating `⟨∇f, v⟩` through a recorded backward pass.
pub fn hessian_vector_product<F>(f: &F, theta: &Tensor, direction: &Tensor) -> Result<Tensor>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    let mut tape = Tape::new();
    let th = tape.leaf(theta.clone());
    let out = f(&mut tape, th)?;
    let g = tape.grad(out, &[th], true)?[0];
    let v = tape.constant(direction.clone());
    let gv = tape.mul(g, v)?;
    let dot = tape.sum(gv);
    if !tape.requires_grad(dot) {
        // gradient does not depend on theta: zero Hessian
        return Ok(Tensor::zeros(theta.shape()));
    }
    Ok(tape.grad_values(dot, &[th])?.remove(0))
}

/// `(∇f(θ + hv) − ∇f(θ − hv)) / 2h`
pub fn finite_difference_hvp<F>(f: &F, theta: &Tensor, direction: &Tensor, h: f64) -> Result<Tensor>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    let shifted = |sign: f64| {
        theta.zip_map(direction, |t, d| t + sign * h * d)
    };
    let gp = tape_gradient(f, &shifted(1.0))?;
    let gm = tape_gradient(f, &shifted(-1.0))?;
    Ok(gp.zip_map(&gm, |a, b| (a - b) / (2.0 * h)))
}

/// Maximum relative error between tape and finite-difference Hessian-vector
/// products over `n_directions` random Gaussian directions.
pub fn grad_of_grad_check<F>(f: &F, theta: &Tensor, n_directions: usize, h: f64, rng: &mut Rng) -> Result<f64>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    let mut worst: f64 = 0.0;
    for _ in 0..n_directions {
        let dir: Vec<f64> = (0..theta.len()).map(|_| StandardNormal.sample(rng)).collect();
        let dir = Tensor::new(theta.shape().to_vec(), dir)?;
        let tape_hvp = hessian_vector_product(f, theta, &dir)?;
        let fd_hvp = finite_difference_hvp(f, theta, &dir, h)?;
        worst = worst.max(relative_error(tape_hvp.data(), fd_hvp.data()));
    }
    Ok(worst)
}
