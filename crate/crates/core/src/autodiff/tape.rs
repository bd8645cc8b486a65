use std::collections::BTreeMap;

use super::tensor::{matmul_raw, transpose_raw, Real, Tensor};
use crate::{Error, Result};

/// Handle to a value recorded on a [`Tape`]. Only meaningful for the tape that issued it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Neg(Var),
    Scale(Var, T),
    AddScalar(Var, T),
    Exp(Var),
    Log(Var),
    Tanh(Var),
    Sigmoid(Var),
    Softplus(Var),
    Relu(Var),
    PowScalar(Var, T),
    Sum(Var),
    /// Scalar input repeated to the node's own shape.
    Expand(Var),
    /// `[n, m] -> [m]`
    SumRows(Var),
    /// `[m] -> [n, m]`
    BroadcastRows(Var),
    /// `[n, m] -> [n]`
    SumCols(Var),
    /// `[n] -> [n, m]`
    BroadcastCols(Var),
    /// Row-wise log-sum-exp, `[n, m] -> [n]`.
    LogSumExpRows(Var),
    ConcatRows(Vec<Var>),
    /// Rows `start..start + len` of the input, `len` taken from the node's own shape.
    SliceRows(Var, usize),
    /// Input placed at row `start` of a zero matrix with the node's own shape.
    PadRows(Var, usize),
}

#[derive(Clone, Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// Append-only record of tensor operations.
///
/// Nodes only ever reference earlier nodes, so the node order is a topological
/// order and the backward sweep is a single reverse pass. The backward pass is
/// itself expressed in tape operations: with `create_graph` the adjoints are
/// recorded as differentiable nodes and can be differentiated again.
#[derive(Clone, Debug)]
pub struct Tape<T = f64> {
    nodes: Vec<Node<T>>,
    grad_enabled: bool,
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// Adjoints produced by [`Tape::backward`], keyed by the node they belong to.
#[derive(Clone, Debug, Default)]
pub struct Gradients {
    adjoints: BTreeMap<Var, Var>,
}

impl Gradients {
    pub fn get(&self, var: Var) -> Option<Var> {
        self.adjoints.get(&var).copied()
    }

    pub fn len(&self) -> usize {
        self.adjoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjoints.is_empty()
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            grad_enabled: true,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Leaf that participates in differentiation.
    pub fn leaf(&mut self, value: Tensor<T>) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad: true,
        });
        Var(self.nodes.len() - 1)
    }

    /// Leaf that never accumulates a gradient.
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    /// Copy of `var`'s value cut off from the graph.
    pub fn detach(&mut self, var: Var) -> Var {
        let value = self.value(var).clone();
        self.constant(value)
    }

    pub fn value(&self, var: Var) -> &Tensor<T> {
        &self.nodes[var.0].value
    }

    pub fn shape(&self, var: Var) -> &[usize] {
        self.nodes[var.0].value.shape()
    }

    pub fn requires_grad(&self, var: Var) -> bool {
        self.nodes[var.0].requires_grad
    }

    pub fn is_grad_enabled(&self) -> bool {
        self.grad_enabled
    }

    /// Runs `f` with recording disabled: every node it creates is a constant.
    pub fn no_grad<R>(&mut self, f: impl FnOnce(&mut Self) -> R) -> R {
        let prev = std::mem::replace(&mut self.grad_enabled, false);
        let out = f(self);
        self.grad_enabled = prev;
        out
    }

    /// Drops every node at index `len` and beyond. Vars pointing there become invalid.
    pub fn truncate(&mut self, len: usize) {
        self.nodes.truncate(len);
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, inputs: &[Var]) -> Var {
        let requires_grad =
            self.grad_enabled && inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        let op = if requires_grad { op } else { Op::Leaf };
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn dims2(&self, var: Var, op: &'static str) -> Result<(usize, usize)> {
        match self.shape(var) {
            [r, c] => Ok((*r, *c)),
            s => Err(Error::shape(op, format!("expected a matrix, got {s:?}"))),
        }
    }

    fn dims1(&self, var: Var, op: &'static str) -> Result<usize> {
        match self.shape(var) {
            [n] => Ok(*n),
            s => Err(Error::shape(op, format!("expected a vector, got {s:?}"))),
        }
    }

    fn same_shape(&self, a: Var, b: Var, op: &'static str) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::shape(
                op,
                format!("{:?} vs {:?}", self.shape(a), self.shape(b)),
            ));
        }
        Ok(())
    }

    fn unary(&mut self, a: Var, f: impl Fn(T) -> T, op: Op<T>) -> Var {
        let value = self.value(a).map(f);
        self.push(value, op, &[a])
    }

    fn binary(&mut self, a: Var, b: Var, name: &'static str, f: impl Fn(T, T) -> T, op: Op<T>) -> Result<Var> {
        self.same_shape(a, b, name)?;
        let value = self.value(a).zip_map(self.value(b), f);
        Ok(self.push(value, op, &[a, b]))
    }

    // ---- forward operations ----

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.dims2(a, "matmul")?;
        let (k2, n) = self.dims2(b, "matmul")?;
        if k != k2 {
            return Err(Error::shape("matmul", format!("[{m}, {k}] @ [{k2}, {n}]")));
        }
        let data = matmul_raw(self.value(a).data(), self.value(b).data(), m, k, n);
        Ok(self.push(Tensor::from_parts(vec![m, n], data), Op::MatMul(a, b), &[a, b]))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let (r, c) = self.dims2(a, "transpose")?;
        let data = transpose_raw(self.value(a).data(), r, c);
        Ok(self.push(Tensor::from_parts(vec![c, r], data), Op::Transpose(a), &[a]))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "add", |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "sub", |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "mul", |x, y| x * y, Op::Mul(a, b))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "div", |x, y| x / y, Op::Div(a, b))
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.unary(a, |x| -x, Op::Neg(a))
    }

    pub fn scale(&mut self, a: Var, c: T) -> Var {
        self.unary(a, |x| x * c, Op::Scale(a, c))
    }

    pub fn add_scalar(&mut self, a: Var, c: T) -> Var {
        self.unary(a, |x| x + c, Op::AddScalar(a, c))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.unary(a, T::exp, Op::Exp(a))
    }

    pub fn log(&mut self, a: Var) -> Var {
        self.unary(a, T::ln, Op::Log(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, T::tanh, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, sigmoid, Op::Sigmoid(a))
    }

    /// `ln(1 + e^x)`, evaluated without overflow.
    pub fn softplus(&mut self, a: Var) -> Var {
        self.unary(a, softplus, Op::Softplus(a))
    }

    /// Elementwise `max(x, 0)`; the subgradient at 0 is 0.
    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(a, |x| if x > T::zero() { x } else { T::zero() }, Op::Relu(a))
    }

    pub fn pow_scalar(&mut self, a: Var, p: T) -> Var {
        self.unary(a, |x| x.powf(p), Op::PowScalar(a, p))
    }

    /// Sum of all elements, as a scalar.
    pub fn sum(&mut self, a: Var) -> Var {
        let s: T = self.value(a).data().iter().copied().sum();
        self.push(Tensor::scalar(s), Op::Sum(a), &[a])
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let n = T::lit(self.value(a).len() as f64);
        let s = self.sum(a);
        self.scale(s, T::one() / n)
    }

    /// Repeats a single-element tensor to `shape`.
    pub fn expand(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        if self.value(a).len() != 1 {
            return Err(Error::shape("expand", format!("source {:?} is not a scalar", self.shape(a))));
        }
        let v = self.value(a).item();
        Ok(self.push(Tensor::full(shape, v), Op::Expand(a), &[a]))
    }

    pub fn sum_rows(&mut self, a: Var) -> Result<Var> {
        let (n, m) = self.dims2(a, "sum_rows")?;
        let src = self.value(a).data();
        let mut out = vec![T::zero(); m];
        for i in 0..n {
            for (o, &x) in out.iter_mut().zip(&src[i * m..(i + 1) * m]) {
                *o = *o + x;
            }
        }
        Ok(self.push(Tensor::from_parts(vec![m], out), Op::SumRows(a), &[a]))
    }

    pub fn broadcast_rows(&mut self, a: Var, n: usize) -> Result<Var> {
        let m = self.dims1(a, "broadcast_rows")?;
        let src = self.value(a).data();
        let mut out = Vec::with_capacity(n * m);
        for _ in 0..n {
            out.extend_from_slice(src);
        }
        Ok(self.push(Tensor::from_parts(vec![n, m], out), Op::BroadcastRows(a), &[a]))
    }

    pub fn sum_cols(&mut self, a: Var) -> Result<Var> {
        let (n, m) = self.dims2(a, "sum_cols")?;
        let src = self.value(a).data();
        let out = (0..n).map(|i| src[i * m..(i + 1) * m].iter().copied().sum()).collect();
        Ok(self.push(Tensor::from_parts(vec![n], out), Op::SumCols(a), &[a]))
    }

    pub fn broadcast_cols(&mut self, a: Var, m: usize) -> Result<Var> {
        let n = self.dims1(a, "broadcast_cols")?;
        let src = self.value(a).data();
        let mut out = Vec::with_capacity(n * m);
        for &x in src {
            out.extend(std::iter::repeat_n(x, m));
        }
        Ok(self.push(Tensor::from_parts(vec![n, m], out), Op::BroadcastCols(a), &[a]))
    }

    /// `x[n, m] + b[m]` with `b` repeated on every row.
    pub fn add_bias(&mut self, x: Var, b: Var) -> Result<Var> {
        let (n, m) = self.dims2(x, "add_bias")?;
        let bm = self.dims1(b, "add_bias")?;
        if bm != m {
            return Err(Error::shape("add_bias", format!("[{n}, {m}] + [{bm}]")));
        }
        let bb = self.broadcast_rows(b, n)?;
        self.add(x, bb)
    }

    pub fn logsumexp_rows(&mut self, a: Var) -> Result<Var> {
        let (n, m) = self.dims2(a, "logsumexp_rows")?;
        let src = self.value(a).data();
        let out = (0..n)
            .map(|i| {
                let row = &src[i * m..(i + 1) * m];
                let max = row.iter().copied().fold(T::neg_infinity(), T::max);
                if !max.is_finite() {
                    return max;
                }
                max + row.iter().map(|&x| (x - max).exp()).sum::<T>().ln()
            })
            .collect();
        Ok(self.push(Tensor::from_parts(vec![n], out), Op::LogSumExpRows(a), &[a]))
    }

    pub fn log_softmax_rows(&mut self, a: Var) -> Result<Var> {
        let (_, m) = self.dims2(a, "log_softmax_rows")?;
        let lse = self.logsumexp_rows(a)?;
        let lse = self.broadcast_cols(lse, m)?;
        self.sub(a, lse)
    }

    pub fn softmax_rows(&mut self, a: Var) -> Result<Var> {
        let ls = self.log_softmax_rows(a)?;
        Ok(self.exp(ls))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return Err(Error::shape("concat_rows", "no inputs"));
        };
        let (_, m) = self.dims2(first, "concat_rows")?;
        let mut rows = 0;
        let mut data = Vec::new();
        for &p in parts {
            let (r, c) = self.dims2(p, "concat_rows")?;
            if c != m {
                return Err(Error::shape("concat_rows", format!("column counts {m} vs {c}")));
            }
            rows += r;
            data.extend_from_slice(self.value(p).data());
        }
        Ok(self.push(
            Tensor::from_parts(vec![rows, m], data),
            Op::ConcatRows(parts.to_vec()),
            parts,
        ))
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let (n, m) = self.dims2(a, "slice_rows")?;
        if start >= end || end > n {
            return Err(Error::shape("slice_rows", format!("rows {start}..{end} of {n}")));
        }
        let data = self.value(a).data()[start * m..end * m].to_vec();
        Ok(self.push(
            Tensor::from_parts(vec![end - start, m], data),
            Op::SliceRows(a, start),
            &[a],
        ))
    }

    fn pad_rows(&mut self, a: Var, start: usize, total: usize) -> Result<Var> {
        let (r, m) = self.dims2(a, "pad_rows")?;
        if start + r > total {
            return Err(Error::shape("pad_rows", format!("{r} rows at {start} exceed {total}")));
        }
        let mut data = vec![T::zero(); total * m];
        data[start * m..(start + r) * m].copy_from_slice(self.value(a).data());
        Ok(self.push(Tensor::from_parts(vec![total, m], data), Op::PadRows(a, start), &[a]))
    }

    /// Inverted dropout: zeroes each element with probability `p` and rescales
    /// survivors by `1 / (1 - p)`. `p = 0` returns `a` itself.
    pub fn dropout<R: rand::Rng + ?Sized>(&mut self, a: Var, p: f64, rng: &mut R) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::Config(format!("dropout probability {p} outside [0, 1)")));
        }
        if p == 0.0 {
            return Ok(a);
        }
        let keep = T::lit(1.0 / (1.0 - p));
        let shape = self.shape(a).to_vec();
        let len = self.value(a).len();
        let mask = (0..len)
            .map(|_| if rng.random::<f64>() < p { T::zero() } else { keep })
            .collect();
        let mask = self.constant(Tensor::from_parts(shape, mask));
        self.mul(a, mask)
    }

    // ---- reverse sweep ----

    /// Reverse-mode sweep from a scalar `loss`.
    ///
    /// With `create_graph` the adjoint computation is recorded, so the returned
    /// gradients are themselves differentiable; otherwise they are constants.
    pub fn backward(&mut self, loss: Var, create_graph: bool) -> Result<Gradients> {
        let node = &self.nodes[loss.0];
        if !node.value.is_scalar() {
            return Err(Error::NonScalarLoss(node.value.shape().to_vec()));
        }
        if !node.requires_grad {
            return Err(Error::Detached);
        }
        let end = loss.0 + 1;
        let prev = std::mem::replace(&mut self.grad_enabled, create_graph);
        let result = self.sweep(loss, end);
        self.grad_enabled = prev;
        let adjoints = result?;
        Ok(Gradients {
            adjoints: adjoints
                .into_iter()
                .enumerate()
                .filter_map(|(i, g)| g.map(|g| (Var(i), g)))
                .collect(),
        })
    }

    /// Gradients of `loss` with respect to `wrt`, zeros where `loss` does not depend on them.
    pub fn grad(&mut self, loss: Var, wrt: &[Var], create_graph: bool) -> Result<Vec<Var>> {
        let grads = self.backward(loss, create_graph)?;
        Ok(wrt
            .iter()
            .map(|&v| match grads.get(v) {
                Some(g) => g,
                None => {
                    let shape = self.shape(v).to_vec();
                    self.constant(Tensor::zeros(&shape))
                }
            })
            .collect())
    }

    /// Gradient values of `loss` with respect to `wrt`. The adjoint nodes are
    /// discarded afterwards, so the tape is left as it was.
    pub fn grad_values(&mut self, loss: Var, wrt: &[Var]) -> Result<Vec<Tensor<T>>> {
        let mark = self.len();
        let grads = self.grad(loss, wrt, false)?;
        let values = grads.iter().map(|&g| self.value(g).clone()).collect();
        self.truncate(mark);
        Ok(values)
    }

    fn sweep(&mut self, loss: Var, end: usize) -> Result<Vec<Option<Var>>> {
        let mut adj: Vec<Option<Var>> = vec![None; end];
        let seed_shape = self.shape(loss).to_vec();
        adj[loss.0] = Some(self.constant(Tensor::ones(&seed_shape)));

        for i in (0..end).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let Some(g) = adj[i] else { continue };
            let out = Var(i);
            let op = self.nodes[i].op.clone();
            match op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    if self.requires_grad(a) {
                        let bt = self.transpose(b)?;
                        let ga = self.matmul(g, bt)?;
                        self.accumulate(&mut adj, a, ga)?;
                    }
                    if self.requires_grad(b) {
                        let at = self.transpose(a)?;
                        let gb = self.matmul(at, g)?;
                        self.accumulate(&mut adj, b, gb)?;
                    }
                }
                Op::Transpose(a) => {
                    let ga = self.transpose(g)?;
                    self.accumulate(&mut adj, a, ga)?;
                }
                Op::Add(a, b) => {
                    self.accumulate(&mut adj, a, g)?;
                    self.accumulate(&mut adj, b, g)?;
                }
                Op::Sub(a, b) => {
                    self.accumulate(&mut adj, a, g)?;
                    if self.requires_grad(b) {
                        let gb = self.neg(g);
                        self.accumulate(&mut adj, b, gb)?;
                    }
                }
                Op::Mul(a, b) => {
                    if self.requires_grad(a) {
                        let ga = self.mul(g, b)?;
                        self.accumulate(&mut adj, a, ga)?;
                    }
                    if self.requires_grad(b) {
                        let gb = self.mul(g, a)?;
                        self.accumulate(&mut adj, b, gb)?;
                    }
                }
                Op::Div(a, b) => {
                    if self.requires_grad(a) {
                        let ga = self.div(g, b)?;
                        self.accumulate(&mut adj, a, ga)?;
                    }
                    if self.requires_grad(b) {
                        let t = self.mul(g, out)?;
                        let t = self.div(t, b)?;
                        let gb = self.neg(t);
                        self.accumulate(&mut adj, b, gb)?;
                    }
                }
                Op::Neg(a) => {
                    let ga = self.neg(g);
                    self.accumulate(&mut adj, a, ga)?;
                }
                Op::Scale(a, c) => {
                    let ga = self.scale(g, c);
                    self.accumulate(&mut adj, a, ga)?;
                }
                Op::AddScalar(a, _) => self.accumulate(&mut adj, a, g)?,
                Op::Exp(a) => {
                    let ga = self.mul(g, out)?;
                    self.accumulate(&mut adj, a, ga)?;
                }
                Op::Log(a) => {
                    let ga = self.div(g, a)?;
                    self.accumulate(&mut adj, a, ga)?;
                }
                Op::Tanh(a) => {
                    let sq = self.mul(out, out)?;
                    let d = self.neg(sq);
                    let d = self.add_scalar(d, T::one());
                    let ga = self.mul(g, d)?;
                    self.accumulate(&mut adj, a, ga)?;
                }
                Op::Sigmoid(a) => {
                    let one_minus = self.neg(out);
                    let one_minus = self.add_scalar(one_minus, T::one());
                    let d = self.mul(out, one_minus)?;
                    let ga = self.mul(g, d)?;
                    self.accumulate(&mut adj, a, ga)?;
                }
                Op::Softplus(a) => {
                    let d = self.sigmoid(a);
                    let ga = self.mul(g, d)?;
                    self.accumulate(&mut adj, a, ga)?;
                }
                Op::Relu(a) => {
                    let mask = self
                        .value(a)
                        .map(|x| if x > T::zero() { T::one() } else { T::zero() });
                    let mask = self.constant(mask);
                    let ga = self.mul(g, mask)?;
                    self.accumulate(&mut adj, a, ga)?;
                }
                Op::PowScalar(a, p) => {
                    let d = self.pow_scalar(a, p - T::one());
                    let d = self.scale(d, p);
                    let ga = self.mul(g, d)?;
                    self.accumulate(&mut adj, a, ga)?;
                }
                Op::Sum(a) => {
                    let shape = self.shape(a).to_vec();
                    let ga = self.expand(g, &shape)?;
                    self.accumulate(&mut adj, a, ga)?;
                }
                Op::Expand(a) => {
                    let s = self.sum(g);
                    let shape = self.shape(a).to_vec();
                    let ga = if shape.is_empty() {
                        s
                    } else {
                        self.expand(s, &shape)?
                    };
                    self.accumulate(&mut adj, a, ga)?;
                }
                Op::SumRows(a) => {
                    let n = self.shape(a)[0];
                    let ga = self.broadcast_rows(g, n)?;
                    self.accumulate(&mut adj, a, ga)?;
                }
                Op::BroadcastRows(a) => {
                    let ga = self.sum_rows(g)?;
                    self.accumulate(&mut adj, a, ga)?;
                }
                Op::SumCols(a) => {
                    let m = self.shape(a)[1];
                    let ga = self.broadcast_cols(g, m)?;
                    self.accumulate(&mut adj, a, ga)?;
                }
                Op::BroadcastCols(a) => {
                    let ga = self.sum_cols(g)?;
                    self.accumulate(&mut adj, a, ga)?;
                }
                Op::LogSumExpRows(a) => {
                    let m = self.shape(a)[1];
                    let lse = self.broadcast_cols(out, m)?;
                    let shifted = self.sub(a, lse)?;
                    let probs = self.exp(shifted);
                    let gb = self.broadcast_cols(g, m)?;
                    let ga = self.mul(gb, probs)?;
                    self.accumulate(&mut adj, a, ga)?;
                }
                Op::ConcatRows(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let rows = self.shape(p)[0];
                        if self.requires_grad(p) {
                            let gp = self.slice_rows(g, offset, offset + rows)?;
                            self.accumulate(&mut adj, p, gp)?;
                        }
                        offset += rows;
                    }
                }
                Op::SliceRows(a, start) => {
                    let total = self.shape(a)[0];
                    let ga = self.pad_rows(g, start, total)?;
                    self.accumulate(&mut adj, a, ga)?;
                }
                Op::PadRows(a, start) => {
                    let rows = self.shape(a)[0];
                    let ga = self.slice_rows(g, start, start + rows)?;
                    self.accumulate(&mut adj, a, ga)?;
                }
            }
        }
        Ok(adj)
    }

    fn accumulate(&mut self, adj: &mut [Option<Var>], target: Var, g: Var) -> Result<()> {
        if !self.requires_grad(target) {
            return Ok(());
        }
        adj[target.0] = Some(match adj[target.0] {
            None => g,
            Some(prev) => self.add(prev, g)?,
        });
        Ok(())
    }
}

fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

fn softplus<T: Real>(x: T) -> T {
    x.max(T::zero()) + (-x.abs()).exp().ln_1p()
}
