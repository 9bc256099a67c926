//! Tape-based reverse-mode automatic differentiation over [`Tensor`]s.
//!
//! A [`Tape`] is rebuilt for every forward pass. Each operation appends a node
//! holding its output value and a record of its inputs; because the tape is
//! append-only its index order is already topological, so [`Tape::backward`]
//! visits every node exactly once walking it in reverse.
//!
//! Broadcasting is limited to one operand being a single-element tensor.

mod adam;
mod gradcheck;
pub(crate) mod conv;

pub use adam::{adam_step, AdamState};
pub use gradcheck::{gradcheck, GradCheck};

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{shape_err, Error, Result};
use crate::tensor::{matmul_into, Tensor};
use conv::ConvGeom;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddScalar(Var),
    MulScalar(Var, f64),
    Transpose(Var),
    ConcatCols(Var, Var),
    SliceRows(Var, usize),
    Reshape(Var),
    Sum(Var),
    Mean(Var),
    Square(Var),
    HingeMax0(Var, f64),
    Sigmoid(Var),
    Elu(Var, f64),
    LeakyRelu(Var, f64),
    Log(Var),
    Exp(Var),
    FrobeniusSq(Var),
    MaskedSoftmaxRows(Var),
    LogSoftmaxRows(Var),
    NormalizeRows(Var, Vec<f64>),
    AddRowBias(Var, Var),
    AddChannelBias(Var, Var),
    Conv2d(Var, Var, ConvGeom),
    ConvTranspose2d(Var, Var, ConvGeom),
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    grad: Option<Tensor>,
    requires_grad: bool,
    op: Op,
}

/// Records operations for one forward pass and replays them backwards.
#[derive(Debug, Clone)]
pub struct Tape {
    nodes: Vec<Node>,
    check_finite: bool,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    /// New empty tape. Non-finite checking follows `debug_assertions`.
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            check_finite: cfg!(debug_assertions),
        }
    }

    /// When enabled, any op producing NaN/Inf fails with [`Error::NonFinite`].
    pub fn set_finite_checks(&mut self, on: bool) {
        self.check_finite = on;
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Leaf that receives gradients.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.leaf(value, true)
    }

    /// Leaf that does not receive gradients.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        let grad = requires_grad.then(|| Tensor::zeros(value.shape()));
        self.nodes.push(Node {
            value,
            grad,
            requires_grad,
            op: Op::Leaf,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Accumulated gradient. `None` for nodes that do not require one, and
    /// for intermediate nodes that no backward pass has reached yet.
    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.nodes[v.0].grad.as_ref()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn zero_grad(&mut self) {
        for n in &mut self.nodes {
            if let Some(g) = n.grad.as_mut() {
                g.data_mut().fill(0.0);
            }
        }
    }

    fn push(&mut self, name: &'static str, value: Tensor, op: Op, inputs: &[Var]) -> Result<Var> {
        if self.check_finite && !value.all_finite() {
            return Err(Error::NonFinite { op: name });
        }
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            value,
            grad: None,
            requires_grad,
            op,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn unary(&mut self, name: &'static str, x: Var, f: impl Fn(f64) -> f64, op: Op) -> Result<Var> {
        let out = self.value(x).map(f);
        self.push(name, out, op, &[x])
    }

    // ---- linear algebra -------------------------------------------------

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        self.push("matmul", out, Op::MatMul(a, b), &[a, b])
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        let out = self.value(x).transpose()?;
        self.push("transpose", out, Op::Transpose(x), &[x])
    }

    /// `[a ‖ b]` for `N×p` and `N×q` operands.
    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let (n, p) = ta.dims2()?;
        let (n2, q) = tb.dims2()?;
        if n != n2 {
            return shape_err("concat_cols", ta.shape(), tb.shape());
        }
        let mut data = Vec::with_capacity(n * (p + q));
        for i in 0..n {
            data.extend_from_slice(ta.row(i));
            data.extend_from_slice(tb.row(i));
        }
        let out = Tensor::new(vec![n, p + q], data)?;
        self.push("concat_cols", out, Op::ConcatCols(a, b), &[a, b])
    }

    /// Rows `start..end` of a matrix.
    pub fn slice_rows(&mut self, x: Var, start: usize, end: usize) -> Result<Var> {
        let t = self.value(x);
        let (r, c) = t.dims2()?;
        if start > end || end > r {
            return shape_err("slice_rows", t.shape(), &[start, end]);
        }
        let out = Tensor::new(vec![end - start, c], t.data()[start * c..end * c].to_vec())?;
        self.push("slice_rows", out, Op::SliceRows(x, start), &[x])
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let out = self.value(x).clone().reshape(shape)?;
        self.push("reshape", out, Op::Reshape(x), &[x])
    }

    // ---- elementwise binary ----------------------------------------------

    fn binary(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let out = if ta.shape() == tb.shape() {
            let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
            Tensor::new(ta.shape().to_vec(), data)?
        } else if tb.len() == 1 {
            let y = tb.data()[0];
            ta.map(|x| f(x, y))
        } else if ta.len() == 1 {
            let x = ta.data()[0];
            tb.map(|y| f(x, y))
        } else {
            return shape_err(name, ta.shape(), tb.shape());
        };
        self.push(name, out, op, &[a, b])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    /// Hadamard product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn add_scalar(&mut self, x: Var, c: f64) -> Result<Var> {
        self.unary("add_scalar", x, |v| v + c, Op::AddScalar(x))
    }

    pub fn mul_scalar(&mut self, x: Var, c: f64) -> Result<Var> {
        self.unary("mul_scalar", x, |v| v * c, Op::MulScalar(x, c))
    }

    /// Adds a `1×D` (or length-`D`) bias to every row of an `N×D` matrix.
    pub fn add_row_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (tx, tb) = (self.value(x), self.value(bias));
        let (n, d) = tx.dims2()?;
        if tb.len() != d {
            return shape_err("add_row_bias", tx.shape(), tb.shape());
        }
        let mut out = tx.clone();
        for i in 0..n {
            for (o, &b) in out.data_mut()[i * d..(i + 1) * d].iter_mut().zip(tb.data()) {
                *o += b;
            }
        }
        self.push("add_row_bias", out, Op::AddRowBias(x, bias), &[x, bias])
    }

    /// Adds one bias per channel to a `B×C×H×W` activation.
    pub fn add_channel_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (tx, tb) = (self.value(x), self.value(bias));
        let c = match tx.shape() {
            [_, c, _, _] if *c == tb.len() => *c,
            _ => return shape_err("add_channel_bias", tx.shape(), tb.shape()),
        };
        let plane = tx.shape()[2] * tx.shape()[3];
        let mut out = tx.clone();
        for (chunk_idx, chunk) in out.data_mut().chunks_mut(plane).enumerate() {
            let b = tb.data()[chunk_idx % c];
            chunk.iter_mut().for_each(|v| *v += b);
        }
        self.push("add_channel_bias", out, Op::AddChannelBias(x, bias), &[x, bias])
    }

    // ---- elementwise unary -------------------------------------------------

    pub fn square(&mut self, x: Var) -> Result<Var> {
        self.unary("square", x, |v| v * v, Op::Square(x))
    }

    /// `max(x − delta, 0)`.
    pub fn hinge_max0(&mut self, x: Var, delta: f64) -> Result<Var> {
        self.unary("hinge_max0", x, |v| (v - delta).max(0.0), Op::HingeMax0(x, delta))
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        self.unary("sigmoid", x, sigmoid, Op::Sigmoid(x))
    }

    pub fn elu(&mut self, x: Var, alpha: f64) -> Result<Var> {
        self.unary("elu", x, |v| elu(v, alpha), Op::Elu(x, alpha))
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Result<Var> {
        if !(slope > 0.0 && slope < 1.0) {
            return Err(Error::Parameter(format!("leaky_relu slope {slope} not in (0,1)")));
        }
        self.unary("leaky_relu", x, |v| if v > 0.0 { v } else { slope * v }, Op::LeakyRelu(x, slope))
    }

    pub fn log(&mut self, x: Var) -> Result<Var> {
        self.unary("log", x, libm::log, Op::Log(x))
    }

    pub fn exp(&mut self, x: Var) -> Result<Var> {
        self.unary("exp", x, libm::exp, Op::Exp(x))
    }

    // ---- reductions ------------------------------------------------------

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let s = self.value(x).sum();
        self.push("sum", Tensor::scalar(s), Op::Sum(x), &[x])
    }

    pub fn mean(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x);
        if t.is_empty() {
            return shape_err("mean", t.shape(), &[1]);
        }
        let m = t.sum() / t.len() as f64;
        self.push("mean", Tensor::scalar(m), Op::Mean(x), &[x])
    }

    /// Squared Frobenius norm, `Σ x²`.
    pub fn frobenius_norm_sq(&mut self, x: Var) -> Result<Var> {
        let s = self.value(x).data().iter().map(|v| v * v).sum();
        self.push("frobenius_norm_sq", Tensor::scalar(s), Op::FrobeniusSq(x), &[x])
    }

    // ---- row-wise normalisations ----------------------------------------------

    /// Row softmax restricted to entries where `mask` is nonzero; masked-out
    /// entries are exactly zero.
    pub fn masked_softmax_rows(&mut self, logits: Var, mask: &Tensor) -> Result<Var> {
        let t = self.value(logits);
        let (n, m) = t.dims2()?;
        if mask.shape() != t.shape() {
            return shape_err("masked_softmax_rows", t.shape(), mask.shape());
        }
        let out = masked_softmax(t, mask, n, m)?;
        self.push(
            "masked_softmax_rows",
            out,
            Op::MaskedSoftmaxRows(logits),
            &[logits],
        )
    }

    /// Numerically stable row-wise `ln softmax`.
    pub fn log_softmax_rows(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x);
        let (n, c) = t.dims2()?;
        let mut out = t.clone();
        for i in 0..n {
            let row = &mut out.data_mut()[i * c..(i + 1) * c];
            let mx = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = mx + libm::log(row.iter().map(|v| libm::exp(v - mx)).sum::<f64>());
            row.iter_mut().for_each(|v| *v -= lse);
        }
        self.push("log_softmax_rows", out, Op::LogSoftmaxRows(x), &[x])
    }

    /// Divides each row by its L2 norm. All-zero rows pass through unchanged.
    pub fn normalize_rows(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x);
        let (n, d) = t.dims2()?;
        let mut out = t.clone();
        let mut norms = Vec::with_capacity(n);
        for i in 0..n {
            let row = &mut out.data_mut()[i * d..(i + 1) * d];
            let nrm = libm::sqrt(row.iter().map(|v| v * v).sum::<f64>());
            if nrm > 0.0 {
                row.iter_mut().for_each(|v| *v /= nrm);
            }
            norms.push(nrm);
        }
        self.push("normalize_rows", out, Op::NormalizeRows(x, norms), &[x])
    }

    // ---- convolution ---------------------------------------------------------

    /// Valid (unpadded) cross-correlation of `B×C_in×H×W` input with
    /// `C_out×C_in×k×k` kernels.
    pub fn conv2d(&mut self, input: Var, kernel: Var, stride: usize) -> Result<Var> {
        let (ti, tk) = (self.value(input), self.value(kernel));
        let g = conv::conv_geom(ti, tk, stride)?;
        let data = conv::conv_forward(&g, ti.data(), tk.data());
        let out = Tensor::new(vec![g.batch, g.c_out, g.ho, g.wo], data)?;
        self.push("conv2d", out, Op::Conv2d(input, kernel, g), &[input, kernel])
    }

    /// Transposed convolution with `C_in×C_out×k×k` kernels, producing an
    /// `out_h×out_w` map. It is the adjoint of [`Tape::conv2d`] on that size.
    pub fn conv_transpose2d(
        &mut self,
        input: Var,
        kernel: Var,
        stride: usize,
        out_h: usize,
        out_w: usize,
    ) -> Result<Var> {
        let (ti, tk) = (self.value(input), self.value(kernel));
        let g = conv::conv_t_geom(ti, tk, stride, out_h, out_w)?;
        let data = conv::conv_adjoint(&g, ti.data(), tk.data());
        let out = Tensor::new(vec![g.batch, g.c_in, g.h, g.w], data)?;
        self.push("conv_transpose2d", out, Op::ConvTranspose2d(input, kernel, g), &[input, kernel])
    }

    // ---- backward -------------------------------------------------------------

    /// Accumulates `∂loss/∂node` into the gradient buffer of every node that
    /// requires a gradient. Calling it again without [`Tape::zero_grad`] adds
    /// onto the existing buffers.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if !self.value(loss).is_scalar() {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Tensor::full(self.value(loss).shape(), 1.0));

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            if !self.nodes[i].requires_grad {
                continue;
            }
            self.propagate(i, &g, &mut grads)?;
            match self.nodes[i].grad.as_mut() {
                Some(acc) => {
                    for (a, v) in acc.data_mut().iter_mut().zip(g.data()) {
                        *a += v;
                    }
                }
                None => self.nodes[i].grad = Some(g),
            }
        }
        Ok(())
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], v: Var, contribution: Tensor) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        match grads[v.0].as_mut() {
            Some(existing) => {
                for (a, b) in existing.data_mut().iter_mut().zip(contribution.data()) {
                    *a += b;
                }
            }
            None => grads[v.0] = Some(contribution),
        }
    }

    /// Gradient flowing to a (possibly scalar-broadcast) binary operand.
    fn reduce_to(&self, v: Var, g: Tensor) -> Tensor {
        let target = self.value(v);
        if target.shape() == g.shape() {
            g
        } else {
            Tensor::full(target.shape(), g.sum())
        }
    }

    fn propagate(&self, i: usize, g: &Tensor, grads: &mut [Option<Tensor>]) -> Result<()> {
        let node = &self.nodes[i];
        let y = &node.value;
        let zip_map = |x: &Tensor, f: &dyn Fn(f64, f64) -> f64| -> Tensor {
            let data = x.data().iter().zip(g.data()).map(|(&a, &b)| f(a, b)).collect();
            Tensor::new(x.shape().to_vec(), data).expect("same shape")
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let (m, k) = ta.dims2()?;
                let p = tb.cols();
                if self.requires_grad(*a) {
                    // g · bᵀ
                    let bt = tb.transpose()?;
                    let mut da = vec![0.0; m * k];
                    matmul_into(g.data(), bt.data(), &mut da, m, p, k);
                    self.accumulate(grads, *a, Tensor::new(vec![m, k], da)?);
                }
                if self.requires_grad(*b) {
                    // aᵀ · g
                    let at = ta.transpose()?;
                    let mut db = vec![0.0; k * p];
                    matmul_into(at.data(), g.data(), &mut db, k, m, p);
                    self.accumulate(grads, *b, Tensor::new(vec![k, p], db)?);
                }
            }
            Op::Add(a, b) => {
                if self.requires_grad(*a) {
                    self.accumulate(grads, *a, self.reduce_to(*a, g.clone()));
                }
                if self.requires_grad(*b) {
                    self.accumulate(grads, *b, self.reduce_to(*b, g.clone()));
                }
            }
            Op::Sub(a, b) => {
                if self.requires_grad(*a) {
                    self.accumulate(grads, *a, self.reduce_to(*a, g.clone()));
                }
                if self.requires_grad(*b) {
                    self.accumulate(grads, *b, self.reduce_to(*b, g.map(|v| -v)));
                }
            }
            Op::Mul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let scale = |other: &Tensor| -> Tensor {
                    if other.shape() == g.shape() {
                        zip_map(other, &|o, gv| o * gv)
                    } else {
                        let s = other.data()[0];
                        g.map(|gv| gv * s)
                    }
                };
                if self.requires_grad(*a) {
                    self.accumulate(grads, *a, self.reduce_to(*a, scale(tb)));
                }
                if self.requires_grad(*b) {
                    self.accumulate(grads, *b, self.reduce_to(*b, scale(ta)));
                }
            }
            Op::AddScalar(x) | Op::Reshape(x) => {
                let shape = self.value(*x).shape().to_vec();
                self.accumulate(grads, *x, g.clone().reshape(&shape)?);
            }
            Op::MulScalar(x, c) => self.accumulate(grads, *x, g.map(|v| v * c)),
            Op::Transpose(x) => self.accumulate(grads, *x, g.transpose()?),
            Op::ConcatCols(a, b) => {
                let p = self.value(*a).cols();
                let q = self.value(*b).cols();
                let n = g.rows();
                let (mut da, mut db) = (Vec::with_capacity(n * p), Vec::with_capacity(n * q));
                for r in 0..n {
                    let row = g.row(r);
                    da.extend_from_slice(&row[..p]);
                    db.extend_from_slice(&row[p..]);
                }
                self.accumulate(grads, *a, Tensor::new(vec![n, p], da)?);
                self.accumulate(grads, *b, Tensor::new(vec![n, q], db)?);
            }
            Op::SliceRows(x, start) => {
                let mut dx = Tensor::zeros(self.value(*x).shape());
                let c = dx.cols();
                dx.data_mut()[start * c..start * c + g.len()].copy_from_slice(g.data());
                self.accumulate(grads, *x, dx);
            }
            Op::Sum(x) => {
                let s = g.data()[0];
                self.accumulate(grads, *x, Tensor::full(self.value(*x).shape(), s));
            }
            Op::Mean(x) => {
                let t = self.value(*x);
                let s = g.data()[0] / t.len() as f64;
                self.accumulate(grads, *x, Tensor::full(t.shape(), s));
            }
            Op::Square(x) => {
                let dx = zip_map(self.value(*x), &|v, gv| 2.0 * v * gv);
                self.accumulate(grads, *x, dx);
            }
            Op::FrobeniusSq(x) => {
                let s = g.data()[0];
                self.accumulate(grads, *x, self.value(*x).map(|v| 2.0 * v * s));
            }
            Op::HingeMax0(x, delta) => {
                let d = *delta;
                let dx = zip_map(self.value(*x), &|v, gv| if v - d > 0.0 { gv } else { 0.0 });
                self.accumulate(grads, *x, dx);
            }
            Op::Sigmoid(x) => self.accumulate(grads, *x, zip_map(y, &|s, gv| gv * s * (1.0 - s))),
            Op::Elu(x, alpha) => {
                let a = *alpha;
                let dx = zip_map(self.value(*x), &|v, gv| {
                    if v > 0.0 {
                        gv
                    } else {
                        gv * a * libm::exp(v)
                    }
                });
                self.accumulate(grads, *x, dx);
            }
            Op::LeakyRelu(x, slope) => {
                let s = *slope;
                let dx = zip_map(self.value(*x), &|v, gv| if v > 0.0 { gv } else { s * gv });
                self.accumulate(grads, *x, dx);
            }
            Op::Log(x) => self.accumulate(grads, *x, zip_map(self.value(*x), &|v, gv| gv / v)),
            Op::Exp(x) => self.accumulate(grads, *x, zip_map(y, &|e, gv| gv * e)),
            Op::MaskedSoftmaxRows(x) => {
                let (n, m) = y.dims2()?;
                let mut dx = vec![0.0; n * m];
                for r in 0..n {
                    let yr = y.row(r);
                    let gr = g.row(r);
                    let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                    for c in 0..m {
                        dx[r * m + c] = yr[c] * (gr[c] - dot);
                    }
                }
                self.accumulate(grads, *x, Tensor::new(vec![n, m], dx)?);
            }
            Op::LogSoftmaxRows(x) => {
                let (n, c) = y.dims2()?;
                let mut dx = vec![0.0; n * c];
                for r in 0..n {
                    let gsum: f64 = g.row(r).iter().sum();
                    for k in 0..c {
                        dx[r * c + k] = g.row(r)[k] - libm::exp(y.row(r)[k]) * gsum;
                    }
                }
                self.accumulate(grads, *x, Tensor::new(vec![n, c], dx)?);
            }
            Op::NormalizeRows(x, norms) => {
                let (n, d) = y.dims2()?;
                let mut dx = vec![0.0; n * d];
                for r in 0..n {
                    let (yr, gr) = (y.row(r), g.row(r));
                    let nrm = norms[r];
                    if nrm > 0.0 {
                        let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                        for c in 0..d {
                            dx[r * d + c] = (gr[c] - yr[c] * dot) / nrm;
                        }
                    } else {
                        dx[r * d..(r + 1) * d].copy_from_slice(gr);
                    }
                }
                self.accumulate(grads, *x, Tensor::new(vec![n, d], dx)?);
            }
            Op::AddRowBias(x, b) => {
                let (n, d) = g.dims2()?;
                let mut db = vec![0.0; d];
                for r in 0..n {
                    for (acc, v) in db.iter_mut().zip(g.row(r)) {
                        *acc += v;
                    }
                }
                let bshape = self.value(*b).shape().to_vec();
                self.accumulate(grads, *x, g.clone());
                self.accumulate(grads, *b, Tensor::new(bshape, db)?);
            }
            Op::AddChannelBias(x, b) => {
                let c = self.value(*b).len();
                let plane = g.shape()[2] * g.shape()[3];
                let mut db = vec![0.0; c];
                for (idx, chunk) in g.data().chunks(plane).enumerate() {
                    db[idx % c] += chunk.iter().sum::<f64>();
                }
                let bshape = self.value(*b).shape().to_vec();
                self.accumulate(grads, *x, g.clone());
                self.accumulate(grads, *b, Tensor::new(bshape, db)?);
            }
            Op::Conv2d(input, kernel, geom) => {
                let ti = self.value(*input);
                let tk = self.value(*kernel);
                if self.requires_grad(*input) {
                    let dx = conv::conv_adjoint(geom, g.data(), tk.data());
                    self.accumulate(grads, *input, Tensor::new(ti.shape().to_vec(), dx)?);
                }
                if self.requires_grad(*kernel) {
                    let dk = conv::conv_kernel_grad(geom, ti.data(), g.data());
                    self.accumulate(grads, *kernel, Tensor::new(tk.shape().to_vec(), dk)?);
                }
            }
            Op::ConvTranspose2d(input, kernel, geom) => {
                let ti = self.value(*input);
                let tk = self.value(*kernel);
                if self.requires_grad(*input) {
                    let dx = conv::conv_forward(geom, g.data(), tk.data());
                    self.accumulate(grads, *input, Tensor::new(ti.shape().to_vec(), dx)?);
                }
                if self.requires_grad(*kernel) {
                    let dk = conv::conv_kernel_grad(geom, g.data(), ti.data());
                    self.accumulate(grads, *kernel, Tensor::new(tk.shape().to_vec(), dk)?);
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + libm::exp(-v))
    } else {
        let e = libm::exp(v);
        e / (1.0 + e)
    }
}

pub(crate) fn elu(v: f64, alpha: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        alpha * libm::expm1(v)
    }
}

pub(crate) fn masked_softmax(t: &Tensor, mask: &Tensor, n: usize, m: usize) -> Result<Tensor> {
    let mut out = Tensor::zeros(&[n, m]);
    for r in 0..n {
        let lr = t.row(r);
        let mr = mask.row(r);
        let mut mx = f64::NEG_INFINITY;
        let mut any = false;
        for c in 0..m {
            if mr[c] != 0.0 {
                any = true;
                mx = mx.max(lr[c]);
            }
        }
        if !any {
            return Err(Error::DegenerateRow { row: r });
        }
        let orow = &mut out.data_mut()[r * m..(r + 1) * m];
        let mut z = 0.0;
        for c in 0..m {
            if mr[c] != 0.0 {
                let e = libm::exp(lr[c] - mx);
                orow[c] = e;
                z += e;
            }
        }
        orow.iter_mut().for_each(|v| *v /= z);
    }
    Ok(out)
}
