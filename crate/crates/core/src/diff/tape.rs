use alloc::vec;
use alloc::vec::Vec;

use super::matrix::{gemm, Matrix};
use super::DiffError;
use crate::math;

/// Handle to a tensor recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Every operation the tape can record.
#[derive(Clone, Debug, PartialEq)]
pub enum OpKind {
    MatMul,
    /// Elementwise sum; the right operand may also be a `1 × cols` row broadcast over rows.
    Add,
    /// Elementwise difference with the same broadcast rule as [`OpKind::Add`].
    Subtract,
    Multiply,
    Scale(f64),
    Sin,
    Exp,
    Log,
    Relu,
    Sigmoid,
    /// `log(sigmoid(x))`, evaluated without overflow.
    LogSigmoid,
    Tanh,
    SoftmaxRows { temperature: f64 },
    ConcatCols,
    ConcatRows,
    Slice { row0: usize, rows: usize, col0: usize, cols: usize },
    GatherRows(Vec<usize>),
    Reshape { rows: usize, cols: usize },
    Transpose,
    Sum,
    Mean,
    L1Norm,
    /// Elementwise square.
    Square,
    Trace,
    ClampMin(f64),
    /// Left-padded 1-d convolution over the rows of a `T × c_in` input with a
    /// `(kernel · c_in) × c_out` weight; output row `t` only sees input rows `≤ t`.
    CausalConv1d { kernel: usize },
    /// `tr(exp(G ∘ G))` of a square matrix.
    TraceExpmHadamard,
    /// Per-step graph aggregation for stacked node embeddings, see [`Tape::edge_aggregate`].
    EdgeAggregate,
    /// Variable initialisation for stacked steps, see [`Tape::node_embed`].
    NodeEmbed,
}

impl OpKind {
    pub fn name(&self) -> &'static str {
        match self {
            OpKind::MatMul => "matmul",
            OpKind::Add => "add",
            OpKind::Subtract => "subtract",
            OpKind::Multiply => "multiply",
            OpKind::Scale(_) => "scale",
            OpKind::Sin => "sin",
            OpKind::Exp => "exp",
            OpKind::Log => "log",
            OpKind::Relu => "relu",
            OpKind::Sigmoid => "sigmoid",
            OpKind::LogSigmoid => "log_sigmoid",
            OpKind::Tanh => "tanh",
            OpKind::SoftmaxRows { .. } => "softmax_rows",
            OpKind::ConcatCols => "concat_cols",
            OpKind::ConcatRows => "concat_rows",
            OpKind::Slice { .. } => "slice",
            OpKind::GatherRows(_) => "gather_rows",
            OpKind::Reshape { .. } => "reshape",
            OpKind::Transpose => "transpose",
            OpKind::Sum => "sum",
            OpKind::Mean => "mean",
            OpKind::L1Norm => "l1_norm",
            OpKind::Square => "square",
            OpKind::Trace => "trace",
            OpKind::ClampMin(_) => "clamp_min",
            OpKind::CausalConv1d { .. } => "causal_conv1d",
            OpKind::TraceExpmHadamard => "trace_expm_hadamard",
            OpKind::EdgeAggregate => "edge_aggregate",
            OpKind::NodeEmbed => "node_embed",
        }
    }
}

#[derive(Clone, Debug)]
enum Origin {
    Leaf,
    Constant,
    Op { kind: OpKind, operands: Vec<usize> },
}

#[derive(Clone, Debug)]
struct Node {
    value: Matrix,
    origin: Origin,
    needs_grad: bool,
    /// Forward-pass residue reused by the backward rule (im2col buffer, series sums).
    aux: Option<Matrix>,
    /// Accumulated gradient, populated on leaves only.
    grad: Option<Matrix>,
}

/// Records executed operations in order so gradients can be replayed in reverse.
///
/// Operands always precede their results, so the record is topologically sorted
/// by construction. Leaf gradients accumulate across [`Tape::backward`] calls
/// until [`Tape::zero_grad`].
#[derive(Clone, Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn shape_err(op: &OpKind, shapes: &[(usize, usize)]) -> DiffError {
    DiffError::Shape { op: op.name(), shapes: shapes.to_vec() }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Drops every record; previously issued handles become invalid.
    pub fn clear(&mut self) {
        self.nodes.clear();
    }

    /// Differentiable input (a parameter or any tensor whose gradient is wanted).
    pub fn leaf(&mut self, value: Matrix) -> Var {
        self.push(value, Origin::Leaf, true, None)
    }

    /// Input that never receives a gradient.
    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(value, Origin::Constant, false, None)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    /// Gradient accumulated on a leaf, `None` if backward never reached it.
    pub fn grad(&self, v: Var) -> Option<&Matrix> {
        self.nodes[v.0].grad.as_ref()
    }

    pub fn zero_grad(&mut self) {
        for n in &mut self.nodes {
            n.grad = None;
        }
    }

    fn push(&mut self, value: Matrix, origin: Origin, needs_grad: bool, aux: Option<Matrix>) -> Var {
        self.nodes.push(Node { value, origin, needs_grad, aux, grad: None });
        Var(self.nodes.len() - 1)
    }

    fn record(&mut self, kind: OpKind, operands: &[Var], value: Matrix, aux: Option<Matrix>) -> Var {
        let needs_grad = operands.iter().any(|v| self.nodes[v.0].needs_grad);
        let operands = operands.iter().map(|v| v.0).collect();
        self.push(value, Origin::Op { kind, operands }, needs_grad, aux)
    }

    /// Generic entry point: applies `kind` to `operands` and records it.
    pub fn apply(&mut self, kind: OpKind, operands: &[Var]) -> Result<Var, DiffError> {
        let arity = match &kind {
            OpKind::MatMul
            | OpKind::Add
            | OpKind::Subtract
            | OpKind::Multiply
            | OpKind::ConcatCols
            | OpKind::CausalConv1d { .. }
            | OpKind::EdgeAggregate => Some(2),
            OpKind::NodeEmbed => Some(3),
            OpKind::ConcatRows => None,
            _ => Some(1),
        };
        if let Some(n) = arity {
            if operands.len() != n {
                return Err(DiffError::Arity { op: kind.name(), expected: n, got: operands.len() });
            }
        } else if operands.is_empty() {
            return Err(DiffError::Arity { op: kind.name(), expected: 1, got: 0 });
        }
        let shapes: Vec<(usize, usize)> = operands.iter().map(|v| self.shape(*v)).collect();
        let a = operands[0];
        let (value, aux) = match &kind {
            OpKind::MatMul => {
                let (x, y) = (self.value(a), self.value(operands[1]));
                if x.cols() != y.rows() {
                    return Err(shape_err(&kind, &shapes));
                }
                (x.matmul(y), None)
            }
            OpKind::Add | OpKind::Subtract => {
                let (x, y) = (self.value(a), self.value(operands[1]));
                let sign = if kind == OpKind::Add { 1.0 } else { -1.0 };
                if x.shape() == y.shape() {
                    (x.zip_map(y, |p, q| p + sign * q), None)
                } else if y.rows() == 1 && y.cols() == x.cols() {
                    let mut out = x.clone();
                    for r in 0..out.rows() {
                        for (o, b) in out.row_mut(r).iter_mut().zip(y.as_slice()) {
                            *o += sign * b;
                        }
                    }
                    (out, None)
                } else {
                    return Err(shape_err(&kind, &shapes));
                }
            }
            OpKind::Multiply => {
                let (x, y) = (self.value(a), self.value(operands[1]));
                if x.shape() != y.shape() {
                    return Err(shape_err(&kind, &shapes));
                }
                (x.zip_map(y, |p, q| p * q), None)
            }
            OpKind::Scale(s) => (self.value(a).map(|x| x * s), None),
            OpKind::Sin => (self.value(a).map(math::sin), None),
            OpKind::Exp => (self.value(a).map(math::exp), None),
            OpKind::Log => {
                let x = self.value(a);
                if let Some(&bad) = x.as_slice().iter().find(|v| !(**v > 0.0)) {
                    return Err(DiffError::NonPositiveLog { value: bad });
                }
                (x.map(math::ln), None)
            }
            OpKind::Relu => (self.value(a).map(|x| if x > 0.0 { x } else { 0.0 }), None),
            OpKind::Sigmoid => (self.value(a).map(math::sigmoid), None),
            OpKind::LogSigmoid => (self.value(a).map(math::log_sigmoid), None),
            OpKind::Tanh => (self.value(a).map(math::tanh), None),
            OpKind::SoftmaxRows { temperature } => {
                if !(*temperature > 0.0) {
                    return Err(DiffError::Invalid { op: kind.name(), reason: "temperature must be positive" });
                }
                (softmax_rows(self.value(a), *temperature), None)
            }
            OpKind::ConcatCols => {
                let (x, y) = (self.value(a), self.value(operands[1]));
                if x.rows() != y.rows() {
                    return Err(shape_err(&kind, &shapes));
                }
                let mut out = Matrix::zeros(x.rows(), x.cols() + y.cols());
                for r in 0..x.rows() {
                    let row = out.row_mut(r);
                    row[..x.cols()].copy_from_slice(x.row(r));
                    row[x.cols()..].copy_from_slice(y.row(r));
                }
                (out, None)
            }
            OpKind::ConcatRows => {
                let cols = shapes[0].1;
                if shapes.iter().any(|s| s.1 != cols) {
                    return Err(shape_err(&kind, &shapes));
                }
                let rows: usize = shapes.iter().map(|s| s.0).sum();
                let mut data = Vec::with_capacity(rows * cols);
                for v in operands {
                    data.extend_from_slice(self.value(*v).as_slice());
                }
                (Matrix::from_vec(rows, cols, data), None)
            }
            OpKind::Slice { row0, rows, col0, cols } => {
                let x = self.value(a);
                if row0 + rows > x.rows() || col0 + cols > x.cols() {
                    return Err(shape_err(&kind, &shapes));
                }
                (Matrix::from_fn(*rows, *cols, |r, c| x.get(row0 + r, col0 + c)), None)
            }
            OpKind::GatherRows(idx) => {
                let x = self.value(a);
                if idx.iter().any(|&i| i >= x.rows()) {
                    return Err(shape_err(&kind, &shapes));
                }
                let mut data = Vec::with_capacity(idx.len() * x.cols());
                for &i in idx {
                    data.extend_from_slice(x.row(i));
                }
                (Matrix::from_vec(idx.len(), x.cols(), data), None)
            }
            OpKind::Reshape { rows, cols } => {
                let x = self.value(a);
                if rows * cols != x.len() {
                    return Err(shape_err(&kind, &shapes));
                }
                (x.clone().reshaped(*rows, *cols), None)
            }
            OpKind::Transpose => (self.value(a).transpose(), None),
            OpKind::Sum => (Matrix::scalar(self.value(a).sum()), None),
            OpKind::Mean => {
                let x = self.value(a);
                if x.is_empty() {
                    return Err(shape_err(&kind, &shapes));
                }
                (Matrix::scalar(x.sum() / x.len() as f64), None)
            }
            OpKind::L1Norm => (Matrix::scalar(self.value(a).as_slice().iter().map(|x| x.abs()).sum()), None),
            OpKind::Square => (self.value(a).map(|x| x * x), None),
            OpKind::Trace => {
                let x = self.value(a);
                if x.rows() != x.cols() {
                    return Err(shape_err(&kind, &shapes));
                }
                (Matrix::scalar(x.trace()), None)
            }
            OpKind::ClampMin(floor) => (self.value(a).map(|x| if x > *floor { x } else { *floor }), None),
            OpKind::CausalConv1d { kernel } => {
                let (x, w) = (self.value(a), self.value(operands[1]));
                if *kernel == 0 || w.rows() != kernel * x.cols() {
                    return Err(shape_err(&kind, &shapes));
                }
                let cols = im2col_causal(x, *kernel);
                (cols.matmul(w), Some(cols))
            }
            OpKind::TraceExpmHadamard => {
                let g = self.value(a);
                if g.rows() != g.cols() {
                    return Err(shape_err(&kind, &shapes));
                }
                let (value, grad) = trace_expm_hadamard_with_grad(g);
                (Matrix::scalar(value), Some(grad))
            }
            OpKind::EdgeAggregate => {
                let (gflat, h) = (self.value(a), self.value(operands[1]));
                let n = math::isqrt(gflat.cols());
                if n * n != gflat.cols() || h.rows() != gflat.rows() * n {
                    return Err(shape_err(&kind, &shapes));
                }
                (edge_aggregate_forward(gflat, h, n), None)
            }
            OpKind::NodeEmbed => {
                let (x, e, b) = (self.value(a), self.value(operands[1]), self.value(operands[2]));
                let n = b.rows();
                if n == 0 || x.cols() % n != 0 || e.rows() != x.cols() || e.cols() != b.cols() {
                    return Err(shape_err(&kind, &shapes));
                }
                let (steps, w, d) = (x.rows(), x.cols() / n, e.cols());
                let mut out = Matrix::zeros(steps * n, d);
                for t in 0..steps {
                    for j in 0..n {
                        let row = out.row_mut(t * n + j);
                        row.copy_from_slice(b.row(j));
                        for l in 0..w {
                            let s = x.get(t, j * w + l);
                            for (o, ev) in row.iter_mut().zip(e.row(j * w + l)) {
                                *o += s * ev;
                            }
                        }
                    }
                }
                (out, None)
            }
        };
        Ok(self.record(kind, operands, value, aux))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        self.apply(OpKind::MatMul, &[a, b])
    }
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        self.apply(OpKind::Add, &[a, b])
    }
    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        self.apply(OpKind::Subtract, &[a, b])
    }
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        self.apply(OpKind::Multiply, &[a, b])
    }
    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        self.apply(OpKind::Scale(s), &[a]).expect("scale accepts any shape")
    }
    pub fn sin(&mut self, a: Var) -> Var {
        self.apply(OpKind::Sin, &[a]).expect("unary")
    }
    pub fn exp(&mut self, a: Var) -> Var {
        self.apply(OpKind::Exp, &[a]).expect("unary")
    }
    pub fn log(&mut self, a: Var) -> Result<Var, DiffError> {
        self.apply(OpKind::Log, &[a])
    }
    pub fn relu(&mut self, a: Var) -> Var {
        self.apply(OpKind::Relu, &[a]).expect("unary")
    }
    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.apply(OpKind::Sigmoid, &[a]).expect("unary")
    }
    pub fn log_sigmoid(&mut self, a: Var) -> Var {
        self.apply(OpKind::LogSigmoid, &[a]).expect("unary")
    }
    pub fn tanh(&mut self, a: Var) -> Var {
        self.apply(OpKind::Tanh, &[a]).expect("unary")
    }
    pub fn softmax_rows(&mut self, a: Var, temperature: f64) -> Result<Var, DiffError> {
        self.apply(OpKind::SoftmaxRows { temperature }, &[a])
    }
    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        self.apply(OpKind::ConcatCols, &[a, b])
    }
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var, DiffError> {
        self.apply(OpKind::ConcatRows, parts)
    }
    pub fn slice(&mut self, a: Var, row0: usize, rows: usize, col0: usize, cols: usize) -> Result<Var, DiffError> {
        self.apply(OpKind::Slice { row0, rows, col0, cols }, &[a])
    }
    pub fn gather_rows(&mut self, a: Var, rows: Vec<usize>) -> Result<Var, DiffError> {
        self.apply(OpKind::GatherRows(rows), &[a])
    }
    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Result<Var, DiffError> {
        self.apply(OpKind::Reshape { rows, cols }, &[a])
    }
    pub fn transpose(&mut self, a: Var) -> Var {
        self.apply(OpKind::Transpose, &[a]).expect("unary")
    }
    pub fn sum(&mut self, a: Var) -> Var {
        self.apply(OpKind::Sum, &[a]).expect("unary")
    }
    pub fn mean(&mut self, a: Var) -> Result<Var, DiffError> {
        self.apply(OpKind::Mean, &[a])
    }
    pub fn l1_norm(&mut self, a: Var) -> Var {
        self.apply(OpKind::L1Norm, &[a]).expect("unary")
    }
    pub fn square(&mut self, a: Var) -> Var {
        self.apply(OpKind::Square, &[a]).expect("unary")
    }
    pub fn trace(&mut self, a: Var) -> Result<Var, DiffError> {
        self.apply(OpKind::Trace, &[a])
    }
    pub fn clamp_min(&mut self, a: Var, floor: f64) -> Var {
        self.apply(OpKind::ClampMin(floor), &[a]).expect("unary")
    }
    pub fn causal_conv1d(&mut self, x: Var, weight: Var, kernel: usize) -> Result<Var, DiffError> {
        self.apply(OpKind::CausalConv1d { kernel }, &[x, weight])
    }
    pub fn trace_expm_hadamard(&mut self, g: Var) -> Result<Var, DiffError> {
        self.apply(OpKind::TraceExpmHadamard, &[g])
    }

    /// For `T` stacked steps of an `n`-node graph: `gflat` is `T × n²` (row `t`
    /// holds `G_t` row-major, entry `[j, i]` weighting edge `j → i`) and `h` is
    /// `(T·n) × d`. Row `t·n + i` of the `(T·n) × 2d` result is
    /// `Σ_j G_t[j,i] · [h_{t,i}, h_{t,j}]`.
    pub fn edge_aggregate(&mut self, gflat: Var, h: Var) -> Result<Var, DiffError> {
        self.apply(OpKind::EdgeAggregate, &[gflat, h])
    }

    /// For a `T × (n·w)` feature matrix `x` holding `w` consecutive columns per
    /// node, a scale table `e` (`(n·w) × d`) and an offset table `b` (`n × d`),
    /// row `t·n + j` of the `(T·n) × d` result is
    /// `Σ_l x[t, j·w+l] · e_{j·w+l} + b_j`.
    pub fn node_embed(&mut self, x: Var, e: Var, b: Var) -> Result<Var, DiffError> {
        self.apply(OpKind::NodeEmbed, &[x, e, b])
    }

    /// Linear layer `x · w + b` with `b` a `1 × out` row.
    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Result<Var, DiffError> {
        let xw = self.matmul(x, w)?;
        self.add(xw, b)
    }

    /// Populates leaf gradients with `∂loss/∂leaf`, adding to whatever they held.
    pub fn backward(&mut self, loss: Var) -> Result<(), DiffError> {
        let shape = self.shape(loss);
        if shape != (1, 1) {
            return Err(DiffError::NotScalar(shape));
        }
        if !self.nodes[loss.0].needs_grad {
            return Ok(());
        }
        let mut grads: Vec<Option<Matrix>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Matrix::scalar(1.0));
        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            match self.nodes[idx].origin {
                Origin::Constant => {}
                Origin::Leaf => {
                    let slot = &mut self.nodes[idx].grad;
                    match slot {
                        Some(acc) => acc.add_assign(&g),
                        None => *slot = Some(g),
                    }
                }
                Origin::Op { .. } => self.backprop_op(idx, &g, &mut grads),
            }
        }
        Ok(())
    }

    fn backprop_op(&self, idx: usize, g: &Matrix, grads: &mut [Option<Matrix>]) {
        let node = &self.nodes[idx];
        let Origin::Op { kind, operands: ops } = &node.origin else { return };
        let out = &node.value;
        let val = |i: usize| &self.nodes[ops[i]].value;
        let wants = |i: usize| self.nodes[ops[i]].needs_grad;
        let send = |i: usize, m: Matrix, grads: &mut [Option<Matrix>]| {
            let slot = &mut grads[ops[i]];
            match slot {
                Some(acc) => acc.add_assign(&m),
                None => *slot = Some(m),
            }
        };
        match kind {
            OpKind::MatMul => {
                if wants(0) {
                    let mut da = Matrix::zeros(val(0).rows(), val(0).cols());
                    gemm(1.0, g, false, val(1), true, 0.0, &mut da);
                    send(0, da, grads);
                }
                if wants(1) {
                    let mut db = Matrix::zeros(val(1).rows(), val(1).cols());
                    gemm(1.0, val(0), true, g, false, 0.0, &mut db);
                    send(1, db, grads);
                }
            }
            OpKind::Add | OpKind::Subtract => {
                let sign = if *kind == OpKind::Add { 1.0 } else { -1.0 };
                if wants(0) {
                    send(0, g.clone(), grads);
                }
                if wants(1) {
                    let rhs = val(1);
                    if rhs.shape() == g.shape() {
                        send(1, g.map(|x| sign * x), grads);
                    } else {
                        let mut db = Matrix::zeros(1, g.cols());
                        for r in 0..g.rows() {
                            for (d, x) in db.as_mut_slice().iter_mut().zip(g.row(r)) {
                                *d += sign * x;
                            }
                        }
                        send(1, db, grads);
                    }
                }
            }
            OpKind::Multiply => {
                if wants(0) {
                    send(0, g.zip_map(val(1), |d, y| d * y), grads);
                }
                if wants(1) {
                    send(1, g.zip_map(val(0), |d, x| d * x), grads);
                }
            }
            OpKind::Scale(s) => send(0, g.map(|d| d * s), grads),
            OpKind::Sin => send(0, g.zip_map(val(0), |d, x| d * math::cos(x)), grads),
            OpKind::Exp => send(0, g.zip_map(out, |d, y| d * y), grads),
            OpKind::Log => send(0, g.zip_map(val(0), |d, x| d / x), grads),
            OpKind::Relu => send(0, g.zip_map(val(0), |d, x| if x > 0.0 { d } else { 0.0 }), grads),
            OpKind::Sigmoid => send(0, g.zip_map(out, |d, y| d * y * (1.0 - y)), grads),
            OpKind::LogSigmoid => send(0, g.zip_map(val(0), |d, x| d * math::sigmoid(-x)), grads),
            OpKind::Tanh => send(0, g.zip_map(out, |d, y| d * (1.0 - y * y)), grads),
            OpKind::SoftmaxRows { temperature } => {
                let mut dx = Matrix::zeros(out.rows(), out.cols());
                for r in 0..out.rows() {
                    let (y, dy) = (out.row(r), g.row(r));
                    let dot: f64 = y.iter().zip(dy).map(|(a, b)| a * b).sum();
                    for ((o, yi), di) in dx.row_mut(r).iter_mut().zip(y).zip(dy) {
                        *o = yi * (di - dot) / temperature;
                    }
                }
                send(0, dx, grads);
            }
            OpKind::ConcatCols => {
                let split = val(0).cols();
                if wants(0) {
                    send(0, Matrix::from_fn(g.rows(), split, |r, c| g.get(r, c)), grads);
                }
                if wants(1) {
                    send(1, Matrix::from_fn(g.rows(), g.cols() - split, |r, c| g.get(r, split + c)), grads);
                }
            }
            OpKind::ConcatRows => {
                let mut offset = 0;
                for i in 0..ops.len() {
                    let (rows, cols) = val(i).shape();
                    if wants(i) {
                        let part = g.as_slice()[offset * cols..(offset + rows) * cols].to_vec();
                        send(i, Matrix::from_vec(rows, cols, part), grads);
                    }
                    offset += rows;
                }
            }
            OpKind::Slice { row0, rows, col0, cols } => {
                let mut dx = Matrix::zeros(val(0).rows(), val(0).cols());
                for r in 0..*rows {
                    dx.row_mut(row0 + r)[*col0..col0 + cols].copy_from_slice(g.row(r));
                }
                send(0, dx, grads);
            }
            OpKind::GatherRows(idx) => {
                let mut dx = Matrix::zeros(val(0).rows(), val(0).cols());
                for (r, &i) in idx.iter().enumerate() {
                    for (d, x) in dx.row_mut(i).iter_mut().zip(g.row(r)) {
                        *d += x;
                    }
                }
                send(0, dx, grads);
            }
            OpKind::Reshape { .. } => {
                let (r, c) = val(0).shape();
                send(0, g.clone().reshaped(r, c), grads);
            }
            OpKind::Transpose => send(0, g.transpose(), grads),
            OpKind::Sum => {
                let (r, c) = val(0).shape();
                send(0, Matrix::filled(r, c, g.item()), grads);
            }
            OpKind::Mean => {
                let (r, c) = val(0).shape();
                send(0, Matrix::filled(r, c, g.item() / (r * c) as f64), grads);
            }
            OpKind::L1Norm => {
                let d = g.item();
                send(0, val(0).map(|x| d * math::sign0(x)), grads);
            }
            OpKind::Square => send(0, g.zip_map(val(0), |d, x| 2.0 * d * x), grads),
            OpKind::Trace => {
                let n = val(0).rows();
                let mut dx = Matrix::zeros(n, n);
                for i in 0..n {
                    dx.set(i, i, g.item());
                }
                send(0, dx, grads);
            }
            OpKind::ClampMin(floor) => send(0, g.zip_map(val(0), |d, x| if x > *floor { d } else { 0.0 }), grads),
            OpKind::CausalConv1d { kernel } => {
                let cols = node.aux.as_ref().expect("im2col buffer recorded in forward");
                let w = val(1);
                if wants(1) {
                    let mut dw = Matrix::zeros(w.rows(), w.cols());
                    gemm(1.0, cols, true, g, false, 0.0, &mut dw);
                    send(1, dw, grads);
                }
                if wants(0) {
                    let mut dcols = Matrix::zeros(cols.rows(), cols.cols());
                    gemm(1.0, g, false, w, true, 0.0, &mut dcols);
                    let x = val(0);
                    send(0, col2im_causal(&dcols, x.rows(), x.cols(), *kernel), grads);
                }
            }
            OpKind::TraceExpmHadamard => {
                let dg = node.aux.as_ref().expect("gradient recorded in forward");
                send(0, dg.map(|x| x * g.item()), grads);
            }
            OpKind::EdgeAggregate => {
                let (gflat, h) = (val(0), val(1));
                let n = math::isqrt(gflat.cols());
                let (dg, dh) = edge_aggregate_backward(gflat, h, g, n);
                if wants(0) {
                    send(0, dg, grads);
                }
                if wants(1) {
                    send(1, dh, grads);
                }
            }
            OpKind::NodeEmbed => {
                let (x, e) = (val(0), val(1));
                let n = val(2).rows();
                let (steps, w, d) = (x.rows(), x.cols() / n, e.cols());
                if wants(0) {
                    let dx = Matrix::from_fn(steps, n * w, |t, c| {
                        g.row(t * n + c / w).iter().zip(e.row(c)).map(|(a, b)| a * b).sum()
                    });
                    send(0, dx, grads);
                }
                if wants(1) || wants(2) {
                    let mut de = Matrix::zeros(n * w, d);
                    let mut db = Matrix::zeros(n, d);
                    for t in 0..steps {
                        for j in 0..n {
                            let gr = g.row(t * n + j);
                            for (a, v) in db.row_mut(j).iter_mut().zip(gr) {
                                *a += v;
                            }
                            for l in 0..w {
                                let s = x.get(t, j * w + l);
                                for (a, v) in de.row_mut(j * w + l).iter_mut().zip(gr) {
                                    *a += s * v;
                                }
                            }
                        }
                    }
                    if wants(1) {
                        send(1, de, grads);
                    }
                    if wants(2) {
                        send(2, db, grads);
                    }
                }
            }
        }
    }
}

pub(crate) fn softmax_rows(x: &Matrix, temperature: f64) -> Matrix {
    let mut out = Matrix::zeros(x.rows(), x.cols());
    for r in 0..x.rows() {
        let row = x.row(r);
        let max = row.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v));
        let o = out.row_mut(r);
        let mut total = 0.0;
        for (oi, v) in o.iter_mut().zip(row) {
            *oi = math::exp((v - max) / temperature);
            total += *oi;
        }
        for oi in o.iter_mut() {
            *oi /= total;
        }
    }
    out
}

fn im2col_causal(x: &Matrix, kernel: usize) -> Matrix {
    let (steps, cin) = x.shape();
    let mut cols = Matrix::zeros(steps, kernel * cin);
    for t in 0..steps {
        let row = cols.row_mut(t);
        for j in 0..kernel {
            // tap j looks back (kernel - 1 - j) steps
            let back = kernel - 1 - j;
            if t >= back {
                row[j * cin..(j + 1) * cin].copy_from_slice(x.row(t - back));
            }
        }
    }
    cols
}

fn col2im_causal(dcols: &Matrix, steps: usize, cin: usize, kernel: usize) -> Matrix {
    let mut dx = Matrix::zeros(steps, cin);
    for t in 0..steps {
        let row = dcols.row(t);
        for j in 0..kernel {
            let back = kernel - 1 - j;
            if t >= back {
                for (d, v) in dx.row_mut(t - back).iter_mut().zip(&row[j * cin..(j + 1) * cin]) {
                    *d += v;
                }
            }
        }
    }
    dx
}

/// Hard cap on Taylor terms; only reached for graphs far from acyclic.
const EXPM_MAX_TERMS: usize = 400;

/// Returns `tr(Σ_{k=0..K} A^k / k!)` for `A = G ∘ G` together with its exact
/// gradient `2 G ∘ (Σ_{k=0..K-1} A^k / k!)ᵀ`.
///
/// `K ≥ d + 2`; summation continues past that until the next term is
/// negligible, so the series is exact whenever `A` is nilpotent.
pub(crate) fn trace_expm_hadamard_with_grad(g: &Matrix) -> (f64, Matrix) {
    let n = g.rows();
    let a = g.map(|x| x * x);
    let mut term = Matrix::identity(n);
    // running sum up to K-1 and the value including term K
    let mut partial = Matrix::zeros(n, n);
    let mut value = 0.0;
    let min_terms = n + 2;
    let mut k = 0usize;
    loop {
        value += term.trace();
        let scale = term.max_abs();
        let done = k >= min_terms && (scale == 0.0 || scale <= 1e-18 * partial.max_abs().max(1.0));
        if done || k >= EXPM_MAX_TERMS {
            break;
        }
        partial.add_assign(&term);
        k += 1;
        let mut next = a.matmul(&term);
        next.scale_assign(1.0 / k as f64);
        term = next;
    }
    let grad = Matrix::from_fn(n, n, |i, j| 2.0 * g.get(i, j) * partial.get(j, i));
    (value, grad)
}

fn edge_aggregate_forward(gflat: &Matrix, h: &Matrix, n: usize) -> Matrix {
    let d = h.cols();
    let steps = gflat.rows();
    let mut out = Matrix::zeros(steps * n, 2 * d);
    for t in 0..steps {
        let gt = gflat.row(t);
        for i in 0..n {
            let mut deg = 0.0;
            let row = out.row_mut(t * n + i);
            let (left, right) = row.split_at_mut(d);
            for j in 0..n {
                let w = gt[j * n + i];
                if w == 0.0 {
                    continue;
                }
                deg += w;
                for (r, hv) in right.iter_mut().zip(h.row(t * n + j)) {
                    *r += w * hv;
                }
            }
            for (l, hv) in left.iter_mut().zip(h.row(t * n + i)) {
                *l = deg * hv;
            }
        }
    }
    out
}

fn edge_aggregate_backward(gflat: &Matrix, h: &Matrix, g: &Matrix, n: usize) -> (Matrix, Matrix) {
    let d = h.cols();
    let steps = gflat.rows();
    let mut dg = Matrix::zeros(steps, n * n);
    let mut dh = Matrix::zeros(h.rows(), d);
    for t in 0..steps {
        let gt = gflat.row(t);
        for i in 0..n {
            let gr = g.row(t * n + i);
            let (gl, grr) = gr.split_at(d);
            let hi = h.row(t * n + i);
            let self_dot: f64 = gl.iter().zip(hi).map(|(a, b)| a * b).sum();
            let mut deg = 0.0;
            for j in 0..n {
                let hj = h.row(t * n + j);
                let cross: f64 = grr.iter().zip(hj).map(|(a, b)| a * b).sum();
                dg.set(t, j * n + i, self_dot + cross);
                let w = gt[j * n + i];
                deg += w;
                if w != 0.0 {
                    for (dv, gv) in dh.row_mut(t * n + j).iter_mut().zip(grr) {
                        *dv += w * gv;
                    }
                }
            }
            for (dv, gv) in dh.row_mut(t * n + i).iter_mut().zip(gl) {
                *dv += deg * gv;
            }
        }
    }
    (dg, dh)
}
