//! Dynamic causal discovery: a bank of `M` learnable weighted adjacency
//! templates, a causal temporal encoder, a template embedder and the soft
//! selection producing the per-step graph `G_t = Σ_i α_t^i G^i`.
//!
//! Templates are stored flattened as one `M × n²` parameter (row `i` is
//! template `i`, row-major, entry `[j, i]` weighting edge `j → i`). The forward
//! pass multiplies by a constant off-diagonal mask, so diagonal entries stay
//! at zero and never receive gradient.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::diff::{trace_expm_hadamard, Binding, DiffError, Matrix, ParamId, ParamStore, Tape, Var};
use crate::math;
use crate::nn::{glorot, Mlp};

/// Floor applied to selection weights before taking logs.
pub const OPTION_CLAMP: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct TemplateBank {
    pub bank: ParamId,
    pub count: usize,
    pub nodes: usize,
    pub temperature: f64,
}

impl TemplateBank {
    /// Entries iid uniform in `[-init, init]`, diagonal zero.
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        count: usize,
        nodes: usize,
        init: f64,
        temperature: f64,
        rng: &mut R,
    ) -> Self {
        let value = Matrix::from_fn(count, nodes * nodes, |_, e| {
            let draw = rng.random_range(-init..=init);
            if e / nodes == e % nodes {
                0.0
            } else {
                draw
            }
        });
        let bank = store.add("templates", value);
        Self { bank, count, nodes, temperature }
    }

    pub fn off_diagonal_mask(&self) -> Matrix {
        let n = self.nodes;
        Matrix::from_fn(self.count, n * n, |_, e| if e / n == e % n { 0.0 } else { 1.0 })
    }

    /// Masked `M × n²` bank on the tape.
    pub fn forward(&self, tape: &mut Tape, bind: &Binding) -> Result<Var, DiffError> {
        let mask = tape.constant(self.off_diagonal_mask());
        tape.mul(bind.var(self.bank), mask)
    }

    /// Current templates as `n × n` matrices.
    pub fn templates(&self, store: &ParamStore) -> Vec<Matrix> {
        let flat = store.get(self.bank);
        (0..self.count).map(|i| Matrix::from_vec(self.nodes, self.nodes, flat.row(i).to_vec())).collect()
    }
}

/// Two-or-more layer causal convolution stack with ReLU after every layer.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryEncoder {
    pub layers: Vec<(ParamId, ParamId)>,
    pub kernel: usize,
    pub output: usize,
}

impl TrajectoryEncoder {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        input: usize,
        hidden: usize,
        layers: usize,
        kernel: usize,
        rng: &mut R,
    ) -> Self {
        let mut width = input;
        let layers = (0..layers)
            .map(|l| {
                let w = store.add(format!("encoder.{l}.weight"), glorot(kernel * width, hidden, rng));
                let b = store.add(format!("encoder.{l}.bias"), Matrix::zeros(1, hidden));
                width = hidden;
                (w, b)
            })
            .collect();
        Self { layers, kernel, output: hidden }
    }

    pub fn ids(&self) -> Vec<ParamId> {
        self.layers.iter().flat_map(|(w, b)| [*w, *b]).collect()
    }

    /// Row `t` of the result is `z_t`, a function of state rows `0..=t` only.
    pub fn encode_history(&self, tape: &mut Tape, bind: &Binding, states: Var) -> Result<Var, DiffError> {
        if tape.shape(states).0 == 0 {
            return Err(DiffError::Invalid { op: "encode_history", reason: "empty prefix" });
        }
        let mut x = states;
        for (w, b) in &self.layers {
            let conv = tape.causal_conv1d(x, bind.var(*w), self.kernel)?;
            let biased = tape.add(conv, bind.var(*b))?;
            x = tape.relu(biased);
        }
        Ok(x)
    }
}

/// Perceptron mapping a flattened template to its selection key `u^i`.
#[derive(Clone, Debug, PartialEq)]
pub struct TemplateEmbedder {
    pub mlp: Mlp,
}

impl TemplateEmbedder {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, nodes: usize, hidden: usize, output: usize, rng: &mut R) -> Self {
        Self { mlp: Mlp::new(store, "embedder", &[nodes * nodes, hidden, output], rng) }
    }

    pub fn forward(&self, tape: &mut Tape, bind: &Binding, bank: Var) -> Result<Var, DiffError> {
        self.mlp.forward(tape, bind, bank)
    }
}

/// Soft selection: `α_t = softmax(⟨z_t, u^i⟩ / T)` over templates and
/// `G_t = Σ_i α_t^i G^i`. Returns `(α: T×M, G: T×n²)`.
pub fn select(tape: &mut Tape, z: Var, keys: Var, bank: Var, temperature: f64) -> Result<(Var, Var), DiffError> {
    let keys_t = tape.transpose(keys);
    let logits = tape.matmul(z, keys_t)?;
    let alpha = tape.softmax_rows(logits, temperature)?;
    let graphs = tape.matmul(alpha, bank)?;
    Ok((alpha, graphs))
}

/// `Σ_i Σ_jk |G^i_jk|`.
pub fn sparsity_reg(tape: &mut Tape, bank: Var) -> Var {
    tape.l1_norm(bank)
}

/// `Σ_i (tr[exp(G^i ∘ G^i)] − n)` over the rows of a flattened bank.
pub fn acyclicity_reg(tape: &mut Tape, bank: Var, nodes: usize) -> Result<Var, DiffError> {
    let (count, _) = tape.shape(bank);
    let mut total: Option<Var> = None;
    for i in 0..count {
        let row = tape.slice(bank, i, 1, 0, nodes * nodes)?;
        let g = tape.reshape(row, nodes, nodes)?;
        let tr = tape.trace_expm_hadamard(g)?;
        total = Some(match total {
            Some(acc) => tape.add(acc, tr)?,
            None => tr,
        });
    }
    let offset = tape.constant(Matrix::scalar(-((count * nodes) as f64)));
    match total {
        Some(acc) => tape.add(acc, offset),
        None => Ok(tape.constant(Matrix::scalar(0.0))),
    }
}

/// One-hot `T × M` matrix for per-step group labels.
pub fn one_hot(labels: &[usize], groups: usize) -> Matrix {
    Matrix::from_fn(labels.len(), groups, |t, i| if labels[t] == i { 1.0 } else { 0.0 })
}

/// `−Σ_t Σ_i q_t^i log α_t^i` with `α` clamped below at [`OPTION_CLAMP`].
pub fn option_loss(tape: &mut Tape, alpha: Var, labels: &[usize]) -> Result<Var, DiffError> {
    let (steps, groups) = tape.shape(alpha);
    if labels.len() != steps || labels.iter().any(|&l| l >= groups) {
        return Err(DiffError::Invalid { op: "option_loss", reason: "labels must cover every step and index a template" });
    }
    let q = tape.constant(one_hot(labels, groups));
    let clamped = tape.clamp_min(alpha, OPTION_CLAMP);
    let logs = tape.log(clamped)?;
    let picked = tape.mul(logs, q)?;
    let total = tape.sum(picked);
    Ok(tape.scale(total, -1.0))
}

/// Value of `Σ_i H(G^i)`.
pub fn acyclicity_value(templates: &[Matrix]) -> f64 {
    templates.iter().map(|g| trace_expm_hadamard(g).expect("square template") - g.rows() as f64).sum()
}

/// Value of the sparsity regulariser.
pub fn sparsity_value(templates: &[Matrix]) -> f64 {
    templates.iter().map(|g| g.as_slice().iter().map(|x| x.abs()).sum::<f64>()).sum()
}

/// Value of the option loss for precomputed selection weights.
pub fn option_loss_value(alphas: &Matrix, labels: &[usize]) -> f64 {
    labels.iter().enumerate().map(|(t, &l)| -math::ln(alphas.get(t, l).max(OPTION_CLAMP))).sum()
}

/// Selection weights for a single logit row, same rule as [`select`].
pub fn selection_weights(logits: &[f64], temperature: f64) -> Vec<f64> {
    let m = Matrix::row_vector(logits.to_vec());
    crate::diff::softmax_rows(&m, temperature).into_vec()
}

/// Convex combination `Σ_i α_i G^i`.
pub fn combine(alpha: &[f64], templates: &[Matrix]) -> Matrix {
    let (r, c) = templates[0].shape();
    let mut out = Matrix::zeros(r, c);
    for (a, g) in alpha.iter().zip(templates) {
        for (o, v) in out.as_mut_slice().iter_mut().zip(g.as_slice()) {
            *o += a * v;
        }
    }
    out
}
