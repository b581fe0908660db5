//! Causal-relation encoding: per-variable embeddings refined by edge-aware
//! message passing over the selected graph.
//!
//! Embeddings for `T` steps are stacked as a `(T·n) × d` matrix, row
//! `t·n + j` holding node `j` at step `t` (states first, then actions).

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::diff::{Binding, DiffError, Matrix, ParamId, ParamStore, Tape, Var};
use crate::math;
use crate::nn::glorot;

/// History features of one variable: row `t` holds `x_t` followed by the
/// backward differences `∇x_t, ∇²x_t, …` up to order `width − 1`, where the
/// series is extended to the left by repeating its first value. This is an
/// invertible re-expression of the last `width` values; with `width = 1` it
/// is just `x_t`.
pub fn lag_window(series: &Matrix, col: usize, width: usize) -> Matrix {
    let at = |t: usize, back: usize| series.get(t.saturating_sub(back), col);
    Matrix::from_fn(series.rows(), width, |t, order| {
        // ∇^k x_t = Σ_i (−1)^i C(k, i) x_{t−i}
        let mut binom = 1.0;
        let mut acc = 0.0;
        for i in 0..=order {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * binom * at(t, i);
            binom = binom * (order - i) as f64 / (i + 1) as f64;
        }
        acc
    })
}

/// Stacked node features `T × (n·history)`: state windows over `states`,
/// then action windows over `prev_actions` (row `t` holds `a_{t−1}`).
pub fn node_features(states: &Matrix, prev_actions: &Matrix, history: usize) -> Matrix {
    let (steps, ns) = states.shape();
    let nodes = ns + prev_actions.cols();
    let mut out = Matrix::zeros(steps, nodes * history);
    for j in 0..nodes {
        let window =
            if j < ns { lag_window(states, j, history) } else { lag_window(prev_actions, j - ns, history) };
        for t in 0..steps {
            out.row_mut(t)[j * history..(j + 1) * history].copy_from_slice(window.row(t));
        }
    }
    out
}

/// Per-variable embedding tables. Each variable is observed through a window
/// of its last `history` values; with `history = 1` a state row is exactly
/// `s_{t,j} · E_j`. Action rows are `[a_{t−1}, …] · E_a + base_a` with both
/// `E_a` and `base_a` zero at initialisation.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    /// `(n_state · history) × d`, rows `j·history .. (j+1)·history` form `E_j`.
    pub state_scale: ParamId,
    /// `(n_action · history) × d`.
    pub action_scale: ParamId,
    /// `n_action × d`.
    pub action_base: ParamId,
    pub n_state: usize,
    pub n_action: usize,
    pub history: usize,
    pub dim: usize,
}

impl EmbeddingTable {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        n_state: usize,
        n_action: usize,
        history: usize,
        dim: usize,
        rng: &mut R,
    ) -> Self {
        let limit = math::sqrt(6.0 / (history + dim) as f64);
        let state_scale = store.add(
            "embedding.state",
            Matrix::from_fn(n_state * history, dim, |_, _| rng.random_range(-limit..limit)),
        );
        let action_scale = store.add("embedding.action_scale", Matrix::zeros(n_action * history, dim));
        let action_base = store.add("embedding.action", Matrix::zeros(n_action, dim));
        Self { state_scale, action_scale, action_base, n_state, n_action, history, dim }
    }

    pub fn ids(&self) -> [ParamId; 3] {
        [self.state_scale, self.action_scale, self.action_base]
    }

    /// See [`node_features`].
    pub fn features(&self, states: &Matrix, prev_actions: &Matrix) -> Result<Matrix, DiffError> {
        if states.cols() != self.n_state || prev_actions.shape() != (states.rows(), self.n_action) {
            return Err(DiffError::Shape {
                op: "init_embeddings",
                shapes: alloc::vec![states.shape(), prev_actions.shape(), (self.n_state, self.n_action)],
            });
        }
        Ok(node_features(states, prev_actions, self.history))
    }

    /// Layer-0 embeddings, `(T·n) × d`.
    pub fn init_embeddings(
        &self,
        tape: &mut Tape,
        bind: &Binding,
        states: &Matrix,
        prev_actions: &Matrix,
    ) -> Result<Var, DiffError> {
        let features = tape.constant(self.features(states, prev_actions)?);
        let scale = tape.concat_rows(&[bind.var(self.state_scale), bind.var(self.action_scale)])?;
        let zero_state_base = tape.constant(Matrix::zeros(self.n_state, self.dim));
        let base = tape.concat_rows(&[zero_state_base, bind.var(self.action_base)])?;
        tape.node_embed(features, scale, base)
    }
}

/// One edge-aware layer:
/// `m_{j→i} = [h_i, h_j] W_edge`, `h_i' = relu([Σ_j G[j,i] m_{j→i}, h_i] W_agg)`.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeLayer {
    pub w_edge: ParamId,
    pub w_agg: ParamId,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MessagePassing {
    pub layers: Vec<EdgeLayer>,
    pub nodes: usize,
}

impl MessagePassing {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, nodes: usize, dim: usize, layers: usize, rng: &mut R) -> Self {
        let layers = (0..layers)
            .map(|l| EdgeLayer {
                w_edge: store.add(format!("gnn.{l}.edge"), glorot(2 * dim, dim, rng)),
                w_agg: store.add(format!("gnn.{l}.agg"), glorot(2 * dim, dim, rng)),
            })
            .collect();
        Self { layers, nodes }
    }

    pub fn ids(&self) -> Vec<ParamId> {
        self.layers.iter().flat_map(|l| [l.w_edge, l.w_agg]).collect()
    }

    /// Applies every layer; `graphs` is `T × n²` and `h` is `(T·n) × d`.
    /// The aggregated message `Σ_j G[j,i] [h_i, h_j]` is formed first and then
    /// multiplied by `W_edge`, which equals summing the per-edge messages.
    pub fn message_pass(&self, tape: &mut Tape, bind: &Binding, mut h: Var, graphs: Var) -> Result<Var, DiffError> {
        for layer in &self.layers {
            h = self.layer_forward(tape, bind, layer, h, graphs)?;
        }
        Ok(h)
    }

    pub fn layer_forward(
        &self,
        tape: &mut Tape,
        bind: &Binding,
        layer: &EdgeLayer,
        h: Var,
        graphs: Var,
    ) -> Result<Var, DiffError> {
        let pairs = tape.edge_aggregate(graphs, h)?;
        let messages = tape.matmul(pairs, bind.var(layer.w_edge))?;
        let joined = tape.concat_cols(messages, h)?;
        let pre = tape.matmul(joined, bind.var(layer.w_agg))?;
        Ok(tape.relu(pre))
    }
}

/// Row indices of node `node` across `steps` stacked steps.
pub fn node_rows(node: usize, nodes: usize, steps: usize) -> Vec<usize> {
    (0..steps).map(|t| t * nodes + node).collect()
}
