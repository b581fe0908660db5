//! Prediction heads: the branched policy, the auxiliary next-state regressor,
//! the discriminator, and their losses.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::{E, PI};

use rand::Rng;

use crate::diff::{Binding, DiffError, Matrix, ParamId, ParamStore, Tape, Var};
use crate::math;
use crate::nn::{Dense, Mlp};

/// Shared two-layer ReLU trunk followed by one linear scalar head per branch.
/// Each head reads the trunk output next to the branch's raw input.
#[derive(Clone, Debug, PartialEq)]
pub struct BranchNet {
    pub trunk: [Dense; 2],
    pub heads: Vec<Dense>,
    pub sigma: f64,
}

impl BranchNet {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        input: usize,
        hidden: usize,
        branches: usize,
        sigma: f64,
        rng: &mut R,
    ) -> Self {
        let trunk = [
            Dense::new(store, &format!("{name}.trunk.0"), input, hidden, rng),
            Dense::new(store, &format!("{name}.trunk.1"), hidden, hidden, rng),
        ];
        let heads = (0..branches).map(|k| Dense::new(store, &format!("{name}.head.{k}"), hidden + input, 1, rng)).collect();
        Self { trunk, heads, sigma }
    }

    pub fn ids(&self) -> Vec<ParamId> {
        self.trunk.iter().chain(&self.heads).flat_map(Dense::ids).collect()
    }

    pub fn branches(&self) -> usize {
        self.heads.len()
    }

    /// `inputs[k]` is the `T × in` evidence of branch `k`; returns the `T × K`
    /// matrix of predicted means.
    pub fn forward(&self, tape: &mut Tape, bind: &Binding, inputs: &[Var]) -> Result<Var, DiffError> {
        if inputs.len() != self.heads.len() {
            return Err(DiffError::Arity { op: "branch_net", expected: self.heads.len(), got: inputs.len() });
        }
        let steps = tape.shape(inputs[0]).0;
        let stacked = tape.concat_rows(inputs)?;
        let mut x = stacked;
        for layer in &self.trunk {
            let y = layer.forward(tape, bind, x)?;
            x = tape.relu(y);
        }
        let mut columns: Option<Var> = None;
        for (k, head) in self.heads.iter().enumerate() {
            let rows = tape.slice(x, k * steps, steps, 0, tape.shape(x).1)?;
            let joined = tape.concat_cols(rows, inputs[k])?;
            let out = head.forward(tape, bind, joined)?;
            columns = Some(match columns {
                Some(acc) => tape.concat_cols(acc, out)?,
                None => out,
            });
        }
        Ok(columns.expect("at least one branch"))
    }
}

/// Perceptron on `[s, a]` returning a logit; `D = sigmoid(logit)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Discriminator {
    pub mlp: Mlp,
}

impl Discriminator {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, input: usize, hidden: usize, rng: &mut R) -> Self {
        Self { mlp: Mlp::new(store, "discriminator", &[input, hidden, hidden, 1], rng) }
    }

    pub fn ids(&self) -> Vec<ParamId> {
        self.mlp.ids()
    }

    pub fn logits(&self, tape: &mut Tape, bind: &Binding, states: Var, actions: Var) -> Result<Var, DiffError> {
        let x = tape.concat_cols(states, actions)?;
        self.mlp.forward(tape, bind, x)
    }

    /// Probability that each `(s, a)` row is expert data.
    pub fn discriminate(&self, tape: &mut Tape, bind: &Binding, states: Var, actions: Var) -> Result<Var, DiffError> {
        let logits = self.logits(tape, bind, states, actions)?;
        Ok(tape.sigmoid(logits))
    }
}

/// `log(σ√(2π))`.
pub fn gaussian_log_norm(sigma: f64) -> f64 {
    math::ln(sigma * math::sqrt(2.0 * PI))
}

/// Differential entropy of `dims` independent Gaussians of scale `sigma`.
pub fn gaussian_entropy(sigma: f64, dims: usize) -> f64 {
    dims as f64 * 0.5 * math::ln(2.0 * PI * E * sigma * sigma)
}

/// `Σ_k [−(a_k − μ_k)²/(2σ²) − log(σ√(2π))]`.
pub fn policy_loglik(mean: &[f64], observed: &[f64], sigma: f64) -> f64 {
    mean.iter()
        .zip(observed)
        .map(|(m, a)| -(a - m) * (a - m) / (2.0 * sigma * sigma) - gaussian_log_norm(sigma))
        .sum()
}

/// Negative Gaussian log-likelihood summed over columns and averaged over rows.
pub fn gaussian_nll(tape: &mut Tape, means: Var, observed: &Matrix, sigma: f64) -> Result<Var, DiffError> {
    let (rows, cols) = tape.shape(means);
    if observed.shape() != (rows, cols) || rows == 0 {
        return Err(DiffError::Shape { op: "gaussian_nll", shapes: alloc::vec![(rows, cols), observed.shape()] });
    }
    let target = tape.constant(observed.clone());
    let diff = tape.sub(means, target)?;
    let sq = tape.square(diff);
    let total = tape.sum(sq);
    let scaled = tape.scale(total, 1.0 / (2.0 * sigma * sigma * rows as f64));
    let norm = tape.constant(Matrix::scalar(cols as f64 * gaussian_log_norm(sigma)));
    tape.add(scaled, norm)
}

/// Discriminator objective `E_expert[log D] + E_generated[log(1 − D)]` from logits.
pub fn discriminator_objective(tape: &mut Tape, expert_logits: Var, generated_logits: Var) -> Result<Var, DiffError> {
    let log_d = tape.log_sigmoid(expert_logits);
    let real = tape.mean(log_d)?;
    let flipped = tape.scale(generated_logits, -1.0);
    let log_not_d = tape.log_sigmoid(flipped);
    let fake = tape.mean(log_not_d)?;
    tape.add(real, fake)
}

/// Pieces of the imitation objective, kept separately for reporting.
#[derive(Clone, Copy, Debug)]
pub struct ImitationTerms {
    pub total: Var,
    pub adversarial: Var,
    pub nll: Var,
}

/// `E[log(1 − D(s, â))] − λ·H(π) − E[log π(a|s)]`.
///
/// `generated_logits` must come from a discriminator bound as constants so no
/// gradient reaches it. The entropy of a fixed-scale Gaussian is a constant,
/// so the `λ` term shifts the value only.
pub fn imitation_loss(
    tape: &mut Tape,
    generated_logits: Var,
    means: Var,
    expert_actions: &Matrix,
    sigma: f64,
    entropy_weight: f64,
) -> Result<ImitationTerms, DiffError> {
    let flipped = tape.scale(generated_logits, -1.0);
    let log_not_d = tape.log_sigmoid(flipped);
    let adversarial = tape.mean(log_not_d)?;
    let nll = gaussian_nll(tape, means, expert_actions, sigma)?;
    let entropy = tape.constant(Matrix::scalar(-entropy_weight * gaussian_entropy(sigma, expert_actions.cols())));
    let partial = tape.add(adversarial, nll)?;
    let total = tape.add(partial, entropy)?;
    Ok(ImitationTerms { total, adversarial, nll })
}
