//! End-to-end optimisation: composite objective, per-trajectory
//! discriminator and generator steps, and the augmented-Lagrangian schedule.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::cluster::{cluster_regimes, ClusterError};
use crate::diff::{Adam, AdamConfig, DiffError, Matrix, ParamStore, Tape, Var};
use crate::kuramoto::{Sequence, Split, TrajectoryDataset};
use crate::model::CailModel;
use crate::policy::{discriminator_objective, gaussian_nll, imitation_loss, policy_loglik};
use crate::templates::{acyclicity_reg, acyclicity_value, option_loss, sparsity_reg};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LagrangianRule {
    /// Grow `c` when `H ≤ σ·H_old`.
    #[default]
    OnProgress,
    /// Grow `c` when `H > σ·H_old`.
    OnStall,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    /// λ₁
    pub sparsity: f64,
    /// γ₁
    pub regression: f64,
    /// γ₂
    pub option: f64,
    /// λ
    pub entropy: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { sparsity: 1e-4, regression: 1.0, option: 0.1, entropy: 0.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f64,
    pub max_epochs: usize,
    pub weights: LossWeights,
    pub c0: f64,
    pub lambda2_init: f64,
    pub sigma: f64,
    pub rho: f64,
    pub lagrangian_rule: LagrangianRule,
    pub patience: usize,
    pub eval_every: usize,
    pub dag_tolerance: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.005,
            max_epochs: 1000,
            weights: LossWeights::default(),
            c0: 1e-4,
            lambda2_init: 0.0,
            sigma: 0.25,
            rho: 10.0,
            lagrangian_rule: LagrangianRule::OnProgress,
            patience: 50,
            eval_every: 10,
            dag_tolerance: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let w = &self.weights;
        if [w.sparsity, w.regression, w.option, w.entropy].iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
            return Err(TrainError::Config("loss weights must be finite and non-negative"));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(TrainError::Config("learning rate must be finite and non-negative"));
        }
        if !(self.c0 > 0.0 && self.rho > 0.0 && self.sigma > 0.0 && self.lambda2_init >= 0.0) {
            return Err(TrainError::Config("c0, rho and sigma must be positive, lambda2 non-negative"));
        }
        if self.eval_every == 0 {
            return Err(TrainError::Config("eval_every must be positive"));
        }
        Ok(())
    }
}

/// Augmented-Lagrangian bookkeeping carried across epochs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    pub lambda2: f64,
    pub c: f64,
    /// `None` stands for the initial `+∞`.
    pub h_old: Option<f64>,
    pub epoch: usize,
    pub seed: u64,
}

impl TrainState {
    pub fn new(config: &TrainConfig) -> Self {
        Self { lambda2: config.lambda2_init, c: config.c0, h_old: None, epoch: 0, seed: config.seed }
    }
}

/// `λ₂ += H·c` (pre-update `c`), then the penalty test, then `H_old ← H`.
pub fn lagrangian_update(state: &TrainState, h: f64, rule: LagrangianRule, sigma: f64, rho: f64) -> TrainState {
    let mut next = state.clone();
    next.lambda2 += h * state.c;
    let threshold = state.h_old.map_or(f64::INFINITY, |old| sigma * old);
    let fire = match rule {
        LagrangianRule::OnProgress => h <= threshold,
        LagrangianRule::OnStall => h > threshold,
    };
    if fire {
        next.c *= rho;
    }
    next.h_old = Some(h);
    next
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(&'static str),
    #[error("regime clustering failed: {0}")]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Model(#[from] DiffError),
    #[error("non-finite loss at epoch {epoch}, sequence {sequence}")]
    NonFinite { epoch: usize, sequence: usize, state: TrainState, losses: StepLosses },
    #[error("dataset has {dataset:?} state/action dims, model expects {model:?}")]
    Mismatch { dataset: (usize, usize), model: (usize, usize) },
}

/// Scalar values of the composite objective's terms for one trajectory.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepLosses {
    pub total: f64,
    pub imitation: f64,
    pub adversarial: f64,
    pub nll: f64,
    pub regression: f64,
    pub sparsity: f64,
    pub option: f64,
    pub acyclicity: f64,
    pub discriminator: f64,
}

impl StepLosses {
    fn is_finite(&self) -> bool {
        [self.total, self.discriminator].iter().all(|x| x.is_finite())
    }

    fn accumulate(&mut self, other: &StepLosses, weight: f64) {
        self.total += weight * other.total;
        self.imitation += weight * other.imitation;
        self.adversarial += weight * other.adversarial;
        self.nll += weight * other.nll;
        self.regression += weight * other.regression;
        self.sparsity += weight * other.sparsity;
        self.option += weight * other.option;
        self.acyclicity += weight * other.acyclicity;
        self.discriminator += weight * other.discriminator;
    }
}

/// Tape handles of the composite objective.
#[derive(Clone, Copy, Debug)]
pub struct CompositeTerms {
    pub total: Var,
    pub imitation: Var,
    pub adversarial: Var,
    pub nll: Var,
    pub regression: Option<Var>,
    pub sparsity: Option<Var>,
    pub option: Option<Var>,
    pub acyclicity: Option<Var>,
}

impl CompositeTerms {
    pub fn values(&self, tape: &Tape) -> StepLosses {
        let v = |x: Option<Var>| x.map_or(0.0, |x| tape.value(x).item());
        StepLosses {
            total: tape.value(self.total).item(),
            imitation: tape.value(self.imitation).item(),
            adversarial: tape.value(self.adversarial).item(),
            nll: tape.value(self.nll).item(),
            regression: v(self.regression),
            sparsity: v(self.sparsity),
            option: v(self.option),
            acyclicity: v(self.acyclicity),
            discriminator: 0.0,
        }
    }
}

/// `L_imi + γ₁·L_res + λ₁·R_sparse + γ₂·R_option + λ₂·R_DAG + (c/2)·R_DAG²`.
///
/// Generator parameters must be bound trainable and the discriminator bound
/// as constants on `bind`. `noise` is the standard-normal draw behind the
/// sampled actions `â = μ + σ_a·noise`.
#[allow(clippy::too_many_arguments)]
pub fn composite_loss(
    tape: &mut Tape,
    bind: &crate::diff::Binding,
    model: &CailModel,
    forward: &crate::model::Forward,
    seq: &Sequence,
    labels: &[usize],
    noise: &Matrix,
    weights: &LossWeights,
    state: &TrainState,
) -> Result<CompositeTerms, DiffError> {
    let cfg = &model.config;
    let s = tape.constant(seq.states.clone());
    let scaled_noise = tape.constant(noise.map(|x| x * cfg.sigma_action));
    let sampled = tape.add(forward.action_means, scaled_noise)?;
    let logits = model.discriminator.logits(tape, bind, s, sampled)?;
    let imi = imitation_loss(tape, logits, forward.action_means, &seq.actions, cfg.sigma_action, weights.entropy)?;
    let mut total = imi.total;
    let mut terms = CompositeTerms {
        total,
        imitation: imi.total,
        adversarial: imi.adversarial,
        nll: imi.nll,
        regression: None,
        sparsity: None,
        option: None,
        acyclicity: None,
    };
    if let Some(next) = forward.next_states {
        let steps = seq.len();
        let target = Matrix::from_fn(steps - 1, cfg.n_state, |t, j| seq.states.get(t + 1, j));
        let reg = gaussian_nll(tape, next, &target, cfg.sigma_state)?;
        let weighted = tape.scale(reg, weights.regression);
        total = tape.add(total, weighted)?;
        terms.regression = Some(reg);
    }
    if let Some(bank) = forward.bank {
        let l1 = sparsity_reg(tape, bank);
        let weighted = tape.scale(l1, weights.sparsity);
        total = tape.add(total, weighted)?;
        terms.sparsity = Some(l1);

        let h = acyclicity_reg(tape, bank, cfg.nodes())?;
        let linear = tape.scale(h, state.lambda2);
        let sq = tape.square(h);
        let quadratic = tape.scale(sq, state.c / 2.0);
        total = tape.add(total, linear)?;
        total = tape.add(total, quadratic)?;
        terms.acyclicity = Some(h);
    }
    if let Some(alpha) = forward.alpha {
        let opt = option_loss(tape, alpha, labels)?;
        let weighted = tape.scale(opt, weights.option);
        total = tape.add(total, weighted)?;
        terms.option = Some(opt);
    }
    terms.total = total;
    Ok(terms)
}

/// Optimiser state and schedule for one model.
#[derive(Clone, Debug)]
pub struct Trainer {
    pub model: CailModel,
    pub config: TrainConfig,
    pub state: TrainState,
    pub labels: Vec<Vec<usize>>,
    generator: Adam,
    discriminator: Adam,
    rng: ChaCha8Rng,
}

impl Trainer {
    /// Checks dimensions, clusters regimes (causal variant only) and sets up
    /// both optimisers.
    pub fn new(model: CailModel, dataset: &TrajectoryDataset, config: TrainConfig) -> Result<Self, TrainError> {
        config.validate()?;
        let model_dims = (model.config.n_state, model.config.n_action);
        if (dataset.n_state, dataset.n_action) != model_dims {
            return Err(TrainError::Mismatch { dataset: (dataset.n_state, dataset.n_action), model: model_dims });
        }
        let labels = if model.causal.is_some() {
            cluster_regimes(dataset, model.config.templates, config.seed)?
        } else {
            dataset.sequences.iter().map(|s| alloc::vec![0; s.len()]).collect()
        };
        let generator = Adam::new(&model.store, model.generator_ids(), AdamConfig::default());
        let discriminator = Adam::new(&model.store, model.discriminator_ids(), AdamConfig::default());
        let rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_7a1e);
        let state = TrainState::new(&config);
        Ok(Self { model, config, state, labels, generator, discriminator, rng })
    }

    /// One discriminator ascent step followed by one generator descent step.
    pub fn step(&mut self, seq: &Sequence, labels: &[usize]) -> Result<StepLosses, DiffError> {
        let lr = self.config.lr;
        let prev = seq.previous_actions();
        let gen_ids = self.model.generator_ids();
        let disc_ids = self.model.discriminator_ids();

        let mut tape = Tape::new();
        let mut bind = self.model.store.bind(&mut tape, &gen_ids, true);
        let forward = self.model.forward(&mut tape, &bind, &seq.states, &prev)?;
        let (steps, na) = seq.actions.shape();
        let noise = Matrix::from_fn(steps, na, |_, _| StandardNormal.sample(&mut self.rng));
        let sigma = self.model.config.sigma_action;
        let sampled = tape.value(forward.action_means).zip_map(&noise, |m, e| m + sigma * e);

        let mut dtape = Tape::new();
        let dbind = self.model.store.bind(&mut dtape, &disc_ids, true);
        let s = dtape.constant(seq.states.clone());
        let expert = dtape.constant(seq.actions.clone());
        let generated = dtape.constant(sampled);
        let real = self.model.discriminator.logits(&mut dtape, &dbind, s, expert)?;
        let fake = self.model.discriminator.logits(&mut dtape, &dbind, s, generated)?;
        let objective = discriminator_objective(&mut dtape, real, fake)?;
        let ascent = dtape.scale(objective, -1.0);
        let disc_value = dtape.value(objective).item();
        dtape.backward(ascent)?;
        if disc_value.is_finite() {
            self.discriminator.step(&mut self.model.store, &dbind.grads(&dtape), lr);
        }

        bind.extend(&self.model.store, &mut tape, &disc_ids, false);
        let terms = composite_loss(
            &mut tape,
            &bind,
            &self.model,
            &forward,
            seq,
            labels,
            &noise,
            &self.config.weights,
            &self.state,
        )?;
        let mut losses = terms.values(&tape);
        losses.discriminator = disc_value;
        if losses.is_finite() {
            tape.backward(terms.total)?;
            self.generator.step(&mut self.model.store, &bind.grads(&tape), lr);
        }
        Ok(losses)
    }

    /// Shuffled pass over the training split, then one Lagrangian update.
    pub fn train_epoch(&mut self, dataset: &TrajectoryDataset) -> Result<EpochRecord, TrainError> {
        let mut order = dataset.split_indices(Split::Train);
        order.shuffle(&mut self.rng);
        let mut mean = StepLosses::default();
        let weight = 1.0 / order.len().max(1) as f64;
        for &i in &order {
            let losses = self.step(&dataset.sequences[i], &self.labels[i].clone())?;
            if !losses.is_finite() {
                return Err(TrainError::NonFinite { epoch: self.state.epoch + 1, sequence: i, state: self.state.clone(), losses });
            }
            mean.accumulate(&losses, weight);
        }
        let h = acyclicity_value(&self.model.templates());
        let before = self.state.clone();
        self.state = lagrangian_update(&self.state, h, self.config.lagrangian_rule, self.config.sigma, self.config.rho);
        self.state.epoch += 1;
        Ok(EpochRecord {
            epoch: self.state.epoch,
            losses: mean,
            acyclicity: h,
            lambda2: before.lambda2,
            c: before.c,
            val_loglik: None,
        })
    }
}

/// Mean per-step action log-likelihood, teacher-forced.
pub fn validation_loglik(model: &CailModel, dataset: &TrajectoryDataset, split: Split) -> Result<Option<f64>, DiffError> {
    let mut total = 0.0;
    let mut steps = 0usize;
    for seq in dataset.split(split) {
        let inf = model.infer(&seq.states, &seq.previous_actions())?;
        for t in 0..seq.len() {
            total += policy_loglik(inf.action_means.row(t), seq.actions.row(t), model.config.sigma_action);
            steps += 1;
        }
    }
    Ok((steps > 0).then(|| total / steps as f64))
}

/// Per-epoch log line; `lambda2` and `c` are the values used during the epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub losses: StepLosses,
    pub acyclicity: f64,
    pub lambda2: f64,
    pub c: f64,
    pub val_loglik: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub trained: bool,
    pub epochs_run: usize,
    pub stopped_early: bool,
    /// Epoch of the returned parameters; `0` for the initial model.
    pub selected_epoch: usize,
    pub selected_val_loglik: Option<f64>,
    pub final_acyclicity: f64,
    pub final_state: TrainState,
    pub history: Vec<EpochRecord>,
}

/// Trained model plus the run's report.
#[derive(Clone, Debug)]
pub struct FitOutcome {
    pub model: CailModel,
    pub report: TrainReport,
}

/// Full run: clustering, epochs with Lagrangian updates and periodic
/// validation, early stopping, and selection of the best-validation snapshot
/// (feasible snapshots first).
pub fn fit(model: CailModel, dataset: &TrajectoryDataset, config: &TrainConfig) -> Result<FitOutcome, TrainError> {
    let mut trainer = Trainer::new(model, dataset, config.clone())?;
    let mut history = Vec::new();
    let mut best_val = f64::NEG_INFINITY;
    let mut best_epoch = 0usize;
    // best feasible snapshot, and best overall as the fallback
    let mut snapshot: Option<(usize, f64, ParamStore)> = None;
    let mut fallback: Option<(usize, f64, ParamStore)> = None;
    let mut stopped_early = false;
    for epoch in 1..=config.max_epochs {
        let mut record = trainer.train_epoch(dataset)?;
        if epoch % config.eval_every == 0 || epoch == config.max_epochs {
            let val = validation_loglik(&trainer.model, dataset, Split::Val)?;
            record.val_loglik = val;
            if let Some(v) = val {
                if v > best_val {
                    best_val = v;
                    best_epoch = epoch;
                    fallback = Some((epoch, v, trainer.model.store.clone()));
                }
                let feasible = record.acyclicity <= config.dag_tolerance;
                if feasible && snapshot.as_ref().is_none_or(|s| v > s.1) {
                    snapshot = Some((epoch, v, trainer.model.store.clone()));
                }
            }
            log::info!(
                "epoch {epoch}: loss {:.5} H {:.3e} lambda2 {:.3e} c {:.1e} val {:?}",
                record.losses.total,
                record.acyclicity,
                record.lambda2,
                record.c,
                val
            );
            let stalled = epoch - best_epoch >= config.patience;
            if stalled && record.acyclicity < config.dag_tolerance {
                stopped_early = true;
                history.push(record);
                break;
            }
        }
        history.push(record);
    }
    let epochs_run = history.len();
    let final_state = trainer.state.clone();
    let mut model = trainer.model;
    let (selected_epoch, selected_val_loglik) = match snapshot.or(fallback) {
        Some((epoch, val, store)) => {
            model.store = store;
            (epoch, Some(val))
        }
        None => (epochs_run, history.last().and_then(|r| r.val_loglik)),
    };
    let final_acyclicity = acyclicity_value(&model.templates());
    Ok(FitOutcome {
        model,
        report: TrainReport {
            trained: epochs_run > 0,
            epochs_run,
            stopped_early,
            selected_epoch,
            selected_val_loglik,
            final_acyclicity,
            final_state,
            history,
        },
    })
}
