//! The full agent: causal discovery, causal encoding and prediction heads,
//! plus the Vanilla ablation that keeps only the heads.

use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diff::{Binding, DiffError, Matrix, ParamId, ParamStore, Tape, Var};
use crate::encoding::{lag_window, node_features, node_rows, EmbeddingTable, MessagePassing};
use crate::policy::{BranchNet, Discriminator};
use crate::templates::{select, TemplateBank, TemplateEmbedder, TrajectoryEncoder};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    #[default]
    Causal,
    Vanilla,
}

/// Architecture hyper-parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub n_state: usize,
    pub n_action: usize,
    pub templates: usize,
    pub variant: Variant,
    /// Length of the per-variable lag window feeding embeddings and heads.
    pub history: usize,
    pub embed_dim: usize,
    pub encoder_hidden: usize,
    pub encoder_layers: usize,
    pub encoder_kernel: usize,
    pub embedder_hidden: usize,
    pub gnn_layers: usize,
    pub head_hidden: usize,
    pub disc_hidden: usize,
    pub temperature: f64,
    pub template_init: f64,
    pub sigma_action: f64,
    pub sigma_state: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            n_state: 4,
            n_action: 1,
            templates: 1,
            variant: Variant::Causal,
            history: 3,
            embed_dim: 16,
            encoder_hidden: 16,
            encoder_layers: 2,
            encoder_kernel: 5,
            embedder_hidden: 32,
            gnn_layers: 2,
            head_hidden: 64,
            disc_hidden: 64,
            temperature: 0.1,
            template_init: 0.1,
            sigma_action: 0.1,
            sigma_state: 0.1,
        }
    }
}

impl ModelConfig {
    pub fn nodes(&self) -> usize {
        self.n_state + self.n_action
    }

    pub fn validate(&self) -> Result<(), DiffError> {
        let bad = |reason| Err(DiffError::Invalid { op: "model_config", reason });
        if self.n_state == 0 || self.n_action == 0 {
            return bad("need at least one state and one action variable");
        }
        if self.templates == 0 {
            return bad("template count must be positive");
        }
        if self.history == 0 {
            return bad("history window must hold at least one step");
        }
        if self.encoder_layers == 0 || self.encoder_kernel == 0 || self.gnn_layers == 0 {
            return bad("layer counts and kernel width must be positive");
        }
        if !(self.temperature > 0.0 && self.sigma_action > 0.0 && self.sigma_state > 0.0) {
            return bad("temperature and noise scales must be positive");
        }
        Ok(())
    }
}

/// Template bank, encoders and the auxiliary regressor.
#[derive(Clone, Debug, PartialEq)]
pub struct CausalModules {
    pub bank: TemplateBank,
    pub encoder: TrajectoryEncoder,
    pub embedder: TemplateEmbedder,
    pub embeddings: EmbeddingTable,
    pub gnn: MessagePassing,
    pub regression: BranchNet,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CailModel {
    pub config: ModelConfig,
    pub store: ParamStore,
    pub causal: Option<CausalModules>,
    pub policy: BranchNet,
    pub discriminator: Discriminator,
}

/// Tape handles produced by one teacher-forced pass over a sequence.
#[derive(Clone, Copy, Debug)]
pub struct Forward {
    /// `M × n²` masked bank.
    pub bank: Option<Var>,
    /// `T × M` selection weights.
    pub alpha: Option<Var>,
    /// `T × n²` selected graphs.
    pub graphs: Option<Var>,
    /// `T × n_action` predicted action means.
    pub action_means: Var,
    /// `(T−1) × n_state` predicted next-state means.
    pub next_states: Option<Var>,
}

/// Plain values of a frozen-model pass.
#[derive(Clone, Debug, PartialEq)]
pub struct Inference {
    pub alpha: Option<Matrix>,
    pub graphs: Option<Matrix>,
    pub action_means: Matrix,
}

impl CailModel {
    /// Builds a freshly initialised model; all randomness comes from `seed`.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self, DiffError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let (ns, na, n, d, w) = (config.n_state, config.n_action, config.nodes(), config.embed_dim, config.history);
        let causal = match config.variant {
            Variant::Causal => {
                let bank = TemplateBank::new(&mut store, config.templates, n, config.template_init, config.temperature, &mut rng);
                let encoder = TrajectoryEncoder::new(
                    &mut store,
                    ns,
                    config.encoder_hidden,
                    config.encoder_layers,
                    config.encoder_kernel,
                    &mut rng,
                );
                let embedder = TemplateEmbedder::new(&mut store, n, config.embedder_hidden, config.encoder_hidden, &mut rng);
                let embeddings = EmbeddingTable::new(&mut store, ns, na, w, d, &mut rng);
                let gnn = MessagePassing::new(&mut store, n, d, config.gnn_layers, &mut rng);
                let regression =
                    BranchNet::new(&mut store, "regression", d + w, config.head_hidden, ns, config.sigma_state, &mut rng);
                Some(CausalModules { bank, encoder, embedder, embeddings, gnn, regression })
            }
            Variant::Vanilla => None,
        };
        let policy_input = match config.variant {
            Variant::Causal => d + w,
            Variant::Vanilla => n * w,
        };
        let policy = BranchNet::new(&mut store, "policy", policy_input, config.head_hidden, na, config.sigma_action, &mut rng);
        let discriminator = Discriminator::new(&mut store, ns + na, config.disc_hidden, &mut rng);
        Ok(Self { config, store, causal, policy, discriminator })
    }

    /// Every parameter trained by the composite objective.
    pub fn generator_ids(&self) -> Vec<ParamId> {
        let mut ids = Vec::new();
        if let Some(c) = &self.causal {
            ids.push(c.bank.bank);
            ids.extend(c.encoder.ids());
            ids.extend(c.embedder.mlp.ids());
            ids.extend(c.embeddings.ids());
            ids.extend(c.gnn.ids());
            ids.extend(c.regression.ids());
        }
        ids.extend(self.policy.ids());
        ids
    }

    pub fn discriminator_ids(&self) -> Vec<ParamId> {
        self.discriminator.ids()
    }

    pub fn templates(&self) -> Vec<Matrix> {
        self.causal.as_ref().map(|c| c.bank.templates(&self.store)).unwrap_or_default()
    }

    /// Teacher-forced pass: every step sees the true `s_t` and `a_{t−1}`.
    /// Generator parameters must be bound on `bind`.
    pub fn forward(&self, tape: &mut Tape, bind: &Binding, states: &Matrix, prev_actions: &Matrix) -> Result<Forward, DiffError> {
        let (steps, ns) = states.shape();
        let na = self.config.n_action;
        if ns != self.config.n_state || prev_actions.shape() != (steps, na) || steps == 0 {
            return Err(DiffError::Shape { op: "model_forward", shapes: alloc::vec![states.shape(), prev_actions.shape()] });
        }
        let w = self.config.history;
        let Some(c) = &self.causal else {
            let x = tape.constant(node_features(states, prev_actions, w));
            let inputs = alloc::vec![x; na];
            let action_means = self.policy.forward(tape, bind, &inputs)?;
            return Ok(Forward { bank: None, alpha: None, graphs: None, action_means, next_states: None });
        };
        let n = self.config.nodes();
        let s = tape.constant(states.clone());
        let bank = c.bank.forward(tape, bind)?;
        let z = c.encoder.encode_history(tape, bind, s)?;
        let keys = c.embedder.forward(tape, bind, bank)?;
        let (alpha, graphs) = select(tape, z, keys, bank, self.config.temperature)?;
        let h0 = c.embeddings.init_embeddings(tape, bind, states, prev_actions)?;
        let h = c.gnn.message_pass(tape, bind, h0, graphs)?;

        let mut policy_inputs = Vec::with_capacity(na);
        for k in 0..na {
            let rows = tape.gather_rows(h, node_rows(ns + k, n, steps))?;
            let own = tape.constant(lag_window(prev_actions, k, w));
            policy_inputs.push(tape.concat_cols(rows, own)?);
        }
        let action_means = self.policy.forward(tape, bind, &policy_inputs)?;

        let next_states = if steps > 1 {
            let mut inputs = Vec::with_capacity(ns);
            for j in 0..ns {
                let rows = tape.gather_rows(h, node_rows(j, n, steps - 1))?;
                let window = lag_window(states, j, w);
                let own = tape.constant(Matrix::from_fn(steps - 1, w, |t, l| window.get(t, l)));
                inputs.push(tape.concat_cols(rows, own)?);
            }
            Some(c.regression.forward(tape, bind, &inputs)?)
        } else {
            None
        };
        Ok(Forward { bank: Some(bank), alpha: Some(alpha), graphs: Some(graphs), action_means, next_states })
    }

    /// Frozen-model pass returning plain values.
    pub fn infer(&self, states: &Matrix, prev_actions: &Matrix) -> Result<Inference, DiffError> {
        let mut tape = Tape::new();
        let bind = self.store.bind(&mut tape, &self.generator_ids(), false);
        let out = self.forward(&mut tape, &bind, states, prev_actions)?;
        Ok(Inference {
            alpha: out.alpha.map(|v| tape.value(v).clone()),
            graphs: out.graphs.map(|v| tape.value(v).clone()),
            action_means: tape.value(out.action_means).clone(),
        })
    }
}
