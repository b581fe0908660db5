//! Run configuration. One record covers data, model, optimiser and export
//! settings and is echoed verbatim into every checkpoint and report.

use std::path::{Path, PathBuf};

use cail_core::kuramoto::{DatasetConfig, Mode, Scale, SplitRatio, TrajectoryDataset};
use cail_core::model::{ModelConfig, Variant};
use cail_core::training::{LagrangianRule, LossWeights, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Dataset file. When absent the dataset is generated in memory from the
    /// fields below.
    pub dataset: Option<PathBuf>,
    pub scale: Scale,
    pub mode: Mode,
    /// Seeds data generation, initialisation and training alike.
    pub seed: u64,
    pub sequences: usize,
    pub steps: usize,
    pub split: SplitRatio,
    /// Simulator sub-steps per recorded step.
    pub observe_every: usize,
    /// Template count `M`; `None` uses the number of ground-truth graphs.
    pub templates: Option<usize>,
    /// Drop the causal modules, keeping only the prediction heads.
    pub vanilla: bool,
    pub lr: f64,
    pub epochs: usize,
    pub weights: LossWeights,
    pub c0: f64,
    pub lambda2_init: f64,
    pub sigma: f64,
    pub rho: f64,
    pub lagrangian_rule: LagrangianRule,
    pub patience: usize,
    pub eval_every: usize,
    pub dag_tolerance: f64,
    /// Edges below this magnitude are dropped on export.
    pub export_threshold: f64,
    /// Also report the closed-loop action error.
    pub closed_loop: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let data = DatasetConfig::new(Scale::Kura5, Mode::Static, 0);
        let train = TrainConfig::default();
        Self {
            dataset: None,
            scale: data.scale,
            mode: data.mode,
            seed: 0,
            sequences: data.sequences,
            steps: data.steps,
            split: data.split,
            observe_every: data.observe_every,
            templates: None,
            vanilla: false,
            lr: train.lr,
            epochs: train.max_epochs,
            weights: train.weights,
            c0: train.c0,
            lambda2_init: train.lambda2_init,
            sigma: train.sigma,
            rho: train.rho,
            lagrangian_rule: train.lagrangian_rule,
            patience: train.patience,
            eval_every: train.eval_every,
            dag_tolerance: train.dag_tolerance,
            export_threshold: 0.05,
            closed_loop: false,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("config {}: {e}", path.display())))
    }

    pub fn dataset_config(&self) -> DatasetConfig {
        DatasetConfig {
            sequences: self.sequences,
            steps: self.steps,
            split: self.split,
            observe_every: self.observe_every,
            ..DatasetConfig::new(self.scale, self.mode, self.seed)
        }
    }

    pub fn model_config(&self, dataset: &TrajectoryDataset) -> ModelConfig {
        ModelConfig {
            n_state: dataset.n_state,
            n_action: dataset.n_action,
            templates: self.templates.unwrap_or(dataset.gt_graphs.len()),
            variant: if self.vanilla { Variant::Vanilla } else { Variant::Causal },
            ..ModelConfig::default()
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            lr: self.lr,
            max_epochs: self.epochs,
            weights: self.weights,
            c0: self.c0,
            lambda2_init: self.lambda2_init,
            sigma: self.sigma,
            rho: self.rho,
            lagrangian_rule: self.lagrangian_rule,
            patience: self.patience,
            eval_every: self.eval_every,
            dag_tolerance: self.dag_tolerance,
            seed: self.seed,
        }
    }
}
