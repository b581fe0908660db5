//! Pipelines shared by the command line, sweeps and tests: obtain a dataset,
//! train into a checkpoint, evaluate a checkpoint.

use cail_core::kuramoto::{make_dataset, Mode, Scale, Split, TrajectoryDataset};
use cail_core::metrics::{evaluate, EvalMetrics};
use cail_core::model::{CailModel, ModelConfig};
use cail_core::training::{fit, TrainReport};
use serde::{Deserialize, Serialize};

use crate::checkpoint::{Checkpoint, CheckpointHeader, CheckpointMetrics};
use crate::config::RunConfig;
use crate::dataset::load_dataset;
use crate::error::Error;

pub const REPORT_VERSION: u32 = 1;

/// Loads `config.dataset` when set, otherwise generates from the config.
pub fn obtain_dataset(config: &RunConfig) -> Result<TrajectoryDataset, Error> {
    match &config.dataset {
        Some(path) => load_dataset(path),
        None => Ok(make_dataset(&config.dataset_config())?),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub scale: Scale,
    pub mode: Mode,
    pub seed: u64,
    pub n_state: usize,
    pub n_action: usize,
    #[serde(rename = "M_truth")]
    pub m_truth: usize,
    pub sequences: usize,
}

impl DatasetSummary {
    pub fn of(ds: &TrajectoryDataset) -> Self {
        Self {
            scale: ds.scale,
            mode: ds.mode,
            seed: ds.seed,
            n_state: ds.n_state,
            n_action: ds.n_action,
            m_truth: ds.gt_graphs.len(),
            sequences: ds.sequences.len(),
        }
    }
}

/// Written next to the checkpoint by `train`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainRunReport {
    pub format_version: u32,
    pub config: RunConfig,
    pub model: ModelConfig,
    pub dataset: DatasetSummary,
    pub training: TrainReport,
    /// Test-split metrics of the selected parameters.
    pub test: EvalMetrics,
}

/// Written by `eval`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub format_version: u32,
    pub config: RunConfig,
    pub model: ModelConfig,
    pub dataset: DatasetSummary,
    pub checkpoint_epoch: usize,
    pub metrics: EvalMetrics,
}

pub struct Trained {
    pub checkpoint: Checkpoint,
    pub report: TrainRunReport,
}

pub fn train(config: &RunConfig, dataset: &TrajectoryDataset) -> Result<Trained, Error> {
    let model_config = config.model_config(dataset);
    let model = CailModel::new(model_config.clone(), config.seed)?;
    let outcome = fit(model, dataset, &config.train_config())?;
    let test = evaluate(&outcome.model, dataset, Split::Test, config.closed_loop)?;
    let r = &outcome.report;
    let header = CheckpointHeader {
        config: config.clone(),
        model: model_config.clone(),
        epoch: r.selected_epoch,
        metrics: CheckpointMetrics {
            trained: r.trained,
            epochs_run: r.epochs_run,
            val_loglik: r.selected_val_loglik,
            acyclicity: r.final_acyclicity,
        },
        lambda2: r.final_state.lambda2,
        c: r.final_state.c,
    };
    let report = TrainRunReport {
        format_version: REPORT_VERSION,
        config: config.clone(),
        model: model_config,
        dataset: DatasetSummary::of(dataset),
        training: outcome.report,
        test,
    };
    Ok(Trained { checkpoint: Checkpoint { header, model: outcome.model }, report })
}

pub fn evaluate_checkpoint(
    ck: &Checkpoint,
    config: &RunConfig,
    dataset: &TrajectoryDataset,
    split: Split,
) -> Result<EvalReport, Error> {
    if (dataset.n_state, dataset.n_action) != (ck.header.model.n_state, ck.header.model.n_action) {
        return Err(Error::Usage(format!(
            "checkpoint expects {}+{} variables, dataset has {}+{}",
            ck.header.model.n_state, ck.header.model.n_action, dataset.n_state, dataset.n_action
        )));
    }
    let metrics = evaluate(&ck.model, dataset, split, config.closed_loop)?;
    Ok(EvalReport {
        format_version: REPORT_VERSION,
        config: config.clone(),
        model: ck.header.model.clone(),
        dataset: DatasetSummary::of(dataset),
        checkpoint_epoch: ck.header.epoch,
        metrics,
    })
}

/// Static AUROC on static data, matched mean AUROC otherwise.
pub fn headline_auroc(metrics: &EvalMetrics, mode: Mode) -> Option<f64> {
    match mode {
        Mode::Static => metrics.static_auroc,
        Mode::Vary => metrics.dynamic_auroc,
    }
}
