//! Sensitivity sweeps over λ₁ or c₀. Every (value, seed) trial trains in its
//! own worker with its own dataset and model; results are gathered by index so
//! the CSV does not depend on scheduling.

use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use cail_core::kuramoto::TrajectoryDataset;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::Error;
use crate::run::{headline_auroc, obtain_dataset, train};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum SweepParam {
    /// Sparsity weight λ₁.
    Lambda1,
    /// Initial penalty c₀.
    C,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Lambda1 => "lambda1",
            SweepParam::C => "c",
        }
    }

    /// Decades 1e-6..1 for λ₁, 1e-6..1e-2 for c.
    pub fn default_grid(self) -> Vec<f64> {
        let top = match self {
            SweepParam::Lambda1 => 0,
            SweepParam::C => -2,
        };
        (-6..=top).map(|e| 10f64.powi(e)).collect()
    }

    pub fn apply(self, config: &mut RunConfig, value: f64) {
        match self {
            SweepParam::Lambda1 => config.weights.sparsity = value,
            SweepParam::C => config.c0 = value,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub param: &'static str,
    pub value: f64,
    pub auroc_mean: f64,
    /// Population standard deviation across seeds.
    pub auroc_std: f64,
    pub action_mse: f64,
}

#[derive(Clone, Copy, Debug)]
struct Trial {
    auroc: f64,
    action_mse: f64,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Runs `values × seeds` trials on up to `workers` threads. A dataset loaded
/// from `base.dataset` is shared read-only; otherwise each seed generates its
/// own.
pub fn run_sweep(base: &RunConfig, param: SweepParam, values: &[f64], seeds: &[u64], workers: usize) -> Result<Vec<SweepRow>, Error> {
    if values.is_empty() || seeds.is_empty() {
        return Err(Error::Usage(String::from("a sweep needs at least one value and one seed")));
    }
    let datasets: Vec<TrajectoryDataset> = seeds
        .iter()
        .map(|&seed| obtain_dataset(&RunConfig { seed, ..base.clone() }))
        .collect::<Result<_, _>>()?;
    let jobs: Vec<(usize, usize)> = (0..values.len()).flat_map(|v| (0..seeds.len()).map(move |s| (v, s))).collect();
    let slots: Mutex<Vec<Option<Result<Trial, Error>>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..workers.clamp(1, jobs.len()) {
            scope.spawn(|| loop {
                let j = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(v, s)) = jobs.get(j) else { break };
                let mut config = RunConfig { seed: seeds[s], ..base.clone() };
                param.apply(&mut config, values[v]);
                log::info!("sweep {}={} seed {}", param.name(), values[v], seeds[s]);
                let result = train(&config, &datasets[s]).map(|t| Trial {
                    auroc: headline_auroc(&t.report.test, datasets[s].mode).unwrap_or(f64::NAN),
                    action_mse: t.report.test.action_mse,
                });
                slots.lock().expect("worker panicked")[j] = Some(result);
            });
        }
    });
    let trials: Vec<Trial> = slots
        .into_inner()
        .expect("worker panicked")
        .into_iter()
        .map(|t| t.expect("every job ran"))
        .collect::<Result<_, _>>()?;
    Ok(values
        .iter()
        .enumerate()
        .map(|(v, &value)| {
            let group = &trials[v * seeds.len()..(v + 1) * seeds.len()];
            let aurocs: Vec<f64> = group.iter().map(|t| t.auroc).collect();
            let m = mean(&aurocs);
            let var = mean(&aurocs.iter().map(|a| (a - m) * (a - m)).collect::<Vec<_>>());
            SweepRow {
                param: param.name(),
                value,
                auroc_mean: m,
                auroc_std: var.sqrt(),
                action_mse: mean(&group.iter().map(|t| t.action_mse).collect::<Vec<_>>()),
            }
        })
        .collect())
}

pub fn write_csv<W: Write>(out: W, rows: &[SweepRow]) -> Result<(), Error> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::Io { path: String::from("<csv>"), source: e })?;
    Ok(())
}
