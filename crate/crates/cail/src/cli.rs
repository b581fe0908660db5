//! Command-line surface: `generate`, `train`, `eval`, `export-dag`, `sweep`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cail_core::kuramoto::{make_dataset, Mode, Scale, Split};
use clap::{Parser, Subcommand};

use crate::checkpoint;
use crate::config::RunConfig;
use crate::dataset::encode_dataset;
use crate::error::Error;
use crate::export;
use crate::json;
use crate::output::Outputs;
use crate::run::{evaluate_checkpoint, obtain_dataset, train};
use crate::sweep::{run_sweep, write_csv, SweepParam};

#[derive(Debug, Parser)]
#[command(name = "cail", version, about = "Imitation learning with learnable causal DAG templates")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// kura5, kura10 or kura50.
    #[arg(long, global = true)]
    pub scale: Option<Scale>,
    /// static or vary.
    #[arg(long, global = true)]
    pub mode: Option<Mode>,
    /// Output file (a directory for export-dag).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a Kuramoto dataset and write it as JSON lines.
    Generate,
    /// Train a model; writes a checkpoint and a JSON report.
    Train {
        /// Dataset file; generated from the config when absent.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Prediction heads only, no causal modules.
        #[arg(long)]
        vanilla: bool,
        #[arg(long)]
        epochs: Option<usize>,
        /// Report path; defaults to the checkpoint path with `.report.json`.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Evaluate a checkpoint; writes an EvalReport as JSON.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Dataset file; regenerated from the checkpoint's config when absent.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value = "test")]
        split: Split,
        /// Also compute the closed-loop action error.
        #[arg(long)]
        closed_loop: bool,
    },
    /// Write each template as DOT plus all of them as JSON.
    ExportDag {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Minimum |weight| of an exported edge; defaults to the config's.
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Train over a grid of λ₁ or c₀ values and write a CSV summary.
    Sweep {
        #[arg(long, value_enum)]
        param: SweepParam,
        #[arg(long)]
        data: Option<PathBuf>,
        /// Comma-separated grid; defaults to the decade grid of the parameter.
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
        /// Seeds used per value, counting up from --seed.
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        #[arg(long)]
        epochs: Option<usize>,
        /// Worker threads; defaults to the available cores.
        #[arg(long)]
        workers: Option<usize>,
    },
}

impl Cli {
    fn base_config(&self, start: RunConfig) -> Result<RunConfig, Error> {
        let mut config = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => start,
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(scale) = self.scale {
            config.scale = scale;
        }
        if let Some(mode) = self.mode {
            config.mode = mode;
        }
        Ok(config)
    }

    fn out(&self) -> Result<&Path, Error> {
        self.out.as_deref().ok_or_else(|| Error::Usage(String::from("--out is required")))
    }
}

pub fn run(cli: &Cli) -> Result<(), Error> {
    let mut outputs = Outputs::new();
    match &cli.command {
        Command::Generate => {
            let config = cli.base_config(RunConfig::default())?;
            let ds = make_dataset(&config.dataset_config())?;
            log::info!("generated {} sequences", ds.sequences.len());
            outputs.write(cli.out()?, &encode_dataset(&ds)?)?;
        }
        Command::Train { data, vanilla, epochs, report } => {
            let mut config = cli.base_config(RunConfig::default())?;
            if data.is_some() {
                config.dataset = data.clone();
            }
            config.vanilla |= *vanilla;
            if let Some(e) = epochs {
                config.epochs = *e;
            }
            let out = cli.out()?;
            let ds = obtain_dataset(&config)?;
            let trained = train(&config, &ds)?;
            let report_path = report.clone().unwrap_or_else(|| out.with_extension("report.json"));
            outputs.write(out, &checkpoint::encode(&trained.checkpoint)?)?;
            outputs.write(&report_path, &json::to_pretty(&trained.report)?)?;
        }
        Command::Eval { checkpoint: path, data, split, closed_loop } => {
            let ck = checkpoint::load(path)?;
            let mut config = cli.base_config(ck.header.config.clone())?;
            if data.is_some() {
                config.dataset = data.clone();
            }
            config.closed_loop |= *closed_loop;
            let ds = obtain_dataset(&config)?;
            let report = json::to_pretty(&evaluate_checkpoint(&ck, &config, &ds, *split)?)?;
            match &cli.out {
                Some(out) => outputs.write(out, &report)?,
                None => print!("{}", String::from_utf8_lossy(&report)),
            }
        }
        Command::ExportDag { checkpoint: path, threshold } => {
            let ck = checkpoint::load(path)?;
            let templates = ck.model.templates();
            if templates.is_empty() {
                return Err(Error::Usage(String::from("checkpoint has no templates (vanilla model)")));
            }
            let threshold = threshold.unwrap_or(ck.header.config.export_threshold);
            if !(threshold >= 0.0) {
                return Err(Error::Usage(String::from("threshold must be non-negative")));
            }
            let dir = cli.out()?;
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            for (name, bytes) in export::render(&templates, ck.header.model.n_state, ck.header.model.n_action, threshold)? {
                outputs.write(&dir.join(name), &bytes)?;
            }
        }
        Command::Sweep { param, data, values, seeds, epochs, workers } => {
            let out = cli.out()?;
            let mut config = cli.base_config(RunConfig::default())?;
            if data.is_some() {
                config.dataset = data.clone();
            }
            if let Some(e) = epochs {
                config.epochs = *e;
            }
            let grid = if values.is_empty() { param.default_grid() } else { values.clone() };
            let seeds: Vec<u64> = (0..*seeds).map(|k| config.seed + k).collect();
            let workers = workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            let rows = run_sweep(&config, *param, &grid, &seeds, workers)?;
            let mut bytes = Vec::new();
            write_csv(&mut bytes, &rows)?;
            outputs.write(out, &bytes)?;
        }
    }
    outputs.commit();
    Ok(())
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or("CAIL_LOG_LEVEL", "error");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

/// Parses `std::env::args`, runs, and reports failures as one JSON line on
/// stderr with a nonzero status (2 for usage errors, 1 otherwise).
pub fn main() -> ExitCode {
    init_logging();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ").to_owned();
            eprintln!("{}", Error::Usage(first).to_json());
            return ExitCode::from(2);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(if matches!(e, Error::Usage(_)) { 2 } else { 1 })
        }
    }
}
