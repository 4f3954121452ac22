use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::error;

use dualstream::harness::{self, RunConfig, StageSummary};
use dualstream::Result;

/// Dual-stream adversarial image generation against small image detectors.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the synthetic training corpus and attack inputs.
    Synth(Common),
    /// Train every configured detector.
    Train(Common),
    /// Run both attack streams on every input image.
    Attack(Common),
    /// Keep the better candidate per image against the targets.
    Select(Common),
    /// Write report.csv, ablation.csv and summary.json.
    Evaluate(Common),
    /// All five stages in order.
    Run(Common),
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; built-in defaults if omitted.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override the global seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the worker count.
    #[arg(long)]
    workers: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<StageSummary> {
    let (stage, common): (fn(&RunConfig) -> Result<StageSummary>, Common) = match cli.command {
        Command::Synth(c) => (harness::cmd_synth, c),
        Command::Train(c) => (harness::cmd_train, c),
        Command::Attack(c) => (harness::cmd_attack, c),
        Command::Select(c) => (harness::cmd_select, c),
        Command::Evaluate(c) => (harness::cmd_evaluate, c),
        Command::Run(c) => (harness::run_all, c),
    };
    stage(&common.load()?)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(summary) => ExitCode::from(summary.exit_code() as u8),
        Err(e) => {
            error!("{e}");
            ExitCode::from(1)
        }
    }
}
