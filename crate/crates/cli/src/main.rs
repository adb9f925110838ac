// SPDX-License-Identifier: Apache-2.0

//! `peerlearn`: run the decentralized-learning experiments and write tidy
//! CSV or JSON results.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use peerlearn::harness::{run_experiment, write_output, ExperimentConfig, ExperimentId, OutputFormat, TaskFamily};
use peerlearn::mp::KnowledgeInit;

#[derive(Parser)]
#[command(name = "peerlearn", version, about = "Decentralized collaborative learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Win ratio and error of confidence-weighted model propagation over a grid of confidence widths.
    ConfidenceSweep(Flags),
    /// Error curves of asynchronous and synchronous model propagation.
    MpAsyncVsSync(Flags),
    /// Accuracy of solitary, consensus, propagated and collaborative models over feature dimensions.
    ClVsMp(Flags),
    /// Accuracy curves of asynchronous and synchronous collaborative learning.
    ClAsyncVsSync(Flags),
    /// Communications to reach 90% of the reference accuracy over network sizes.
    Scalability(Flags),
    /// Held-out grid search over alpha.
    TuneAlpha(Flags),
}

#[derive(Args)]
struct Flags {
    /// Number of agents.
    #[arg(long)]
    n: Option<usize>,
    /// Feature dimension.
    #[arg(long)]
    p: Option<usize>,
    /// Confidence widths, comma separated.
    #[arg(long, value_delimiter = ',')]
    epsilon: Option<Vec<f64>>,
    /// Model-propagation alpha; tuned on held-out instances when omitted.
    #[arg(long)]
    alpha: Option<f64>,
    /// Collaborative-learning alpha; tuned on held-out instances when omitted.
    #[arg(long)]
    cl_alpha: Option<f64>,
    /// ADMM penalty.
    #[arg(long)]
    rho: Option<f64>,
    /// Neighbors per agent for kNN graphs.
    #[arg(long)]
    k: Option<usize>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Problem instances per setting.
    #[arg(long)]
    instances: Option<usize>,
    /// Held-out instances for alpha tuning.
    #[arg(long)]
    tune_instances: Option<usize>,
    /// Asynchronous runs averaged per instance.
    #[arg(long)]
    runs: Option<usize>,
    /// Asynchronous activation budget per run.
    #[arg(long)]
    budget: Option<u64>,
    /// Synchronous ADMM rounds for collaborative solutions.
    #[arg(long)]
    rounds: Option<u64>,
    /// Asynchronous steps between samples (0 picks n/2).
    #[arg(long)]
    sample_every: Option<u64>,
    /// Network sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    n_grid: Option<Vec<usize>>,
    /// Feature dimensions, comma separated.
    #[arg(long, value_delimiter = ',')]
    p_grid: Option<Vec<usize>>,
    /// Candidate alphas, comma separated.
    #[arg(long, value_delimiter = ',')]
    alpha_grid: Option<Vec<f64>>,
    /// Task for tune-alpha: mean or classification.
    #[arg(long)]
    task: Option<TaskFamily>,
    /// Initial neighbor knowledge of asynchronous model propagation: zero or solitary.
    #[arg(long)]
    knowledge: Option<KnowledgeInit>,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv or json.
    #[arg(long, default_value = "csv")]
    format: OutputFormat,
    /// Worker threads (output does not depend on it).
    #[arg(long, default_value_t = default_threads())]
    threads: usize,
}

fn default_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

impl Flags {
    fn into_config(self, id: ExperimentId) -> (ExperimentConfig, usize) {
        let mut cfg = ExperimentConfig::defaults(id);
        macro_rules! set {
            ($($field:ident),*) => { $( if let Some(v) = self.$field { cfg.$field = v; } )* };
        }
        set!(
            n,
            p,
            epsilon,
            rho,
            k,
            seed,
            instances,
            tune_instances,
            runs,
            budget,
            rounds,
            sample_every,
            n_grid,
            p_grid,
            alpha_grid,
            task,
            knowledge
        );
        if self.alpha.is_some() {
            cfg.alpha = self.alpha;
        }
        if self.cl_alpha.is_some() {
            cfg.cl_alpha = self.cl_alpha;
        }
        cfg.format = self.format;
        cfg.out = self.out;
        (cfg, self.threads.max(1))
    }
}

fn run(cli: Cli) -> Result<()> {
    let (id, flags) = match cli.command {
        Command::ConfidenceSweep(f) => (ExperimentId::ConfidenceSweep, f),
        Command::MpAsyncVsSync(f) => (ExperimentId::MpAsyncVsSync, f),
        Command::ClVsMp(f) => (ExperimentId::ClVsMp, f),
        Command::ClAsyncVsSync(f) => (ExperimentId::ClAsyncVsSync, f),
        Command::Scalability(f) => (ExperimentId::Scalability, f),
        Command::TuneAlpha(f) => (ExperimentId::TuneAlpha, f),
    };
    let (cfg, threads) = flags.into_config(id);
    cfg.validate().context("invalid configuration")?;
    let output = run_experiment(&cfg, threads).with_context(|| format!("{id} failed"))?;
    match &cfg.out {
        Some(path) => {
            write_output(&output, cfg.format, path).with_context(|| format!("cannot write {}", path.display()))?;
            eprintln!("{id}: wrote {} rows to {}", output.rows.len(), path.display());
        }
        None => {
            let text = output.render(cfg.format)?;
            std::io::stdout().lock().write_all(text.as_bytes()).context("cannot write to standard output")?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
