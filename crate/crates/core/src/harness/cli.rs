use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use super::config::{InnerKind, Overrides, RunConfig, StopSpec};
use super::experiments::{run_experiment, Experiment, ExperimentOptions};
use crate::algorithm::BetaChoice;
use crate::error::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "iddgt", version, about = "Inexact decentralized dual gradient tracking simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write instance.json and topology.json for a config.
    Generate(ConfigArgs),
    /// Run one config; writes trace.csv and diagnostics.json.
    Run(ConfigArgs),
    /// Rank-deficient constraints over a directed exponential graph.
    Experiment1(ExperimentArgs),
    /// Full-row-rank constraints over an Erdős–Rényi graph.
    Experiment2(ExperimentArgs),
    /// Print step-size bounds, M, H, ρ(M) and θ for a config.
    Diagnose(ConfigArgs),
}

#[derive(Debug, Args)]
struct ConfigArgs {
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    overrides: OverrideArgs,
}

#[derive(Debug, Args)]
struct OverrideArgs {
    /// Replaces the problem seed and, for random graphs, the graph seed.
    #[arg(long)]
    seed: Option<u64>,
    /// A number, `auto` (0.9 × min bound) or `smooth` (0.9 × μ/σ̄²(𝐀)).
    #[arg(long, value_parser = parse_beta)]
    beta: Option<BetaChoice>,
    /// Inner accuracy decay; 0 selects exact inner solves.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    delta0: Option<f64>,
    /// Replaces the inner strategy of the config file.
    #[arg(long, value_parser = parse_inner)]
    inner: Option<InnerKind>,
    #[arg(long)]
    inner_steps: Option<usize>,
    #[arg(long)]
    max_outer: Option<usize>,
    #[arg(long)]
    gap_tol: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Base step size; every variant also runs at 2× and 5× this value.
    #[arg(long, value_parser = parse_beta, default_value = "auto")]
    beta: BetaChoice,
    #[arg(long, default_value_t = 1.0)]
    delta0: f64,
    #[arg(long, default_value_t = 2000)]
    max_outer: usize,
    #[arg(long, default_value_t = 1e-8)]
    gap_tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_beta(s: &str) -> std::result::Result<BetaChoice, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_inner(s: &str) -> std::result::Result<InnerKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl OverrideArgs {
    fn into_overrides(self) -> Overrides {
        Overrides {
            seed: self.seed,
            beta: self.beta,
            gamma: self.gamma,
            delta0: self.delta0,
            inner: self.inner,
            inner_steps: self.inner_steps,
            max_outer: self.max_outer,
            gap_tol: self.gap_tol,
            out: self.out,
        }
    }
}

fn load(args: ConfigArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(&args.config)?;
    cfg.apply(&args.overrides.into_overrides())?;
    Ok(cfg)
}

/// Parses `argv` (including the program name) and runs the command. Returns
/// the process exit code: 0 on success, 1 for usage and configuration
/// errors, 2 for failures during a run.
pub fn cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let parsed = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(parsed.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Generate(args) => {
            let cfg = load(args)?;
            let dir = cfg.output.dir.clone().unwrap_or_else(|| PathBuf::from("."));
            let (inst, topo) = super::generate(&cfg, &dir)?;
            println!(
                "wrote {} and {} (n = {}, p = {}, rank(A) = {}, sigma = {:e})",
                dir.join("instance.json").display(),
                dir.join("topology.json").display(),
                inst.n(),
                inst.p(),
                inst.rank_a(),
                topo.sigma()
            );
            Ok(())
        }
        Command::Run(args) => {
            let cfg = load(args)?;
            let dir = cfg.output.dir.clone().unwrap_or_else(|| PathBuf::from("out"));
            let out = super::run_config(&cfg)?;
            super::write_run(&dir, &out)?;
            let s = &out.summary;
            println!(
                "k = {}, gap = {:e}, beta = {:e}, theta = {}, lmi violations = {}; wrote {}",
                s.iterations,
                s.final_gap,
                s.step_size.beta_used,
                s.step_size.theta,
                out.trace.lmi.violations,
                dir.display()
            );
            Ok(())
        }
        Command::Diagnose(args) => {
            let cfg = load(args)?;
            let report = super::diagnose(&cfg)?;
            if let Some(dir) = &cfg.output.dir {
                super::write_json(&dir.join("diagnose.json"), &report)?;
            }
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }
        Command::Experiment1(args) => experiment(Experiment::One, args),
        Command::Experiment2(args) => experiment(Experiment::Two, args),
    }
}

fn experiment(which: Experiment, args: ExperimentArgs) -> Result<()> {
    if !(args.delta0 > 0.0) || !(args.gap_tol >= 0.0) {
        return Err(Error::Config("delta0 must be positive and gap_tol nonnegative".into()));
    }
    let out = args.out.unwrap_or_else(|| PathBuf::from("out").join(which.name()));
    let opts = ExperimentOptions {
        seed: args.seed,
        beta: args.beta,
        delta0: args.delta0,
        multipliers: vec![1.0, 2.0, 5.0],
        stop: StopSpec { max_outer: args.max_outer, gap_tol: args.gap_tol },
        out: out.clone(),
    };
    let manifest = run_experiment(which, &opts)?;
    for v in &manifest.variants {
        println!("{:<28} beta = {:.3e}  k = {:>6}  gap = {:.3e}", v.file, v.beta, v.iterations, v.final_gap);
    }
    println!("wrote {}", out.join("manifest.json").display());
    Ok(())
}
