//! `nct` — experiment harness over the nct library.
//!
//! Four subcommands: `verify` (inequality chain on random positive samples),
//! `embed` (embedding-constant estimation), `extremal` (extremizer search
//! with certified running-maximum bounds), and `ks` (the special-form family
//! on the 2-torus).
//!
//! Exit codes: 0 — clean run; 1 — a mathematical violation at the configured
//! tolerance, or a mid-run numerical failure; 2 — configuration or usage
//! error.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{exit_code_for, CommandKind, PartialConfig};

#[derive(Parser)]
#[command(
    name = "nct",
    version,
    about = "Spectral experiments on noncommutative tori: verify the entropy inequality chain, estimate embedding constants, search for extremizers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check every stage of the inequality chain on random positive samples
    Verify(CommonArgs),
    /// Estimate the embedding constant by supremum over random samples
    Embed(CommonArgs),
    /// Search for extremizers and record an empirical lower bound
    Extremal(ExtremalArgs),
    /// Check the special-form family on the 2-torus
    Ks(KsArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// TOML config file; command-line flags win over file keys
    #[arg(long)]
    config: Option<PathBuf>,
    /// Torus dimension n ≥ 2
    #[arg(long)]
    n: Option<usize>,
    /// Smoothness order, 0 < s < n/2
    #[arg(long, allow_negative_numbers = true)]
    s: Option<f64>,
    /// Normalization a > 0 of the constant
    #[arg(long, allow_negative_numbers = true)]
    a: Option<f64>,
    /// Number of random samples
    #[arg(long)]
    samples: Option<usize>,
    /// Coefficient support radius of the samples
    #[arg(long, allow_negative_numbers = true)]
    radius: Option<i64>,
    /// Polynomial decay exponent of the sampler profile
    #[arg(long, allow_negative_numbers = true)]
    decay: Option<f64>,
    /// Base RNG seed; sample i draws from the substream seed + 1 + i
    #[arg(long)]
    seed: Option<u64>,
    /// Structure matrix: "zero", "random", or a path to a JSON matrix
    #[arg(long)]
    theta: Option<String>,
    /// Truncation margin beyond the support radius (default: max(3r, r+8))
    #[arg(long, allow_negative_numbers = true)]
    box_margin: Option<i64>,
    /// Root directory for run outputs (default: ./runs)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Relative tolerance for slack violations
    #[arg(long, allow_negative_numbers = true)]
    tol: Option<f64>,
    /// Positivity floor of the shifted sampler
    #[arg(long, allow_negative_numbers = true)]
    floor: Option<f64>,
    /// Safety factor multiplying the run's embedding estimate
    #[arg(long, allow_negative_numbers = true)]
    safety: Option<f64>,
    /// Worker threads for the sample fan-out (default: all cores)
    #[arg(long)]
    threads: Option<usize>,
}

impl CommonArgs {
    fn partial(&self) -> PartialConfig {
        PartialConfig {
            n: self.n,
            s: self.s,
            a: self.a,
            samples: self.samples,
            radius: self.radius,
            decay: self.decay,
            seed: self.seed,
            theta: self.theta.clone(),
            box_margin: self.box_margin,
            out: self.out.clone(),
            tol: self.tol,
            floor: self.floor,
            safety: self.safety,
            threads: self.threads,
            ..PartialConfig::default()
        }
    }
}

#[derive(Args)]
struct ExtremalArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Comma-separated grid of a values (default: just --a)
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    a_grid: Option<Vec<f64>>,
    /// Ascents launched from the best screened starts
    #[arg(long)]
    restarts: Option<usize>,
    /// Iteration budget per ascent
    #[arg(long)]
    budget: Option<usize>,
    /// Random starts screened before the ascents
    #[arg(long)]
    screen: Option<usize>,
    /// Objective: "theorem" or "combined"
    #[arg(long)]
    objective: Option<String>,
    /// Comma-separated amplitude scales applied to every screened start
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    scales: Option<Vec<f64>>,
}

#[derive(Args)]
struct KsArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Winding parameter of the lattice line (k, k·l); must be nonzero
    #[arg(long, allow_negative_numbers = true)]
    l: Option<i64>,
}

fn real_main() -> anyhow::Result<bool> {
    // Sample-level parallelism lives in the harness; the per-sample spectral
    // kernels run sequentially so results never depend on the thread count.
    faer::set_global_parallelism(faer::Par::Seq);
    let cli = Cli::parse();
    let (kind, config_path, partial) = match &cli.command {
        Command::Verify(c) => (CommandKind::Verify, c.config.clone(), c.partial()),
        Command::Embed(c) => (CommandKind::Embed, c.config.clone(), c.partial()),
        Command::Extremal(e) => {
            let mut partial = e.common.partial();
            partial.a_grid = e.a_grid.clone();
            partial.restarts = e.restarts;
            partial.budget = e.budget;
            partial.screen = e.screen;
            partial.objective = e.objective.clone();
            partial.scales = e.scales.clone();
            (CommandKind::Extremal, e.common.config.clone(), partial)
        }
        Command::Ks(k) => {
            let mut partial = k.common.partial();
            partial.l = k.l;
            (CommandKind::Ks, k.common.config.clone(), partial)
        }
    };
    let cfg = config::resolve(kind, config_path.as_deref(), partial)?;
    if let Some(threads) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| anyhow::anyhow!("building the worker pool: {e}"))?;
    }

    let dir = output::create_run_dir(&cfg)?;
    dir.write_config(&cfg)?;
    let violations = match kind {
        CommandKind::Verify => commands::verify::run(&cfg, &dir)?,
        CommandKind::Embed => commands::embed::run(&cfg, &dir)?,
        CommandKind::Extremal => commands::extremal::run(&cfg, &dir)?,
        CommandKind::Ks => commands::ks::run(&cfg, &dir)?,
    };
    println!("results: {}", dir.path.display());
    Ok(violations)
}

fn main() -> ExitCode {
    match real_main() {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => {
            eprintln!("status: violations found");
            ExitCode::from(1)
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
