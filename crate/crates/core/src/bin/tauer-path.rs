use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tauer_path::report::{
    parse_levels, run_approximant, run_certify, run_distances, run_family, run_gamma, run_tower, GridSpec, Outcome,
    ScenarioConfig, OUT_ENV,
};

/// Builds finite approximants of a path of singular masas and checks the
/// identities behind it.
#[derive(Debug, Parser)]
#[command(name = "tauer-path", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// `key = value` config file; flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    depth: Option<usize>,
    /// Comma-separated levels to exercise.
    #[arg(long, global = true)]
    level: Option<String>,
    /// `level:N` or a comma-separated list of rationals.
    #[arg(long, global = true)]
    grid: Option<String>,
    #[arg(long, global = true)]
    probes: Option<usize>,
    #[arg(long, global = true)]
    iters: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, env = OUT_ENV)]
    out: Option<PathBuf>,
    /// Replaces the float thresholds of all certificates.
    #[arg(long, global = true)]
    tol: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Emit the prime tower as JSON.
    Tower,
    /// Build and verify the orthogonal masa family of every leg.
    Family,
    /// Dump the labels of each approximant.
    Approximant,
    /// Gap estimates for every grid pair against 2√|s−t|.
    Distances,
    /// Run every certificate kind over the grid.
    Certify,
    /// Γ witnesses and the continuity sentinel.
    Gamma,
}

fn config(cli: &Cli) -> tauer_path::Result<ScenarioConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ScenarioConfig::from_file(path)?,
        None => ScenarioConfig::default(),
    };
    if let Some(d) = cli.depth {
        cfg.depth = d;
    }
    if let Some(l) = &cli.level {
        cfg.levels = parse_levels(l)?;
    }
    if let Some(g) = &cli.grid {
        cfg.grid = GridSpec::parse(g)?;
    }
    if let Some(p) = cli.probes {
        cfg.probes = p;
    }
    if let Some(i) = cli.iters {
        cfg.iterations = i;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    if cli.tol.is_some() {
        cfg.tolerance = cli.tol;
    }
    cfg.resolve()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match config(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    let result: tauer_path::Result<Outcome> = match cli.command {
        Command::Tower => run_tower(&cfg),
        Command::Family => run_family(&cfg),
        Command::Approximant => run_approximant(&cfg),
        Command::Distances => run_distances(&cfg),
        Command::Certify => run_certify(&cfg),
        Command::Gamma => run_gamma(&cfg),
    };
    match result {
        Ok(outcome) => {
            for file in &outcome.files {
                println!("{}", file.display());
            }
            if outcome.pass {
                ExitCode::SUCCESS
            } else {
                for failure in &outcome.failures {
                    eprintln!("{failure}");
                }
                eprintln!("{} check(s) failed", outcome.failures.len());
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
