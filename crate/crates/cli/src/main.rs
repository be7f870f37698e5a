use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kirchhoff_cli::config::{ExperimentConfig, Overrides};
use kirchhoff_cli::error::{CliError, Result};
use kirchhoff_cli::experiment::{run_experiment, sweep_experiment, LadderSummary};
use kirchhoff_cli::output::{ensure_dir, write_json};
use kirchhoff_cli::suites::verify;

#[derive(Parser)]
#[command(
    name = "kirchhoff-lab",
    version,
    about = "Decay-error experiments for the singularly perturbed Kirchhoff equation"
)]
struct Cli {
    /// Worker threads for ladder points (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve, audit and write artifacts for every epsilon of a config.
    Run(RunArgs),
    /// Fit the convergence statistic against epsilon and gate on the slope.
    Sweep(RunArgs),
    /// Run a named verification suite (or `all`).
    Verify {
        suite: String,
        /// Also write the verdict to <dir>/verify.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    horizon: Option<f64>,
    /// Comma-separated epsilons replacing the configured ladder.
    #[arg(long, value_delimiter = ',')]
    ladder: Option<Vec<f64>>,
}

fn load(args: &RunArgs) -> Result<kirchhoff_cli::config::Experiment> {
    let overrides = Overrides { horizon: args.horizon, ladder: args.ladder.clone(), out: args.out.clone() };
    ExperimentConfig::load(&args.config)?.apply(&overrides).validate()
}

fn report(summary: &LadderSummary) -> bool {
    for (eps, stat) in summary.epsilons.iter().zip(&summary.scaled_statistics) {
        println!("epsilon {eps:e}: max (1+t)^(delta/gamma)|rho|^2 / eps^2 = {stat:.6e}");
    }
    if let Some(fit) = &summary.convergence {
        println!("convergence slope {:.4} (residual {:.2e})", fit.exponent, fit.residual);
    }
    for r in summary.stability.iter().filter(|r| !r.verdict.passed()) {
        println!("unstable across the ladder: {} (spread {:.3})", r.claim, r.spread);
    }
    println!("verdict: {}", if summary.passed() { "pass" } else { "fail" });
    summary.passed()
}

fn dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run(args) => run_experiment(&load(&args)?).map(|s| report(&s)),
        Command::Sweep(args) => sweep_experiment(&load(&args)?).map(|s| report(&s)),
        Command::Verify { suite, out } => {
            let verdict = verify(&suite)?;
            println!("{}", serde_json::to_string_pretty(&verdict)?);
            if let Some(dir) = out {
                ensure_dir(&dir)?;
                write_json(&dir.join("verify.json"), &verdict)?;
            }
            Ok(verdict.pass)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Pool(e.to_string()));
    let result = pool.and_then(|pool| pool.install(|| dispatch(cli)));
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
