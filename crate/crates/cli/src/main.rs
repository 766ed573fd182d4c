use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use mc_cli::commands;
use mc_cli::error::EXIT_ERROR;

#[derive(Parser)]
#[command(
    name = "mcstab",
    version,
    about = "Stability verdicts, frequency-response contours, co-simulation, and \
             parameter sweeps for rings of reaction agents coupled by diffusion channels"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Target {
    /// Run configuration (JSON document)
    config: PathBuf,
    /// Directory the output files are written to
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Decide closed-loop stability and write verdict.json (exit 0 stable,
    /// 10 unstable, 20 refused, 1 error)
    Analyze(Target),
    /// Trace each distinct branch's open-loop frequency response to CSV
    Nyquist(Target),
    /// Integrate the coupled system from a perturbed equilibrium and
    /// classify the response
    Simulate(Target),
    /// Bisect one model parameter to the stability boundary
    Sweep(Target),
}

type CommandFn = fn(&mc_cli::RunConfig, &std::path::Path) -> Result<i32, mc_cli::CliError>;

fn main() {
    let cli = Cli::parse();
    if let Err(message) = mc_cli::init_thread_pool() {
        eprintln!("error: {message}");
        std::process::exit(EXIT_ERROR);
    }
    let (target, run): (&Target, CommandFn) = match &cli.command {
        Command::Analyze(t) => (t, commands::run_analyze),
        Command::Nyquist(t) => (t, commands::run_nyquist),
        Command::Simulate(t) => (t, commands::run_simulate),
        Command::Sweep(t) => (t, commands::run_sweep),
    };
    let code = match commands::load_config(&target.config).and_then(|c| run(&c, &target.out)) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    };
    std::process::exit(code);
}
