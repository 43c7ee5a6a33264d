use std::path::PathBuf;
use std::process::ExitCode;

use adkyle::{load_config, run, Task};
use anyhow::Result;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "adkyle", version, about = "Equilibrium engine for insider trading in Arrow-Debreu securities")]
struct Cli {
    /// Run configuration (TOML).
    #[arg(short, long, global = true, default_value = "adkyle.toml")]
    config: PathBuf,
    /// Overrides `mc.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the equilibrium trading scale and demand surface.
    Solve,
    /// Simulate order-flow paths and pathwise prices.
    Simulate,
    /// Estimate the cross price-impact kernel.
    Impact,
    /// Information efficiency across signal counts.
    Efficiency {
        /// Comma-separated signal counts, e.g. 2,4,6,8.
        #[arg(long = "I", value_delimiter = ',')]
        signals: Option<Vec<usize>>,
    },
    /// Option-strip decomposition of the equilibrium demand.
    Options,
    /// Check the insider's first-order condition at the equilibrium.
    VerifyFoc,
    /// Kernel diagnostics.
    Kernel {
        #[command(subcommand)]
        action: KernelAction,
    },
    /// Canonical posterior diagnostics.
    Posterior {
        #[command(subcommand)]
        action: PosteriorAction,
    },
}

#[derive(Subcommand)]
enum KernelAction {
    /// Write K, Q, L and c.
    Dump,
}

#[derive(Subcommand)]
enum PosteriorAction {
    /// Write posterior moments over a list of trading scales.
    Probe,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn execute(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli.config, cli.seed)?;
    if cfg.workers > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build_global()?;
    }
    let task = match cli.command {
        Command::Solve => Task::Solve,
        Command::Simulate => Task::Simulate,
        Command::Impact => Task::Impact,
        Command::Efficiency { signals } => Task::Efficiency { signals },
        Command::Options => Task::Options,
        Command::VerifyFoc => Task::VerifyFoc,
        Command::Kernel { action: KernelAction::Dump } => Task::KernelDump,
        Command::Posterior { action: PosteriorAction::Probe } => Task::PosteriorProbe,
    };
    for path in run(&task, &cfg)? {
        println!("{}", path.display());
    }
    Ok(())
}
