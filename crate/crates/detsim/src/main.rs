//! `detsim`: plan zeta, run simulations, sweep parameters, rebuild figure
//! tables and fuzz the protocol invariants.

mod commands;
mod error;
mod load;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "detsim", version, about = "Delayed-execution PoW planner and simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand.
#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// JSON config file; see docs/config.md.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override a config value by dotted path, e.g. --set network.protocol.zeta=40.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Seeds: N, A..B (end exclusive), A..=B or a comma list.
    #[arg(long)]
    pub seeds: Option<String>,
    /// Output directory. Without it results go to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads for independent runs (default: one per core).
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Choose zeta for a rate setting and print the bound terms.
    Plan(Common),
    /// Run one simulation per seed and print its metrics.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Check the protocol invariants after each run.
        #[arg(long)]
        check: bool,
        /// Write a JSON-lines event trace (one seed, needs --out).
        #[arg(long)]
        trace: bool,
    },
    /// Run a grid of scenarios over seeds and write a table.
    Sweep(Common),
    /// Rebuild a figure table: fig2, fig9, fig11, fig13, queue_hist, hca_compare or all.
    Reproduce {
        figure: String,
        #[command(flatten)]
        common: Common,
    },
    /// Run the invariant checks over strategies and seeds; exits 1 on any violation.
    Fuzz(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Plan(c) => commands::plan(c),
        Command::Simulate { common, check, trace } => commands::simulate(common, *check, *trace),
        Command::Sweep(c) => commands::sweep(c),
        Command::Reproduce { figure, common } => commands::reproduce(figure, common),
        Command::Fuzz(c) => commands::fuzz(c),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(2)
        }
    }
}
