use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;

/// Classification of fully entangled 2 x m x n states under local invertible operations.
#[derive(Debug, Parser)]
#[command(name = "slocc", version, about)]
struct Cli {
    /// Seed for the randomized parts of the numerical Kronecker form.
    #[arg(long, env = "SLOCC_SEED", default_value_t = 0, global = true)]
    seed: u64,
    /// Worker threads for batch commands.
    #[arg(long, default_value_t = 1, global = true)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Orbit type, Kronecker structure and limit class of a pencil or state.
    Classify(commands::ClassifyArgs),
    /// Table of all class families for 2 x m x n.
    Enumerate(commands::EnumerateArgs),
    /// Explicit operator family realizing an orbit-closure limit.
    Witness(commands::WitnessArgs),
    /// Alternating operator scaling towards the normal form.
    Normalform(commands::NormalFormArgs),
    /// Compare the scaling verdict with the classifier on every row of a table.
    Crosscheck(commands::CrosscheckArgs),
    /// Whether critical states exist for the given local dimensions.
    CritExists(commands::CritExistsArgs),
    /// Balanced eigenvalue configuration for a multiplicity pattern.
    Balance(commands::BalanceArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    let ctx = commands::Context { seed: cli.seed, threads: cli.threads.max(1) };
    let result = match cli.command {
        Command::Classify(args) => commands::classify(&ctx, args),
        Command::Enumerate(args) => commands::enumerate(args),
        Command::Witness(args) => commands::witness(args),
        Command::Normalform(args) => commands::normalform(args),
        Command::Crosscheck(args) => commands::crosscheck(&ctx, args),
        Command::CritExists(args) => commands::crit_exists(args),
        Command::Balance(args) => commands::balance(args),
    };
    match result {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
