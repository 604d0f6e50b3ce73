//! `markov-coder`: verify identities, train quantisers, evaluate objectives
//! and generate synthetic sources.

mod config;
mod error;
mod eval;
mod output;
mod synth;
mod train;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use markov_coder::prob::Unit;

use crate::error::{CliError, Result};

/// Env var capping the worker count.
const THREADS_VAR: &str = "MARKOV_CODER_THREADS";

#[derive(Parser)]
#[command(name = "markov-coder", version, about = "Code-length objectives for layered Markov sources")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON config (train), spec (eval), parameters (synth) or fixtures (verify).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Seed for every random draw; overrides the config's `seed`.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out: PathBuf,

    /// Reporting unit (default bits).
    #[arg(long, global = true, value_enum)]
    unit: Option<UnitArg>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the identity and inequality suite; exits 1 if any check fails.
    Verify {
        /// `all` or one of the module scopes.
        #[arg(long, default_value = "all", value_name = "NAME")]
        scope: String,
    },
    /// Train a model from a config file.
    Train {
        #[arg(value_enum)]
        kind: TrainKind,
    },
    /// Evaluate objectives for a spec file.
    Eval {
        #[arg(value_enum)]
        kind: EvalKind,
    },
    /// Write a seeded synthetic dataset or source.
    Synth {
        #[arg(value_enum)]
        kind: SynthKind,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum UnitArg {
    Bits,
    Nats,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum TrainKind {
    Vq,
    Ladder,
    Topo,
    Pmd,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum EvalKind {
    Chain,
    Skip,
    Ace,
    Hm,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SynthKind {
    Gmm,
    Uniform,
    Factors,
    Chain,
    Tree,
}

/// Global flags shared by every subcommand.
pub struct Ctx {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub unit: Option<Unit>,
}

fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    match v.trim().parse::<usize>() {
        Ok(n) if n > 0 => {
            markov_coder::par::init_threads(n);
            Ok(())
        }
        _ => Err(CliError::Usage(format!("{THREADS_VAR} must be a positive integer, got `{v}`"))),
    }
}

fn run(cli: Cli) -> Result<bool> {
    init_threads()?;
    let ctx = Ctx {
        config: cli.config,
        seed: cli.seed,
        out: cli.out,
        unit: cli.unit.map(|u| match u {
            UnitArg::Bits => Unit::Bits,
            UnitArg::Nats => Unit::Nats,
        }),
    };
    let (out, passed) = match cli.command {
        Command::Verify { scope } => verify::run(&ctx, &scope)?,
        Command::Train { kind } => (train::run(&ctx, kind)?, true),
        Command::Eval { kind } => (eval::run(&ctx, kind)?, true),
        Command::Synth { kind } => (synth::run(&ctx, kind)?, true),
    };
    for p in &out.written {
        eprintln!("wrote {}", p.display());
    }
    Ok(passed)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
