use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use viewsym::Execution;
use viewsym_cli::commands::{run, Step};
use viewsym_cli::{CliError, RunConfig};

/// Mirror-symmetric face signature experiments.
#[derive(Parser)]
#[command(name = "viewsym", version)]
struct Cli {
    /// Run configuration (JSON); defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override `master_seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override `output_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Run on one thread (results are identical either way).
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render one orbit per identity.
    Generate,
    /// Learn template bases for every configured rule.
    Train,
    /// Pair-matching AUC, tuning curves and similarity matrices.
    Evaluate,
    /// Run the property suite; exit code 1 when any check fails.
    Verify,
    /// Every stage selected by the config.
    All,
}

fn load(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.master_seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.output_dir = o.clone();
    }
    if cli.sequential {
        cfg.execution = Execution::Sequential;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let step = match cli.command {
        Command::Generate => Step::Generate,
        Command::Train => Step::Train,
        Command::Evaluate => Step::Evaluate,
        Command::Verify => Step::Verify,
        Command::All => Step::All,
    };
    match load(&cli).and_then(|cfg| run(&cfg, step)) {
        Ok(dir) => {
            println!("{}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
