use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ifs_lab_cli::{execute, CliError, Options};

#[derive(Parser)]
#[command(name = "ifs-lab", version, about = "Random iterated function system experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario described by a config file.
    Run(RunArgs),
    /// Render the chaos-game picture of the config's system.
    Render(RunArgs),
    /// Parse and validate a config without running it.
    Validate {
        config: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    config: PathBuf,
    /// Base seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Number of trials (overrides the config).
    #[arg(long)]
    trials: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Exit with status 3 when a search finds nothing.
    #[arg(long)]
    strict: bool,
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("IFS_LAB_THREADS") else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Invalid(format!("IFS_LAB_THREADS={v:?} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Invalid(format!("thread pool: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|_| match cli.command {
        Command::Validate { config } => {
            let cfg = ifs_lab_cli::run::load(&config, &Options::default())?;
            println!("{}: ok ({} scenario)", config.display(), cfg.kind.name());
            Ok(())
        }
        Command::Run(a) => run(a, false),
        Command::Render(a) => run(a, true),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ifs-lab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(a: RunArgs, render_only: bool) -> Result<(), CliError> {
    let opts = Options { seed: a.seed, trials: a.trials, out: a.out, strict: a.strict };
    let (_, files) = execute(&a.config, &opts, render_only)?;
    for f in files {
        println!("{}", f.display());
    }
    Ok(())
}
