use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pun_cli::commands;
use pun_cli::config::{load_config, AblateBranch, Overrides, RunConfig, Task};
use pun_cli::{CliError, EXIT_ERROR, EXIT_GRADCHECK_FAILED};

#[derive(Parser)]
#[command(
    name = "pun",
    about = "Pun location and interpretation: data preparation, training, evaluation, verification.",
    version
)]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true, default_value = "pun.json")]
    config: PathBuf,

    /// Override the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the configured task.
    #[arg(long, global = true, value_enum)]
    task: Option<Task>,

    /// Use the most-frequent-sense baseline instead of a trained model
    /// (interpret task).
    #[arg(long, global = true)]
    mfs: bool,

    /// Disable one model branch, keeping its parameters frozen.
    #[arg(long, global = true, value_enum)]
    ablate: Option<AblateBranch>,

    /// Run cross-validation folds on threads (reduced in fold order).
    #[arg(long, global = true)]
    parallel_folds: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse corpus and gold files, write canonical JSON-lines dumps.
    Prepare,
    /// Cross-validated training; writes report, checkpoints and log.
    Train,
    /// Cross-validated evaluation (with --mfs: no training).
    Eval,
    /// Finite-difference check of both models at tiny dimensions.
    Gradcheck {
        /// Test hook: corrupt one analytic gradient to force a failure.
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
    /// Evaluate the locate task over a range of sense caps; emits CSV.
    Sweep {
        /// Comma-separated ascending cap values.
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16,50")]
        ds: Vec<usize>,
    },
    /// Read sentences from stdin, print `token_index\ttoken` per line.
    Predict {
        /// Checkpoint to load (overrides the config).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
}

fn run(cli: Cli, out: &mut dyn Write) -> Result<i32, CliError> {
    let overrides = Overrides {
        seed: cli.seed,
        task: cli.task,
        mfs: cli.mfs,
        ablate: cli.ablate,
        parallel_folds: cli.parallel_folds,
    };
    let config: RunConfig = load_config(&cli.config, &overrides)?;
    match cli.command {
        Command::Prepare => {
            commands::cmd_prepare(&config, out)?;
            Ok(0)
        }
        Command::Train => {
            commands::cmd_train(&config, out)?;
            Ok(0)
        }
        Command::Eval => {
            commands::cmd_eval(&config, out)?;
            Ok(0)
        }
        Command::Gradcheck { inject_fault } => {
            let summary = commands::cmd_gradcheck(&config, inject_fault, out)?;
            Ok(if summary.passed {
                0
            } else {
                EXIT_GRADCHECK_FAILED
            })
        }
        Command::Sweep { ds } => {
            commands::cmd_sweep(&config, &ds, out)?;
            Ok(0)
        }
        Command::Predict { checkpoint } => {
            let stdin = std::io::stdin();
            let mut input = stdin.lock();
            commands::cmd_predict(&config, checkpoint.as_deref(), &mut input, out)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut stdout = std::io::stdout();
    match run(cli, &mut stdout) {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
