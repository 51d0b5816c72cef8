//! `aogplan`: dataset generation, training, augmentation, evaluation and
//! experiment reports over the task-grammar planners.

mod commands;
mod config;
mod error;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use aogplan::evalbench::Profile;
use aogplan::grammar::Catalog;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::commands::Ctx;
use crate::config::Overrides;
use crate::error::CliError;

#[derive(Parser, Debug)]
#[command(name = "aogplan", version, about = "Task-grammar guided action planning toolkit")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Master seed for data generation, initialization and shuffling.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Layer-width profile.
    #[arg(long, value_enum, global = true)]
    profile: Option<ProfileArg>,
    /// TOML file merged over the built-in defaults (flags win).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, env = "AOGPLAN_OUT", default_value = "runs")]
    out: PathBuf,
    /// Directory of task-graph JSON files replacing the built-in catalog.
    #[arg(long, global = true)]
    catalog: Option<PathBuf>,
    /// Initial curriculum threshold.
    #[arg(long, global = true)]
    tau_init: Option<f64>,
    /// Curriculum threshold increment.
    #[arg(long, global = true)]
    tau_step: Option<f64>,
    /// Admit every generated sample from the first epoch.
    #[arg(long, global = true)]
    no_curriculum: bool,
    /// Train without generated samples.
    #[arg(long, global = true)]
    no_augment: bool,
    /// Target negative ratio of a noise arm; repeat for several arms.
    #[arg(long = "noise-ratio", global = true)]
    noise_ratio: Vec<f64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ProfileArg {
    Desk,
    Paper,
}

impl From<ProfileArg> for Profile {
    fn from(p: ProfileArg) -> Self {
        match p {
            ProfileArg::Desk => Profile::Desk,
            ProfileArg::Paper => Profile::Paper,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthetic scene datasets.
    Dataset {
        #[command(subcommand)]
        command: DatasetCommand,
    },
    /// Train a planner.
    Train {
        #[command(subcommand)]
        command: TrainCommand,
    },
    /// Label the unlabeled pool with a trained AOG-LSTM.
    Augment {
        /// Directory produced by `dataset gen`.
        #[arg(long)]
        data: PathBuf,
        /// AOG-LSTM checkpoint.
        #[arg(long)]
        model: PathBuf,
    },
    /// Score an action-planner checkpoint on the test split.
    Eval {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: PathBuf,
    },
    /// Run a named experiment end to end and write its report.
    Experiment {
        /// One of: main, generalization, self-aug, curriculum, joint-head, noise.
        name: String,
    },
    /// Print catalog contents.
    Inspect {
        #[command(subcommand)]
        command: InspectCommand,
    },
}

#[derive(Subcommand, Debug)]
enum DatasetCommand {
    /// Write train, test and pool splits as JSON lines.
    Gen,
}

#[derive(Subcommand, Debug)]
enum TrainCommand {
    /// Train the AOG-LSTM on the annotated split.
    Aog {
        #[arg(long)]
        data: PathBuf,
    },
    /// Train the Action-LSTM, optionally with generated samples.
    Action {
        #[arg(long)]
        data: PathBuf,
        /// Output of `augment`.
        #[arg(long)]
        generated: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
enum InspectCommand {
    /// Pretty-print one task graph and its sequence count.
    Aog { task: usize },
}

fn catalog(dir: Option<&Path>) -> Result<Catalog, CliError> {
    match dir {
        Some(d) => Catalog::load_dir(d).map_err(|e| CliError::new("catalog", e.to_string())),
        None => Ok(Catalog::builtin()),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let g = &cli.global;
    let catalog = catalog(g.catalog.as_deref())?;
    if let Command::Inspect {
        command: InspectCommand::Aog { task },
    } = cli.command
    {
        print!("{}", commands::inspect_aog(&catalog, task)?);
        return Ok(());
    }
    let flags = Overrides {
        seed: g.seed,
        profile: g.profile.map(Profile::from),
        tau_init: g.tau_init,
        tau_step: g.tau_step,
        no_curriculum: g.no_curriculum,
        no_augment: g.no_augment,
        noise_ratios: g.noise_ratio.clone(),
    };
    let ctx = Ctx {
        config: config::load(g.config.as_deref(), &flags)?,
        catalog,
        out: g.out.clone(),
    };
    let written = match &cli.command {
        Command::Dataset {
            command: DatasetCommand::Gen,
        } => commands::dataset_gen(&ctx)?,
        Command::Train {
            command: TrainCommand::Aog { data },
        } => commands::train_aog_cmd(&ctx, data)?,
        Command::Train {
            command: TrainCommand::Action { data, generated },
        } => commands::train_action_cmd(&ctx, data, generated.as_deref())?,
        Command::Augment { data, model } => commands::augment_cmd(&ctx, data, model)?,
        Command::Eval { data, model } => commands::eval_cmd(&ctx, data, model)?,
        Command::Experiment { name } => commands::experiment_cmd(&ctx, name)?,
        Command::Inspect { .. } => unreachable!("handled above"),
    };
    for w in written {
        println!("{}", ctx.out.join(w).display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.render().to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            eprintln!("{}", CliError::usage(first).json_line());
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.json_line());
            ExitCode::from(e.exit_code as u8)
        }
    }
}
