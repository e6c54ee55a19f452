use std::path::PathBuf;
use std::process::ExitCode;

use btrf_cli::commands;
use btrf_cli::{CliError, CliResult, RunConfig};
use clap::{Parser, Subcommand};

/// Camera relocalization with backtracking regression forests.
#[derive(Debug, Parser)]
#[command(name = "btrf", version)]
struct Cli {
    /// Run configuration (`key = value` lines).
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Worker threads; defaults to the available cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Override a config key, e.g. `--set tree_count=3`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Print the default configuration and exit.
    #[arg(long)]
    print_defaults: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic dataset.
    Synth {
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Train a forest on a dataset's training split.
    Train {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Estimate poses for a dataset's test split.
    Relocalize {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Directory for estimated pose files.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Relocalize the test split for each leaf budget and score it.
    Evaluate {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
        /// Comma-separated leaf budgets, e.g. `1,4,16`.
        #[arg(long)]
        sweep: Option<String>,
    },
    /// Print tree statistics of a model.
    Inspect {
        #[arg(long)]
        model: Option<PathBuf>,
    },
}

fn load_config(cli: &Cli) -> CliResult<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    for o in &cli.overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got `{o}`")))?;
        cfg.set(k.trim(), v.trim()).map_err(CliError::Usage)?;
    }
    cfg.validate().map_err(CliError::Usage)?;
    Ok(cfg)
}

fn run(cli: Cli) -> CliResult<()> {
    if cli.print_defaults {
        print!("{}", RunConfig::default().render());
        return Ok(());
    }
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let mut cfg = load_config(&cli)?;
    let set = |slot: &mut Option<PathBuf>, v: Option<PathBuf>| {
        if v.is_some() {
            *slot = v;
        }
    };
    match cli.command {
        None => return Err(CliError::Usage("no subcommand given; see --help".into())),
        Some(Command::Synth { output }) => {
            set(&mut cfg.output, output);
            let out = commands::synth(&cfg)?;
            println!("wrote dataset to {}", out.display());
        }
        Some(Command::Train { dataset, model }) => {
            set(&mut cfg.dataset, dataset);
            set(&mut cfg.model, model);
            let forest = commands::train(&cfg)?;
            let leaves: usize = forest.trees().iter().map(|t| t.leaf_count()).sum();
            println!(
                "trained {} trees ({leaves} leaves) -> {}",
                forest.trees().len(),
                cfg.model.as_ref().unwrap().display()
            );
        }
        Some(Command::Relocalize { dataset, model, output }) => {
            set(&mut cfg.dataset, dataset);
            set(&mut cfg.model, model);
            set(&mut cfg.output, output);
            print!("{}", commands::relocalize(&cfg)?);
        }
        Some(Command::Evaluate {
            dataset,
            model,
            report,
            sweep,
        }) => {
            set(&mut cfg.dataset, dataset);
            set(&mut cfg.model, model);
            set(&mut cfg.report, report);
            if let Some(s) = sweep {
                cfg.set("sweep", &s).map_err(CliError::Usage)?;
            }
            cfg.validate().map_err(CliError::Usage)?;
            let eval = commands::evaluate(&cfg)?;
            print!("{}", btrf_cli::report::summary_text(&eval.summaries));
        }
        Some(Command::Inspect { model }) => {
            set(&mut cfg.model, model);
            let path = cfg
                .model
                .as_ref()
                .ok_or_else(|| CliError::Usage("`model` is not set".into()))?;
            print!("{}", commands::inspect(path)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
