use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lowedge_cli::{
    run_and_write, validate_config, Aggregates, ConfigError, ExperimentConfig, ExperimentKind, RunError,
};

#[derive(Parser)]
#[command(name = "lowedge", version, about = "Monte Carlo experiments for multi-particle Anderson localization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Median-event mixing and conditional continuity of the random field.
    FieldCertify(RunArgs),
    /// Probability that the truncated cube average is small.
    LargeDeviation(RunArgs),
    /// Probability of a low ground-state energy.
    Lifshitz(RunArgs),
    /// Resolvent decay against the Combes–Thomas bound.
    CtCheck(RunArgs),
    /// Initial-scale singularity probability.
    MsaInitial(RunArgs),
    /// Exponential decay of low-lying eigenfunctions.
    EigenDecay(RunArgs),
    /// Moments of the spectrally localized time evolution.
    Dynloc(RunArgs),
    /// Lowest ground-state energy over disorder realizations.
    SpectralEdge(RunArgs),
    /// Check a configuration file without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Master seed (overrides the file).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Energy threshold E* for msa-initial.
    #[arg(long)]
    estar_override: Option<f64>,
    #[arg(long)]
    quiet: bool,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

fn load(kind: ExperimentKind, args: &RunArgs) -> Result<ExperimentConfig, ConfigError> {
    let mut config = validate_config(&args.config).or_else(|e| match e {
        // overrides may repair violations (e.g. the trial count)
        ConfigError::Invalid(_) => {
            lowedge_cli::parse_config(&std::fs::read_to_string(&args.config).unwrap_or_default())
        }
        other => Err(other),
    })?;
    let mut extra = Vec::new();
    if config.kind != kind {
        extra.push(format!("config describes {} but the {kind} subcommand was used", config.kind));
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if let Some(t) = args.trials {
        config.trials = t;
    }
    if let Some(w) = args.workers {
        config.workers = Some(w);
    }
    if let Some(o) = &args.out {
        config.out = o.clone();
    }
    if let Some(e) = args.estar_override {
        match config.msa.as_mut() {
            Some(m) => m.estar_override = Some(e),
            None => extra.push("--estar-override only applies to msa-initial".into()),
        }
    }
    extra.extend(config.violations());
    if extra.is_empty() {
        Ok(config)
    } else {
        Err(ConfigError::Invalid(extra))
    }
}

fn print_summary(aggregates: &Aggregates) {
    match serde_json::to_string_pretty(aggregates) {
        Ok(s) => println!("{s}"),
        Err(e) => eprintln!("cannot format summary: {e}"),
    }
}

fn run(kind: ExperimentKind, args: &RunArgs) -> ExitCode {
    let config = match load(kind, args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match run_and_write(&config) {
        Ok((report, paths)) => {
            if !args.quiet {
                print_summary(&report.aggregates);
                println!("records: {}", paths.records.display());
                println!("summary: {}", paths.summary_json.display());
                if let Some(p) = paths.scale_table {
                    println!("scales:  {}", p.display());
                }
            }
            ExitCode::SUCCESS
        }
        Err(RunError::Config(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match &cli.command {
        Command::FieldCertify(a) => (ExperimentKind::FieldCertify, a),
        Command::LargeDeviation(a) => (ExperimentKind::LargeDeviation, a),
        Command::Lifshitz(a) => (ExperimentKind::Lifshitz, a),
        Command::CtCheck(a) => (ExperimentKind::CtCheck, a),
        Command::MsaInitial(a) => (ExperimentKind::MsaInitial, a),
        Command::EigenDecay(a) => (ExperimentKind::EigenDecay, a),
        Command::Dynloc(a) => (ExperimentKind::Dynloc, a),
        Command::SpectralEdge(a) => (ExperimentKind::SpectralEdge, a),
        Command::Validate { config } => {
            return match validate_config(config) {
                Ok(c) => {
                    println!("{}: ok ({} trials, seed {})", c.kind, c.trials, c.seed);
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(EXIT_CONFIG)
                }
            };
        }
    };
    run(kind, args)
}
