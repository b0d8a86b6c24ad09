use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gexr_cli::config::{Budget, ExperimentConfig, Kind, Overrides};
use gexr_cli::presets::{find, PRESETS};
use gexr_cli::{run_config, CliError, CliResult};

const SCHEMA: &str = include_str!("../schema/config.schema.json");

#[derive(Parser)]
#[command(name = "gexr", version, about = "Monte Carlo experiments on extremes of threshold-dependent Gaussian fields")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write a few model sample paths to `<id>.paths.bin`.
    #[arg(long)]
    dump_paths: bool,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides { seed: self.seed, workers: self.workers, out_dir: self.out.clone(), dump_paths: self.dump_paths }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Pickands, Piterbarg and generalized constants.
    Constants(RunArgs),
    /// Tail probabilities by conditional or crude Monte Carlo.
    Tail(RunArgs),
    /// Uniform-ratio audit over a family's index grid.
    Audit(RunArgs),
    /// Double-maxima probabilities against the exponential bound.
    Doublesum(RunArgs),
    /// Evaluate an asymptotic formula.
    Formula(RunArgs),
    /// Cell decomposition of a ruin probability (qualitative).
    RuinDemo(RunArgs),
    /// Built-in experiments.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
    /// Run a built-in experiment.
    RunPreset {
        name: String,
        #[command(flatten)]
        common: Common,
    },
    /// Print the JSON schema of experiment configs.
    Schema,
}

#[derive(Subcommand)]
enum PresetAction {
    /// List preset names and descriptions.
    List,
    /// Print a preset's config.
    Show { name: String },
}

fn run_file(kind: Kind, args: &RunArgs) -> CliResult<u8> {
    let cfg = ExperimentConfig::load(&args.config)?;
    if cfg.kind != kind {
        return Err(CliError::Config(format!("config is of kind {}, not {}", cfg.kind.name(), kind.name())));
    }
    report(cfg, &args.common)
}

fn report(cfg: ExperimentConfig, common: &Common) -> CliResult<u8> {
    let (w, code) = run_config(cfg, &common.overrides(), Budget::from_env()?)?;
    for warning in &w.record.warnings {
        eprintln!("warning: {warning}");
    }
    let tag = if w.record.qualitative { " (qualitative)" } else { "" };
    let mut out = std::io::stdout().lock();
    // a closed pipe must not turn a finished run into a failure
    let _ = writeln!(out, "{}: {}{tag}", w.record.experiment_id, w.record.status.as_str());
    for p in [Some(&w.csv), Some(&w.json), Some(&w.plot), w.paths.as_ref()].into_iter().flatten() {
        let _ = writeln!(out, "  {}", p.display());
    }
    Ok(code)
}

fn dispatch(cli: Cli) -> CliResult<u8> {
    match cli.command {
        Command::Constants(a) => run_file(Kind::Constants, &a),
        Command::Tail(a) => run_file(Kind::Tail, &a),
        Command::Audit(a) => run_file(Kind::Audit, &a),
        Command::Doublesum(a) => run_file(Kind::Doublesum, &a),
        Command::Formula(a) => run_file(Kind::Formula, &a),
        Command::RuinDemo(a) => run_file(Kind::RuinDemo, &a),
        Command::Presets { action: PresetAction::List } => {
            let mut out = std::io::stdout().lock();
            for p in PRESETS {
                let tag = if p.qualitative() { " [qualitative]" } else { "" };
                let _ = writeln!(out, "{:<26} {}{tag}", p.name, p.description());
            }
            Ok(0)
        }
        Command::Presets { action: PresetAction::Show { name } } => {
            print!("{}", find(&name)?.json);
            Ok(0)
        }
        Command::RunPreset { name, common } => report(find(&name)?.config()?, &common),
        Command::Schema => {
            print!("{SCHEMA}");
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
