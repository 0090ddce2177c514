use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use relgauss_core::scenario::{self, Experiment, Format, Scenario, ScenarioError};

/// Run relational Gaussian-state scenarios and write result tables.
#[derive(Parser, Debug)]
#[command(name = "relgauss", version, arg_required_else_help = true)]
struct Cli {
    /// Print the scenario and output schema as JSON and exit.
    #[arg(long)]
    describe_schema: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse and validate a scenario without running it.
    Validate { scenario: PathBuf },
    /// Run a scenario of any experiment family.
    Run(RunArgs),
    /// Run a povm-sweep scenario.
    Sweep(RunArgs),
}

#[derive(clap::Args, Debug)]
struct RunArgs {
    scenario: PathBuf,
    /// Output directory. Falls back to the scenario's [output] directory,
    /// then RELGAUSS_OUT_DIR, then the working directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum FormatArg {
    Csv,
    Json,
}

const OUT_DIR_ENV: &str = "RELGAUSS_OUT_DIR";

fn load(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ScenarioError::Io { path: path.to_path_buf(), message: e.to_string() })?;
    scenario::parse_scenario(&text)
}

fn execute(args: &RunArgs, sweep_only: bool) -> Result<ExitCode, ScenarioError> {
    let scenario = load(&args.scenario)?;
    if sweep_only && scenario.experiment != Experiment::PovmSweep {
        return Err(ScenarioError::Invalid(vec![format!(
            "[scenario] experiment: sweep needs povm-sweep, found {}",
            scenario.experiment
        )]));
    }
    let format = match args.format {
        Some(FormatArg::Csv) => Format::Csv,
        Some(FormatArg::Json) => Format::Json,
        None => scenario.output.format,
    };
    let dir = args
        .out
        .clone()
        .or_else(|| scenario.output.directory.clone())
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    let record = scenario::run(&scenario)?;
    let path = scenario::emit(&record, format, &dir)?;
    println!("{}", path.display());
    if record.breaches.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        for b in &record.breaches {
            eprintln!("tolerance breach: {b}");
        }
        Ok(ExitCode::from(3))
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if cli.describe_schema {
        println!("{}", serde_json::to_string_pretty(&scenario::describe_schema()).expect("schema serializes"));
        return ExitCode::SUCCESS;
    }
    let result = match &cli.command {
        None => return ExitCode::SUCCESS,
        Some(Command::Validate { scenario }) => load(scenario).map(|s| {
            println!("{}: valid {} scenario", s.name, s.experiment);
            ExitCode::SUCCESS
        }),
        Some(Command::Run(args)) => execute(args, false),
        Some(Command::Sweep(args)) => execute(args, true),
    };
    result.unwrap_or_else(|e| {
        log::debug!("{e:?}");
        eprintln!("error: {e}");
        ExitCode::from(e.exit_code() as u8)
    })
}
