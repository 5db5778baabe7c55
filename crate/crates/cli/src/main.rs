use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use hetcomp::experiment::{run_with_workers, write_csv, write_json, write_outputs, ExperimentSpec, OutputFormat, Scenario};
use hetcomp::Error;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

/// Run adaptive-CoMP HetNet experiments and emit result tables.
///
/// Without --config, the built-in three-tier preset for --scenario is used.
#[derive(Debug, Parser)]
#[command(name = "hetcomp", version = hetcomp::experiment::VERSION)]
struct Args {
    /// Experiment spec (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scenario; overrides the one in the config file.
    #[arg(long, value_parser = parse_scenario)]
    scenario: Option<Scenario>,
    #[arg(long)]
    seed: Option<u64>,
    /// Trials, geometry draws or renewal blocks, depending on the scenario.
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    fading_per_geometry: Option<u32>,
    /// Result file; a `<output>.manifest.json` sidecar is written next to it.
    /// Without it the table goes to stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Print the resolved spec as TOML and exit.
    #[arg(long)]
    dump_config: bool,
    /// Validate the spec, print diagnostics and exit.
    #[arg(long)]
    check: bool,
}

fn parse_scenario(s: &str) -> Result<Scenario, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::ZeroForcingInfeasible { .. } => Failure::Config(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

fn load_spec(args: &Args) -> Result<ExperimentSpec, Failure> {
    let mut spec = match (&args.config, args.scenario) {
        (Some(path), _) => ExperimentSpec::load(path).map_err(|e| match e {
            Error::Io(m) => Failure::Config(m),
            other => other.into(),
        })?,
        (None, Some(sc)) => ExperimentSpec::preset(sc),
        (None, None) => return Err(Failure::Config("either --config or --scenario is required".into())),
    };
    if let (Some(_), Some(sc)) = (&args.config, args.scenario) {
        if sc != spec.scenario {
            spec.scenario = sc;
            // the file's sweep belongs to the other scenario
            if spec.validate().errors.iter().any(|d| d.field.starts_with("sweep")) {
                spec.sweep = None;
            }
        }
    }
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    if let Some(t) = args.trials {
        spec.trials = Some(t);
    }
    if let Some(f) = args.fading_per_geometry {
        spec.fading_per_geometry = Some(f);
    }
    if let Some(o) = &args.output {
        spec.output_path = Some(o.clone());
    }
    Ok(spec)
}

fn real_main(args: Args) -> Result<(), Failure> {
    let spec = load_spec(&args)?;
    let diagnostics = spec.validate();
    for w in &diagnostics.warnings {
        eprintln!("warning: {w}");
    }
    for e in &diagnostics.errors {
        eprintln!("error: {e}");
    }
    if !diagnostics.is_ok() {
        return Err(Failure::Config(format!("{} configuration error(s)", diagnostics.errors.len())));
    }
    if args.check {
        return Ok(());
    }
    if args.dump_config {
        print!("{}", spec.resolved().to_toml()?);
        return Ok(());
    }

    let table = run_with_workers(&spec, args.workers)?;
    let format = match args.format {
        Format::Csv => OutputFormat::Csv,
        Format::Json => OutputFormat::Json,
    };
    match &spec.output_path {
        Some(path) => {
            write_outputs(&table, path, format)?;
            eprintln!("wrote {} rows to {}", table.rows.len(), path.display());
        }
        None => {
            let stdout = std::io::stdout().lock();
            match format {
                OutputFormat::Csv => write_csv(&table.rows, stdout)?,
                OutputFormat::Json => write_json(&table, stdout)?,
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match real_main(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("config error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
