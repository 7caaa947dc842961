use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use shuttleswarm::geodata::generate_grid_city;
use shuttleswarm::harness::{
    pinned_config, resolve_seed, run_experiment_suite, run_id, run_scenario, CitySource,
    HarnessError, ScenarioConfig, SweepSpec, SEED_ENV, SUMMARY_CSV,
};
use shuttleswarm::output::{report_fields, write_run_dir, REPORT_JSON};
use shuttleswarm::validate::{validate_run_dir, ValidateError};
use shuttleswarm::City;

const EXIT_USAGE: u8 = 2;
const EXIT_INCOMPLETE: u8 = 3;
const EXIT_VIOLATIONS: u8 = 4;

/// Simulates self-organizing autonomous shuttles sharing rides in a city.
///
/// Exit codes: 0 success, 1 runtime failure, 2 bad arguments or input,
/// 3 run finished with stranded persons, 4 validation found violations.
#[derive(Parser, Debug)]
#[command(name = "shuttleswarm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a lattice city as GeoJSON.
    GenCity(GenCityArgs),
    /// Simulate one day and write its report files.
    Run(RunArgs),
    /// Run a parameter sweep over several seeds.
    Sweep(SweepArgs),
    /// Print the headline numbers of a finished run.
    Report(DirArgs),
    /// Check a traced run against the agents' rules and the fare ledger.
    Validate(DirArgs),
}

#[derive(Args, Debug)]
struct GenCityArgs {
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
    rows: u64,
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
    cols: u64,
    /// Block edge in meters.
    #[arg(long, default_value_t = 150.0)]
    block: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Scenario file; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config's seed and the SHUTTLESWARM_SEED variable.
    #[arg(long)]
    seed: Option<u64>,
    /// Run directory; `runs/<run id>` when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the event and decision logs.
    #[arg(long)]
    trace: bool,
    /// Print the effective configuration and exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Runs in flight at once.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    trace: bool,
}

#[derive(Args, Debug)]
struct DirArgs {
    dir: PathBuf,
}

enum Failure {
    Usage(String),
    Exit(u8),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Config(_) | HarnessError::Geo(_) => Failure::Usage(e.to_string()),
            other => Failure::Runtime(other.into()),
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn gen_city(args: GenCityArgs) -> Result<(), Failure> {
    let city: City = generate_grid_city(args.rows as usize, args.cols as usize, args.block, args.seed)
        .map_err(|e| Failure::Usage(e.to_string()))?;
    let mut text = serde_json::to_string_pretty(&city.to_geojson()).context("encoding city")?;
    text.push('\n');
    fs::write(&args.out, text).with_context(|| format!("writing {}", args.out.display()))?;
    println!(
        "wrote {}x{} city with {} roads to {}",
        args.rows,
        args.cols,
        city.roads.len(),
        args.out.display()
    );
    Ok(())
}

/// City files named in a config are relative to the config's directory.
fn resolve_city_path(config: &mut ScenarioConfig, base: Option<&Path>) {
    if let (CitySource::File { path }, Some(base)) = (&mut config.city, base) {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<ScenarioConfig, Failure> {
    let Some(path) = path else {
        return Ok(ScenarioConfig::default());
    };
    let mut config = ScenarioConfig::from_json(&read(path)?)
        .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    resolve_city_path(&mut config, path.parent());
    Ok(config)
}

fn run(args: RunArgs) -> Result<(), Failure> {
    let config = load_config(args.config.as_deref())?;
    let env = std::env::var(SEED_ENV).ok();
    let seed = resolve_seed(args.seed, &config, env.as_deref())?;
    let pinned = pinned_config(&config, seed);
    if args.print_config {
        println!("{}", pinned.to_json_pretty());
        return Ok(());
    }
    let out = run_scenario(&config, seed, args.trace)?;
    let dir = args
        .out
        .unwrap_or_else(|| PathBuf::from("runs").join(run_id(&config, seed)));
    write_run_dir(&dir, &(pinned.to_json_pretty() + "\n"), &out)
        .with_context(|| format!("writing {}", dir.display()))?;
    for (k, v) in report_fields(&out.report) {
        println!("{k}: {}", if v.is_empty() { "-" } else { &v });
    }
    println!("seed {seed}, files in {}", dir.display());
    if out.report.incomplete {
        eprintln!("run stopped with persons still travelling");
        return Err(Failure::Exit(EXIT_INCOMPLETE));
    }
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<(), Failure> {
    let mut spec = SweepSpec::from_json(&read(&args.spec)?)
        .map_err(|e| Failure::Usage(format!("{}: {e}", args.spec.display())))?;
    resolve_city_path(&mut spec.base, args.spec.parent());
    let result = run_experiment_suite(&spec, args.jobs, Some(&args.out), args.trace)?;
    print!("{}", read(&args.out.join(SUMMARY_CSV))?);
    if result.any_incomplete() {
        eprintln!("some runs stopped with persons still travelling");
        return Err(Failure::Exit(EXIT_INCOMPLETE));
    }
    Ok(())
}

fn report(args: DirArgs) -> Result<(), Failure> {
    let path = args.dir.join(REPORT_JSON);
    let report: Value = serde_json::from_str(&read(&path)?)
        .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    let Value::Object(map) = report else {
        return Err(Failure::Usage(format!("{}: not an object", path.display())));
    };
    for (k, v) in map.iter().filter(|(_, v)| !v.is_array()) {
        let shown = match v {
            Value::Null => "-".to_string(),
            Value::String(s) => s.clone(),
            other => other.to_string(),
        };
        println!("{k}: {shown}");
    }
    Ok(())
}

fn validate(args: DirArgs) -> Result<(), Failure> {
    let report = match validate_run_dir(&args.dir) {
        Ok(r) => r,
        Err(e @ (ValidateError::Missing(_) | ValidateError::Parse { .. })) => {
            return Err(Failure::Usage(e.to_string()))
        }
        Err(e) => return Err(Failure::Runtime(e.into())),
    };
    println!(
        "checked {} transitions, {} decisions ({} admissions), {} stops, {} legs",
        report.transitions, report.decisions, report.admissions, report.stops, report.legs
    );
    if report.is_clean() {
        println!("no violations");
        return Ok(());
    }
    for v in &report.violations {
        println!("{v}");
    }
    println!("{} violations", report.violations.len());
    Err(Failure::Exit(EXIT_VIOLATIONS))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenCity(a) => gen_city(a),
        Command::Run(a) => run(a),
        Command::Sweep(a) => sweep(a),
        Command::Report(a) => report(a),
        Command::Validate(a) => validate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Exit(code)) => ExitCode::from(code),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
