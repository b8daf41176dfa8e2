use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crossdiff::acceptance;
use crossdiff::model::{build_model, Model, ModelConfig};
use crossdiff::report::{
    analyze, analyze_and_solve, analyze_exit_code, exit, parse_range, solve_exit_code, summary, sweep_point, to_json,
    SeedSpec, SolveSettings, SWEEP_HEADER,
};

#[derive(Parser)]
#[command(name = "crossdiff", version, about = "Index analysis and steady states of cross-diffusion systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Enumerate constant states, compute local indices and the existence verdict.
    Analyze(AnalyzeArgs),
    /// Analyze, then solve the steady-state problem from one seed.
    Solve(SolveArgs),
    /// Repeat the pipeline over a range of one parameter and write a CSV table.
    Sweep(SweepArgs),
    /// Run the built-in acceptance suite.
    Selftest,
}

#[derive(Args)]
struct Common {
    /// Model configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Report path; the summary always goes to standard output.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Record wall-clock timings in the report (breaks byte stability).
    #[arg(long)]
    timings: bool,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
#[group(id = "seed", multiple = false)]
struct SeedArgs {
    /// Seed from the unstable direction of mode K at the coexistence state.
    #[arg(long, value_name = "K", group = "seed")]
    seed_mode: Option<usize>,
    /// Constant seed, comma separated.
    #[arg(long, value_name = "V1,...,VM", group = "seed")]
    seed_constant: Option<String>,
    /// Smooth random seed from this integer.
    #[arg(long, value_name = "S", group = "seed")]
    seed_random: Option<u64>,
}

#[derive(Args)]
struct SolverArgs {
    /// Cells per axis.
    #[arg(long, default_value_t = 64)]
    grid: usize,
    /// Newton tolerance on the sup-norm residual.
    #[arg(long, default_value_t = crossdiff::tol::NEWTON)]
    tol: f64,
    /// Uniform sigma steps of the homotopy.
    #[arg(long, default_value_t = 10)]
    sigma_steps: usize,
    /// Solve directly at sigma = 1.
    #[arg(long)]
    no_homotopy: bool,
    /// Lagged-coefficient iteration instead of Newton.
    #[arg(long)]
    picard: bool,
    #[command(flatten)]
    seed: SeedArgs,
    /// Mode seed amplitude.
    #[arg(long, default_value_t = 0.1, requires = "seed_mode")]
    amp: f64,
    /// BMO radius.
    #[arg(long)]
    radius: Option<f64>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    solver: SolverArgs,
    /// Field CSV path; defaults to the report path with a .csv extension.
    #[arg(long)]
    field: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Model configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// CSV path; standard output when absent.
    #[arg(long)]
    output: Option<PathBuf>,
    /// NAME=start:stop:count, e.g. d.0=0.05:0.5:10.
    #[arg(long)]
    param: String,
    /// Also solve at every point.
    #[arg(long)]
    solve: bool,
    #[command(flatten)]
    solver: SolverArgs,
}

impl SolverArgs {
    fn settings(&self) -> Result<SolveSettings> {
        let seed = if let Some(k) = self.seed.seed_mode {
            SeedSpec::Mode { k, amplitude: self.amp }
        } else if let Some(text) = &self.seed.seed_constant {
            let values = text
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .with_context(|| format!("cannot parse seed values {text:?}"))?;
            SeedSpec::Constant { values }
        } else {
            SeedSpec::Random {
                seed: self.seed.seed_random.unwrap_or(0),
            }
        };
        Ok(SolveSettings {
            grid_n: self.grid,
            tol: self.tol,
            sigma_steps: self.sigma_steps,
            homotopy: !self.no_homotopy,
            seed,
            radius: self.radius,
            picard: self.picard,
        })
    }
}

/// Failure with a chosen exit code.
struct Failure {
    code: i32,
    error: anyhow::Error,
}

fn input<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure {
        code: exit::INPUT,
        error: e.into(),
    }
}

fn read_config(path: &Path) -> Result<ModelConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(ModelConfig::from_json_str(&text)?)
}

fn load_model(path: &Path) -> Result<Model> {
    Ok(build_model(&read_config(path)?)?)
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn cmd_analyze(args: &AnalyzeArgs) -> std::result::Result<i32, Failure> {
    let model = load_model(&args.common.config).map_err(input)?;
    let report = analyze(&model, args.common.timings).map_err(input)?;
    if let Some(path) = &args.common.output {
        write(path, &to_json(&report)).map_err(input)?;
    }
    println!("{}", summary(&report));
    Ok(analyze_exit_code(&report))
}

fn cmd_solve(args: &SolveArgs) -> std::result::Result<i32, Failure> {
    let model = load_model(&args.common.config).map_err(input)?;
    let settings = args.solver.settings().map_err(input)?;
    let (report, field) = analyze_and_solve(&model, &settings, args.common.timings).map_err(input)?;
    if let Some(path) = &args.common.output {
        write(path, &to_json(&report)).map_err(input)?;
    }
    let csv_path = args
        .field
        .clone()
        .or_else(|| args.common.output.as_ref().map(|p| p.with_extension("csv")));
    if let (Some(path), Some(field)) = (csv_path, field) {
        write(&path, &field.to_csv()).map_err(input)?;
    }
    println!("{}", summary(&report));
    Ok(solve_exit_code(&report))
}

fn cmd_sweep(args: &SweepArgs) -> std::result::Result<i32, Failure> {
    let config = read_config(&args.config).map_err(input)?;
    build_model(&config).map_err(input)?;
    let Some((name, range)) = args.param.split_once('=') else {
        return Err(input(anyhow::anyhow!("--param must be NAME=start:stop:count")));
    };
    let values = parse_range(range).map_err(input)?;
    let settings = if args.solve {
        Some(args.solver.settings().map_err(input)?)
    } else {
        None
    };
    let rows: Vec<String> = values
        .par_iter()
        .map(|v| sweep_point(&config, name, *v, settings.as_ref()).to_csv())
        .collect();
    let mut text = String::from(SWEEP_HEADER);
    text.push('\n');
    for row in &rows {
        text.push_str(row);
        text.push('\n');
    }
    match &args.output {
        Some(path) => write(path, &text).map_err(input)?,
        None => print!("{text}"),
    }
    Ok(exit::OK)
}

fn cmd_selftest() -> i32 {
    let outcomes = acceptance::run_all();
    for o in &outcomes {
        println!("{}", o.line());
    }
    let passed = outcomes.iter().filter(|o| o.passed).count();
    println!("acceptance: {passed} of {} criteria pass", outcomes.len());
    if passed == outcomes.len() {
        exit::OK
    } else {
        exit::SOLVER
    }
}

fn configure_threads() -> Result<()> {
    let Ok(text) = std::env::var("CROSSDIFF_THREADS") else {
        return Ok(());
    };
    let n: usize = text
        .trim()
        .parse()
        .with_context(|| format!("CROSSDIFF_THREADS must be a positive integer, got {text:?}"))?;
    if n == 0 {
        bail!("CROSSDIFF_THREADS must be a positive integer, got 0");
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { exit::INPUT } else { exit::OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(exit::INPUT as u8);
    }
    let outcome = match &cli.command {
        Command::Analyze(args) => cmd_analyze(args),
        Command::Solve(args) => cmd_solve(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Selftest => Ok(cmd_selftest()),
    };
    match outcome {
        Ok(code) => ExitCode::from(code as u8),
        Err(Failure { code, error }) => {
            eprintln!("error: {error:#}");
            ExitCode::from(code as u8)
        }
    }
}
