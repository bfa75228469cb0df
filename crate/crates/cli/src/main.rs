//! `dpfl` command-line front end.
//!
//! Exit codes: 0 on success, 1 when an input fails validation, 2 when a
//! solver fails on valid input. Diagnostics go to stderr.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dpfl::discrete::solve_best_of;
use dpfl::gaussian::solve_gaussian_best_of;
use dpfl::io::{
    parse_json, to_json, DiscreteRequest, GaussianFile, GaussianRequest, JointFile, SolveResult, SolverKind,
    SolverSettings, SweepConfig, Units,
};
use dpfl::svg::render_svg;
use dpfl::sweep::{gen_gaussian_model, run_sweep, to_csv, Problem, SweepGrid, TradeoffRecord};
use dpfl::{DpflError, InfoField, InfoReport, LagrangeParams};

#[derive(Parser)]
#[command(name = "dpfl", version, about = "Two-agent privacy/prediction trade-off solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a discrete problem described by a request file.
    SolveDiscrete(SolveArgs),
    /// Solve a Gaussian problem described by a request file.
    SolveGaussian(SolveArgs),
    /// Run a multiplier sweep described by a config file.
    Sweep(SweepArgs),
    /// Write a random Gaussian model.
    GenModel(GenModelArgs),
    /// Validate a joint-distribution or Gaussian model file and summarize it.
    Check(CheckArgs),
}

#[derive(Args)]
struct SolverFlags {
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    restarts: Option<usize>,
}

impl SolverFlags {
    fn settings(&self) -> SolverSettings {
        SolverSettings {
            tol: self.tol,
            max_iter: self.max_iter,
            seed: self.seed,
            restarts: self.restarts,
            step_rule: None,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Args)]
struct OutputFlags {
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Horizontal axis of SVG charts.
    #[arg(long, default_value = "i_x_t1")]
    x: InfoField,
    /// Vertical axis of SVG charts.
    #[arg(long, default_value = "i_y_t1t2")]
    y: InfoField,
}

#[derive(Args)]
struct SolveArgs {
    /// JSON request file; relative paths inside it resolve against its directory.
    request: PathBuf,
    #[command(flatten)]
    solver: SolverFlags,
    #[command(flatten)]
    output: OutputFlags,
    /// Include the per-iteration functional values (JSON only).
    #[arg(long)]
    trace: bool,
    /// Report JSON information values in bits instead of nats.
    #[arg(long)]
    bits: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    solver: SolverFlags,
    #[command(flatten)]
    output: OutputFlags,
}

#[derive(Args)]
struct GenModelArgs {
    #[arg(long)]
    n_x: usize,
    #[arg(long)]
    n_y: usize,
    /// Scale of the X/Y cross-covariance block, in [0, 1].
    #[arg(long, default_value_t = 1.0)]
    coupling: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    file: PathBuf,
    #[arg(long)]
    bits: bool,
}

enum CliError {
    Validation(String),
    Solver(String),
}

impl CliError {
    /// Errors raised while loading input are always validation errors.
    fn input(path: &Path, e: DpflError) -> Self {
        CliError::Validation(format!("{}: {e}", path.display()))
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Solver(_) => 2,
        }
    }
}

impl From<DpflError> for CliError {
    fn from(e: DpflError) -> Self {
        match e {
            DpflError::InvalidDistribution(_)
            | DpflError::InvalidJoint(_)
            | DpflError::InvalidModel(_)
            | DpflError::InvalidParams(_)
            | DpflError::DimensionMismatch { .. }
            | DpflError::EmptyGrid(_)
            | DpflError::Parse { .. }
            | DpflError::UnknownField(_) => CliError::Validation(e.to_string()),
            _ => CliError::Solver(e.to_string()),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn read(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

fn resolve(base: &Path, relative: &str) -> PathBuf {
    base.parent().unwrap_or(Path::new("")).join(relative)
}

fn load_joint(path: &Path) -> CliResult<dpfl::JointSource> {
    let file: JointFile = parse_json(&read(path)?, "joint file").map_err(|e| CliError::input(path, e))?;
    file.into_source().map_err(|e| CliError::input(path, e))
}

fn load_model(path: &Path) -> CliResult<dpfl::GaussianModel> {
    let file: GaussianFile = parse_json(&read(path)?, "Gaussian model file").map_err(|e| CliError::input(path, e))?;
    file.into_model().map_err(|e| CliError::input(path, e))
}

/// Writes to `out` via a temporary file in the same directory and a rename,
/// or to stdout.
fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    let io_err = |e: std::io::Error| CliError::Solver(format!("writing output: {e}"));
    match out {
        None => std::io::stdout().write_all(text.as_bytes()).map_err(io_err),
        Some(path) => {
            let dir = match path.parent() {
                Some(p) if !p.as_os_str().is_empty() => p,
                _ => Path::new("."),
            };
            let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
            tmp.write_all(text.as_bytes()).map_err(io_err)?;
            tmp.persist(path).map_err(|e| io_err(e.error))?;
            Ok(())
        }
    }
}

struct Solved {
    params: LagrangeParams,
    report: InfoReport,
    trace: Vec<f64>,
    converged: bool,
    iterations: usize,
    seed: u64,
    warnings: Vec<dpfl::discrete::SolverWarning>,
}

fn solve_discrete(args: &SolveArgs) -> CliResult<Solved> {
    let req: DiscreteRequest = parse_json(&read(&args.request)?, "discrete request")
        .map_err(|e| CliError::input(&args.request, e))?;
    let source = load_joint(&resolve(&args.request, &req.source))?;
    let params = req.params()?;
    let options = req.settings().overlay(args.solver.settings()).options()?;
    let card_t1 = req.card_t1.unwrap_or(source.card_x());
    let card_t2 = req.card_t2.unwrap_or(source.card_x());
    let s = solve_best_of(&source, card_t1, card_t2, &params, &options)?;
    Ok(Solved {
        params,
        report: s.report,
        trace: s.trace,
        converged: s.converged,
        iterations: s.iterations,
        seed: s.seed,
        warnings: s.warnings,
    })
}

fn solve_gaussian(args: &SolveArgs) -> CliResult<Solved> {
    let req: GaussianRequest = parse_json(&read(&args.request)?, "Gaussian request")
        .map_err(|e| CliError::input(&args.request, e))?;
    let model = load_model(&resolve(&args.request, &req.model))?;
    let params = req.params()?;
    let options = req.settings().overlay(args.solver.settings()).options()?;
    let d1 = req.d1.unwrap_or(model.n_x());
    let d2 = req.d2.unwrap_or(model.n_x());
    let s = solve_gaussian_best_of(&model, d1, d2, &params, &options)?;
    Ok(Solved {
        params,
        report: s.report,
        trace: s.trace,
        converged: s.converged,
        iterations: s.iterations,
        seed: s.seed,
        warnings: s.warnings,
    })
}

fn run_solve(args: &SolveArgs, gaussian: bool) -> CliResult<()> {
    let s = if gaussian { solve_gaussian(args)? } else { solve_discrete(args)? };
    if !s.converged {
        eprintln!("warning: not converged after {} iterations", s.iterations);
    }
    for w in &s.warnings {
        eprintln!("warning: {w:?}");
    }
    let record = || TradeoffRecord {
        beta: s.params.beta,
        lambda: s.params.lambda,
        gamma: s.params.gamma,
        seed: s.seed,
        restart: 0,
        report: Some(s.report),
        iterations: s.iterations,
        converged: s.converged,
        error: None,
    };
    let text = match args.output.format.unwrap_or(Format::Json) {
        Format::Json => {
            let units = if args.bits { Units::Bits } else { Units::Nats };
            let trace = args.trace.then_some(s.trace.as_slice());
            to_json(&SolveResult::new(&s.report, units, s.converged, s.iterations, s.seed, s.warnings.clone(), trace))
        }
        Format::Csv => to_csv(&[record()]),
        Format::Svg => render_svg(&[record()], args.output.x, args.output.y)?,
    };
    emit(args.output.out.as_deref(), &text)
}

fn run_sweep_command(args: &SweepArgs) -> CliResult<()> {
    let config: SweepConfig =
        parse_json(&read(&args.config)?, "sweep config").map_err(|e| CliError::input(&args.config, e))?;
    let path = resolve(&args.config, &config.problem);
    let problem = match config.solver {
        SolverKind::Discrete => {
            let source = load_joint(&path)?;
            let (t1, t2) = config.dims.unwrap_or((source.card_x(), source.card_x()));
            Problem::Discrete { source, card_t1: t1, card_t2: t2 }
        }
        SolverKind::Gaussian => {
            let model = load_model(&path)?;
            let (d1, d2) = config.dims.unwrap_or((model.n_x(), model.n_x()));
            Problem::Gaussian { model, d1, d2 }
        }
    };
    let options = config.settings().overlay(args.solver.settings()).options()?;
    let mut grid = SweepGrid::new(config.betas.clone(), config.lambdas.clone(), config.gammas.clone(), options)?;
    grid.keep_all = config.keep_all;
    let records = run_sweep(&grid, &problem)?;

    let failed: Vec<&TradeoffRecord> = records.iter().filter(|r| r.report.is_none()).collect();
    for r in &failed {
        eprintln!(
            "warning: beta={} lambda={} gamma={} failed: {}",
            r.beta,
            r.lambda,
            r.gamma,
            r.error.as_deref().unwrap_or("unknown error")
        );
    }
    if failed.len() == records.len() {
        return Err(CliError::Solver(format!("all {} grid points failed", records.len())));
    }
    let text = match args.output.format.unwrap_or(Format::Csv) {
        Format::Csv => to_csv(&records),
        Format::Json => to_json(&records),
        Format::Svg => render_svg(&records, args.output.x, args.output.y)?,
    };
    emit(args.output.out.as_deref(), &text)
}

fn run_gen_model(args: &GenModelArgs) -> CliResult<()> {
    let model = gen_gaussian_model(args.n_x, args.n_y, args.coupling, args.seed)?;
    emit(args.out.as_deref(), &to_json(&GaussianFile::from_model(&model)))
}

fn run_check(args: &CheckArgs) -> CliResult<()> {
    let text = read(&args.file)?;
    let (unit, scale) = if args.bits { ("bits", std::f64::consts::LN_2) } else { ("nats", 1.0) };
    // A joint file is recognised by its `joint` key; anything else must be a model.
    let is_joint = text.contains("\"joint\"");
    let summary = if is_joint {
        let source = load_joint(&args.file)?;
        format!(
            "discrete source: |X| = {}, |Y| = {}, I(X;Y) = {:.12} {unit}",
            source.card_x(),
            source.card_y(),
            source.mutual_information() / scale
        )
    } else {
        let model = load_model(&args.file)?;
        let mi = model.mutual_information().map_err(|e| CliError::input(&args.file, e))?;
        format!("Gaussian model: N_X = {}, N_Y = {}, I(X;Y) = {:.12} {unit}", model.n_x(), model.n_y(), mi / scale)
    };
    println!("{summary}");
    Ok(())
}

fn main() -> ExitCode {
    // clap's own usage errors exit 2, which is reserved for solver failures here.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::SolveDiscrete(a) => run_solve(a, false),
        Command::SolveGaussian(a) => run_solve(a, true),
        Command::Sweep(a) => run_sweep_command(a),
        Command::GenModel(a) => run_gen_model(a),
        Command::Check(a) => run_check(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (CliError::Validation(m) | CliError::Solver(m)) = &e;
            eprintln!("error: {m}");
            ExitCode::from(e.exit_code())
        }
    }
}
