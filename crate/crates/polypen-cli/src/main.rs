//! Command line front end. Problems travel as JSON files; traces leave as
//! CSV (with # header lines) or JSON depending on the output extension.
//!
//! Exit codes: 0 success, 2 validation failure (bad file, bad flags,
//! infeasible data), 3 numeric failure (divergence, overflow, no feasible
//! scaling). Messages name the offending field.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::json;

use polypen::circuit::{fixed_point_solve, tape_solve, PowerStrategy, SecretMarks};
use polypen::scaling;
use polypen::solver::StartPoint;
use polypen::{
    solve, Ellipsoid, Error as LibError, Matrix, MinProblem, Problem, QuadraticCost, SolveTrace,
    SolverConfig, StepPolicy,
};

const DEFAULT_SAMPLES: usize = 256;
const DEFAULT_SEED: u64 = 0x706f_6c79;
const SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(name = "polypen", version, about = "Ellipsoid-constrained quadratic minimization with additions and multiplications only")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the staged-penalty descent on a problem file.
    Solve(SolveArgs),
    /// Approximate min(a, b) through the one-dimensional mapping.
    Minab(MinabArgs),
    /// Estimate the penalty scalings m_min and m_inv by boundary sampling.
    EstimateM(EstimateArgs),
    /// Tabulate the multiplicative depth a solve would consume.
    PlanDepth(PlanDepthArgs),
    /// Parse and validate a problem file without solving.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct SolveArgs {
    /// Problem file (JSON).
    #[arg(long)]
    input: PathBuf,
    /// Trace destination; .json selects the JSON trace, anything else CSV.
    /// Defaults to CSV on stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Override the file's iteration count N.
    #[arg(long)]
    iters: Option<u32>,
    /// Override the penalty scaling m (skips estimation).
    #[arg(long)]
    m: Option<f64>,
    /// Multiplier applied to an estimated m; ignored when m is explicit.
    #[arg(long)]
    alpha: Option<f64>,
    /// Sampling seed; falls back to POLYPEN_SEED, then the file, then a
    /// fixed default.
    #[arg(long)]
    seed: Option<u64>,
    /// Boundary samples for scaling estimation.
    #[arg(long)]
    samples: Option<usize>,
    /// Also run the recording tape and attach circuit statistics.
    #[arg(long)]
    circuit: bool,
    /// Run in software fixed-point with this many fraction bits.
    #[arg(long)]
    fixed_point_bits: Option<u32>,
    /// Attach invariance/descent checks and certification to the trace.
    #[arg(long)]
    diagnostics: bool,
    /// Emit the normalized problem file (17-digit floats) and exit.
    #[arg(long)]
    dump_normalized: bool,
}

#[derive(Args)]
struct MinabArgs {
    #[arg(long, allow_negative_numbers = true)]
    a: f64,
    #[arg(long, allow_negative_numbers = true)]
    b: f64,
    /// Overestimation ratio m / m*; 1 reaches the minimum in one step.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 8)]
    iters: u32,
    /// Also report circuit statistics (second output line, JSON).
    #[arg(long)]
    circuit: bool,
    /// Fail on a = b instead of returning the trivial answer.
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct PlanDepthArgs {
    /// Problem dimension (the plan depends only weakly on it).
    #[arg(long, default_value_t = 1)]
    dim: usize,
    #[arg(long)]
    iters: u32,
    #[arg(long, value_enum, default_value_t = StrategyArg::RepeatedSquaring)]
    strategy: StrategyArg,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Emit the normalized problem file instead of the validation summary.
    #[arg(long)]
    dump_normalized: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Sequential,
    RepeatedSquaring,
}

impl From<StrategyArg> for PowerStrategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Sequential => PowerStrategy::Sequential,
            StrategyArg::RepeatedSquaring => PowerStrategy::RepeatedSquaring,
        }
    }
}

/// The on-disk problem format. Unknown keys are rejected so typos fail
/// loudly instead of silently losing a field.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemFile {
    #[serde(rename = "Q")]
    hessian: Vec<Vec<f64>>,
    q: Vec<f64>,
    #[serde(rename = "A")]
    shape: Vec<Vec<f64>>,
    v: Vec<f64>,
    #[serde(default)]
    m: Option<f64>,
    #[serde(default)]
    alpha: Option<f64>,
    #[serde(rename = "N")]
    iterations: u32,
    #[serde(default)]
    x1: Option<Vec<f64>>,
    #[serde(default)]
    step_policy: Option<StepPolicy>,
    #[serde(default)]
    seed: Option<u64>,
}

struct CliError {
    code: u8,
    msg: String,
}

impl CliError {
    fn validation(msg: impl Into<String>) -> Self {
        CliError {
            code: 2,
            msg: msg.into(),
        }
    }
}

impl From<LibError> for CliError {
    fn from(e: LibError) -> Self {
        let code = match e {
            LibError::NonFiniteIterate { .. }
            | LibError::NoFeasibleScaling { .. }
            | LibError::EigenNonConvergence
            | LibError::OracleNonConvergence { .. }
            | LibError::FixedPointOverflow { .. } => 3,
            _ => 2,
        };
        CliError {
            code,
            msg: e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.msg);
            ExitCode::from(e.code)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Minab(args) => cmd_minab(args),
        Command::EstimateM(args) => cmd_estimate_m(args),
        Command::PlanDepth(args) => cmd_plan_depth(args),
        Command::Validate(args) => cmd_validate(args),
    }
}

fn cmd_solve(args: SolveArgs) -> Result<(), CliError> {
    let file = read_problem_file(&args.input)?;
    let problem = build_problem(&file)?;
    if args.dump_normalized {
        return write_output(args.output.as_deref(), &normalized_json(&problem, &file));
    }

    let iterations = args.iters.unwrap_or(file.iterations);
    let seed = resolve_seed(args.seed, file.seed)?;
    let samples = args.samples.unwrap_or(DEFAULT_SAMPLES);
    let alpha = args.alpha.or(file.alpha).unwrap_or(1.0);
    if !alpha.is_finite() || alpha <= 0.0 {
        return Err(CliError::validation(format!(
            "alpha must be positive and finite, got {alpha}"
        )));
    }

    // The estimate feeds m when none is given and certifies it otherwise.
    let report = scaling::estimate(&problem, samples, seed, 1.1);
    let explicit = args.m.or(file.m);
    let (m, estimated) = match (&explicit, &report) {
        (Some(m), _) => (*m, false),
        (None, Ok(r)) => (r.m_inv * alpha, true),
        (None, Err(_)) => {
            return Err(report.unwrap_err().into());
        }
    };
    if explicit.is_some() && (args.alpha.is_some() || file.alpha.is_some()) {
        eprintln!("note: alpha is ignored because m was given explicitly");
    }

    let mut cfg = SolverConfig::new(iterations, m);
    if let Some(x1) = &file.x1 {
        cfg.start = StartPoint::Point(x1.clone());
    }
    if let Some(policy) = &file.step_policy {
        cfg.step_policy = policy.clone();
    }
    cfg.diagnostics = args.diagnostics;

    let mut trace = match args.fixed_point_bits {
        Some(bits) => fixed_point_solve(&problem, &cfg, bits)?,
        None => solve(&problem, &cfg)?,
    };
    if args.circuit {
        let (_, stats) = tape_solve(&problem, &cfg, SecretMarks::encrypted_state())?;
        trace.circuit = Some(stats);
    }
    if let Ok(r) = &report {
        if trace.scaling.is_none() && (estimated || args.diagnostics) {
            trace.scaling = Some(r.clone());
        }
        if trace.certified.is_none() {
            trace.certified = Some(m * (1.0 + 1e-12) + 1e-12 >= r.m_inv);
        }
    }

    let as_json = wants_json(args.output.as_deref());
    let body = if as_json {
        trace.to_json()
    } else {
        csv_with_header(&trace)
    };
    write_output(args.output.as_deref(), &body)?;

    let x = trace.final_x();
    eprintln!("final x = [{}]", join17(x));
    eprintln!(
        "f = {}, g = {}",
        f17(trace.final_record.f),
        f17(trace.final_record.g)
    );
    match (trace.certified, &report) {
        (Some(true), _) => eprintln!("certification: certified (m = {} meets the sampled invariance requirement)", f17(m)),
        (Some(false), Ok(r)) => eprintln!(
            "certification: uncertified (m = {} below the sampled requirement {})",
            f17(m),
            f17(r.m_inv)
        ),
        (Some(false), Err(_)) => eprintln!("certification: uncertified"),
        (None, _) => eprintln!("certification: unknown (no sampled requirement available)"),
    }
    Ok(())
}

fn cmd_minab(args: MinabArgs) -> Result<(), CliError> {
    if !args.a.is_finite() || !args.b.is_finite() {
        return Err(CliError::validation("a and b must be finite"));
    }
    if args.a == args.b {
        if args.strict {
            return Err(CliError::validation(
                "a and b are equal; nothing to contract (strict mode)",
            ));
        }
        println!("{}", args.a);
        return Ok(());
    }
    let mp = MinProblem::new(args.a, args.b, args.alpha)?;
    if args.circuit {
        let (values, stats) = mp.tape_iterates(args.iters, PowerStrategy::default())?;
        println!("{}", values[values.len() - 1]);
        println!(
            "{}",
            serde_json::to_string(&stats).expect("stats serialize")
        );
    } else {
        let values = mp.iterates(args.iters);
        println!("{}", values[values.len() - 1]);
    }
    Ok(())
}

fn cmd_estimate_m(args: EstimateArgs) -> Result<(), CliError> {
    let file = read_problem_file(&args.input)?;
    let problem = build_problem(&file)?;
    let seed = resolve_seed(args.seed, file.seed)?;
    let samples = args.samples.unwrap_or(DEFAULT_SAMPLES);
    let report = scaling::estimate(&problem, samples, seed, 1.1)?;
    let mut value = serde_json::to_value(&report).expect("report serialize");
    let obj = value.as_object_mut().expect("report is an object");
    obj.insert("schema_version".into(), json!(SCHEMA_VERSION));
    obj.insert("kind".into(), json!("scaling_report"));
    obj.insert("seed".into(), json!(seed));
    write_output(args.output.as_deref(), &value.to_string())
}

fn cmd_plan_depth(args: PlanDepthArgs) -> Result<(), CliError> {
    let plan = polypen::plan_depth(args.dim, args.iters, args.strategy.into())?;
    let mut value = serde_json::to_value(&plan).expect("plan serialize");
    let obj = value.as_object_mut().expect("plan is an object");
    obj.insert("schema_version".into(), json!(SCHEMA_VERSION));
    obj.insert("kind".into(), json!("depth_plan"));
    write_output(args.output.as_deref(), &value.to_string())
}

fn cmd_validate(args: ValidateArgs) -> Result<(), CliError> {
    let file = read_problem_file(&args.input)?;
    let problem = build_problem(&file)?;
    if let Some(x1) = &file.x1 {
        if x1.len() != problem.dim() {
            return Err(CliError::validation(format!(
                "x1 has {} entries, problem dimension is {}",
                x1.len(),
                problem.dim()
            )));
        }
        if !x1.iter().all(|t| t.is_finite()) {
            return Err(CliError::validation("x1 has non-finite entries"));
        }
        let g = problem.eval_g(x1);
        if g > 1.0 + 1e-12 {
            return Err(CliError::validation(format!(
                "x1 lies outside the constraint set (g = {g})"
            )));
        }
    }
    if let Some(StepPolicy::Sequence(seq)) = &file.step_policy {
        if (seq.len() as u64) < u64::from(file.iterations) {
            return Err(CliError::validation(format!(
                "step_policy sequence has {} entries for N = {}",
                seq.len(),
                file.iterations
            )));
        }
    }
    if args.dump_normalized {
        return write_output(args.output.as_deref(), &normalized_json(&problem, &file));
    }
    let summary = json!({
        "schema_version": SCHEMA_VERSION,
        "kind": "validation",
        "dim": problem.dim(),
        "iterations": file.iterations,
        "m": file.m,
        "alpha": file.alpha,
        "has_start": file.x1.is_some(),
        "ok": true,
    });
    write_output(args.output.as_deref(), &summary.to_string())
}

fn read_problem_file(path: &Path) -> Result<ProblemFile, CliError> {
    let text = fs::read_to_string(path).map_err(|e| {
        CliError::validation(format!("cannot read {}: {e}", path.display()))
    })?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))
}

fn build_problem(file: &ProblemFile) -> Result<Problem, CliError> {
    let hessian = matrix_from_rows(&file.hessian, "Q")?;
    let shape = matrix_from_rows(&file.shape, "A")?;
    let cost = QuadraticCost::new(hessian, file.q.clone())?;
    let constraint = Ellipsoid::new(shape, file.v.clone())?;
    Ok(Problem::new(cost, constraint)?)
}

fn matrix_from_rows(rows: &[Vec<f64>], name: &str) -> Result<Matrix, CliError> {
    Matrix::from_rows(rows)
        .map_err(|e| CliError::validation(format!("{name}: {e}")))
}

fn resolve_seed(flag: Option<u64>, file: Option<u64>) -> Result<u64, CliError> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var("POLYPEN_SEED") {
        Ok(text) => text.trim().parse().map_err(|_| {
            CliError::validation(format!("POLYPEN_SEED is not an integer: {text:?}"))
        }),
        Err(_) => Ok(file.unwrap_or(DEFAULT_SEED)),
    }
}

fn wants_json(path: Option<&Path>) -> bool {
    path.and_then(Path::extension)
        .is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

fn write_output(path: Option<&Path>, body: &str) -> Result<(), CliError> {
    let mut text = body.to_string();
    if !text.ends_with('\n') {
        text.push('\n');
    }
    match path {
        Some(p) => fs::write(p, text)
            .map_err(|e| CliError::validation(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// 17 significant digits: enough to reproduce any f64 bit for bit.
fn f17(x: f64) -> String {
    format!("{x:.16e}")
}

fn join17(xs: &[f64]) -> String {
    xs.iter().map(|x| f17(*x)).collect::<Vec<_>>().join(", ")
}

fn csv_with_header(trace: &SolveTrace) -> String {
    let mut out = String::new();
    out.push_str(&format!("# m {}\n", f17(trace.m)));
    match trace.certified {
        Some(true) => out.push_str("# certified yes\n"),
        Some(false) => out.push_str("# certified no\n"),
        None => out.push_str("# certified unknown\n"),
    }
    if let Some(r) = &trace.scaling {
        let js = serde_json::to_string(r).expect("scaling serialize");
        out.push_str(&format!("# scaling {js}\n"));
    }
    if let Some(s) = &trace.circuit {
        let js = serde_json::to_string(s).expect("stats serialize");
        out.push_str(&format!("# circuit {js}\n"));
    }
    if let Some(fp) = &trace.fixed_point {
        let js = serde_json::to_string(fp).expect("report serialize");
        out.push_str(&format!("# fixed_point {js}\n"));
    }
    out.push_str(&trace.to_csv());
    out
}

/// The problem file with validated (symmetrized) matrices and every float
/// printed with 17 significant digits, so a re-parse reconstructs the
/// exact same problem.
fn normalized_json(p: &Problem, file: &ProblemFile) -> String {
    let mat = |m: &Matrix| {
        let n = m.n();
        let rows: Vec<String> = (0..n)
            .map(|i| {
                let cells: Vec<String> = (0..n).map(|j| f17(m.get(i, j))).collect();
                format!("[{}]", cells.join(","))
            })
            .collect();
        format!("[{}]", rows.join(","))
    };
    let vec17 = |v: &[f64]| {
        let cells: Vec<String> = v.iter().map(|t| f17(*t)).collect();
        format!("[{}]", cells.join(","))
    };
    let mut out = String::from("{");
    out.push_str(&format!("\"Q\":{},", mat(p.cost().hessian())));
    out.push_str(&format!("\"q\":{},", vec17(p.cost().linear())));
    out.push_str(&format!("\"A\":{},", mat(p.constraint().shape())));
    out.push_str(&format!("\"v\":{}", vec17(p.constraint().center())));
    if let Some(m) = file.m {
        out.push_str(&format!(",\"m\":{}", f17(m)));
    }
    if let Some(alpha) = file.alpha {
        out.push_str(&format!(",\"alpha\":{}", f17(alpha)));
    }
    out.push_str(&format!(",\"N\":{}", file.iterations));
    if let Some(x1) = &file.x1 {
        out.push_str(&format!(",\"x1\":{}", vec17(x1)));
    }
    match &file.step_policy {
        Some(StepPolicy::ReciprocalSmoothness) => {
            out.push_str(",\"step_policy\":\"reciprocal_smoothness\"");
        }
        Some(StepPolicy::Sequence(seq)) => {
            out.push_str(&format!(",\"step_policy\":{{\"sequence\":{}}}", vec17(seq)));
        }
        None => {}
    }
    if let Some(seed) = file.seed {
        out.push_str(&format!(",\"seed\":{seed}"));
    }
    out.push('}');
    out
}
