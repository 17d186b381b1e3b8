use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Mutex;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use mtcp_core::bench::{check_budget, run_bench_with, BenchSpec, FailureReason, DEFAULT_MEM_BUDGET_MB};
use mtcp_core::io::{format_real, read_problem_file, write_problem_file};
use mtcp_core::problems::DEFAULT_SHIFT_EPS;
use mtcp_core::solver::InitStrategy;
use mtcp_core::{emit_csv, solve, verify_solution, Algorithm, Error, GeneratorKind, GeneratorSpec, SolverConfig};
use serde_json::json;

const EXIT_ERROR: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_CAP: u8 = 3;
const EXIT_BUDGET: u8 = 4;
const EXIT_NOT_SOLUTION: u8 = 5;

#[derive(Parser)]
#[command(name = "mtcp", version, about = "Lower-dimensional solvers for M-tensor complementarity problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded test problem and write it as .mtcp.
    Gen(GenArgs),
    /// Solve a problem file and print a one-line outcome record.
    Solve(SolveArgs),
    /// Run a seeded trial sweep and write summary CSV.
    Bench(BenchArgs),
    /// Check whether a point solves a problem.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Generator: 1, 2 or 3.
    #[arg(long)]
    problem: GeneratorKind,
    /// Tensor order.
    #[arg(long)]
    m: usize,
    /// Dimension.
    #[arg(long)]
    n: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Relative diagonal shift for Problems 1 and 2.
    #[arg(long, default_value_t = DEFAULT_SHIFT_EPS)]
    eps: f64,
}

#[derive(Args)]
struct SolveArgs {
    /// Problem file in .mtcp format.
    input: PathBuf,
    #[arg(long)]
    alg: Algorithm,
    #[arg(long, default_value_t = 1.0, value_parser = parse_alpha)]
    alpha: f64,
    #[arg(long, default_value_t = 1e-8)]
    eta: f64,
    #[arg(long, default_value_t = 1000)]
    max_iter: usize,
    /// Initial point: `zero` or `equation`.
    #[arg(long, default_value = "zero")]
    init: InitStrategy,
    /// Write the per-iteration trace as CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Write the final iterate.
    #[arg(long)]
    x_out: Option<PathBuf>,
    /// Report time_s=0 so the record is reproducible.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    problem: GeneratorKind,
    #[arg(long)]
    m: usize,
    /// Comma-separated dimensions.
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<usize>,
    /// Comma list (`0.1,1.0`) or range `start:stop:step`.
    #[arg(long, value_parser = parse_alphas)]
    alphas: AlphaList,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// Trial `t` uses seed `seed + t`.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output path; CSV goes to stdout when omitted.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long, value_delimiter = ',', default_values_t = Algorithm::ALL)]
    algorithms: Vec<Algorithm>,
    #[arg(long, default_value_t = 1e-8)]
    eta: f64,
    #[arg(long, default_value_t = 1000)]
    max_iter: usize,
    #[arg(long, default_value_t = DEFAULT_SHIFT_EPS)]
    eps: f64,
    /// Write 0 in the avg_time_s column so the CSV is reproducible.
    #[arg(long)]
    no_timing: bool,
    /// Write one JSON line per solve with its residual history.
    #[arg(long)]
    trace_jsonl: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Problem file in .mtcp format.
    input: PathBuf,
    /// Whitespace-separated point; defaults to the witness stored in the file.
    #[arg(long)]
    x: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
}

#[derive(Clone)]
struct AlphaList(Vec<f64>);

fn parse_alpha(s: &str) -> Result<f64, String> {
    let a: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if a > 0.0 && a <= 1.0 {
        Ok(a)
    } else {
        Err(format!("alpha must lie in (0, 1], got {a}"))
    }
}

fn parse_alphas(s: &str) -> Result<AlphaList, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let values = match parts.as_slice() {
        [start, stop, step] => {
            let (start, stop, step) = (parse_alpha(start)?, parse_alpha(stop)?, parse_alpha(step)?);
            let mut out = Vec::new();
            let mut i = 0u32;
            loop {
                // Rounding keeps 0.1 + 2 * 0.2 from printing as 0.5000000000000001.
                let v = ((start + f64::from(i) * step) * 1e12).round() / 1e12;
                if v > stop + 1e-12 {
                    break;
                }
                out.push(v);
                i += 1;
            }
            out
        }
        [list] => list.split(',').map(|t| parse_alpha(t.trim())).collect::<Result<_, _>>()?,
        _ => return Err(format!("expected a comma list or start:stop:step, got {s:?}")),
    };
    if values.is_empty() {
        return Err("empty alpha list".into());
    }
    Ok(AlphaList(values))
}

struct Failure {
    code: u8,
    msg: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::MemoryBudget { .. } => EXIT_BUDGET,
            Error::InvalidArgument(_) => EXIT_USAGE,
            _ => EXIT_ERROR,
        };
        Failure { code, msg: e.to_string() }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure {
        code: EXIT_ERROR,
        msg: format!("{}: {e}", path.display()),
    }
}

fn mem_budget() -> Result<u128, Failure> {
    let mb = match std::env::var("MTCP_MEM_BUDGET_MB") {
        Ok(v) => v.trim().parse::<u64>().map_err(|_| Failure {
            code: EXIT_USAGE,
            msg: format!("MTCP_MEM_BUDGET_MB must be a whole number of megabytes, got {v:?}"),
        })?,
        Err(_) => DEFAULT_MEM_BUDGET_MB,
    };
    Ok(u128::from(mb) << 20)
}

fn read_problem(path: &Path) -> Result<mtcp_core::ProblemInstance, Failure> {
    read_problem_file(path).map_err(|e| Failure {
        code: EXIT_ERROR,
        msg: format!("{}: {e}", path.display()),
    })
}

fn cmd_gen(args: GenArgs) -> Result<u8, Failure> {
    check_budget(args.m, args.n, mem_budget()?)?;
    let spec = GeneratorSpec {
        kind: args.problem,
        order: args.m,
        dim: args.n,
        seed: args.seed,
        eps: args.eps,
    };
    spec.validate()?;
    let problem = spec.generate()?;
    write_problem_file(&args.out, &problem).map_err(|e| Failure {
        code: EXIT_ERROR,
        msg: format!("{}: {e}", args.out.display()),
    })?;
    Ok(0)
}

fn cmd_solve(args: SolveArgs) -> Result<u8, Failure> {
    let cfg = SolverConfig {
        alpha: args.alpha,
        eta: args.eta,
        max_iter: args.max_iter,
        init: args.init,
        ..SolverConfig::default()
    };
    cfg.validate()?;
    let problem = read_problem(&args.input)?;
    let start = Instant::now();
    let outcome = solve(&problem, &cfg, args.alg);
    let seconds = if args.no_timing { 0.0 } else { start.elapsed().as_secs_f64() };
    println!("{}", outcome.record(seconds));
    if let Some(path) = &args.trace {
        fs::write(path, outcome.trace_dump()).map_err(|e| io_failure(path, e))?;
    }
    if let Some(path) = &args.x_out {
        let line: Vec<String> = outcome.x.iter().map(|&v| format_real(v)).collect();
        fs::write(path, line.join(" ") + "\n").map_err(|e| io_failure(path, e))?;
    }
    if outcome.init_fallback {
        eprintln!("note: equation initial point failed, started from zero");
    }
    Ok(match (&outcome.failure, outcome.converged()) {
        (_, true) => 0,
        (Some(e), false) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
        (None, false) => EXIT_CAP,
    })
}

fn cmd_bench(args: BenchArgs) -> Result<u8, Failure> {
    let mut spec = BenchSpec::new(args.problem, args.m, args.n, args.alphas.0, args.trials);
    spec.algorithms = args.algorithms;
    spec.base_seed = args.seed;
    spec.eta = args.eta;
    spec.max_iter = args.max_iter;
    spec.eps = args.eps;
    spec.jobs = args.jobs;
    spec.mem_budget_bytes = mem_budget()?;

    let traces = Mutex::new(Vec::new());
    let want_traces = args.trace_jsonl.is_some();
    let report = run_bench_with(&spec, |ctx, outcome| {
        if want_traces {
            let line = json!({
                "n": ctx.n,
                "trial": ctx.trial,
                "seed": ctx.seed,
                "alpha": ctx.alpha,
                "algorithm": ctx.algorithm.name(),
                "status": outcome.status.to_string(),
                "iterations": outcome.iterations,
                "K": outcome.total_epsilon_resolves,
                "index_set_sizes": outcome.trace.iter().map(|r| r.index_set.len()).collect::<Vec<_>>(),
                "residuals": outcome.trace.iter().map(|r| r.residual).collect::<Vec<_>>(),
            });
            let key = (ctx.n, ctx.trial, ctx.alpha.to_bits(), ctx.algorithm);
            traces.lock().expect("trace lock").push((key, line.to_string()));
        }
    })?;

    let mut rows = report.rows;
    if args.no_timing {
        for r in &mut rows {
            r.avg_time_s = 0.0;
        }
    }
    let csv = emit_csv(&rows);
    match &args.csv {
        Some(path) => fs::write(path, csv).map_err(|e| io_failure(path, e))?,
        None => print!("{csv}"),
    }
    if let Some(path) = &args.trace_jsonl {
        let mut lines = traces.into_inner().expect("trace lock");
        lines.sort_by_key(|(key, _)| *key);
        let text: String = lines.into_iter().map(|(_, l)| l + "\n").collect();
        fs::write(path, text).map_err(|e| io_failure(path, e))?;
    }
    for f in &report.failures {
        let detail = match &f.reason {
            FailureReason::Generator(msg) | FailureReason::Solver(msg) => format!(": {msg}"),
            FailureReason::IterationCap => String::new(),
        };
        eprintln!(
            "failed: n={} trial={} seed={} alpha={} algorithm={}: {}{detail}",
            f.n,
            f.trial,
            f.seed,
            f.alpha,
            f.algorithm,
            f.reason.code()
        );
    }
    Ok(0)
}

fn cmd_verify(args: VerifyArgs) -> Result<u8, Failure> {
    let problem = read_problem(&args.input)?;
    let x = match &args.x {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
            text.split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| Failure {
                    code: EXIT_ERROR,
                    msg: format!("{}: {e}", path.display()),
                })?
        }
        None => problem.witness.clone().ok_or_else(|| Failure {
            code: EXIT_ERROR,
            msg: format!("{} stores no witness; pass --x", args.input.display()),
        })?,
    };
    if x.len() != problem.dim() {
        return Err(Error::DimensionMismatch {
            expected: problem.dim(),
            found: x.len(),
        }
        .into());
    }
    let valid = verify_solution(&problem, &x, args.tol);
    let f = problem.eval_f(&x)?;
    let res = mtcp_core::residual(&f, &x)?;
    println!("valid={valid} residual={res:e}");
    Ok(if valid { 0 } else { EXIT_NOT_SOLUTION })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Verify(a) => cmd_verify(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
