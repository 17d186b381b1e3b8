//! Seeded trial runner producing averaged convergence statistics per
//! `(n, alpha, algorithm)`.
//!
//! Trial `t` uses the instance generated with seed `base_seed + t`; every
//! algorithm and every `alpha` sees that same instance. Averages are taken
//! over converged trials only and accumulated in trial order, so the
//! non-timing columns do not depend on the number of worker threads.

use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::problems::{GeneratorKind, GeneratorSpec, ProblemInstance, DEFAULT_SHIFT_EPS};
use crate::solver::{solve, Algorithm, SolveOutcome, SolverConfig, Status, TraceLevel};
use crate::tensor::entry_count;

pub const DEFAULT_MEM_BUDGET_MB: u64 = 512;
pub const CSV_HEADER: &str =
    "n,alpha,algorithm,avg_iter,avg_time_s,avg_index_updates,avg_residual,avg_K,fail_count";

#[derive(Clone, Debug, PartialEq)]
pub struct BenchSpec {
    pub kind: GeneratorKind,
    pub order: usize,
    pub dims: Vec<usize>,
    pub eps: f64,
    pub alphas: Vec<f64>,
    pub trials: usize,
    pub algorithms: Vec<Algorithm>,
    pub base_seed: u64,
    pub eta: f64,
    pub max_iter: usize,
    pub jobs: usize,
    pub mem_budget_bytes: u128,
    pub trace: TraceLevel,
}

impl BenchSpec {
    pub fn new(kind: GeneratorKind, order: usize, dims: Vec<usize>, alphas: Vec<f64>, trials: usize) -> Self {
        let defaults = SolverConfig::default();
        Self {
            kind,
            order,
            dims,
            eps: DEFAULT_SHIFT_EPS,
            alphas,
            trials,
            algorithms: Algorithm::ALL.to_vec(),
            base_seed: 1,
            eta: defaults.eta,
            max_iter: defaults.max_iter,
            jobs: 1,
            mem_budget_bytes: u128::from(DEFAULT_MEM_BUDGET_MB) << 20,
            trace: TraceLevel::Summary,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(Error::InvalidArgument("at least one trial is required".into()));
        }
        if self.dims.is_empty() || self.alphas.is_empty() || self.algorithms.is_empty() {
            return Err(Error::InvalidArgument("dims, alphas and algorithms must be nonempty".into()));
        }
        if let Some(a) = self.alphas.iter().find(|&&a| !(a > 0.0 && a <= 1.0)) {
            return Err(Error::InvalidArgument(format!("alpha {a} out of (0, 1]")));
        }
        if self.jobs < 1 {
            return Err(Error::InvalidArgument("jobs must be at least 1".into()));
        }
        for &n in &self.dims {
            GeneratorSpec {
                kind: self.kind,
                order: self.order,
                dim: n,
                seed: 0,
                eps: self.eps,
            }
            .validate()?;
            check_budget(self.order, n, self.mem_budget_bytes)?;
        }
        self.solver_config(self.alphas[0]).validate()
    }

    fn solver_config(&self, alpha: f64) -> SolverConfig {
        SolverConfig {
            alpha,
            eta: self.eta,
            max_iter: self.max_iter,
            trace: self.trace,
            ..SolverConfig::default()
        }
    }
}

/// Refuses tensors whose dense storage exceeds `budget` bytes.
pub fn check_budget(order: usize, dim: usize, budget: u128) -> Result<()> {
    let bytes = u32::try_from(order)
        .ok()
        .and_then(|m| (dim as u128).checked_pow(m))
        .and_then(|len| len.checked_mul(std::mem::size_of::<f64>() as u128))
        .unwrap_or(u128::MAX);
    if bytes > budget || entry_count(order, dim).is_none() {
        return Err(Error::MemoryBudget {
            order,
            dim,
            bytes,
            budget,
        });
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub n: usize,
    pub alpha: f64,
    pub algorithm: Algorithm,
    pub avg_iter: f64,
    pub avg_time_s: f64,
    pub avg_index_updates: f64,
    pub avg_residual: f64,
    pub avg_k: f64,
    pub fail_count: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum FailureReason {
    Generator(String),
    IterationCap,
    Solver(String),
}

impl FailureReason {
    pub fn code(&self) -> &'static str {
        match self {
            FailureReason::Generator(_) => "generator",
            FailureReason::IterationCap => "iteration_cap",
            FailureReason::Solver(_) => "solver",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialFailure {
    pub n: usize,
    pub trial: usize,
    pub seed: u64,
    pub alpha: f64,
    pub algorithm: Algorithm,
    pub reason: FailureReason,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<SummaryRow>,
    pub failures: Vec<TrialFailure>,
    /// `(n, trial, fingerprint)` of every generated instance.
    pub instances: Vec<(usize, usize, u64)>,
}

/// Everything an inspection callback learns about one solve.
pub struct TrialContext<'a> {
    pub n: usize,
    pub trial: usize,
    pub seed: u64,
    pub alpha: f64,
    pub algorithm: Algorithm,
    pub config: &'a SolverConfig,
    pub problem: &'a ProblemInstance,
}

#[derive(Clone, Debug)]
struct SolveStats {
    status: Status,
    failure: Option<String>,
    iterations: usize,
    seconds: f64,
    updates: usize,
    residual: f64,
    resolves: usize,
}

struct TrialResult {
    fingerprint: Option<u64>,
    generator_error: Option<String>,
    /// Indexed `[alpha][algorithm]`.
    stats: Vec<Vec<SolveStats>>,
}

pub fn run_bench(spec: &BenchSpec) -> Result<BenchReport> {
    run_bench_with(spec, |_, _| {})
}

/// Runs the sweep and hands every outcome to `inspect` before it is reduced.
pub fn run_bench_with<F>(spec: &BenchSpec, inspect: F) -> Result<BenchReport>
where
    F: Fn(&TrialContext<'_>, &SolveOutcome) + Sync,
{
    spec.validate()?;
    let mut dims = spec.dims.clone();
    dims.sort_unstable();
    dims.dedup();
    let mut alphas = spec.alphas.clone();
    alphas.sort_by(f64::total_cmp);
    alphas.dedup();
    let mut algorithms = spec.algorithms.clone();
    algorithms.sort();
    algorithms.dedup();

    let pool = if spec.jobs > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(spec.jobs)
                .build()
                .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?,
        )
    } else {
        None
    };

    let mut report = BenchReport {
        rows: Vec::new(),
        failures: Vec::new(),
        instances: Vec::new(),
    };
    for &n in &dims {
        let run_one = |t: usize| run_trial(spec, n, t, &alphas, &algorithms, &inspect);
        let results: Vec<TrialResult> = match &pool {
            Some(pool) => pool.install(|| (0..spec.trials).into_par_iter().map(run_one).collect()),
            None => (0..spec.trials).map(run_one).collect(),
        };
        for (t, r) in results.iter().enumerate() {
            if let Some(fp) = r.fingerprint {
                report.instances.push((n, t, fp));
            }
        }
        for (ai, &alpha) in alphas.iter().enumerate() {
            for (gi, &algorithm) in algorithms.iter().enumerate() {
                let row = reduce(n, alpha, algorithm, ai, gi, &results, spec.base_seed, &mut report.failures);
                report.rows.push(row);
            }
        }
    }
    Ok(report)
}

fn run_trial<F>(
    spec: &BenchSpec,
    n: usize,
    trial: usize,
    alphas: &[f64],
    algorithms: &[Algorithm],
    inspect: &F,
) -> TrialResult
where
    F: Fn(&TrialContext<'_>, &SolveOutcome) + Sync,
{
    let seed = spec.base_seed.wrapping_add(trial as u64);
    let gen = GeneratorSpec {
        kind: spec.kind,
        order: spec.order,
        dim: n,
        seed,
        eps: spec.eps,
    };
    let problem = match gen.generate() {
        Ok(p) => p,
        Err(e) => {
            return TrialResult {
                fingerprint: None,
                generator_error: Some(e.to_string()),
                stats: Vec::new(),
            }
        }
    };
    let stats = alphas
        .iter()
        .map(|&alpha| {
            let config = spec.solver_config(alpha);
            algorithms
                .iter()
                .map(|&algorithm| {
                    let start = Instant::now();
                    let outcome = solve(&problem, &config, algorithm);
                    let seconds = start.elapsed().as_secs_f64();
                    inspect(
                        &TrialContext {
                            n,
                            trial,
                            seed,
                            alpha,
                            algorithm,
                            config: &config,
                            problem: &problem,
                        },
                        &outcome,
                    );
                    SolveStats {
                        status: outcome.status,
                        failure: outcome.failure.as_ref().map(|e| e.to_string()),
                        iterations: outcome.iterations,
                        seconds,
                        updates: outcome.index_set_updates,
                        residual: outcome.final_residual,
                        resolves: outcome.total_epsilon_resolves,
                    }
                })
                .collect()
        })
        .collect();
    TrialResult {
        fingerprint: Some(problem.fingerprint()),
        generator_error: None,
        stats,
    }
}

#[allow(clippy::too_many_arguments)]
fn reduce(
    n: usize,
    alpha: f64,
    algorithm: Algorithm,
    ai: usize,
    gi: usize,
    results: &[TrialResult],
    base_seed: u64,
    failures: &mut Vec<TrialFailure>,
) -> SummaryRow {
    let mut count = 0usize;
    let (mut iter, mut time, mut updates, mut res, mut k) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let mut fail_count = 0;
    for (trial, r) in results.iter().enumerate() {
        let failure = |reason| TrialFailure {
            n,
            trial,
            seed: base_seed.wrapping_add(trial as u64),
            alpha,
            algorithm,
            reason,
        };
        if let Some(msg) = &r.generator_error {
            fail_count += 1;
            failures.push(failure(FailureReason::Generator(msg.clone())));
            continue;
        }
        let s = &r.stats[ai][gi];
        match s.status {
            Status::Converged => {
                count += 1;
                iter += s.iterations as f64;
                time += s.seconds;
                updates += s.updates as f64;
                res += s.residual;
                k += s.resolves as f64;
            }
            Status::IterationCap => {
                fail_count += 1;
                failures.push(failure(FailureReason::IterationCap));
            }
            Status::Error => {
                fail_count += 1;
                let msg = s.failure.clone().unwrap_or_default();
                failures.push(failure(FailureReason::Solver(msg)));
            }
        }
    }
    let mean = |total: f64| if count == 0 { f64::NAN } else { total / count as f64 };
    SummaryRow {
        n,
        alpha,
        algorithm,
        avg_iter: mean(iter),
        avg_time_s: mean(time),
        avg_index_updates: mean(updates),
        avg_residual: mean(res),
        avg_k: mean(k),
        fail_count,
    }
}

/// Formats `v` with six significant digits, switching to exponent form
/// outside `[1e-4, 1e6)`.
pub fn format_sig6(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let sci = format!("{v:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        return format!("{}e{exp}", trim_zeros(mantissa));
    }
    let decimals = (5 - exp).max(0) as usize;
    trim_zeros(&format!("{v:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// CSV text with [`CSV_HEADER`] and one line per row, ordered by
/// `(n, alpha, algorithm)`.
pub fn emit_csv(rows: &[SummaryRow]) -> String {
    let mut sorted: Vec<&SummaryRow> = rows.iter().collect();
    sorted.sort_by(|a, b| {
        a.n.cmp(&b.n)
            .then(a.alpha.total_cmp(&b.alpha))
            .then(a.algorithm.cmp(&b.algorithm))
    });
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in sorted {
        let fields = [
            r.n.to_string(),
            format_sig6(r.alpha),
            r.algorithm.to_string(),
            format_sig6(r.avg_iter),
            format_sig6(r.avg_time_s),
            format_sig6(r.avg_index_updates),
            format_sig6(r.avg_residual),
            format_sig6(r.avg_k),
            r.fail_count.to_string(),
        ];
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// Parses text written by [`emit_csv`].
pub fn parse_csv(text: &str) -> Result<Vec<SummaryRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == CSV_HEADER => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                msg: "missing CSV header".into(),
            })
        }
    }
    lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let err = |msg: String| Error::Parse { line: i + 1, msg };
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 9 {
                return Err(err(format!("expected 9 fields, found {}", f.len())));
            }
            let real = |s: &str| s.parse::<f64>().map_err(|_| err(format!("invalid number {s:?}")));
            let int = |s: &str| s.parse::<usize>().map_err(|_| err(format!("invalid integer {s:?}")));
            Ok(SummaryRow {
                n: int(f[0])?,
                alpha: real(f[1])?,
                algorithm: f[2].parse()?,
                avg_iter: real(f[3])?,
                avg_time_s: real(f[4])?,
                avg_index_updates: real(f[5])?,
                avg_residual: real(f[6])?,
                avg_k: real(f[7])?,
                fail_count: int(f[8])?,
            })
        })
        .collect()
}
