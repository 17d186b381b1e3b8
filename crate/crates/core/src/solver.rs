//! Sequential lower-dimensional solvers for the M-tensor complementarity
//! problem.
//!
//! Both methods keep an index set `I_k` of components where `F` is negative
//! and, at each iteration, solve a linear system on the principal majorization
//! submatrix `A_{I_k}` in the variable `y = x_{I_k}^[m-1]`:
//!
//! * [`ld_leqa`]: `A_I y = A_I x_I^[m-1] - alpha F_I(x)`.
//! * [`ld_a_newton`]: `A_I y = A_I x_I^[m-1] - (alpha F_I(x) + eps_I)`, where
//!   the correction `eps_I` moves the step toward a Newton step while staying
//!   inside `[(1-alpha) F_I, -alpha F_I]`.
//!
//! Starting below a solution, the iterates increase monotonically and the
//! index sets only grow.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::PrincipalSolver;
use crate::problems::ProblemInstance;
use crate::tensor::{IndexSet, RealVector};

/// Relative tolerance under which a negative `y` component is roundoff.
pub const NEGATIVE_POWER_TOL: f64 = 1e-10;
/// Absolute tolerance for a negative component of the initial linear solve.
pub const INIT_NEGATIVE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    LdLeqa,
    LdANewton,
}

impl Algorithm {
    pub const ALL: [Algorithm; 2] = [Algorithm::LdLeqa, Algorithm::LdANewton];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::LdLeqa => "ldleqa",
            Algorithm::LdANewton => "ldanewton",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "ldleqa" => Ok(Algorithm::LdLeqa),
            "ldanewton" => Ok(Algorithm::LdANewton),
            _ => Err(Error::InvalidArgument(format!("unknown algorithm {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitStrategy {
    /// `x0 = 0`, `I_0 = {i | b_i > 0}`.
    Zero,
    /// `x0` solves `A_{I0} x_{I0}^[m-1] = b_{I0}` with zeros elsewhere.
    LowerDimEquation,
}

impl FromStr for InitStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(InitStrategy::Zero),
            "equation" | "lower-dim-equation" | "lower_dim_equation" => {
                Ok(InitStrategy::LowerDimEquation)
            }
            _ => Err(Error::InvalidArgument(format!("unknown initial point strategy {s:?}"))),
        }
    }
}

/// How much of each iteration the trace keeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum TraceLevel {
    /// Index sets, residuals and resolve counts.
    #[default]
    Summary,
    /// Additionally every iterate, `F` value and the eps clamp bounds.
    Full,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub alpha: f64,
    pub eta: f64,
    pub max_iter: usize,
    pub init: InitStrategy,
    pub rho_fallback: f64,
    /// Number of `eps = 0` re-solves before a candidate is accepted anyway.
    pub epsilon_resolve_cap: usize,
    /// Restrict `alpha` to the open interval (0, 1).
    pub strict_theory: bool,
    pub trace: TraceLevel,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            eta: 1e-8,
            max_iter: 1000,
            init: InitStrategy::Zero,
            rho_fallback: 0.5,
            epsilon_resolve_cap: 1,
            strict_theory: false,
            trace: TraceLevel::Summary,
        }
    }
}

impl SolverConfig {
    pub fn with_alpha(alpha: f64) -> Self {
        Self {
            alpha,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let alpha_ok = if self.strict_theory {
            self.alpha > 0.0 && self.alpha < 1.0
        } else {
            self.alpha > 0.0 && self.alpha <= 1.0
        };
        if !alpha_ok {
            return Err(Error::InvalidArgument(format!("alpha {} out of range", self.alpha)));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidArgument(format!("eta must be positive, got {}", self.eta)));
        }
        if self.max_iter < 1 {
            return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
        }
        if !(self.rho_fallback > 0.0 && self.rho_fallback < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "rho_fallback must lie in (0,1), got {}",
                self.rho_fallback
            )));
        }
        if self.epsilon_resolve_cap < 1 {
            return Err(Error::InvalidArgument("epsilon_resolve_cap must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Converged,
    IterationCap,
    Error,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Converged => "converged",
            Status::IterationCap => "iteration_cap",
            Status::Error => "error",
        })
    }
}

/// The eps correction used at one iteration of [`ld_a_newton`] together with
/// the bounds it was clamped to.
#[derive(Clone, Debug, PartialEq)]
pub struct EpsilonClamp {
    pub lower: Vec<f64>,
    pub value: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    pub index_set: IndexSet,
    /// `||min(F(x_k), x_k)||_2`.
    pub residual: f64,
    /// `eps = 0` re-solves needed before the step was accepted.
    pub epsilon_resolves: usize,
    /// Present with [`TraceLevel::Full`].
    pub iterate: Option<RealVector>,
    pub f_value: Option<RealVector>,
    pub epsilon: Option<EpsilonClamp>,
}

#[derive(Debug)]
pub struct SolveOutcome {
    pub x: RealVector,
    pub status: Status,
    pub failure: Option<Error>,
    pub iterations: usize,
    pub final_residual: f64,
    pub trace: Vec<IterationRecord>,
    /// Iterations `k` with `I_{k+1} != I_k`.
    pub index_set_updates: usize,
    /// Total `eps = 0` re-solves over the run (the K statistic).
    pub total_epsilon_resolves: usize,
    /// The equation initial point failed and the zero point was used instead.
    pub init_fallback: bool,
}

impl SolveOutcome {
    pub fn converged(&self) -> bool {
        self.status == Status::Converged
    }

    /// One-line `key=value` summary of the run.
    pub fn record(&self, seconds: f64) -> String {
        format!(
            "status={} iterations={} residual={:e} index_updates={} K={} time_s={seconds:.6}",
            self.status, self.iterations, self.final_residual, self.index_set_updates, self.total_epsilon_resolves
        )
    }

    /// CSV dump with one line per traced iteration.
    pub fn trace_dump(&self) -> String {
        let mut out = String::from("k,index_set_size,residual,epsilon_resolves\n");
        for r in &self.trace {
            out.push_str(&format!("{},{},{:e},{}\n", r.k, r.index_set.len(), r.residual, r.epsilon_resolves));
        }
        out
    }
}

/// `||min(F, x)||_2`.
pub fn residual(f_value: &[f64], x: &[f64]) -> Result<f64> {
    if f_value.len() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: f_value.len(),
        });
    }
    Ok(residual_unchecked(f_value, x))
}

fn residual_unchecked(f_value: &[f64], x: &[f64]) -> f64 {
    f_value
        .iter()
        .zip(x)
        .map(|(f, v)| f.min(*v).powi(2))
        .sum::<f64>()
        .sqrt()
}

#[derive(Clone, Debug, PartialEq)]
pub struct InitialPoint {
    pub x: RealVector,
    pub index_set: IndexSet,
    /// The equation strategy produced an invalid point; zero was used.
    pub fell_back: bool,
}

/// Starting point and index set.
///
/// An empty index set means zero already solves the problem (`b <= 0`).
pub fn initial_point(problem: &ProblemInstance, cfg: &SolverConfig) -> Result<InitialPoint> {
    let n = problem.dim();
    let positive = IndexSet::from_predicate(n, |i| problem.rhs[i] > 0.0);
    let zero = InitialPoint {
        x: vec![0.0; n],
        index_set: positive.clone(),
        fell_back: false,
    };
    if positive.is_empty() || cfg.init == InitStrategy::Zero {
        return Ok(zero);
    }

    let root = 1.0 / (problem.order() - 1) as f64;
    let matrix = problem.tensor.majorization_matrix();
    let y = match crate::linalg::solve_principal(&matrix, &positive, &positive.gather(&problem.rhs)) {
        Ok(y) => y,
        Err(Error::SingularSystem { .. }) => {
            return Ok(InitialPoint {
                fell_back: true,
                ..zero
            })
        }
        Err(e) => return Err(e),
    };
    if y.iter().any(|&v| v < -INIT_NEGATIVE_TOL) {
        return Ok(InitialPoint {
            fell_back: true,
            ..zero
        });
    }
    let mut x = vec![0.0; n];
    let lifted: Vec<f64> = y.iter().map(|&v| root_power(v.max(0.0), root)).collect();
    positive.scatter(&lifted, &mut x);

    let f = problem.eval_f(&x)?;
    let mut index_set = IndexSet::from_predicate(n, |i| f[i] < 0.0);
    if index_set.is_empty() {
        x.iter_mut().for_each(|v| *v *= cfg.rho_fallback);
        let f = problem.eval_f(&x)?;
        index_set = IndexSet::from_predicate(n, |i| f[i] < 0.0);
    }
    Ok(InitialPoint {
        x,
        index_set,
        fell_back: false,
    })
}

/// `r_I(x) = (F_I(x) + b_I) / (m-1) - A_I x_I^[m-1]`.
pub fn compute_r(problem: &ProblemInstance, set: &IndexSet, x: &[f64]) -> Result<RealVector> {
    if set.is_empty() {
        return Err(Error::InvalidArgument("r is undefined on an empty index set".into()));
    }
    let f = problem.eval_f(x)?;
    let matrix = problem.tensor.majorization_matrix();
    Ok(r_from_parts(problem, &matrix, set, x, &f))
}

fn r_from_parts(
    problem: &ProblemInstance,
    matrix: &crate::linalg::DenseMatrix,
    set: &IndexSet,
    x: &[f64],
    f: &[f64],
) -> RealVector {
    let m = problem.order();
    let scale = 1.0 / (m - 1) as f64;
    let powered: Vec<f64> = set.iter().map(|i| x[i].powi(m as i32 - 1)).collect();
    let major = matrix.principal_mul_vec(set, &powered);
    set.iter()
        .zip(major)
        .map(|(i, a)| scale * (f[i] + problem.rhs[i]) - a)
        .collect()
}

/// `true` iff `x >= -tol`, `F(x) >= -tol` and `|x . F(x)| <= tol (1 + ||x|| ||F(x)||)`.
pub fn verify_solution(problem: &ProblemInstance, x: &[f64], tol: f64) -> bool {
    let Ok(f) = problem.eval_f(x) else {
        return false;
    };
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let gap: f64 = x.iter().zip(&f).map(|(a, b)| a * b).sum();
    x.iter().all(|&v| v >= -tol)
        && f.iter().all(|&v| v >= -tol)
        && gap.abs() <= tol * (1.0 + norm(x) * norm(&f))
}

fn root_power(v: f64, root: f64) -> f64 {
    if root == 1.0 {
        v
    } else if root == 0.5 {
        v.sqrt()
    } else {
        v.powf(root)
    }
}

/// Sequential lower-dimensional linear-equation method.
pub fn ld_leqa(problem: &ProblemInstance, cfg: &SolverConfig) -> SolveOutcome {
    solve(problem, cfg, Algorithm::LdLeqa)
}

/// Sequential lower-dimensional approximate Newton method.
pub fn ld_a_newton(problem: &ProblemInstance, cfg: &SolverConfig) -> SolveOutcome {
    solve(problem, cfg, Algorithm::LdANewton)
}

pub fn solve(problem: &ProblemInstance, cfg: &SolverConfig, algorithm: Algorithm) -> SolveOutcome {
    Run::new(problem, cfg, algorithm).execute()
}

struct Run<'a> {
    problem: &'a ProblemInstance,
    cfg: &'a SolverConfig,
    algorithm: Algorithm,
    trace: Vec<IterationRecord>,
    index_set_updates: usize,
    total_resolves: usize,
    init_fallback: bool,
}

struct Step {
    x: RealVector,
    f: RealVector,
    resolves: usize,
}

impl<'a> Run<'a> {
    fn new(problem: &'a ProblemInstance, cfg: &'a SolverConfig, algorithm: Algorithm) -> Self {
        Self {
            problem,
            cfg,
            algorithm,
            trace: Vec::new(),
            index_set_updates: 0,
            total_resolves: 0,
            init_fallback: false,
        }
    }

    fn finish(self, x: RealVector, status: Status, failure: Option<Error>, iterations: usize, residual: f64) -> SolveOutcome {
        SolveOutcome {
            x,
            status,
            failure,
            iterations,
            final_residual: residual,
            trace: self.trace,
            index_set_updates: self.index_set_updates,
            total_epsilon_resolves: self.total_resolves,
            init_fallback: self.init_fallback,
        }
    }

    fn fail(self, x: RealVector, err: Error, iterations: usize) -> SolveOutcome {
        let residual = self
            .problem
            .eval_f(&x)
            .map(|f| residual_unchecked(&f, &x))
            .unwrap_or(f64::NAN);
        self.finish(x, Status::Error, Some(err), iterations, residual)
    }

    fn execute(mut self) -> SolveOutcome {
        let n = self.problem.dim();
        if let Err(e) = self.cfg.validate() {
            return self.fail(vec![0.0; n], e, 0);
        }
        let init = match initial_point(self.problem, self.cfg) {
            Ok(p) => p,
            Err(e) => return self.fail(vec![0.0; n], e, 0),
        };
        self.init_fallback = init.fell_back;

        let matrix = self.problem.tensor.majorization_matrix();
        let mut lu = PrincipalSolver::new(&matrix);
        let full = self.cfg.trace == TraceLevel::Full;

        let mut x = init.x;
        let mut f = match self.problem.eval_f(&x) {
            Ok(f) => f,
            Err(e) => return self.fail(x, e, 0),
        };
        let mut set = init.index_set;
        let mut previous: Option<(RealVector, RealVector)> = None;

        for k in 0.. {
            if k > 0 {
                // Indices stay in the set once admitted.
                let grown = set.union(&IndexSet::from_predicate(n, |i| f[i] < 0.0));
                if grown != set {
                    self.index_set_updates += 1;
                    set = grown;
                }
            }
            let res = residual_unchecked(&f, &x);
            let epsilon = match (&previous, self.algorithm) {
                (Some((px, pf)), Algorithm::LdANewton) if !set.is_empty() => {
                    Some(self.epsilon_clamp(&matrix, &set, &x, &f, px, pf))
                }
                _ => None,
            };
            self.trace.push(IterationRecord {
                k,
                index_set: set.clone(),
                residual: res,
                epsilon_resolves: 0,
                iterate: full.then(|| x.clone()),
                f_value: full.then(|| f.clone()),
                epsilon: if full { epsilon.clone() } else { None },
            });

            if res <= self.cfg.eta {
                return self.finish(x, Status::Converged, None, k, res);
            }
            if k == self.cfg.max_iter {
                return self.finish(x, Status::IterationCap, None, k, res);
            }
            if set.is_empty() {
                return self.fail(x, Error::EmptyIndexSet, k);
            }

            let eps = epsilon.map(|c| c.value);
            match self.step(&mut lu, &matrix, &set, &x, &f, eps) {
                Ok(step) => {
                    self.total_resolves += step.resolves;
                    if let Some(rec) = self.trace.last_mut() {
                        rec.epsilon_resolves = step.resolves;
                    }
                    let old = (std::mem::replace(&mut x, step.x), std::mem::replace(&mut f, step.f));
                    previous = Some(old);
                }
                Err(e) => return self.fail(x, e, k),
            }
        }
        unreachable!("the iteration loop only exits by returning")
    }

    /// eps = max(min(eps+, r(x_k) - r(x_{k-1})), eps-) on the current set.
    fn epsilon_clamp(
        &self,
        matrix: &crate::linalg::DenseMatrix,
        set: &IndexSet,
        x: &[f64],
        f: &[f64],
        prev_x: &[f64],
        prev_f: &[f64],
    ) -> EpsilonClamp {
        let alpha = self.cfg.alpha;
        let r_now = r_from_parts(self.problem, matrix, set, x, f);
        let r_prev = r_from_parts(self.problem, matrix, set, prev_x, prev_f);
        let mut clamp = EpsilonClamp {
            lower: Vec::with_capacity(set.len()),
            value: Vec::with_capacity(set.len()),
            upper: Vec::with_capacity(set.len()),
        };
        for ((i, now), prev) in set.iter().zip(r_now).zip(r_prev) {
            let upper = -alpha * f[i];
            let lower = (1.0 - alpha) * f[i];
            clamp.value.push(upper.min(now - prev).max(lower));
            clamp.lower.push(lower);
            clamp.upper.push(upper);
        }
        clamp
    }

    fn step(
        &self,
        lu: &mut PrincipalSolver<'_>,
        matrix: &crate::linalg::DenseMatrix,
        set: &IndexSet,
        x: &[f64],
        f: &[f64],
        mut eps: Option<Vec<f64>>,
    ) -> Result<Step> {
        let m = self.problem.order();
        let powered: Vec<f64> = set.iter().map(|i| x[i].powi(m as i32 - 1)).collect();
        let base = matrix.principal_mul_vec(set, &powered);
        let mut resolves = 0;
        loop {
            let rhs: Vec<f64> = set
                .iter()
                .zip(&base)
                .enumerate()
                .map(|(k, (i, a))| {
                    let correction = eps.as_ref().map_or(0.0, |e| e[k]);
                    a - (self.cfg.alpha * f[i] + correction)
                })
                .collect();
            let y = lu.solve(set, &rhs)?;
            let mut candidate = x.to_vec();
            set.scatter(&lift(&y, m)?, &mut candidate);
            let fc = self.problem.eval_f(&candidate)?;

            let accept = self.algorithm == Algorithm::LdLeqa
                || set.iter().all(|i| fc[i] < 0.0)
                || resolves >= self.cfg.epsilon_resolve_cap;
            if accept {
                return Ok(Step {
                    x: candidate,
                    f: fc,
                    resolves,
                });
            }
            eps = None;
            resolves += 1;
        }
    }
}

/// `y^[1/(m-1)]` with roundoff-sized negative components clamped to zero.
fn lift(y: &[f64], m: usize) -> Result<Vec<f64>> {
    let ymax = y.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let tol = NEGATIVE_POWER_TOL * (1.0 + ymax);
    let root = 1.0 / (m - 1) as f64;
    y.iter()
        .enumerate()
        .map(|(index, &v)| {
            if v >= 0.0 {
                Ok(root_power(v, root))
            } else if v >= -tol {
                Ok(0.0)
            } else {
                Err(Error::NegativePower { index, value: v })
            }
        })
        .collect()
}
