//! Trace checks for the monotonicity properties both methods guarantee.
//!
//! Every check needs a trace recorded with [`crate::TraceLevel::Full`].

use crate::problems::ProblemInstance;
use crate::solver::{verify_solution, Algorithm, SolveOutcome};

pub const MONOTONE_SLACK: f64 = 1e-12;
pub const OFF_SET_SLACK: f64 = 1e-10;
pub const EPSILON_SLACK: f64 = 1e-14;
pub const CERTIFICATE_TOL: f64 = 1e-6;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct InvariantReport {
    /// `x_{k+1} >= x_k - 1e-12` failures.
    pub monotone: usize,
    /// `I_k` not contained in `I_{k+1}`.
    pub nested_sets: usize,
    /// `F_i(x_{k+1}) > F_i(x_k) + 1e-10` for some `i` outside `I_k` (LD-LEQA only).
    pub off_set_increase: usize,
    /// eps outside `[eps-, eps+]` (LD-A-Newton only).
    pub epsilon_order: usize,
    /// More than `n` index-set updates.
    pub freeze: usize,
    /// Converged but `verify_solution(.., 1e-6)` fails.
    pub certificate: usize,
    /// Components of `I_k` with `F_i(x_{k+1}) >= 0`. Not a violation: these
    /// would leave the set under a literal `{i | F_i < 0}` update and are kept.
    pub retained_nonnegative: usize,
    pub first: Option<String>,
}

impl InvariantReport {
    pub fn violations(&self) -> usize {
        self.monotone + self.nested_sets + self.off_set_increase + self.epsilon_order + self.freeze + self.certificate
    }

    pub fn merge(&mut self, other: InvariantReport) {
        self.monotone += other.monotone;
        self.nested_sets += other.nested_sets;
        self.off_set_increase += other.off_set_increase;
        self.epsilon_order += other.epsilon_order;
        self.freeze += other.freeze;
        self.certificate += other.certificate;
        self.retained_nonnegative += other.retained_nonnegative;
        if self.first.is_none() {
            self.first = other.first;
        }
    }

    fn note(&mut self, msg: impl FnOnce() -> String) {
        if self.first.is_none() {
            self.first = Some(msg());
        }
    }
}

pub fn check_outcome(problem: &ProblemInstance, algorithm: Algorithm, outcome: &SolveOutcome) -> InvariantReport {
    let mut report = InvariantReport::default();
    let n = problem.dim();

    if outcome.converged() && !verify_solution(problem, &outcome.x, CERTIFICATE_TOL) {
        report.certificate += 1;
        report.note(|| "converged point fails verify_solution".into());
    }
    if outcome.index_set_updates > n {
        report.freeze += 1;
        report.note(|| format!("{} index-set updates for n = {n}", outcome.index_set_updates));
    }

    for pair in outcome.trace.windows(2) {
        let (cur, next) = (&pair[0], &pair[1]);
        let k = cur.k;
        if !cur.index_set.is_subset(&next.index_set) {
            report.nested_sets += 1;
            report.note(|| format!("k={k}: {} not contained in {}", cur.index_set, next.index_set));
        }
        let (Some(x0), Some(x1), Some(f0), Some(f1)) = (&cur.iterate, &next.iterate, &cur.f_value, &next.f_value) else {
            continue;
        };
        for i in 0..n {
            if x1[i] < x0[i] - MONOTONE_SLACK {
                report.monotone += 1;
                report.note(|| format!("k={k}: x[{i}] decreased from {} to {}", x0[i], x1[i]));
            }
            if cur.index_set.contains(i) {
                if f1[i] >= 0.0 {
                    report.retained_nonnegative += 1;
                }
            } else if algorithm == Algorithm::LdLeqa && f1[i] > f0[i] + OFF_SET_SLACK {
                report.off_set_increase += 1;
                report.note(|| format!("k={k}: F[{i}] rose from {} to {}", f0[i], f1[i]));
            }
        }
    }

    if algorithm == Algorithm::LdANewton {
        for rec in &outcome.trace {
            let Some(eps) = &rec.epsilon else { continue };
            for (j, ((lo, v), hi)) in eps.lower.iter().zip(&eps.value).zip(&eps.upper).enumerate() {
                if *v < lo - EPSILON_SLACK || *v > hi + EPSILON_SLACK {
                    report.epsilon_order += 1;
                    report.note(|| format!("k={}: eps[{j}] = {v:e} outside [{lo:e}, {hi:e}]", rec.k));
                }
            }
        }
    }
    report
}

/// `true` when the trace carries what [`check_outcome`] needs.
pub fn has_full_trace(outcome: &SolveOutcome) -> bool {
    outcome.trace.iter().all(|r| r.iterate.is_some() && r.f_value.is_some())
}

