//! Sequential lower-dimensional methods for the tensor complementarity
//! problem
//!
//! ```text
//! x >= 0,   F(x) = A x^{m-1} - b >= 0,   x . F(x) = 0
//! ```
//!
//! with a strong M-tensor `A`, plus seeded problem generators, small-instance
//! oracles and a benchmark runner.
//!
//! ```
//! use mtcp_core::{ld_a_newton, GeneratorKind, GeneratorSpec, SolverConfig};
//!
//! let problem = GeneratorSpec::new(GeneratorKind::P1, 3, 10, 7).generate().unwrap();
//! let outcome = ld_a_newton(&problem, &SolverConfig::with_alpha(0.9));
//! assert!(outcome.converged());
//! assert!(outcome.final_residual <= 1e-8);
//! ```

pub mod bench;
pub mod error;
pub mod invariants;
pub mod io;
pub mod linalg;
pub mod oracle;
pub mod problems;
pub mod solver;
pub mod tensor;

pub use bench::{emit_csv, run_bench, BenchReport, BenchSpec, SummaryRow};
pub use error::{Error, Result};
pub use linalg::{solve_principal, DenseMatrix};
pub use problems::{GeneratorKind, GeneratorSpec, ProblemInstance};
pub use solver::{
    compute_r, initial_point, ld_a_newton, ld_leqa, residual, solve, verify_solution, Algorithm,
    InitStrategy, IterationRecord, SolveOutcome, SolverConfig, Status, TraceLevel,
};
pub use tensor::{elementwise_power, DenseTensor, IndexSet, MajorizationSplit, RealVector};
