//! Independent ground-truth solvers for small instances.
//!
//! Both oracles enumerate candidate supports `I` by increasing cardinality and
//! then lexicographically, solve `F_I(x) = 0` with `x = 0` off `I`, and return
//! the first point that is feasible. Inner linear algebra goes through
//! `nalgebra` so the oracles share no solve path with [`crate::solver`].

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::problems::ProblemInstance;
use crate::solver::verify_solution;
use crate::tensor::{advance, IndexSet, RealVector};

/// Feasibility slack for both oracles.
pub const FEASIBILITY_TOL: f64 = 1e-10;
pub const MAX_LCP_DIM: usize = 12;
pub const MAX_TCP_DIM: usize = 4;
pub const MAX_TCP_ORDER: usize = 4;

const NEWTON_ITERS: usize = 200;
const NEWTON_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct OracleSolution {
    pub x: RealVector,
    pub active_set: IndexSet,
    pub certified: bool,
}

/// Subsets of `0..n` ordered by size, then lexicographically.
fn subsets(n: usize) -> impl Iterator<Item = Vec<usize>> {
    (0..=n).flat_map(move |k| Combinations::new(n, k))
}

struct Combinations {
    n: usize,
    current: Option<Vec<usize>>,
}

impl Combinations {
    fn new(n: usize, k: usize) -> Self {
        Self {
            n,
            current: (k <= n).then(|| (0..k).collect()),
        }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.clone()?;
        let k = out.len();
        let mut next = out.clone();
        let mut pos = k;
        loop {
            if pos == 0 {
                self.current = None;
                break;
            }
            pos -= 1;
            if next[pos] < self.n - k + pos {
                next[pos] += 1;
                for q in pos + 1..k {
                    next[q] = next[q - 1] + 1;
                }
                self.current = Some(next);
                break;
            }
        }
        Some(out)
    }
}

fn feasible(x: &[f64], f: &[f64], set: &IndexSet) -> bool {
    x.iter().all(|&v| v >= -FEASIBILITY_TOL)
        && (0..x.len()).all(|i| set.contains(i) || f[i] >= -FEASIBILITY_TOL)
}

/// Solves the linear complementarity problem `x >= 0, A x - b >= 0,
/// x . (A x - b) = 0` by enumerating all `2^n` supports.
pub fn lcp_enumerate(a: &DenseMatrix, b: &[f64]) -> Result<OracleSolution> {
    let n = a.dim();
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: b.len(),
        });
    }
    if n > MAX_LCP_DIM {
        return Err(Error::InvalidArgument(format!(
            "enumeration limited to n <= {MAX_LCP_DIM}, got {n}"
        )));
    }
    let full = DMatrix::from_row_slice(n, n, a.entries());
    for members in subsets(n) {
        let set = IndexSet::new(members, n)?;
        let mut x = vec![0.0; n];
        if !set.is_empty() {
            let sub = DMatrix::from_fn(set.len(), set.len(), |r, c| {
                full[(set.members()[r], set.members()[c])]
            });
            let rhs = DVector::from_vec(set.gather(b));
            let Some(sol) = sub.lu().solve(&rhs) else {
                continue;
            };
            set.scatter(sol.as_slice(), &mut x);
        }
        let f: Vec<f64> = a.mul_vec(&x).iter().zip(b).map(|(v, bi)| v - bi).collect();
        if feasible(&x, &f, &set) {
            return Ok(OracleSolution {
                x,
                active_set: set,
                certified: true,
            });
        }
    }
    Err(Error::Infeasible)
}

/// Brute-force solver for tiny TCPs (`n <= 4`, `m <= 4`).
///
/// On each support the lower-dimensional equation `A_I x_I^{m-1} = b_I` is
/// solved by damped Newton from the root-lifted `M(A)_I^{-1} b_I`.
pub fn tcp_brute_small(problem: &ProblemInstance) -> Result<OracleSolution> {
    let n = problem.dim();
    let m = problem.order();
    if n > MAX_TCP_DIM || m > MAX_TCP_ORDER {
        return Err(Error::InvalidArgument(format!(
            "brute force limited to n <= {MAX_TCP_DIM}, m <= {MAX_TCP_ORDER}"
        )));
    }
    let major = problem.tensor.majorization_matrix();
    let mut diverged = 0usize;
    for members in subsets(n) {
        let set = IndexSet::new(members, n)?;
        let mut x = vec![0.0; n];
        if !set.is_empty() {
            let Some(z) = newton_on_support(problem, &major, &set) else {
                diverged += 1;
                continue;
            };
            set.scatter(&z, &mut x);
        }
        let f = problem.eval_f(&x)?;
        if feasible(&x, &f, &set) {
            let certified = verify_solution(problem, &x, 1e-8);
            return Ok(OracleSolution {
                x,
                active_set: set,
                certified,
            });
        }
    }
    if diverged > 0 {
        Err(Error::OracleFailure(format!(
            "inner Newton failed on {diverged} supports and no feasible support remained"
        )))
    } else {
        Err(Error::Infeasible)
    }
}

fn newton_on_support(problem: &ProblemInstance, major: &DenseMatrix, set: &IndexSet) -> Option<Vec<f64>> {
    let m = problem.order();
    let sub = problem.tensor.principal_subtensor(set).ok()?;
    let k = set.len();
    let b = set.gather(&problem.rhs);
    let scale = 1.0 + b.iter().fold(0.0f64, |a, v| a.max(v.abs()));

    let mi = DMatrix::from_fn(k, k, |r, c| major[(set.members()[r], set.members()[c])]);
    let start = mi.lu().solve(&DVector::from_column_slice(&b))?;
    let root = 1.0 / (m - 1) as f64;
    let mut z: Vec<f64> = start.iter().map(|v| v.abs().powf(root).max(1e-3)).collect();

    let residual = |z: &[f64]| -> Vec<f64> {
        sub.contract_power(z)
            .expect("dimension matches")
            .iter()
            .zip(&b)
            .map(|(a, bi)| a - bi)
            .collect()
    };
    let norm = |v: &[f64]| v.iter().fold(0.0f64, |a, x| a.max(x.abs()));

    let mut g = residual(&z);
    for _ in 0..NEWTON_ITERS {
        if norm(&g) <= NEWTON_TOL * scale {
            return Some(z);
        }
        let jac = jacobian(sub.entries(), m, k, &z);
        let step = jac.lu().solve(&DVector::from_iterator(k, g.iter().map(|v| -v)))?;
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = z.iter().zip(step.iter()).map(|(a, d)| a + t * d).collect();
            let gt = residual(&trial);
            if norm(&gt) < norm(&g) || t < 1e-10 {
                z = trial;
                g = gt;
                break;
            }
            t *= 0.5;
        }
    }
    (norm(&g) <= NEWTON_TOL * scale).then_some(z)
}

/// Jacobian of `z -> T z^{m-1}` for a dense order-`m`, dimension-`k` tensor.
fn jacobian(entries: &[f64], m: usize, k: usize, z: &[f64]) -> DMatrix<f64> {
    let mut jac = DMatrix::zeros(k, k);
    let mut idx = vec![0usize; m];
    for &a in entries {
        if a != 0.0 {
            for p in 1..m {
                let partial: f64 = (1..m).filter(|&q| q != p).map(|q| z[idx[q]]).product();
                jac[(idx[0], idx[p])] += a * partial;
            }
        }
        advance(&mut idx, k);
    }
    jac
}
