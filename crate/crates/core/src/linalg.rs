//! Dense square matrices and the principal-submatrix solves used by every
//! subproblem.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::tensor::IndexSet;

/// Relative pivot threshold: a pivot below `PIVOT_TOL * ||A_I||_inf` is singular.
pub const PIVOT_TOL: f64 = 1e-14;

/// Square real matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(n: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: entries.len(),
            });
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("matrix entries must be finite".into()));
        }
        Ok(Self { n, entries })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: bad.len(),
            });
        }
        Self::new(n, rows.concat())
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            entries: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `A_I v` for a vector `v` indexed like `set`.
    pub fn principal_mul_vec(&self, set: &IndexSet, v: &[f64]) -> Vec<f64> {
        set.iter()
            .map(|i| {
                let row = self.row(i);
                set.iter().zip(v).map(|(j, x)| row[j] * x).sum()
            })
            .collect()
    }

    /// The principal submatrix `A_I`.
    pub fn principal(&self, set: &IndexSet) -> DenseMatrix {
        let k = set.len();
        let mut entries = Vec::with_capacity(k * k);
        for i in set.iter() {
            let row = self.row(i);
            entries.extend(set.iter().map(|j| row[j]));
        }
        DenseMatrix { n: k, entries }
    }

    /// Maximum absolute row sum.
    pub fn inf_norm(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// `true` iff every off-diagonal entry is nonpositive.
    pub fn is_z_matrix(&self) -> bool {
        (0..self.n).all(|i| {
            self.row(i)
                .iter()
                .enumerate()
                .all(|(j, &v)| i == j || v <= 0.0)
        })
    }

    /// Sufficient certificate for a nonsingular M-matrix: a Z-matrix with
    /// strictly positive row sums. A `false` answer is inconclusive.
    pub fn m_matrix_certificate(&self) -> bool {
        self.is_z_matrix() && (0..self.n).all(|i| self.row(i).iter().sum::<f64>() > 0.0)
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.entries[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.entries[i * self.n + j]
    }
}

pub fn z_matrix_check(a: &DenseMatrix) -> bool {
    a.is_z_matrix()
}

pub fn m_matrix_certificate(a: &DenseMatrix) -> bool {
    a.m_matrix_certificate()
}

/// LU factorization with partial (row) pivoting, `P A = L U`.
#[derive(Clone, Debug)]
pub struct LuFactor {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl LuFactor {
    pub fn factor(a: &DenseMatrix) -> Result<Self> {
        let n = a.n;
        let threshold = PIVOT_TOL * a.inf_norm();
        let mut lu = a.entries.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for col in 0..n {
            let (pivot_row, pivot_abs) = (col..n)
                .map(|r| (r, lu[r * n + col].abs()))
                .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            // NaN pivots fail this test as well.
            if pivot_abs.partial_cmp(&threshold) != Some(std::cmp::Ordering::Greater) {
                return Err(Error::SingularSystem { pivot: col });
            }
            if pivot_row != col {
                for j in 0..n {
                    lu.swap(col * n + j, pivot_row * n + j);
                }
                perm.swap(col, pivot_row);
            }
            let pivot = lu[col * n + col];
            for r in col + 1..n {
                let factor = lu[r * n + col] / pivot;
                lu[r * n + col] = factor;
                if factor != 0.0 {
                    for j in col + 1..n {
                        lu[r * n + j] -= factor * lu[col * n + j];
                    }
                }
            }
        }
        Ok(Self { n, lu, perm })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        if rhs.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: rhs.len(),
            });
        }
        let mut y: Vec<f64> = self.perm.iter().map(|&p| rhs[p]).collect();
        for i in 0..n {
            let s: f64 = (0..i).map(|j| self.lu[i * n + j] * y[j]).sum();
            y[i] -= s;
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| self.lu[i * n + j] * y[j]).sum();
            y[i] = (y[i] - s) / self.lu[i * n + i];
        }
        Ok(y)
    }
}

/// Solves `A_I y = rhs` on the principal submatrix selected by `set`.
pub fn solve_principal(a: &DenseMatrix, set: &IndexSet, rhs: &[f64]) -> Result<Vec<f64>> {
    if set.is_empty() {
        return Err(Error::InvalidArgument("empty index set".into()));
    }
    if rhs.len() != set.len() {
        return Err(Error::DimensionMismatch {
            expected: set.len(),
            found: rhs.len(),
        });
    }
    LuFactor::factor(&a.principal(set))?.solve(rhs)
}

/// Principal-submatrix solver that keeps the factorization of the last index
/// set it saw. One instance belongs to one solver run.
#[derive(Debug)]
pub struct PrincipalSolver<'a> {
    matrix: &'a DenseMatrix,
    cached: Option<(IndexSet, LuFactor)>,
    factorizations: usize,
}

impl<'a> PrincipalSolver<'a> {
    pub fn new(matrix: &'a DenseMatrix) -> Self {
        Self {
            matrix,
            cached: None,
            factorizations: 0,
        }
    }

    pub fn solve(&mut self, set: &IndexSet, rhs: &[f64]) -> Result<Vec<f64>> {
        if set.is_empty() {
            return Err(Error::InvalidArgument("empty index set".into()));
        }
        let hit = matches!(&self.cached, Some((cached, _)) if cached == set);
        if !hit {
            let lu = LuFactor::factor(&self.matrix.principal(set))?;
            self.factorizations += 1;
            self.cached = Some((set.clone(), lu));
        }
        let (_, lu) = self.cached.as_ref().expect("factorization cached above");
        lu.solve(rhs)
    }

    /// Number of factorizations computed so far.
    pub fn factorizations(&self) -> usize {
        self.factorizations
    }
}
