//! Dense tensors, tensor-vector contraction and the majorization split.
//!
//! Entries are stored row-major with the last index varying fastest, so the
//! entry at the 0-based multi-index `(i_1, ..., i_m)` lives at offset
//! `sum_k i_k * n^(m-k)`. Documentation elsewhere uses 1-based indices when
//! describing the mathematics; every API in this crate takes 0-based ones.

use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// Real vector used for iterates, right-hand sides and residuals.
pub type RealVector = Vec<f64>;

/// An m-th order, n-dimensional real tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor {
    order: usize,
    dim: usize,
    entries: Vec<f64>,
}

/// Number of entries of an order-`order`, dimension-`dim` tensor, or `None`
/// on overflow.
pub fn entry_count(order: usize, dim: usize) -> Option<usize> {
    let order = u32::try_from(order).ok()?;
    dim.checked_pow(order)
}

impl DenseTensor {
    pub fn new(order: usize, dim: usize, entries: Vec<f64>) -> Result<Self> {
        if order < 2 {
            return Err(Error::InvalidArgument(format!(
                "tensor order must be at least 2, got {order}"
            )));
        }
        if dim < 1 {
            return Err(Error::InvalidArgument("tensor dimension must be at least 1".into()));
        }
        let expected = entry_count(order, dim)
            .ok_or_else(|| Error::InvalidArgument(format!("{dim}^{order} entries overflow")))?;
        if entries.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: entries.len(),
            });
        }
        if let Some(pos) = entries.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "tensor entry at offset {pos} is not finite"
            )));
        }
        Ok(Self {
            order,
            dim,
            entries,
        })
    }

    pub fn zeros(order: usize, dim: usize) -> Result<Self> {
        let len = entry_count(order, dim)
            .ok_or_else(|| Error::InvalidArgument(format!("{dim}^{order} entries overflow")))?;
        Self::new(order, dim, vec![0.0; len])
    }

    /// The identity tensor: ones on the diagonal `(i, i, ..., i)`.
    pub fn identity(order: usize, dim: usize) -> Result<Self> {
        let mut t = Self::zeros(order, dim)?;
        let stride = t.diagonal_stride();
        for i in 0..dim {
            t.entries[i * stride] = 1.0;
        }
        Ok(t)
    }

    /// Builds a tensor by evaluating `f` at every 0-based multi-index.
    pub fn from_fn(order: usize, dim: usize, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let len = entry_count(order, dim)
            .ok_or_else(|| Error::InvalidArgument(format!("{dim}^{order} entries overflow")))?;
        let mut entries = Vec::with_capacity(len);
        let mut index = vec![0usize; order];
        for _ in 0..len {
            entries.push(f(&index));
            advance(&mut index, dim);
        }
        Self::new(order, dim, entries)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut [f64] {
        &mut self.entries
    }

    pub fn into_entries(self) -> Vec<f64> {
        self.entries
    }

    pub fn offset(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.order);
        index.iter().fold(0, |acc, &i| acc * self.dim + i)
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.entries[self.offset(index)]
    }

    pub fn set(&mut self, index: &[usize], value: f64) {
        let off = self.offset(index);
        self.entries[off] = value;
    }

    /// Offset step between consecutive diagonal entries `(i,..,i)` and `(i+1,..,i+1)`.
    pub fn diagonal_stride(&self) -> usize {
        (0..self.order).fold(0, |acc, _| acc * self.dim + 1)
    }

    /// Returns `s * I - self`.
    pub fn shifted_negation(&self, shift: f64) -> Self {
        let mut out = self.clone();
        out.entries.iter_mut().for_each(|v| *v = -*v);
        let stride = out.diagonal_stride();
        for i in 0..out.dim {
            out.entries[i * stride] += shift;
        }
        out
    }

    /// `A x^{m-1}`: the vector with components
    /// `sum_{i2..im} a_{i i2 .. im} x_{i2} ... x_{im}`.
    pub fn contract_power(&self, x: &[f64]) -> Result<RealVector> {
        self.check_len(x)?;
        Ok(self.contract_power_unchecked(x))
    }

    pub(crate) fn contract_power_unchecked(&self, x: &[f64]) -> RealVector {
        let n = self.dim;
        // Contract the trailing mode repeatedly until one index remains.
        let mut current = contract_last_mode(&self.entries, x, n);
        for _ in 2..self.order {
            current = contract_last_mode(&current, x, n);
        }
        current
    }

    /// `A x^m = x . (A x^{m-1})`.
    pub fn full_form(&self, x: &[f64]) -> Result<f64> {
        let v = self.contract_power(x)?;
        Ok(dot(x, &v))
    }

    /// Majorization matrix `M(A)` with `M[i][j] = a_{i j .. j}`.
    pub fn majorization_matrix(&self) -> DenseMatrix {
        let n = self.dim;
        let tail_stride = self.diagonal_stride() - entry_count(self.order - 1, n).unwrap_or(0);
        let block = self.entries.len() / n;
        let mut m = DenseMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = self.entries[i * block + j * tail_stride];
            }
        }
        m
    }

    pub fn majorization_split(&self) -> MajorizationSplit<'_> {
        MajorizationSplit {
            matrix: self.majorization_matrix(),
            source: self,
        }
    }

    /// `M_c(A) x^{m-1}`, the contraction of every entry not of the form `(i, j, .., j)`.
    ///
    /// Constant tails are skipped during the sum instead of being subtracted
    /// afterwards.
    pub fn complement_apply(&self, x: &[f64]) -> Result<RealVector> {
        self.check_len(x)?;
        let n = self.dim;
        let tails = self.entries.len() / n;
        let tail_stride = self.diagonal_stride() - tails;
        let mut products = vec![1.0; tails];
        let mut index = vec![0usize; self.order - 1];
        for p in products.iter_mut() {
            *p = index.iter().map(|&k| x[k]).product();
            advance(&mut index, n);
        }
        let out = (0..n)
            .map(|i| {
                let row = &self.entries[i * tails..(i + 1) * tails];
                let mut acc = 0.0;
                let mut next_constant = 0;
                for (t, (a, p)) in row.iter().zip(&products).enumerate() {
                    if t == next_constant {
                        next_constant += tail_stride;
                        continue;
                    }
                    acc += a * p;
                }
                acc
            })
            .collect();
        Ok(out)
    }

    /// The principal subtensor on `set`, re-indexed in the order of `set`.
    pub fn principal_subtensor(&self, set: &IndexSet) -> Result<Self> {
        if set.is_empty() {
            return Err(Error::InvalidArgument("principal subtensor of an empty index set".into()));
        }
        if let Some(&last) = set.members().last() {
            if last >= self.dim {
                return Err(Error::InvalidArgument(format!(
                    "index {last} out of range for dimension {}",
                    self.dim
                )));
            }
        }
        let members = set.members();
        Self::from_fn(self.order, members.len(), |idx| {
            let off = idx.iter().fold(0, |acc, &k| acc * self.dim + members[k]);
            self.entries[off]
        })
    }

    fn check_len(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        Ok(())
    }
}

fn contract_last_mode(data: &[f64], x: &[f64], n: usize) -> Vec<f64> {
    data.chunks_exact(n).map(|fiber| dot(fiber, x)).collect()
}

/// Odometer increment of a multi-index with every digit in `0..dim`.
pub(crate) fn advance(index: &mut [usize], dim: usize) {
    for digit in index.iter_mut().rev() {
        *digit += 1;
        if *digit < dim {
            return;
        }
        *digit = 0;
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Componentwise power `x^[alpha]`.
///
/// Fractional exponents require every component to be nonnegative.
pub fn elementwise_power(x: &[f64], alpha: f64) -> Result<RealVector> {
    let integral = alpha.fract() == 0.0 && alpha.abs() <= i32::MAX as f64;
    x.iter()
        .enumerate()
        .map(|(index, &v)| {
            if integral {
                Ok(v.powi(alpha as i32))
            } else if v < 0.0 {
                Err(Error::Domain {
                    index,
                    value: v,
                    exponent: alpha,
                })
            } else {
                Ok(v.powf(alpha))
            }
        })
        .collect()
}

/// Majorization matrix of a tensor together with the tensor it came from.
///
/// The complement `A - M(A)` is never materialized; it is applied on demand.
#[derive(Clone, Debug)]
pub struct MajorizationSplit<'a> {
    pub matrix: DenseMatrix,
    pub source: &'a DenseTensor,
}

impl MajorizationSplit<'_> {
    pub fn complement_apply(&self, x: &[f64]) -> Result<RealVector> {
        self.source.complement_apply(x)
    }
}

/// Strictly increasing set of 0-based indices.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct IndexSet {
    members: Vec<usize>,
}

impl IndexSet {
    /// Sorts and deduplicates `members`; every member must be below `dim`.
    pub fn new(mut members: Vec<usize>, dim: usize) -> Result<Self> {
        members.sort_unstable();
        members.dedup();
        if let Some(&last) = members.last() {
            if last >= dim {
                return Err(Error::InvalidArgument(format!(
                    "index {last} out of range for dimension {dim}"
                )));
            }
        }
        Ok(Self { members })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn full(dim: usize) -> Self {
        Self {
            members: (0..dim).collect(),
        }
    }

    pub fn from_predicate(dim: usize, mut pred: impl FnMut(usize) -> bool) -> Self {
        Self {
            members: (0..dim).filter(|&i| pred(i)).collect(),
        }
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.members.binary_search(&i).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.members.iter().copied()
    }

    pub fn is_subset(&self, other: &IndexSet) -> bool {
        self.members.iter().all(|&i| other.contains(i))
    }

    pub fn union(&self, other: &IndexSet) -> IndexSet {
        let mut members: Vec<usize> = self.members.iter().chain(&other.members).copied().collect();
        members.sort_unstable();
        members.dedup();
        IndexSet { members }
    }

    /// The subvector `x_I`.
    pub fn gather(&self, x: &[f64]) -> Vec<f64> {
        self.members.iter().map(|&i| x[i]).collect()
    }

    /// Writes `values` into `x` at the members of the set.
    pub fn scatter(&self, values: &[f64], x: &mut [f64]) {
        for (&i, &v) in self.members.iter().zip(values) {
            x[i] = v;
        }
    }
}

impl fmt::Display for IndexSet {
    /// Prints the set with 1-based members, e.g. `{1,3}`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (k, i) in self.members.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}", i + 1)?;
        }
        f.write_str("}")
    }
}
