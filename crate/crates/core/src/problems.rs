//! Problem instances and the three seeded M-tensor generators.
//!
//! Every generator builds `A = s I - B` with a nonnegative `B` and a
//! right-hand side `b = A x~^{m-1}` for a witness `x~` drawn uniformly from
//! `(0, 1)`, so `x~` is a known interior solution.
//!
//! Randomness comes from ChaCha8 seeded with [`rand::SeedableRng::seed_from_u64`].
//! The tensor `B` is drawn from stream 0 and the witness from stream 1, each
//! consumed in canonical entry order. A draw of exactly `0.0` is discarded.

use std::collections::hash_map::DefaultHasher;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::{advance, entry_count, DenseTensor, RealVector};

/// ChaCha stream used for the random tensor entries.
pub const TENSOR_STREAM: u64 = 0;
/// ChaCha stream used for the witness vector.
pub const WITNESS_STREAM: u64 = 1;

/// Default `eps` in `s = (1 + eps) * max_i (B e^{m-1})_i`.
pub const DEFAULT_SHIFT_EPS: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProblemMeta {
    pub generator: String,
    pub seed: Option<u64>,
}

/// A tensor complementarity problem: find `x >= 0` with
/// `F(x) = A x^{m-1} - b >= 0` and `x . F(x) = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemInstance {
    pub tensor: DenseTensor,
    pub rhs: RealVector,
    /// Known solution used to build `rhs`, when there is one.
    pub witness: Option<RealVector>,
    pub meta: ProblemMeta,
}

impl ProblemInstance {
    pub fn new(tensor: DenseTensor, rhs: RealVector) -> Result<Self> {
        if rhs.len() != tensor.dim() {
            return Err(Error::DimensionMismatch {
                expected: tensor.dim(),
                found: rhs.len(),
            });
        }
        if rhs.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("right-hand side must be finite".into()));
        }
        Ok(Self {
            tensor,
            rhs,
            witness: None,
            meta: ProblemMeta {
                generator: "custom".into(),
                seed: None,
            },
        })
    }

    pub fn order(&self) -> usize {
        self.tensor.order()
    }

    pub fn dim(&self) -> usize {
        self.tensor.dim()
    }

    /// `F(x) = A x^{m-1} - b`.
    pub fn eval_f(&self, x: &[f64]) -> Result<RealVector> {
        let mut v = self.tensor.contract_power(x)?;
        v.iter_mut().zip(&self.rhs).for_each(|(f, b)| *f -= b);
        Ok(v)
    }

    /// Hash of the tensor and right-hand side bits; equal instances hash equal.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.tensor.order().hash(&mut h);
        self.tensor.dim().hash(&mut h);
        for v in self.tensor.entries().iter().chain(&self.rhs) {
            v.to_bits().hash(&mut h);
        }
        h.finish()
    }
}

pub fn eval_f(problem: &ProblemInstance, x: &[f64]) -> Result<RealVector> {
    problem.eval_f(x)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GeneratorKind {
    /// `B` with i.i.d. uniform(0,1) entries.
    P1,
    /// Symmetric `B` with entries in (0,1).
    P2,
    /// Deterministic `b_{i1..im} = |sin(i1 + .. + im)|`, `s = n^{m-1}`.
    P3,
}

impl fmt::Display for GeneratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GeneratorKind::P1 => "P1",
            GeneratorKind::P2 => "P2",
            GeneratorKind::P3 => "P3",
        })
    }
}

impl FromStr for GeneratorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "P1" | "p1" | "1" => Ok(GeneratorKind::P1),
            "P2" | "p2" | "2" => Ok(GeneratorKind::P2),
            "P3" | "p3" | "3" => Ok(GeneratorKind::P3),
            other => Err(Error::InvalidArgument(format!("unknown generator {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    pub order: usize,
    pub dim: usize,
    pub seed: u64,
    pub eps: f64,
}

impl GeneratorSpec {
    pub fn new(kind: GeneratorKind, order: usize, dim: usize, seed: u64) -> Self {
        Self {
            kind,
            order,
            dim,
            seed,
            eps: DEFAULT_SHIFT_EPS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.order < 2 {
            return Err(Error::InvalidArgument(format!("order must be >= 2, got {}", self.order)));
        }
        if self.dim < 1 {
            return Err(Error::InvalidArgument("dimension must be >= 1".into()));
        }
        if self.kind != GeneratorKind::P3 && !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::InvalidArgument(format!("eps must be positive, got {}", self.eps)));
        }
        if entry_count(self.order, self.dim).is_none() {
            return Err(Error::InvalidArgument("tensor size overflows".into()));
        }
        Ok(())
    }

    pub fn generate(&self) -> Result<ProblemInstance> {
        match self.kind {
            GeneratorKind::P1 => gen_problem1(self),
            GeneratorKind::P2 => gen_problem2(self),
            GeneratorKind::P3 => gen_problem3(self),
        }
    }
}

fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform draw from the open interval (0, 1).
fn open_unit(rng: &mut impl Rng) -> f64 {
    loop {
        let v: f64 = rng.gen();
        if v > 0.0 {
            return v;
        }
    }
}

fn uniform_tensor(order: usize, dim: usize, seed: u64) -> Result<DenseTensor> {
    let len = entry_count(order, dim).ok_or_else(|| Error::InvalidArgument("tensor size overflows".into()))?;
    let mut rng = stream(seed, TENSOR_STREAM);
    let entries = (0..len).map(|_| open_unit(&mut rng)).collect();
    DenseTensor::new(order, dim, entries)
}

/// `s I - B` with `s = (1 + eps) max_i (B e^{m-1})_i`.
fn shift_by_row_sums(b: &DenseTensor, eps: f64) -> DenseTensor {
    let max_row = b
        .entries()
        .chunks_exact(b.entries().len() / b.dim())
        .map(|row| row.iter().sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max);
    b.shifted_negation((1.0 + eps) * max_row)
}

fn finish(spec: &GeneratorSpec, tensor: DenseTensor) -> Result<ProblemInstance> {
    let (rhs, witness) = gen_rhs(&tensor, spec.seed)?;
    let problem = ProblemInstance {
        tensor,
        rhs,
        witness: Some(witness),
        meta: ProblemMeta {
            generator: spec.kind.to_string(),
            seed: Some(spec.seed),
        },
    };
    debug_assert!(strong_m_certificate(&problem.tensor));
    Ok(problem)
}

pub fn gen_problem1(spec: &GeneratorSpec) -> Result<ProblemInstance> {
    expect_kind(spec, GeneratorKind::P1)?;
    spec.validate()?;
    let b = uniform_tensor(spec.order, spec.dim, spec.seed)?;
    finish(spec, shift_by_row_sums(&b, spec.eps))
}

pub fn gen_problem2(spec: &GeneratorSpec) -> Result<ProblemInstance> {
    expect_kind(spec, GeneratorKind::P2)?;
    spec.validate()?;
    let mut b = uniform_tensor(spec.order, spec.dim, spec.seed)?;
    symmetrize(&mut b);
    finish(spec, shift_by_row_sums(&b, spec.eps))
}

pub fn gen_problem3(spec: &GeneratorSpec) -> Result<ProblemInstance> {
    expect_kind(spec, GeneratorKind::P3)?;
    spec.validate()?;
    let b = DenseTensor::from_fn(spec.order, spec.dim, |idx| {
        // 1-based indices inside the sine.
        let sum: usize = idx.iter().map(|i| i + 1).sum();
        (sum as f64).sin().abs()
    })?;
    let s = (spec.dim as f64).powi(spec.order as i32 - 1);
    finish(spec, b.shifted_negation(s))
}

fn expect_kind(spec: &GeneratorSpec, kind: GeneratorKind) -> Result<()> {
    if spec.kind != kind {
        return Err(Error::InvalidArgument(format!(
            "generator {kind} called with a {} spec",
            spec.kind
        )));
    }
    Ok(())
}

/// Replaces each entry by the mean over all permutations of its multi-index.
pub fn symmetrize(t: &mut DenseTensor) {
    let order = t.order();
    let dim = t.dim();
    let perms = permutations(order);
    let mut index = vec![0usize; order];
    let mut permuted = vec![0usize; order];
    let mut offsets = Vec::with_capacity(perms.len());
    for _ in 0..t.entries().len() {
        if index.windows(2).all(|w| w[0] <= w[1]) {
            offsets.clear();
            for p in &perms {
                for (slot, &src) in permuted.iter_mut().zip(p) {
                    *slot = index[src];
                }
                offsets.push(t.offset(&permuted));
            }
            // Each distinct permutation appears equally often among all m!.
            let mean = offsets.iter().map(|&o| t.entries()[o]).sum::<f64>() / offsets.len() as f64;
            for &o in &offsets {
                t.entries_mut()[o] = mean;
            }
        }
        advance(&mut index, dim);
    }
}

fn permutations(m: usize) -> Vec<Vec<usize>> {
    fn extend(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for k in 0..used.len() {
            if !used[k] {
                used[k] = true;
                prefix.push(k);
                extend(prefix, used, out);
                prefix.pop();
                used[k] = false;
            }
        }
    }
    let mut out = Vec::new();
    extend(&mut Vec::with_capacity(m), &mut vec![false; m], &mut out);
    out
}

/// Draws a witness `x~` uniformly from `(0,1)^n` and returns `(A x~^{m-1}, x~)`.
pub fn gen_rhs(tensor: &DenseTensor, seed: u64) -> Result<(RealVector, RealVector)> {
    let mut rng = stream(seed, WITNESS_STREAM);
    let witness: RealVector = (0..tensor.dim()).map(|_| open_unit(&mut rng)).collect();
    let rhs = tensor.contract_power(&witness)?;
    Ok((rhs, witness))
}

/// Sufficient certificate for a strong M-tensor: a Z-tensor (every entry off
/// the diagonal `(i,..,i)` nonpositive) with `A e^{m-1} > 0`.
pub fn strong_m_certificate(tensor: &DenseTensor) -> bool {
    let stride = tensor.diagonal_stride();
    let z_tensor = tensor
        .entries()
        .iter()
        .enumerate()
        .all(|(off, &v)| off % stride == 0 && off / stride < tensor.dim() || v <= 0.0);
    z_tensor && tensor.contract_power_unchecked(&vec![1.0; tensor.dim()]).iter().all(|&v| v > 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn problem1_structure() {
        for &(m, n) in &[(3, 10), (4, 5), (5, 3), (2, 6)] {
            let p = GeneratorSpec::new(GeneratorKind::P1, m, n, 11).generate().unwrap();
            assert!(strong_m_certificate(&p.tensor));
            assert!(p.tensor.majorization_matrix().m_matrix_certificate());
            let stride = p.tensor.diagonal_stride();
            for i in 0..n {
                assert!(p.tensor.entries()[i * stride] > 0.0);
            }
            let ae = p.tensor.contract_power(&vec![1.0; n]).unwrap();
            assert!(ae.iter().all(|&v| v > 0.0));
            assert_eq!(p.meta.generator, "P1");
        }
    }

    #[test]
    fn problem1_entries_are_off_diagonal_uniforms() {
        let p = GeneratorSpec::new(GeneratorKind::P1, 3, 4, 5).generate().unwrap();
        let stride = p.tensor.diagonal_stride();
        for (off, &v) in p.tensor.entries().iter().enumerate() {
            if off % stride != 0 {
                assert!(v < 0.0 && v > -1.0);
            }
        }
    }

    #[test]
    fn problem2_is_symmetric() {
        let p = GeneratorSpec::new(GeneratorKind::P2, 4, 5, 3).generate().unwrap();
        let t = &p.tensor;
        let mut rng = stream(99, 7);
        let perms = permutations(4);
        for _ in 0..50 {
            let idx: Vec<usize> = (0..4).map(|_| rng.gen_range(0..5)).collect();
            let v = t.get(&idx);
            for perm in &perms {
                let q: Vec<usize> = perm.iter().map(|&k| idx[k]).collect();
                assert_eq!(t.get(&q), v);
            }
        }
        assert!(strong_m_certificate(t));
        assert!(t.majorization_matrix().m_matrix_certificate());
    }

    #[test]
    fn symmetrized_entries_stay_in_unit_interval() {
        let mut b = uniform_tensor(3, 6, 1).unwrap();
        symmetrize(&mut b);
        assert!(b.entries().iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn problem3_entries() {
        let p = GeneratorSpec::new(GeneratorKind::P3, 3, 2, 7).generate().unwrap();
        let sin3 = 3f64.sin().abs();
        let sin6 = 6f64.sin().abs();
        assert!((sin3 - 0.14112).abs() < 1e-5 && (sin6 - 0.27942).abs() < 1e-5);
        assert!((p.tensor.get(&[0, 0, 0]) - (4.0 - sin3)).abs() < 1e-15);
        assert!((p.tensor.get(&[1, 1, 1]) - (4.0 - sin6)).abs() < 1e-15);
        assert!((p.tensor.get(&[0, 0, 0]) - 3.85888).abs() < 1e-5);
        assert_eq!(p.tensor.get(&[0, 1, 0]), -(4f64.sin().abs()));
        assert!(strong_m_certificate(&p.tensor));
    }

    #[test]
    fn problem3_tensor_ignores_seed() {
        let a = GeneratorSpec::new(GeneratorKind::P3, 3, 4, 1).generate().unwrap();
        let b = GeneratorSpec::new(GeneratorKind::P3, 3, 4, 2).generate().unwrap();
        assert_eq!(a.tensor, b.tensor);
        assert_ne!(a.rhs, b.rhs);
    }

    #[test]
    fn generation_is_deterministic() {
        for kind in [GeneratorKind::P1, GeneratorKind::P2, GeneratorKind::P3] {
            let spec = GeneratorSpec::new(kind, 3, 6, 42);
            let a = spec.generate().unwrap();
            let b = spec.generate().unwrap();
            assert_eq!(a, b);
            assert_eq!(a.fingerprint(), b.fingerprint());
        }
        let a = GeneratorSpec::new(GeneratorKind::P1, 3, 6, 1).generate().unwrap();
        let b = GeneratorSpec::new(GeneratorKind::P1, 3, 6, 2).generate().unwrap();
        assert_ne!(a.fingerprint(), b.fingerprint());
    }

    #[test]
    fn rhs_with_identity() {
        let id = DenseTensor::identity(3, 4).unwrap();
        let (b, w) = gen_rhs(&id, 9).unwrap();
        for (bi, wi) in b.iter().zip(&w) {
            assert_eq!(*bi, wi * wi);
            assert!(*wi > 0.0 && *wi < 1.0);
        }
    }

    #[test]
    fn wrong_kind_and_bad_specs() {
        let spec = GeneratorSpec::new(GeneratorKind::P2, 3, 3, 0);
        assert!(gen_problem1(&spec).is_err());
        let mut bad = GeneratorSpec::new(GeneratorKind::P1, 3, 3, 0);
        bad.eps = 0.0;
        assert!(bad.generate().is_err());
        assert!(GeneratorSpec::new(GeneratorKind::P1, 1, 3, 0).generate().is_err());
        assert!(GeneratorSpec::new(GeneratorKind::P1, 3, 0, 0).generate().is_err());
    }

    #[test]
    fn certificate_examples() {
        assert!(strong_m_certificate(&DenseTensor::identity(3, 3).unwrap()));
        assert!(!strong_m_certificate(&DenseTensor::zeros(3, 3).unwrap()));
        let mut t = DenseTensor::identity(3, 2).unwrap();
        t.set(&[0, 1, 0], 0.1);
        assert!(!strong_m_certificate(&t));
    }

    #[test]
    fn eval_f_examples() {
        let p = GeneratorSpec::new(GeneratorKind::P1, 3, 5, 8).generate().unwrap();
        let f0 = p.eval_f(&[0.0; 5]).unwrap();
        for (f, b) in f0.iter().zip(&p.rhs) {
            assert_eq!(*f, -b);
        }
        assert!(p.eval_f(&[0.0; 4]).is_err());
        let a = DenseTensor::new(2, 2, vec![2.0, -1.0, -1.0, 2.0]).unwrap();
        let lcp = ProblemInstance::new(a, vec![1.0, 1.0]).unwrap();
        assert_eq!(eval_f(&lcp, &[1.0, 1.0]).unwrap(), vec![0.0, 0.0]);
        assert!(ProblemInstance::new(DenseTensor::identity(2, 2).unwrap(), vec![1.0]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn witness_solves_generated_instances(kind in 0usize..3, m in 2usize..=4, n in 1usize..=6, seed in any::<u64>()) {
            let kind = [GeneratorKind::P1, GeneratorKind::P2, GeneratorKind::P3][kind];
            let p = GeneratorSpec::new(kind, m, n, seed).generate().unwrap();
            prop_assert!(strong_m_certificate(&p.tensor));
            prop_assert!(p.tensor.majorization_matrix().m_matrix_certificate());
            let w = p.witness.clone().unwrap();
            let f = p.eval_f(&w).unwrap();
            let scale = p.rhs.iter().fold(1.0f64, |a, b| a.max(b.abs()));
            prop_assert!(f.iter().all(|v| v.abs() <= 1e-12 * scale));
            let res: f64 = f.iter().zip(&w).map(|(a, b)| a.min(*b).powi(2)).sum::<f64>().sqrt();
            prop_assert!(res <= 1e-10);
        }
    }
}
