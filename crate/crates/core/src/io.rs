//! Text formats for tensors (`.mtt`) and problem instances (`.mtcp`).
//!
//! `.mtt`:
//! ```text
//! m n
//! <n^m reals in canonical layout>
//! ```
//!
//! `.mtcp`:
//! ```text
//! m n generator seed
//! <n rhs reals>
//! <n witness reals, or ->
//! <n^m tensor reals in canonical layout>
//! ```
//!
//! Reals are written in shortest round-trip form; tensor entries go `n` per line.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::problems::{ProblemInstance, ProblemMeta};
use crate::tensor::{entry_count, DenseTensor};

/// Shortest decimal that parses back to exactly `v`.
pub fn format_real(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-5..1e16).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

fn write_values<W: Write>(w: &mut W, values: &[f64]) -> Result<()> {
    let line: Vec<String> = values.iter().map(|&v| format_real(v)).collect();
    writeln!(w, "{}", line.join(" "))?;
    Ok(())
}

fn write_entries<W: Write>(w: &mut W, t: &DenseTensor) -> Result<()> {
    for fiber in t.entries().chunks(t.dim()) {
        write_values(w, fiber)?;
    }
    Ok(())
}

pub fn write_tensor<W: Write>(w: &mut W, t: &DenseTensor) -> Result<()> {
    writeln!(w, "{} {}", t.order(), t.dim())?;
    write_entries(w, t)
}

pub fn write_problem<W: Write>(w: &mut W, p: &ProblemInstance) -> Result<()> {
    let seed = p.meta.seed.map_or_else(|| "-".to_string(), |s| s.to_string());
    writeln!(w, "{} {} {} {}", p.order(), p.dim(), p.meta.generator, seed)?;
    write_values(w, &p.rhs)?;
    match &p.witness {
        Some(wit) => write_values(w, wit)?,
        None => writeln!(w, "-")?,
    }
    write_entries(w, &p.tensor)
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn parse_real(tok: &str, line: usize) -> Result<f64> {
    let v: f64 = tok
        .parse()
        .map_err(|_| parse_err(line, format!("invalid real {tok:?}")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("non-finite value {tok:?}")));
    }
    Ok(v)
}

fn parse_usize(tok: Option<&str>, line: usize, what: &str) -> Result<usize> {
    let tok = tok.ok_or_else(|| parse_err(line, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| parse_err(line, format!("invalid {what} {tok:?}")))
}

fn parse_vector(text: &str, line: usize, len: usize) -> Result<Vec<f64>> {
    let values: Vec<f64> = text
        .split_whitespace()
        .map(|t| parse_real(t, line))
        .collect::<Result<_>>()?;
    if values.len() != len {
        return Err(parse_err(line, format!("expected {len} values, found {}", values.len())));
    }
    Ok(values)
}

/// Reads whitespace-separated tensor entries that start on line `first_line`.
fn parse_entries<'a>(
    lines: impl Iterator<Item = (usize, &'a str)>,
    order: usize,
    dim: usize,
) -> Result<DenseTensor> {
    let expected = entry_count(order, dim).ok_or_else(|| parse_err(1, "tensor size overflows"))?;
    let mut entries = Vec::with_capacity(expected);
    let mut last_line = 1;
    for (no, text) in lines {
        last_line = no;
        for tok in text.split_whitespace() {
            entries.push(parse_real(tok, no)?);
        }
    }
    if entries.len() != expected {
        return Err(parse_err(
            last_line,
            format!("expected {expected} tensor entries, found {}", entries.len()),
        ));
    }
    DenseTensor::new(order, dim, entries)
}

fn header(text: &str) -> Result<(std::str::SplitWhitespace<'_>, usize, usize)> {
    let mut toks = text.split_whitespace();
    let order = parse_usize(toks.next(), 1, "order")?;
    let dim = parse_usize(toks.next(), 1, "dimension")?;
    if order < 2 || dim < 1 {
        return Err(parse_err(1, format!("invalid shape m={order} n={dim}")));
    }
    Ok((toks, order, dim))
}

pub fn read_tensor(text: &str) -> Result<DenseTensor> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, first) = lines.next().ok_or_else(|| parse_err(1, "empty input"))?;
    let (mut rest, order, dim) = header(first)?;
    if rest.next().is_some() {
        return Err(parse_err(1, "unexpected tokens after `m n`"));
    }
    parse_entries(lines, order, dim)
}

pub fn read_problem(text: &str) -> Result<ProblemInstance> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, first) = lines.next().ok_or_else(|| parse_err(1, "empty input"))?;
    let (mut rest, order, dim) = header(first)?;
    let generator = rest
        .next()
        .ok_or_else(|| parse_err(1, "missing generator name"))?
        .to_string();
    let seed = match rest.next() {
        Some("-") => None,
        Some(tok) => Some(
            tok.parse()
                .map_err(|_| parse_err(1, format!("invalid seed {tok:?}")))?,
        ),
        None => return Err(parse_err(1, "missing seed")),
    };
    if rest.next().is_some() {
        return Err(parse_err(1, "unexpected tokens after the seed"));
    }
    let (no, rhs_line) = lines.next().ok_or_else(|| parse_err(2, "missing right-hand side"))?;
    let rhs = parse_vector(rhs_line, no, dim)?;
    let (no, wit_line) = lines.next().ok_or_else(|| parse_err(3, "missing witness line"))?;
    let witness = if wit_line.trim() == "-" {
        None
    } else {
        Some(parse_vector(wit_line, no, dim)?)
    };
    let tensor = parse_entries(lines, order, dim)?;
    let mut p = ProblemInstance::new(tensor, rhs)?;
    p.witness = witness;
    p.meta = ProblemMeta { generator, seed };
    Ok(p)
}

pub fn write_problem_file(path: &Path, p: &ProblemInstance) -> Result<()> {
    let mut buf = Vec::new();
    write_problem(&mut buf, p)?;
    fs::write(path, buf)?;
    Ok(())
}

pub fn read_problem_file(path: &Path) -> Result<ProblemInstance> {
    read_problem(&fs::read_to_string(path)?)
}

pub fn write_tensor_file(path: &Path, t: &DenseTensor) -> Result<()> {
    let mut buf = Vec::new();
    write_tensor(&mut buf, t)?;
    fs::write(path, buf)?;
    Ok(())
}

pub fn read_tensor_file(path: &Path) -> Result<DenseTensor> {
    read_tensor(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{GeneratorKind, GeneratorSpec};
    use proptest::prelude::*;

    #[test]
    fn tensor_text_layout() {
        let t = DenseTensor::identity(3, 2).unwrap();
        let mut buf = Vec::new();
        write_tensor(&mut buf, &t).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "3 2\n1 0\n0 0\n0 0\n0 1\n");
    }

    #[test]
    fn problem_round_trip() {
        let p = GeneratorSpec::new(GeneratorKind::P2, 3, 4, 17).generate().unwrap();
        let mut buf = Vec::new();
        write_problem(&mut buf, &p).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("3 4 P2 17\n"));
        assert_eq!(read_problem(&text).unwrap(), p);
    }

    #[test]
    fn problem_without_witness() {
        let t = DenseTensor::identity(2, 2).unwrap();
        let p = ProblemInstance::new(t, vec![1.0, -0.5]).unwrap();
        let mut buf = Vec::new();
        write_problem(&mut buf, &p).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "2 2 custom -\n1 -0.5\n-\n1 0\n0 1\n");
        assert_eq!(read_problem(&text).unwrap(), p);
    }

    #[test]
    fn malformed_inputs() {
        assert!(matches!(read_tensor(""), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(read_tensor("1 2\n1 2\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(read_tensor("2 2\n1 2\n3\n"), Err(Error::Parse { line: 3, .. })));
        assert!(matches!(read_tensor("2 2\n1 2\n3 x\n"), Err(Error::Parse { line: 3, .. })));
        assert!(matches!(read_tensor("2 1\nnan\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(read_problem("2 1 P1\n1\n-\n1\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(read_problem("2 2 P1 3\n1\n-\n1 0\n0 1\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(read_problem("2 2 P1 3\n1 1\n"), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn extreme_magnitudes_use_exponents() {
        assert_eq!(format_real(1e-300), "1e-300");
        assert_eq!(format_real(0.25), "0.25");
        assert_eq!(format_real(-3.0), "-3");
        assert_eq!(format_real(0.0), "0");
    }

    proptest! {
        #[test]
        fn tensor_round_trip_is_exact(m in 2usize..=4, n in 1usize..=4, seed in proptest::collection::vec(any::<f64>(), 256)) {
            let len = n.pow(m as u32);
            let entries: Vec<f64> = seed[..len].iter().map(|v| if v.is_finite() { *v } else { 0.5 }).collect();
            let t = DenseTensor::new(m, n, entries).unwrap();
            let mut buf = Vec::new();
            write_tensor(&mut buf, &t).unwrap();
            let back = read_tensor(std::str::from_utf8(&buf).unwrap()).unwrap();
            prop_assert_eq!(back, t);
        }
    }
}
