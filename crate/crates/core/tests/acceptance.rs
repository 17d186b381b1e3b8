//! Acceptance criteria for the solver suite. Each test prints one
//! `[PASS]`/`[FAIL]` line; run with `--nocapture` to see them.

use std::sync::{Mutex, OnceLock};
use std::time::Instant;

use mtcp_core::bench::{run_bench_with, BenchReport, BenchSpec, SummaryRow};
use mtcp_core::invariants::{check_outcome, InvariantReport};
use mtcp_core::io::write_problem;
use mtcp_core::oracle::lcp_enumerate;
use mtcp_core::{
    emit_csv, ld_a_newton, ld_leqa, Algorithm, DenseMatrix, DenseTensor, GeneratorKind, GeneratorSpec,
    ProblemInstance, SolverConfig, TraceLevel,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TRIALS: usize = 100;
const ALPHA_SWEEP: [f64; 6] = [0.1, 0.3, 0.5, 0.7, 0.9, 1.0];

fn report(id: u32, name: &str, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("[{tag}] criterion {id}: {name}: {detail}");
}

fn find(rows: &[SummaryRow], alpha: f64, algorithm: Algorithm) -> &SummaryRow {
    rows.iter()
        .find(|r| r.alpha == alpha && r.algorithm == algorithm)
        .expect("row present")
}

struct Sweep {
    report: BenchReport,
    invariants: InvariantReport,
    solves: usize,
    seconds: f64,
}

fn run_sweep(kind: GeneratorKind, order: usize, dim: usize, alphas: &[f64]) -> Sweep {
    let mut spec = BenchSpec::new(kind, order, vec![dim], alphas.to_vec(), TRIALS);
    spec.trace = TraceLevel::Full;
    let invariants = Mutex::new(InvariantReport::default());
    let solves = Mutex::new(0usize);
    let start = Instant::now();
    let report = run_bench_with(&spec, |ctx, outcome| {
        let r = check_outcome(ctx.problem, ctx.algorithm, outcome);
        invariants.lock().unwrap().merge(r);
        *solves.lock().unwrap() += 1;
    })
    .expect("bench runs");
    Sweep {
        report,
        invariants: invariants.into_inner().unwrap(),
        solves: solves.into_inner().unwrap(),
        seconds: start.elapsed().as_secs_f64(),
    }
}

/// Problems 1-3 at m = 3, n = 10 over the full alpha sweep, shared by
/// criteria 2 through 6.
fn m3_sweeps() -> &'static [(GeneratorKind, Sweep)] {
    static SWEEPS: OnceLock<Vec<(GeneratorKind, Sweep)>> = OnceLock::new();
    SWEEPS.get_or_init(|| {
        [GeneratorKind::P1, GeneratorKind::P2, GeneratorKind::P3]
            .into_iter()
            .map(|kind| (kind, run_sweep(kind, 3, 10, &ALPHA_SWEEP)))
            .collect()
    })
}

fn sweep(kind: GeneratorKind) -> &'static Sweep {
    &m3_sweeps().iter().find(|(k, _)| *k == kind).unwrap().1
}

/// Problem 1 at m = 4, n = 50 and m = 5, n = 10 with alpha = 1.
fn higher_order_sweeps() -> &'static [Sweep; 2] {
    static SWEEPS: OnceLock<[Sweep; 2]> = OnceLock::new();
    SWEEPS.get_or_init(|| {
        [
            run_sweep(GeneratorKind::P1, 4, 50, &[1.0]),
            run_sweep(GeneratorKind::P1, 5, 10, &[1.0]),
        ]
    })
}

/// Random strictly diagonally dominant Z-matrix LCP with n <= 8.
fn random_lcp(case: u64) -> (DenseMatrix, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(0x1c9 + case);
    let n = 1 + (case as usize % 8);
    let mut m = DenseMatrix::zeros(n);
    for i in 0..n {
        let mut off = 0.0;
        for j in 0..n {
            if i != j {
                let v: f64 = rng.gen_range(0.0..1.0);
                m[(i, j)] = -v;
                off += v;
            }
        }
        m[(i, i)] = off + rng.gen_range(0.1..1.0);
    }
    let b = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    (m, b)
}

fn lcp_results() -> &'static (usize, usize, f64, InvariantReport, f64) {
    static RESULT: OnceLock<(usize, usize, f64, InvariantReport, f64)> = OnceLock::new();
    RESULT.get_or_init(|| {
        let start = Instant::now();
        let mut passed = 0;
        let mut worst: f64 = 0.0;
        let mut inv = InvariantReport::default();
        for case in 0..200 {
            let (a, b) = random_lcp(case);
            let n = a.dim();
            let oracle = lcp_enumerate(&a, &b).expect("M-matrix LCP is solvable");
            let tensor = DenseTensor::new(2, n, a.entries().to_vec()).unwrap();
            let problem = ProblemInstance::new(tensor, b).unwrap();
            let mut ok = oracle.certified;
            for (alg, alpha) in [(Algorithm::LdLeqa, 1.0), (Algorithm::LdANewton, 0.9)] {
                let cfg = SolverConfig {
                    alpha,
                    trace: TraceLevel::Full,
                    ..SolverConfig::default()
                };
                let out = match alg {
                    Algorithm::LdLeqa => ld_leqa(&problem, &cfg),
                    Algorithm::LdANewton => ld_a_newton(&problem, &cfg),
                };
                inv.merge(check_outcome(&problem, alg, &out));
                let err = out
                    .x
                    .iter()
                    .zip(&oracle.x)
                    .fold(0.0f64, |m, (u, v)| m.max((u - v).abs()));
                worst = worst.max(err);
                ok &= out.converged() && out.final_residual <= 1e-8 && err <= 1e-6;
            }
            passed += ok as usize;
        }
        (passed, 200, worst, inv, start.elapsed().as_secs_f64())
    })
}

#[test]
fn criterion_1_oracle_equivalence_m2() {
    let (passed, total, worst, _, secs) = lcp_results();
    let pass = passed == total && *secs < 10.0;
    report(
        1,
        "LCP oracle equivalence",
        pass,
        &format!("{passed}/{total} matched, worst inf-norm error {worst:.2e}, {secs:.2}s"),
    );
    assert!(pass);
}

#[test]
fn criterion_2_problem1_iteration_counts() {
    let s = sweep(GeneratorKind::P1);
    let rows = &s.report.rows;
    let leqa_1 = find(rows, 1.0, Algorithm::LdLeqa).avg_iter;
    let leqa_01 = find(rows, 0.1, Algorithm::LdLeqa).avg_iter;
    let newton_01 = find(rows, 0.1, Algorithm::LdANewton).avg_iter;
    let pass = (20.0..=50.0).contains(&leqa_1)
        && (250.0..=600.0).contains(&leqa_01)
        && (25.0..=60.0).contains(&newton_01)
        && s.seconds < 30.0;
    report(
        2,
        "Problem 1 m=3 n=10 iteration counts",
        pass,
        &format!(
            "LD-LEQA {leqa_1:.1} @1.0 (reference 33.2), {leqa_01:.1} @0.1 (reference 411.0); \
             LD-A-Newton {newton_01:.1} @0.1 (reference 40.7); P1 sweep {:.1}s",
            s.seconds
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_3_alpha_monotonicity() {
    let mut pass = true;
    let mut detail = Vec::new();
    for kind in [GeneratorKind::P1, GeneratorKind::P3] {
        let rows = &sweep(kind).report.rows;
        let iters: Vec<f64> = ALPHA_SWEEP
            .iter()
            .map(|&a| find(rows, a, Algorithm::LdLeqa).avg_iter)
            .collect();
        let decreasing = iters.windows(2).all(|w| w[1] < w[0]);
        pass &= decreasing;
        let shown: Vec<String> = iters.iter().map(|v| format!("{v:.1}")).collect();
        detail.push(format!("{kind}: {}", shown.join(" > ")));
    }
    report(3, "LD-LEQA iterations decrease with alpha", pass, &detail.join("; "));
    assert!(pass);
}

#[test]
fn criterion_4_improvement_at_small_alpha() {
    let mut pass = true;
    let mut detail = Vec::new();
    for (kind, s) in m3_sweeps() {
        let rows = &s.report.rows;
        let leqa = find(rows, 0.1, Algorithm::LdLeqa).avg_iter;
        let newton = find(rows, 0.1, Algorithm::LdANewton).avg_iter;
        let ratio = newton / leqa;
        pass &= ratio <= 0.25;
        detail.push(format!("{kind}: {newton:.1}/{leqa:.1} = {ratio:.3}"));
    }
    report(4, "LD-A-Newton/LD-LEQA at alpha=0.1 <= 0.25", pass, &detail.join("; "));
    assert!(pass);
}

#[test]
fn criterion_5_k_statistic() {
    let rows: Vec<&SummaryRow> = m3_sweeps()
        .iter()
        .map(|(_, s)| s)
        .chain(higher_order_sweeps().iter())
        .flat_map(|s| s.report.rows.iter())
        .filter(|r| r.algorithm == Algorithm::LdANewton)
        .collect();
    let zero = rows.iter().filter(|r| r.avg_k == 0.0).count();
    let share = zero as f64 / rows.len() as f64;
    let pass = share >= 0.95;
    report(
        5,
        "avg_K = 0",
        pass,
        &format!("{zero}/{} LD-A-Newton rows have K = 0 ({:.0}%)", rows.len(), 100.0 * share),
    );
    assert!(pass);
}

#[test]
fn criterion_6_invariants() {
    let mut total = lcp_results().3.clone();
    let mut solves = 400;
    for (_, s) in m3_sweeps() {
        total.merge(s.invariants.clone());
        solves += s.solves;
    }
    let pass = total.violations() == 0;
    report(
        6,
        "trace invariants",
        pass,
        &format!(
            "{solves} solves; monotone {}, nested {}, off-set {}, eps-order {}, freeze {}, certificate {}; \
             {} retained components with F >= 0{}",
            total.monotone,
            total.nested_sets,
            total.off_set_increase,
            total.epsilon_order,
            total.freeze,
            total.certificate,
            total.retained_nonnegative,
            total.first.map(|m| format!("; first: {m}")).unwrap_or_default()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_7_higher_order() {
    let [m4, m5] = higher_order_sweeps();
    let it4 = find(&m4.report.rows, 1.0, Algorithm::LdLeqa).avg_iter;
    let it5 = find(&m5.report.rows, 1.0, Algorithm::LdLeqa).avg_iter;
    let fails: usize = m4.report.rows.iter().chain(&m5.report.rows).map(|r| r.fail_count).sum();
    let secs = m4.seconds + m5.seconds;
    let inv = m4.invariants.violations() + m5.invariants.violations();
    let pass = (15.0..=45.0).contains(&it4) && (8.0..=25.0).contains(&it5) && fails == 0 && secs < 180.0;
    report(
        7,
        "Problem 1 higher order",
        pass,
        &format!(
            "m=4 n=50: {it4:.1} (reference 28.2); m=5 n=10: {it5:.1} (reference 13.2); \
             {fails} failures, {inv} invariant violations, {secs:.1}s"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_8_determinism() {
    let gen_bytes = |kind, seed| {
        let p = GeneratorSpec::new(kind, 3, 10, seed).generate().unwrap();
        let mut buf = Vec::new();
        write_problem(&mut buf, &p).unwrap();
        (p, buf)
    };
    let mut pass = true;
    for kind in [GeneratorKind::P1, GeneratorKind::P2, GeneratorKind::P3] {
        let (p, a) = gen_bytes(kind, 1);
        let (_, b) = gen_bytes(kind, 1);
        pass &= a == b;
        for alg in Algorithm::ALL {
            let cfg = SolverConfig {
                alpha: 0.5,
                trace: TraceLevel::Full,
                ..SolverConfig::default()
            };
            let x = mtcp_core::solve(&p, &cfg, alg);
            let y = mtcp_core::solve(&p, &cfg, alg);
            pass &= x.trace == y.trace && x.x == y.x;
        }
    }
    let strip_time = |rows: &[SummaryRow]| {
        let rows: Vec<SummaryRow> = rows
            .iter()
            .map(|r| SummaryRow {
                avg_time_s: 0.0,
                ..r.clone()
            })
            .collect();
        emit_csv(&rows)
    };
    let mut spec = BenchSpec::new(GeneratorKind::P1, 3, vec![10], vec![0.1, 1.0], 10);
    spec.base_seed = 1;
    let first = mtcp_core::run_bench(&spec).unwrap();
    let second = mtcp_core::run_bench(&spec).unwrap();
    pass &= strip_time(&first.rows) == strip_time(&second.rows) && first.instances == second.instances;
    report(8, "determinism", pass, "generation bytes, solve traces and bench CSV repeat exactly");
    assert!(pass);
}
