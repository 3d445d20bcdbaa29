//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::time::{Duration, Instant};

use l1_maximal::cli::run_with;
use l1_maximal::combinatorics::{
    ball_count, check_ratio_bounds, enumerate_ball, enumerate_sphere, sphere_count,
};
use l1_maximal::krawtchouk::{check_property, find_roots, Property};
use l1_maximal::operator::{
    delta_probe, delta_ratio_closed_form, difference_probe, probe_csv, random_probe,
    semigroup_probe, HeatFamily, ProbeRow,
};
use l1_maximal::verifier::{
    agreement_csv, branch_coverage, constant_chain, log_grid, min_sum, oracle_agreement,
    verify_csv, verify_default, verify_inequality, verify_lemma_5_1, InequalityId, Strategy,
    XiSampler, DEFAULT_K_MAX, DEFAULT_SAMPLES, MIN_SUM_BOUND, MIN_SUM_TOL,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// 1. Closed-form sphere and ball counts equal enumeration for 1 ≤ t ≤ d ≤ 8.
fn counts() -> Outcome {
    let mut pairs = 0;
    let mut bad = Vec::new();
    for d in 1..=8usize {
        for t in 1..=d as u64 {
            pairs += 1;
            let sphere = enumerate_sphere(d, t)
                .unwrap()
                .filter(|x| x.is_in_sphere(t))
                .count() as u64;
            let ball = enumerate_ball(d, t)
                .unwrap()
                .filter(|x| x.is_in_ball(t))
                .count() as u64;
            let cs = sphere_count(d as u64, t).unwrap().to_u64();
            let cb = ball_count(d as u64, t).unwrap().to_u64();
            if cs != Some(sphere) || cb != Some(ball) {
                bad.push(format!("(d={d},t={t})"));
            }
        }
    }
    outcome(
        bad.is_empty(),
        format!("{pairs} pairs, mismatches: {bad:?}"),
    )
}

/// 2. t²/(2d) ≤ excess ratio ≤ e·t²/d for 4 ≤ d ≤ 64, 1 ≤ t ≤ ⌊√d⌋.
fn ratio_bracket() -> Outcome {
    let mut checked = 0;
    let mut bad = Vec::new();
    for d in 4..=64u64 {
        for t in 1..=d.isqrt() {
            checked += 1;
            if !check_ratio_bounds(d, t).unwrap().passed() {
                bad.push((d, t));
            }
        }
    }
    outcome(
        bad.is_empty(),
        format!("{checked} pairs, failures: {bad:?}"),
    )
}

fn agreement_rows(max_d: usize, samples: u64) -> Vec<l1_maximal::verifier::AgreementRow> {
    let mut rows = Vec::new();
    for d in 2..=max_d {
        for t in 1..=d as u64 {
            rows.push(oracle_agreement(d, t, samples, 0).unwrap());
        }
    }
    rows
}

/// 3. Fast symbols agree with the enumeration oracles to 1e-9 relative.
fn oracle_agreement_all() -> Outcome {
    let rows = agreement_rows(10, 1000);
    let failures: u64 = rows.iter().map(|r| r.failures).sum();
    let s = rows.iter().map(|r| r.max_s_err).fold(0.0, f64::max);
    let m = rows.iter().map(|r| r.max_m_err).fold(0.0, f64::max);
    let im = rows.iter().map(|r| r.max_imag).fold(0.0, f64::max);
    outcome(
        failures == 0 && s <= 1e-9 && m <= 1e-9 && im <= 1e-10,
        format!(
            "{} (d,t) pairs x 1000 ξ, max s err {s:.2e}, max m err {m:.2e}, max imag {im:.2e}, failures {failures}",
            rows.len()
        ),
    )
}

/// 4. Krawtchouk symmetry, reflection, orthogonality, uniform bound and roots.
fn krawtchouk_suite() -> Outcome {
    let plan: [(Property, u64); 5] = [
        (Property::Symmetry, 20),
        (Property::Reflection, 20),
        (Property::Orthogonality, 20),
        (Property::UniformBound, 60),
        (Property::Roots, 30),
    ];
    let mut parts = Vec::new();
    let mut pass = true;
    for (prop, max_n) in plan {
        let mut checks = 0;
        let mut violations = 0;
        for n in 1..=max_n {
            let r = check_property(prop, n).unwrap();
            checks += r.checks;
            violations += r.violations;
        }
        pass &= violations == 0;
        parts.push(format!(
            "{prop} n≤{max_n}: {checks} checks/{violations} violations"
        ));
    }
    parts.push(root_degree_breakdown());
    outcome(pass, parts.join("; "))
}

/// Counts out-of-interval roots separately for k ≤ n/2 and k > n/2.
fn root_degree_breakdown() -> String {
    let (mut low, mut high) = (0u64, 0u64);
    for n in 1..=30u64 {
        for k in 0..=n {
            let radius = ((k * (n - k)) as f64).sqrt();
            let outside = find_roots(n, k)
                .unwrap()
                .into_iter()
                .filter(|r| (r - n as f64 / 2.0).abs() > radius + 1e-8)
                .count() as u64;
            if 2 * k <= n {
                low += outside;
            } else {
                high += outside;
            }
        }
    }
    format!("roots outside interval: {low} with k ≤ n/2, {high} with k > n/2")
}

/// 5. Zero violations over the default catalog matrix, 1e4 samples per
/// strategy, plus both heat branches covered by the mixed sampler.
fn catalog() -> Outcome {
    let mut reports = 0;
    let mut violations = 0;
    let mut samples = 0;
    let mut worst = f64::NEG_INFINITY;
    for id in InequalityId::ALL {
        for r in verify_default(id, DEFAULT_SAMPLES, 0).unwrap() {
            reports += 1;
            violations += r.violations;
            samples += r.samples;
            if r.samples > 0 {
                worst = worst.max(r.max_slack);
            }
        }
    }
    let mut coverage_ok = true;
    let mut min_cov: f64 = 1.0;
    for d in [4usize, 6, 8, 10, 16, 25, 64] {
        let (low, high) = branch_coverage(d, &XiSampler::new(Strategy::Mixed, 0, DEFAULT_SAMPLES));
        min_cov = min_cov.min(low).min(high);
        coverage_ok &= low >= 0.1 && high >= 0.1;
    }
    outcome(
        violations == 0 && coverage_ok,
        format!(
            "{reports} reports, {samples} evaluated samples, {violations} violations, max slack {worst:.3e}, min branch share {min_cov:.3}"
        ),
    )
}

/// 6. Min-sum ≤ 8/3 + 1e-12 on a 1e5-point log grid; value 4/3 at x = 1.
fn min_sum_grid() -> Outcome {
    let r = verify_lemma_5_1(&log_grid(1e-6, 1e6, 100_000), DEFAULT_K_MAX).unwrap();
    let at_one = min_sum(1.0, DEFAULT_K_MAX);
    let one_ok = (at_one - 4.0 / 3.0).abs() <= 1e-12;
    outcome(
        r.passed() && r.max_sum <= MIN_SUM_BOUND + MIN_SUM_TOL && one_ok,
        format!(
            "max {:.15} at x={:.6e}, value at 1 = {at_one:.15}",
            r.max_sum, r.argmax
        ),
    )
}

/// 7. 6 + 2√2 + (56/c)·(4/√3) ≤ 900.
fn chain() -> Outcome {
    let ch = constant_chain();
    outcome(
        ch.total <= 900.0,
        format!("value {:.6} with c={:.10}", ch.total, ch.c),
    )
}

const RANDOM_GRIDS: [(usize, usize); 3] = [(4, 9), (8, 4), (16, 2)];
const DIFFERENCE_GRIDS: [(usize, usize); 2] = [(4, 9), (16, 2)];

fn operator_rows(random_trials: u64, other_trials: u64) -> (Vec<ProbeRow>, Vec<String>) {
    let mut rows = Vec::new();
    let mut notes = Vec::new();
    for d in [4usize, 16, 64] {
        let (row, err) = delta_probe(d, 2.0, 16).unwrap();
        let closed = delta_ratio_closed_form(d, 2.0).unwrap();
        notes.push(format!(
            "delta d={d}: {:.12} (closed form {closed:.12}, diff {err:.1e})",
            row.max_ratio
        ));
        rows.push(row);
    }
    for (d, n) in RANDOM_GRIDS {
        rows.extend(random_probe(d, n, &[2.0, 4.0], random_trials, 0).unwrap());
    }
    for family in [HeatFamily::First, HeatFamily::Second] {
        rows.push(semigroup_probe(4, 8, family, other_trials, 0).unwrap());
    }
    for (d, n) in DIFFERENCE_GRIDS {
        rows.push(difference_probe(d, n, other_trials, 0).unwrap());
    }
    (rows, notes)
}

/// 8. Delta, random, semigroup and difference probes within their bounds.
fn operator_probes() -> Outcome {
    let (rows, notes) = operator_rows(1000, 100);
    let pass = rows.iter().all(|r| r.pass);
    let summary: Vec<String> = rows
        .iter()
        .skip(3)
        .map(|r| {
            format!(
                "{} d={} {} p={}: {:.4} ≤ {}",
                r.kind, r.d, r.domain, r.p, r.max_ratio, r.bound
            )
        })
        .collect();
    outcome(
        pass,
        format!("{}; {}", notes.join("; "), summary.join("; ")),
    )
}

fn with_threads<T: Send>(n: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .unwrap()
        .install(f)
}

fn determinism_csv() -> String {
    let mut out = agreement_csv(&agreement_rows(7, 200)).render();
    let mut reports = Vec::new();
    for id in InequalityId::ALL {
        let (d, t) = id.default_matrix()[0];
        for s in Strategy::ALL {
            reports.push(verify_inequality(id, d, t, &XiSampler::new(s, 17, 2000)).unwrap());
        }
    }
    out.push_str(&verify_csv(&reports).render());
    out.push_str(&probe_csv(&operator_rows(50, 20).0).render());
    out
}

fn cli_csv(threads: &str) -> Vec<u8> {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let args = [
        "l1ml",
        "--threads",
        threads,
        "verify",
        "--id",
        "LEM_4_4A",
        "--d",
        "10",
        "--t",
        "5",
        "--samples",
        "3000",
        "--seed",
        "5",
    ];
    assert_eq!(run_with(args, &mut out, &mut err), 0);
    out
}

/// 9. Subsets of criteria 3, 5 and 8 give byte-identical CSV under
/// different thread counts.
fn determinism() -> Outcome {
    let one = with_threads(1, determinism_csv);
    let four = with_threads(4, determinism_csv);
    let cli_one = cli_csv("1");
    let cli_three = cli_csv("3");
    outcome(
        one == four && cli_one == cli_three,
        format!(
            "library CSV {} bytes identical: {}; CLI CSV {} bytes identical: {}",
            one.len(),
            one == four,
            cli_one.len(),
            cli_one == cli_three
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, Duration); 9] = [
        ("counts equal enumeration", counts, Duration::from_secs(30)),
        (
            "excess ratio bracket",
            ratio_bracket,
            Duration::from_secs(5),
        ),
        (
            "multiplier oracle agreement",
            oracle_agreement_all,
            Duration::from_secs(120),
        ),
        (
            "Krawtchouk suite",
            krawtchouk_suite,
            Duration::from_secs(120),
        ),
        ("inequality catalog", catalog, Duration::from_secs(600)),
        ("min-sum bound", min_sum_grid, Duration::from_secs(5)),
        ("constant chain", chain, Duration::from_secs(1)),
        ("operator probes", operator_probes, Duration::from_secs(900)),
        (
            "determinism across thread counts",
            determinism,
            Duration::from_secs(600),
        ),
    ];
    let mut failed = 0;
    for (i, (name, run, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        let elapsed = start.elapsed();
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {} {}: {} [{:.1}s, budget {}s] {}",
            i + 1,
            name,
            if o.pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs(),
            o.detail
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all 9 criteria passed");
}
