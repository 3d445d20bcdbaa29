//! The `l1ml` command line.
//!
//! Exit codes: 0 when every check passed, 1 when a violation was found,
//! 2 for usage or precondition errors, 3 when a resource cap was hit.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::combinatorics::{
    ball_count, check_ratio_bounds, enumerate_ball, enumerate_sphere, set_enumeration_cap,
    sphere_count,
};
use crate::csv::CsvTable;
use crate::error::{Error, Result};
use crate::krawtchouk::{check_property, decay_constant, Property};
use crate::multipliers::{frequency_split, lambda1, lambda2, m_fast, s_fast, TorusPoint};
use crate::numeric::{derive_seed, fmt17};
use crate::operator::{
    delta_probe, difference_probe, lp_bound, probe_csv, random_probe, semigroup_probe,
    set_grid_cap, HeatFamily, ProbeRow,
};
use crate::verifier::{
    constant_chain, sweep_csv, tightness_sweep, verify_csv, verify_inequality, InequalityId,
    Strategy, TRule, XiSampler, CHAIN_BOUND, DEFAULT_SAMPLES, MIN_SUM_BOUND,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CAP: i32 = 3;

/// Largest dimension for which the delta probe convolves explicitly.
const DELTA_SPATIAL_MAX_D: usize = 16;

#[derive(Debug, Parser)]
#[command(
    name = "l1ml",
    version,
    about = "Maximal averages over l1 balls on Z^d: counts, symbols and sampled checks"
)]
struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sphere and ball lattice counts and the excess-ratio bracket.
    Count {
        #[arg(long)]
        d: u64,
        #[arg(long)]
        t: u64,
        /// Also enumerate the points and compare.
        #[arg(long)]
        enumerate: bool,
    },
    /// Krawtchouk polynomial property checks.
    Kraw {
        #[arg(long)]
        n: u64,
        /// all, symmetry, reflection, orthogonality, roots or uniform.
        #[arg(long, default_value = "all")]
        prop: String,
    },
    /// Evaluate m, s, lambda1, lambda2 and |V| at given or random frequencies.
    Mult {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        t: u64,
        /// Comma-separated coordinates or `const:v`.
        #[arg(long, conflicts_with = "random")]
        xi: Option<String>,
        /// Number of uniform random frequencies.
        #[arg(long)]
        random: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Sampled verification of catalog inequalities.
    Verify(VerifyArgs),
    /// Spatial operator probes.
    Operator(OperatorArgs),
    /// Bound tightness across dimensions.
    Sweep(SweepArgs),
    /// Print the numeric constants.
    Constants,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Catalog id or `all`.
    #[arg(long)]
    id: String,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    t: Option<u64>,
    /// Sampling strategy or `all`.
    #[arg(long, default_value = "all")]
    strategy: String,
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    samples: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct OperatorArgs {
    /// delta, random, semigroup or difference.
    #[arg(long)]
    probe: String,
    #[arg(long)]
    d: usize,
    /// Modulus of the cyclic grid.
    #[arg(long = "N", alias = "n")]
    n: Option<usize>,
    /// Box radius (delta probe only; the delta lives in radius 0).
    #[arg(long = "R", alias = "r")]
    r: Option<u64>,
    /// Exponents, comma separated; `inf` allowed.
    #[arg(long, value_delimiter = ',')]
    p: Vec<String>,
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    id: String,
    #[arg(long = "d-list", value_delimiter = ',', required = true)]
    d_list: Vec<usize>,
    /// `dyadic` or `fixed:<t>`.
    #[arg(long = "t-rule", default_value = "dyadic")]
    t_rule: String,
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    samples: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::EnumerationCap { .. } | Error::GridCap { .. } => EXIT_CAP,
        Error::Consistency(_) => EXIT_VIOLATION,
        Error::Precondition(_) | Error::Parse(_) | Error::Io(_) => EXIT_USAGE,
    }
}

fn status(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn env_cap(name: &str) -> Result<Option<u64>> {
    match std::env::var(name) {
        Ok(v) => {
            v.trim().parse().map(Some).map_err(|_| {
                Error::Parse(format!("{name} must be a non-negative integer, got '{v}'"))
            })
        }
        Err(_) => Ok(None),
    }
}

/// Runs the CLI with explicit streams and returns the exit code.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                write!(out, "{text}")
            } else {
                write!(err, "{text}")
            };
            return code;
        }
    };
    let caps = env_cap("L1ML_ENUM_CAP").and_then(|e| Ok((e, env_cap("L1ML_GRID_CAP")?)));
    match caps {
        Ok((enum_cap, grid)) => {
            if let Some(c) = enum_cap {
                set_enumeration_cap(c);
            }
            if let Some(c) = grid {
                set_grid_cap(c);
            }
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_USAGE;
        }
    }
    // output is buffered so the work can move onto a dedicated pool
    let mut buf_out = Vec::new();
    let mut buf_err = Vec::new();
    let result = match cli.threads {
        Some(0) => Err(Error::pre("--threads must be at least 1")),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(cli.command, &mut buf_out, &mut buf_err)),
            Err(e) => Err(Error::pre(format!("cannot start thread pool: {e}"))),
        },
        None => dispatch(cli.command, &mut buf_out, &mut buf_err),
    };
    let _ = out.write_all(&buf_out);
    let _ = err.write_all(&buf_err);
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

/// Entry point used by the binary.
pub fn run() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}

fn dispatch(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::Count { d, t, enumerate } => cmd_count(d, t, enumerate, out),
        Command::Kraw { n, prop } => cmd_kraw(n, &prop, out, err),
        Command::Mult {
            d,
            t,
            xi,
            random,
            seed,
        } => cmd_mult(d, t, xi, random, seed, out),
        Command::Verify(a) => cmd_verify(a, out, err),
        Command::Operator(a) => cmd_operator(a, out, err),
        Command::Sweep(a) => cmd_sweep(a, out, err),
        Command::Constants => cmd_constants(out),
    }
}

fn emit(table: &CsvTable, path: &Option<PathBuf>, out: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) => table.write_to(p),
        None => {
            out.write_all(table.render().as_bytes())?;
            Ok(())
        }
    }
}

fn cmd_count(d: u64, t: u64, enumerate: bool, out: &mut dyn Write) -> Result<i32> {
    let sphere = sphere_count(d, t)?;
    let ball = ball_count(d, t)?;
    let mut ok = true;
    write!(out, "sphere={sphere} ball={ball}")?;
    if enumerate {
        let ns = enumerate_sphere(d as usize, t)?.count() as u64;
        let nb = enumerate_ball(d as usize, t)?.count() as u64;
        let agree = Some(ns) == sphere.to_u64() && Some(nb) == ball.to_u64();
        ok &= agree;
        write!(out, " enumerated_sphere={ns} enumerated_ball={nb}")?;
    }
    if d >= 4 && t >= 1 && t * t <= d {
        let check = check_ratio_bounds(d, t)?;
        ok &= check.passed();
        write!(
            out,
            " ratio={} in [{}, {}]",
            check.ratio,
            check.lower_f64(),
            check.upper
        )?;
    }
    writeln!(out, " {}", status(ok))?;
    Ok(if ok { EXIT_OK } else { EXIT_VIOLATION })
}

fn cmd_kraw(n: u64, prop: &str, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let props: Vec<Property> = if prop == "all" {
        let (run, skip): (Vec<Property>, Vec<Property>) =
            Property::ALL.into_iter().partition(|p| n <= p.max_n());
        for p in skip {
            writeln!(err, "skipping {p}: checked only for n ≤ {}", p.max_n())?;
        }
        run
    } else {
        vec![prop.parse()?]
    };
    let mut ok = true;
    for p in props {
        let r = check_property(p, n)?;
        ok &= r.passed();
        writeln!(
            out,
            "{} n={} checks={} violations={} max_slack={} {}",
            r.property,
            r.n,
            r.checks,
            r.violations,
            fmt17(r.max_slack),
            status(r.passed())
        )?;
    }
    Ok(if ok { EXIT_OK } else { EXIT_VIOLATION })
}

fn parse_xi(spec: &str, d: usize) -> Result<TorusPoint> {
    if let Some(v) = spec.strip_prefix("const:") {
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad constant '{v}'")))?;
        return Ok(TorusPoint::constant(d, v));
    }
    let vals = spec
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad coordinate '{s}'")))
        })
        .collect::<Result<Vec<_>>>()?;
    if vals.len() != d {
        return Err(Error::pre(format!(
            "--xi has {} coordinates, expected d={d}",
            vals.len()
        )));
    }
    if let Some(bad) = vals.iter().find(|v| !v.is_finite()) {
        return Err(Error::Parse(format!("coordinate {bad} is not finite")));
    }
    Ok(TorusPoint::wrap(vals))
}

const TAG_MULT: u64 = 0x4D55_4C54;

fn cmd_mult(
    d: usize,
    t: u64,
    xi: Option<String>,
    random: Option<u64>,
    seed: u64,
    out: &mut dyn Write,
) -> Result<i32> {
    let points = match (xi, random) {
        (Some(s), _) => vec![parse_xi(&s, d)?],
        (None, Some(k)) => (0..k)
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, TAG_MULT, i));
                TorusPoint::wrap((0..d).map(|_| rng.random_range(-0.5..0.5)))
            })
            .collect(),
        (None, None) => return Err(Error::pre("give either --xi or --random")),
    };
    for xi in points {
        let m = m_fast(d, t, &xi)?;
        let s = s_fast(d, t, &xi)?;
        writeln!(
            out,
            "xi={} m={} s={} lambda1={} lambda2={} V={}",
            crate::verifier::witness_string(&xi),
            fmt17(m.re()),
            fmt17(s),
            fmt17(lambda1(d, t, &xi)?),
            fmt17(lambda2(d, t, &xi)?),
            frequency_split(&xi).v_size
        )?;
    }
    Ok(EXIT_OK)
}

fn cmd_verify(a: VerifyArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let ids: Vec<InequalityId> = if a.id == "all" {
        InequalityId::ALL.to_vec()
    } else {
        vec![a.id.parse()?]
    };
    let strategies: Vec<Strategy> = if a.strategy == "all" {
        Strategy::ALL.to_vec()
    } else {
        vec![a.strategy.parse()?]
    };
    if a.samples == 0 {
        return Err(Error::pre("--samples must be at least 1"));
    }
    let single = ids.len() == 1;
    let mut pairs: Vec<(InequalityId, usize, u64)> = Vec::new();
    for id in &ids {
        match (a.d, a.t) {
            (None, _) => pairs.extend(id.default_matrix().into_iter().map(|(d, t)| (*id, d, t))),
            (Some(d), Some(t)) => {
                if single {
                    id.check(d, t)?;
                    pairs.push((*id, d, t));
                } else if id.check(d, t).is_ok() {
                    pairs.push((*id, d, t));
                }
            }
            (Some(d), None) => {
                let ts = id.default_ts(d);
                if single && ts.is_empty() {
                    id.check(d, 1)?;
                }
                pairs.extend(ts.into_iter().map(|t| (*id, d, t)));
            }
        }
    }
    if pairs.is_empty() {
        return Err(Error::pre("no catalog entry admits the given (d, t)"));
    }
    let mut reports = Vec::new();
    for (id, d, t) in pairs {
        for &s in &strategies {
            reports.push(verify_inequality(
                id,
                d,
                t,
                &XiSampler::new(s, a.seed, a.samples),
            )?);
        }
    }
    emit(&verify_csv(&reports), &a.out, out)?;
    let violations: u64 = reports.iter().map(|r| r.violations).sum();
    writeln!(
        err,
        "{} reports, {violations} violations {}",
        reports.len(),
        status(violations == 0)
    )?;
    Ok(if violations == 0 {
        EXIT_OK
    } else {
        EXIT_VIOLATION
    })
}

fn parse_p(s: &str) -> Result<f64> {
    if s == "inf" || s == "∞" {
        return Ok(f64::INFINITY);
    }
    let p: f64 = s
        .parse()
        .map_err(|_| Error::Parse(format!("bad exponent '{s}'")))?;
    if !(p >= 1.0) {
        return Err(Error::pre(format!("p must be at least 1, got {p}")));
    }
    Ok(p)
}

fn cmd_operator(a: OperatorArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let ps = a.p.iter().map(|s| parse_p(s)).collect::<Result<Vec<_>>>()?;
    let need_n = || {
        a.n.ok_or_else(|| Error::pre(format!("--N is required for the {} probe", a.probe)))
    };
    let rows: Vec<ProbeRow> = match a.probe.as_str() {
        "delta" => {
            if a.r.is_some_and(|r| r != 0) {
                return Err(Error::pre("the delta probe uses R=0"));
            }
            let ps = if ps.is_empty() { vec![2.0] } else { ps };
            ps.iter()
                .map(|&p| Ok(delta_probe(a.d, p, DELTA_SPATIAL_MAX_D)?.0))
                .collect::<Result<_>>()?
        }
        "random" => {
            let ps = if ps.is_empty() { vec![2.0, 4.0] } else { ps };
            if let Some(p) = ps.iter().find(|p| **p < 2.0) {
                writeln!(
                    err,
                    "note: the 30^(4/p) bound is stated for p ≥ 2, got p={p}"
                )?;
            }
            random_probe(a.d, need_n()?, &ps, a.trials, a.seed)?
        }
        "semigroup" => {
            let n = need_n()?;
            vec![
                semigroup_probe(a.d, n, HeatFamily::First, a.trials, a.seed)?,
                semigroup_probe(a.d, n, HeatFamily::Second, a.trials, a.seed)?,
            ]
        }
        "difference" => vec![difference_probe(a.d, need_n()?, a.trials, a.seed)?],
        other => {
            return Err(Error::Parse(format!(
                "unknown probe '{other}' (delta, random, semigroup, difference)"
            )))
        }
    };
    if let Some(n) = a.n {
        let need = 2 * (a.d as f64).sqrt().floor() as usize + 1;
        if n < need && a.probe != "delta" {
            writeln!(
                err,
                "note: N={n} < {need}, the largest kernel wraps around the grid"
            )?;
        }
    }
    emit(&probe_csv(&rows), &a.out, out)?;
    let ok = rows.iter().all(|r| r.pass);
    writeln!(err, "{} probes {}", rows.len(), status(ok))?;
    Ok(if ok { EXIT_OK } else { EXIT_VIOLATION })
}

fn cmd_sweep(a: SweepArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let id: InequalityId = a.id.parse()?;
    let rule: TRule = a.t_rule.parse()?;
    if a.samples == 0 {
        return Err(Error::pre("--samples must be at least 1"));
    }
    let rows = tightness_sweep(id, &a.d_list, rule, a.samples, a.seed)?;
    emit(&sweep_csv(&rows), &a.out, out)?;
    let ok = rows.iter().all(|r| r.ratio <= 1.0);
    writeln!(err, "{} rows {}", rows.len(), status(ok))?;
    Ok(if ok { EXIT_OK } else { EXIT_VIOLATION })
}

fn cmd_constants(out: &mut dyn Write) -> Result<i32> {
    let ch = constant_chain();
    writeln!(out, "c={}", fmt17(decay_constant()))?;
    writeln!(out, "2e={}", fmt17(2.0 * std::f64::consts::E))?;
    writeln!(out, "8/3={}", fmt17(MIN_SUM_BOUND))?;
    writeln!(
        out,
        "chain=6+2sqrt2+(56/c)(4/sqrt3)={} <= {CHAIN_BOUND} {}",
        fmt17(ch.total),
        status(ch.total <= CHAIN_BOUND)
    )?;
    for (label, p) in [("2", 2.0), ("3", 3.0), ("4", 4.0), ("inf", f64::INFINITY)] {
        writeln!(out, "30^(4/{label})={}", fmt17(lp_bound(p)))?;
    }
    Ok(if ch.total <= CHAIN_BOUND {
        EXIT_OK
    } else {
        EXIT_VIOLATION
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let argv = std::iter::once("l1ml").chain(args.iter().copied());
        let code = run_with(argv, &mut out, &mut err);
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn count_example() {
        let (code, out, _) = run(&["count", "--d", "4", "--t", "2"]);
        assert_eq!(code, 0);
        assert!(out.starts_with("sphere=24 ball=41 ratio=17/24 in [0.5, 2.718281828459045"));
        assert!(out.trim_end().ends_with("PASS"));
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(
            run(&["verify", "--id", "COR_2_5", "--d", "3", "--t", "2"]).0,
            2
        );
        assert_eq!(run(&["count", "--d", "4"]).0, 2);
        assert_eq!(run(&["bogus"]).0, 2);
        assert_eq!(
            run(&["mult", "--d", "3", "--t", "1", "--xi", "0.1,x,0.2"]).0,
            2
        );
    }

    #[test]
    fn xi_parsing() {
        let xi = parse_xi("const:0.5", 3).unwrap();
        assert_eq!(xi.coords(), &[-0.5, -0.5, -0.5]);
        let xi = parse_xi("0.75, 0.1", 2).unwrap();
        assert_eq!(xi.coords(), &[-0.25, 0.1]);
        assert!(parse_xi("0.1", 2).is_err());
    }

    #[test]
    fn constants_pass() {
        let (code, out, _) = run(&["constants"]);
        assert_eq!(code, 0);
        assert!(out.contains("chain="));
        assert!(out.contains("30^(4/inf)=1.0000000000000000e0"));
    }
}
