//! Krawtchouk polynomials
//!
//! `kr_k⁽ⁿ⁾(x) = C(n,k)⁻¹ · Σ_{j=0}^{k} (-1)ʲ C(x,j) C(n-x,k-j)`
//!
//! evaluated exactly in rationals at integer points and in double-double
//! arithmetic at real points, together with checks of symmetry, reflection,
//! orthogonality, root location and the uniform exponential bound.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::combinatorics::binomial;
use crate::error::{Error, Result};
use crate::numeric::DoubleDouble;

/// Largest `n` accepted by the exact orthogonality check.
pub const ORTHOGONALITY_MAX_N: u64 = 20;
/// Largest `n` accepted by the uniform-bound and symmetry checks.
pub const UNIFORM_BOUND_MAX_N: u64 = 60;
/// Largest `n` accepted by the root-location check.
pub const ROOTS_MAX_N: u64 = 30;
/// Slack allowed on the root interval end points.
pub const ROOT_INTERVAL_TOL: f64 = 1e-8;
/// Bisection stops once the bracket is narrower than this.
pub const BISECTION_WIDTH: f64 = 1e-10;
/// Grid points per unit length in the sign scan.
pub const SCAN_POINTS_PER_UNIT: usize = 16;

/// The decay rate `c = -2·log(0.93)` in the uniform bound
/// `|kr_k⁽ⁿ⁾(x)| ≤ exp(-c·k·x/n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayConstant {
    pub c: f64,
}

impl DecayConstant {
    pub fn new() -> Self {
        Self {
            c: -2.0 * 0.93f64.ln(),
        }
    }
}

impl Default for DecayConstant {
    fn default() -> Self {
        Self::new()
    }
}

/// Shorthand for `DecayConstant::new().c`.
pub fn decay_constant() -> f64 {
    DecayConstant::new().c
}

/// Degree `k` and ambient size `n` of a Krawtchouk polynomial, `0 ≤ k ≤ n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KrawtchoukParams {
    n: u64,
    k: u64,
}

impl KrawtchoukParams {
    pub fn new(n: u64, k: u64) -> Result<Self> {
        if k > n {
            return Err(Error::pre(format!("Krawtchouk degree k={k} exceeds n={n}")));
        }
        Ok(Self { n, k })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    /// `C(n,k)·kr_k⁽ⁿ⁾(x)`, always an integer.
    pub fn numerator(&self, x: u64) -> Result<BigInt> {
        if x > self.n {
            return Err(Error::pre(format!(
                "Krawtchouk argument x={x} outside [0, {}]",
                self.n
            )));
        }
        let (n, k) = (self.n, self.k as i64);
        let mut acc = BigInt::zero();
        for j in 0..=k {
            let term = binomial(x, j).to_bigint() * binomial(n - x, k - j).to_bigint();
            if j % 2 == 0 {
                acc += term;
            } else {
                acc -= term;
            }
        }
        Ok(acc)
    }

    pub fn exact(&self, x: u64) -> Result<BigRational> {
        Ok(BigRational::new(
            self.numerator(x)?,
            binomial(self.n, self.k as i64).to_bigint(),
        ))
    }

    pub fn real(&self, x: f64) -> f64 {
        self.real_dd(x).to_f64()
    }

    /// Same alternating sum with generalised binomials, accumulated in
    /// double-double so cancellation costs no more than ~1e-30 absolute.
    pub fn real_dd(&self, x: f64) -> DoubleDouble {
        let k = self.k as usize;
        let xs = DoubleDouble::new(x);
        let ys = DoubleDouble::new(self.n as f64) - xs;
        let lower = generalized_binomials(xs, k);
        let upper = generalized_binomials(ys, k);
        let mut acc = DoubleDouble::ZERO;
        for j in 0..=k {
            let term = lower[j] * upper[k - j];
            acc = if j % 2 == 0 { acc + term } else { acc - term };
        }
        let norm = generalized_binomials(DoubleDouble::new(self.n as f64), k)[k];
        acc / norm
    }
}

/// `C(x, j)` for `j = 0..=k` via `C(x, j+1) = C(x, j)·(x - j)/(j + 1)`.
fn generalized_binomials(x: DoubleDouble, k: usize) -> Vec<DoubleDouble> {
    let mut out = Vec::with_capacity(k + 1);
    let mut cur = DoubleDouble::ONE;
    out.push(cur);
    for j in 0..k {
        cur = cur * (x - DoubleDouble::new(j as f64)) / DoubleDouble::new((j + 1) as f64);
        out.push(cur);
    }
    out
}

/// Exact `kr_k⁽ⁿ⁾(x)` for integer `0 ≤ x ≤ n`.
pub fn kr_exact(n: u64, k: u64, x: u64) -> Result<BigRational> {
    KrawtchoukParams::new(n, k)?.exact(x)
}

/// Floating `kr_k⁽ⁿ⁾(x)` for any real `x`.
pub fn kr_real(n: u64, k: u64, x: f64) -> Result<f64> {
    Ok(KrawtchoukParams::new(n, k)?.real(x))
}

/// All exact values `kr_k⁽ⁿ⁾(x)`, indexed `[k][x]`.
#[derive(Debug, Clone)]
pub struct KrawtchoukTable {
    n: u64,
    values: Vec<Vec<BigRational>>,
}

impl KrawtchoukTable {
    pub fn new(n: u64) -> Result<Self> {
        let values = (0..=n)
            .map(|k| {
                let p = KrawtchoukParams::new(n, k)?;
                (0..=n).map(|x| p.exact(x)).collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { n, values })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn get(&self, k: u64, x: u64) -> &BigRational {
        &self.values[k as usize][x as usize]
    }

    /// Row `k` converted to `f64`.
    pub fn row_f64(&self, k: u64) -> Vec<f64> {
        self.values[k as usize]
            .iter()
            .map(|v| v.to_f64().unwrap_or(f64::NAN))
            .collect()
    }
}

/// The five classical properties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Property {
    Symmetry,
    Reflection,
    Orthogonality,
    Roots,
    UniformBound,
}

impl Property {
    pub const ALL: [Property; 5] = [
        Property::Symmetry,
        Property::Reflection,
        Property::Orthogonality,
        Property::Roots,
        Property::UniformBound,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Property::Symmetry => "symmetry",
            Property::Reflection => "reflection",
            Property::Orthogonality => "orthogonality",
            Property::Roots => "roots",
            Property::UniformBound => "uniform",
        }
    }

    /// Largest `n` the check runs for.
    pub fn max_n(&self) -> u64 {
        match self {
            Property::Orthogonality => ORTHOGONALITY_MAX_N,
            Property::Roots => ROOTS_MAX_N,
            Property::Symmetry | Property::Reflection | Property::UniformBound => {
                UNIFORM_BOUND_MAX_N
            }
        }
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Property {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "symmetry" => Ok(Property::Symmetry),
            "reflection" => Ok(Property::Reflection),
            "orthogonality" => Ok(Property::Orthogonality),
            "roots" => Ok(Property::Roots),
            "uniform" | "uniform_bound" => Ok(Property::UniformBound),
            other => Err(Error::Parse(format!(
                "unknown Krawtchouk property '{other}'"
            ))),
        }
    }
}

/// Where a property check failed worst.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Witness {
    pub k: u64,
    pub x: f64,
}

/// Aggregate outcome of one property check at a fixed `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct KrawtchoukReport {
    pub property: Property,
    pub n: u64,
    pub checks: u64,
    pub violations: u64,
    /// Largest slack seen; positive values are violations. Exact checks report
    /// 0 when every identity holds and 1 otherwise.
    pub max_slack: f64,
    pub witness: Option<Witness>,
}

impl KrawtchoukReport {
    fn new(property: Property, n: u64) -> Self {
        Self {
            property,
            n,
            checks: 0,
            violations: 0,
            max_slack: f64::NEG_INFINITY,
            witness: None,
        }
    }

    fn record(&mut self, slack: f64, violated: bool, k: u64, x: f64) {
        self.checks += 1;
        if violated {
            self.violations += 1;
        }
        if slack > self.max_slack {
            self.max_slack = slack;
            self.witness = Some(Witness { k, x });
        }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Checks one property for every admissible `(k, x)` at size `n`.
pub fn check_property(property: Property, n: u64) -> Result<KrawtchoukReport> {
    if n > property.max_n() {
        return Err(Error::pre(format!(
            "{property} check limited to n ≤ {}, got n={n}",
            property.max_n()
        )));
    }
    match property {
        Property::Roots => return check_roots(n),
        Property::UniformBound => return check_uniform_bound(n),
        _ => {}
    }
    let table = KrawtchoukTable::new(n)?;
    let mut report = KrawtchoukReport::new(property, n);
    match property {
        Property::Symmetry => {
            for k in 0..=n {
                for x in 0..=n {
                    let ok = table.get(k, x) == table.get(x, k);
                    report.record(if ok { 0.0 } else { 1.0 }, !ok, k, x as f64);
                }
            }
        }
        Property::Reflection => {
            for k in 0..=n {
                for x in 0..=n {
                    let mut rhs = table.get(k, x).clone();
                    if k % 2 == 1 {
                        rhs = -rhs;
                    }
                    let ok = *table.get(k, n - x) == rhs;
                    report.record(if ok { 0.0 } else { 1.0 }, !ok, k, x as f64);
                }
            }
        }
        Property::Orthogonality => {
            let two_pow_n = BigRational::from_integer(BigInt::one() << n as usize);
            for k in 0..=n {
                for x in 0..=n {
                    let mut sum = BigRational::zero();
                    for j in 0..=n {
                        sum += BigRational::from_integer(binomial(n, j as i64).to_bigint())
                            * table.get(k, j)
                            * table.get(x, j);
                    }
                    let expected = if k == x {
                        &two_pow_n / BigRational::from_integer(binomial(n, k as i64).to_bigint())
                    } else {
                        BigRational::zero()
                    };
                    let ok = sum == expected;
                    report.record(if ok { 0.0 } else { 1.0 }, !ok, k, x as f64);
                }
            }
        }
        Property::Roots | Property::UniformBound => unreachable!(),
    }
    Ok(report)
}

fn check_uniform_bound(n: u64) -> Result<KrawtchoukReport> {
    let c = decay_constant();
    let mut report = KrawtchoukReport::new(Property::UniformBound, n);
    // integers with 2k ≤ n
    let half = n / 2;
    for k in 0..=half {
        let p = KrawtchoukParams::new(n, k)?;
        for x in 0..=half {
            let value = p.exact(x)?.abs();
            if k == 0 || x == 0 {
                // the bound is exactly 1 and |kr| is exactly 1
                let ok = value.is_one();
                report.record(if ok { 0.0 } else { 1.0 }, !ok, k, x as f64);
                continue;
            }
            let bound = (-c * (k * x) as f64 / n as f64).exp();
            let slack = value.to_f64().unwrap_or(f64::NAN) - bound;
            report.record(slack, !(slack <= 0.0), k, x as f64);
        }
    }
    Ok(report)
}

/// Roots of `kr_k⁽ⁿ⁾` on `[0, n]` found by a sign scan on a grid of `16·n`
/// cells then bisection.
pub fn find_roots(n: u64, k: u64) -> Result<Vec<f64>> {
    let p = KrawtchoukParams::new(n, k)?;
    let cells = SCAN_POINTS_PER_UNIT * n as usize;
    let mut roots = Vec::new();
    if cells == 0 {
        return Ok(roots);
    }
    let h = 1.0 / SCAN_POINTS_PER_UNIT as f64;
    let sign = |x: f64| p.real_dd(x).hi().signum();
    let mut last: Option<(f64, f64)> = None;
    for i in 0..=cells {
        let x = i as f64 * h;
        let v = p.real_dd(x).hi();
        if v == 0.0 {
            continue;
        }
        if let Some((lx, lv)) = last {
            if lv.signum() != v.signum() {
                let (mut a, mut b) = (lx, x);
                let sa = sign(a);
                while b - a > BISECTION_WIDTH {
                    let m = 0.5 * (a + b);
                    let sm = sign(m);
                    if sm == 0.0 {
                        a = m;
                        b = m;
                        break;
                    }
                    if sm == sa {
                        a = m;
                    } else {
                        b = m;
                    }
                }
                roots.push(0.5 * (a + b));
            }
        }
        last = Some((x, v));
    }
    Ok(roots)
}

fn check_roots(n: u64) -> Result<KrawtchoukReport> {
    let mut report = KrawtchoukReport::new(Property::Roots, n);
    for k in 0..=n {
        let roots = find_roots(n, k)?;
        let radius = ((k * (n - k)) as f64).sqrt();
        let lo = n as f64 / 2.0 - radius - ROOT_INTERVAL_TOL;
        let hi = n as f64 / 2.0 + radius + ROOT_INTERVAL_TOL;
        if roots.len() as u64 != k {
            report.record(1.0, true, k, f64::NAN);
        }
        for r in roots {
            let slack = (lo - r).max(r - hi);
            report.record(slack, slack > 0.0, k, r);
        }
    }
    if report.checks == 0 {
        report.max_slack = 0.0;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::CompensatedSum;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn decay_constant_from_closed_form() {
        // -2·log(1 - 0.07) = 2·Σ 0.07ᵏ/k
        let series: f64 = (1..60).map(|k| 2.0 * 0.07f64.powi(k) / k as f64).sum();
        let c = decay_constant();
        assert!((c - series).abs() < 1e-12, "{c} vs {series}");
        assert!((c - 0.14514).abs() < 1e-5);
    }

    #[test]
    fn degree_zero_and_origin() {
        for n in 0..8 {
            for x in 0..=n {
                assert_eq!(kr_exact(n, 0, x).unwrap(), BigRational::one());
            }
            for k in 0..=n {
                assert_eq!(kr_exact(n, k, 0).unwrap(), BigRational::one());
            }
        }
    }

    #[test]
    fn degree_one_is_linear() {
        // kr_1(x) = (n - 2x)/n
        assert_eq!(kr_exact(4, 1, 1).unwrap(), rat(1, 2));
        for n in 1..10i64 {
            for x in 0..=n {
                assert_eq!(kr_exact(n as u64, 1, x as u64).unwrap(), rat(n - 2 * x, n));
            }
        }
        assert_eq!(kr_real(4, 1, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn parameter_errors() {
        assert!(kr_exact(3, 4, 0).is_err());
        assert!(kr_exact(3, 1, 4).is_err());
        assert!(kr_real(3, 4, 0.5).is_err());
        assert!(check_property(Property::Orthogonality, 21).is_err());
        assert!(check_property(Property::Roots, 31).is_err());
        assert!(check_property(Property::UniformBound, 61).is_err());
    }

    #[test]
    fn numerators_are_integers_and_match() {
        for n in 0..=12u64 {
            for k in 0..=n {
                let p = KrawtchoukParams::new(n, k).unwrap();
                let norm = binomial(n, k as i64).to_bigint();
                for x in 0..=n {
                    let v = p.exact(x).unwrap() * BigRational::from_integer(norm.clone());
                    assert!(v.is_integer());
                    assert_eq!(v.to_integer(), p.numerator(x).unwrap());
                }
            }
        }
    }

    #[test]
    fn real_matches_exact_at_integers() {
        for n in 0..=60u64 {
            for k in 0..=n {
                let p = KrawtchoukParams::new(n, k).unwrap();
                for x in 0..=n {
                    let exact = p.exact(x).unwrap().to_f64().unwrap();
                    let real = p.real(x as f64);
                    let floor = if exact == 0.0 { 1e-25 } else { 0.0 };
                    assert!(
                        (real - exact).abs() <= 1e-10 * exact.abs() + floor,
                        "n={n} k={k} x={x}: {real} vs {exact}"
                    );
                }
            }
        }
    }

    /// Independent evaluation of the defining sum: plain doubles, terms built
    /// from the falling factorial directly, summed from the highest index down.
    fn kr_reference(n: u64, k: u64, x: f64) -> f64 {
        let falling = |y: f64, j: u64| -> f64 {
            let mut num = 1.0;
            let mut den = 1.0;
            for i in 0..j {
                num *= y - i as f64;
                den *= (i + 1) as f64;
            }
            num / den
        };
        let mut acc = CompensatedSum::new();
        for j in (0..=k).rev() {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            acc.add(sign * falling(x, j) * falling(n as f64 - x, k - j));
        }
        acc.value() / binomial(n, k as i64).to_f64()
    }

    #[test]
    fn real_matches_reference_off_integers() {
        let v = kr_real(10, 3, 1.5).unwrap();
        let r = kr_reference(10, 3, 1.5);
        assert!((v - r).abs() <= 1e-12 * r.abs().max(1.0), "{v} vs {r}");
        for (n, k, x) in [
            (7u64, 2u64, 0.3f64),
            (12, 5, 6.25),
            (9, 9, 4.5),
            (15, 4, -1.5),
        ] {
            let v = kr_real(n, k, x).unwrap();
            let r = kr_reference(n, k, x);
            assert!(
                (v - r).abs() <= 1e-11 * r.abs().max(1.0),
                "{n},{k},{x}: {v} vs {r}"
            );
        }
    }

    #[test]
    fn exact_properties_small_n() {
        for prop in [
            Property::Symmetry,
            Property::Reflection,
            Property::Orthogonality,
        ] {
            for n in 0..=12 {
                let r = check_property(prop, n).unwrap();
                assert!(r.passed(), "{prop} n={n}: {r:?}");
                assert_eq!(r.checks, (n + 1) * (n + 1));
            }
        }
    }

    #[test]
    fn orthogonality_off_diagonal_vanishes() {
        let t = KrawtchoukTable::new(10).unwrap();
        let mut sum = BigRational::zero();
        for j in 0..=10u64 {
            sum += BigRational::from_integer(binomial(10, j as i64).to_bigint())
                * t.get(3, j)
                * t.get(5, j);
        }
        assert!(sum.is_zero());
    }

    #[test]
    fn uniform_bound_n40() {
        let r = check_property(Property::UniformBound, 40).unwrap();
        assert!(r.passed());
        assert!(r.max_slack <= 0.0);
    }

    #[test]
    fn roots_simple_cases() {
        assert!(find_roots(5, 0).unwrap().is_empty());
        let r = find_roots(4, 1).unwrap();
        assert_eq!(r.len(), 1);
        assert!((r[0] - 2.0).abs() < 1e-9);
        // C(4,2)·kr_2(x) = C(4-x,2) - x(4-x) + C(x,2) = 2(x-1)(x-3)
        let r = find_roots(4, 2).unwrap();
        assert_eq!(r.len(), 2);
        assert!((r[0] - 1.0).abs() < 1e-9, "{r:?}");
        assert!((r[1] - 3.0).abs() < 1e-9, "{r:?}");
    }

    #[test]
    fn root_interval_holds_up_to_half_degree() {
        for n in 1..=30u64 {
            for k in 0..=n / 2 {
                let roots = find_roots(n, k).unwrap();
                assert_eq!(roots.len() as u64, k);
                let radius = ((k * (n - k)) as f64).sqrt();
                for r in roots {
                    assert!(
                        (r - n as f64 / 2.0).abs() <= radius + ROOT_INTERVAL_TOL,
                        "n={n} k={k} r={r}"
                    );
                }
            }
        }
    }

    #[test]
    fn root_interval_fails_above_half_degree() {
        // C(2,2)·kr_2(x) = C(2-x,2) - x(2-x) + C(x,2) = 2x² - 4x + 1,
        // roots 1 ± 1/√2 against the degenerate interval [1, 1]
        let r = find_roots(2, 2).unwrap();
        assert_eq!(r.len(), 2);
        assert!((r[0] - (1.0 - 0.5f64.sqrt())).abs() < 1e-9, "{r:?}");
        assert!((r[1] - (1.0 + 0.5f64.sqrt())).abs() < 1e-9, "{r:?}");
        let report = check_property(Property::Roots, 2).unwrap();
        assert_eq!(report.violations, 2);
        assert_eq!(report.witness.unwrap().k, 2);
    }

    #[test]
    fn integer_sign_changes_equal_degree() {
        for n in 1..=30u64 {
            let table = KrawtchoukTable::new(n).unwrap();
            for k in 0..=n {
                let row = table.row_f64(k);
                let signs: Vec<f64> = row
                    .iter()
                    .filter(|v| **v != 0.0)
                    .map(|v| v.signum())
                    .collect();
                let changes = signs.windows(2).filter(|w| w[0] != w[1]).count() as u64;
                assert_eq!(changes, k, "n={n} k={k}");
            }
        }
    }

    #[test]
    fn property_names_round_trip() {
        for p in Property::ALL {
            assert_eq!(p.name().parse::<Property>().unwrap(), p);
        }
        assert!("bogus".parse::<Property>().is_err());
    }
}
