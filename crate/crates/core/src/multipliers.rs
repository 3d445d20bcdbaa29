//! Fourier symbols of the ball and sphere averages on the torus `[-1/2, 1/2)ᵈ`,
//! and the two heat-type comparison symbols.
//!
//! Every symbol derived from a lattice set has two evaluators: a brute-force
//! oracle that sums phases `e(x·ξ)` over the enumerated set, and a
//! polynomial-time evaluator. The oracles are the ground truth in tests.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::sync::{Mutex, OnceLock};

use num_complex::Complex64;
use num_traits::ToPrimitive;

use crate::combinatorics::{
    ball_count_layered, enumerate_sphere_capped, enumeration_cap, sphere_count,
};
use crate::error::{Error, Result};
use crate::krawtchouk::KrawtchoukParams;
use crate::numeric::CompensatedSum;

/// Imaginary parts of the real symbols larger than this are reported as
/// internal errors.
pub const IMAGINARY_TOL: f64 = 1e-9;

/// Largest `|S_t|` for which the `λ²` prefactor is recomputed by enumeration.
pub const PREFACTOR_ENUM_LIMIT: u64 = 1 << 20;

/// Largest dimension for which signed sphere averages are enumerated.
pub const SIGNED_AVERAGE_MAX_D: usize = 12;

/// Reduces a real number into `[-1/2, 1/2)`; `+1/2` maps to `-1/2`.
pub fn wrap_coordinate(x: f64) -> f64 {
    if (-0.5..0.5).contains(&x) {
        return x;
    }
    let r = x - (x + 0.5).floor();
    if r >= 0.5 {
        r - 1.0
    } else if r < -0.5 {
        r + 1.0
    } else {
        r
    }
}

/// A frequency in the fundamental domain `[-1/2, 1/2)ᵈ`.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusPoint {
    xi: Vec<f64>,
}

impl TorusPoint {
    /// Accepts coordinates already inside the fundamental domain.
    pub fn new(xi: Vec<f64>) -> Result<Self> {
        if xi.is_empty() {
            return Err(Error::pre("torus point needs at least one coordinate"));
        }
        if let Some(bad) = xi.iter().find(|v| !(-0.5..0.5).contains(*v)) {
            return Err(Error::pre(format!(
                "coordinate {bad} outside the fundamental domain [-1/2, 1/2)"
            )));
        }
        Ok(Self { xi })
    }

    /// Wraps arbitrary reals into the fundamental domain.
    pub fn wrap(values: impl IntoIterator<Item = f64>) -> Self {
        Self {
            xi: values.into_iter().map(wrap_coordinate).collect(),
        }
    }

    pub fn zero(d: usize) -> Self {
        Self { xi: vec![0.0; d] }
    }

    pub fn constant(d: usize, v: f64) -> Self {
        Self::wrap(std::iter::repeat_n(v, d))
    }

    pub fn coords(&self) -> &[f64] {
        &self.xi
    }

    pub fn dim(&self) -> usize {
        self.xi.len()
    }

    /// `Σ sin²(πξᵢ)`
    pub fn sin2_sum(&self) -> f64 {
        self.xi
            .iter()
            .map(|x| (PI * x).sin().powi(2))
            .collect::<CompensatedSum>()
            .value()
    }

    /// `Σ cos²(πξᵢ)`
    pub fn cos2_sum(&self) -> f64 {
        self.xi
            .iter()
            .map(|x| (PI * x).cos().powi(2))
            .collect::<CompensatedSum>()
            .value()
    }
}

/// Complex value of a symbol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiplierValue(pub Complex64);

impl MultiplierValue {
    pub fn re(&self) -> f64 {
        self.0.re
    }

    pub fn im(&self) -> f64 {
        self.0.im
    }

    pub fn abs(&self) -> f64 {
        self.0.norm()
    }
}

/// High-frequency coordinates `V_ξ = {i : cos(2πξᵢ) < 0} = {i : |ξᵢ| > 1/4}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequencySplit {
    pub v_size: usize,
    pub mask: Vec<bool>,
}

impl FrequencySplit {
    /// Bitmask form; `d ≤ 64`.
    pub fn bits(&self) -> u64 {
        self.mask
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .fold(0u64, |m, (i, _)| m | (1u64 << i))
    }

    /// `|V_ξ| ≤ d/2`
    pub fn low_branch(&self) -> bool {
        2 * self.v_size <= self.mask.len()
    }

    /// `|V_ξ| ≥ d/2`
    pub fn high_branch(&self) -> bool {
        2 * self.v_size >= self.mask.len()
    }
}

/// The boundary `|ξᵢ| = 1/4` is not in `V_ξ` since `cos(π/2) = 0`.
pub fn frequency_split(xi: &TorusPoint) -> FrequencySplit {
    let mask: Vec<bool> = xi.coords().iter().map(|x| x.abs() > 0.25).collect();
    FrequencySplit {
        v_size: mask.iter().filter(|&&b| b).count(),
        mask,
    }
}

fn check_dims(d: usize, t: u64, xi: &TorusPoint) -> Result<()> {
    if xi.dim() != d {
        return Err(Error::pre(format!(
            "frequency has {} coordinates, expected d={d}",
            xi.dim()
        )));
    }
    if t < 1 || t > d as u64 {
        return Err(Error::pre(format!("require 1 ≤ t ≤ d, got d={d}, t={t}")));
    }
    Ok(())
}

fn cis(x: f64) -> Complex64 {
    Complex64::cis(2.0 * PI * x)
}

/// Phase tables `phases[j][x + t] = e(x·ξⱼ)` for `|x| ≤ t`.
fn phase_tables(xi: &TorusPoint, t: u64) -> Vec<Vec<Complex64>> {
    let t = t as i64;
    xi.coords()
        .iter()
        .map(|&x| (-t..=t).map(|k| cis(k as f64 * x)).collect())
        .collect()
}

struct PhaseWalk<'a> {
    phases: &'a [Vec<Complex64>],
    t: i64,
    sphere: bool,
    // last_partial[r] = Σ_{|x|≤r} e(x·ξ_d)
    last_partial: Vec<Complex64>,
    sum: Complex64,
    count: u64,
}

impl PhaseWalk<'_> {
    /// Depth-first walk over every lattice point of the set, multiplying the
    /// per-coordinate phases along the path.
    fn walk(&mut self, j: usize, remaining: i64, prefix: Complex64) {
        let d = self.phases.len();
        let row = &self.phases[j];
        let last = j + 1 == d;
        if self.sphere {
            let positions_after = (d - j - 1) as i64;
            for x in [-1i64, 0, 1] {
                let left = remaining - x.abs();
                if left < 0 || left > positions_after {
                    continue;
                }
                let p = prefix * row[(x + self.t) as usize];
                if last {
                    self.sum += p;
                    self.count += 1;
                } else {
                    self.walk(j + 1, left, p);
                }
            }
        } else if last {
            self.sum += prefix * self.last_partial[remaining as usize];
            self.count += (2 * remaining + 1) as u64;
        } else if j + 2 == d {
            let mut acc = Complex64::new(0.0, 0.0);
            for x in -remaining..=remaining {
                let left = remaining - x.abs();
                acc += row[(x + self.t) as usize] * self.last_partial[left as usize];
                self.count += (2 * left + 1) as u64;
            }
            self.sum += prefix * acc;
        } else {
            for x in -remaining..=remaining {
                let p = prefix * row[(x + self.t) as usize];
                self.walk(j + 1, remaining - x.abs(), p);
            }
        }
    }
}

fn phase_sum(xi: &TorusPoint, t: u64, sphere: bool) -> (Complex64, u64) {
    let phases = phase_tables(xi, t);
    let ti = t as i64;
    let row = &phases[phases.len() - 1];
    let mut last_partial = vec![row[ti as usize]];
    for r in 1..=ti {
        let prev = last_partial[(r - 1) as usize];
        last_partial.push(prev + row[(ti + r) as usize] + row[(ti - r) as usize]);
    }
    let mut walk = PhaseWalk {
        phases: &phases,
        t: ti,
        sphere,
        last_partial,
        sum: Complex64::new(0.0, 0.0),
        count: 0,
    };
    walk.walk(0, t as i64, Complex64::new(1.0, 0.0));
    (walk.sum, walk.count)
}

/// `s_t(ξ) = |S_t|⁻¹ Σ_{x∈S_t} e(x·ξ)` by enumeration.
pub fn s_enum(d: usize, t: u64, xi: &TorusPoint) -> Result<MultiplierValue> {
    check_dims(d, t, xi)?;
    let expected = sphere_count(d as u64, t)?.ensure_within(enumeration_cap())?;
    let (sum, count) = phase_sum(xi, t, true);
    if count != expected {
        return Err(Error::Consistency(format!(
            "sphere walk visited {count} points, expected {expected}"
        )));
    }
    Ok(MultiplierValue(sum / count as f64))
}

/// `m_t(ξ) = |B_t ∩ ℤᵈ|⁻¹ Σ_{x∈B_t} e(x·ξ)` by enumeration.
pub fn m_enum(d: usize, t: u64, xi: &TorusPoint) -> Result<MultiplierValue> {
    check_dims(d, t, xi)?;
    let expected = ball_count_layered(d as u64, t).ensure_within(enumeration_cap())?;
    let (sum, count) = phase_sum(xi, t, false);
    if count != expected {
        return Err(Error::Consistency(format!(
            "ball walk visited {count} points, expected {expected}"
        )));
    }
    Ok(MultiplierValue(sum / count as f64))
}

/// `s_t(ξ)` as the normalised elementary symmetric polynomial of degree `t`
/// in `cos(2πξ₁), …, cos(2πξ_d)`, in `O(d·t)`.
///
/// The recurrence runs on `E[j][u] / C(j, u)`, i.e. the mean over `u`-subsets
/// of the first `j` coordinates, which keeps every intermediate in `[-1, 1]`.
pub fn s_fast(d: usize, t: u64, xi: &TorusPoint) -> Result<f64> {
    check_dims(d, t, xi)?;
    Ok(s_fast_unchecked(xi, t as usize))
}

fn s_fast_unchecked(xi: &TorusPoint, t: usize) -> f64 {
    let mut mean = vec![0.0f64; t + 1];
    mean[0] = 1.0;
    for (idx, &x) in xi.coords().iter().enumerate() {
        let j = idx + 1;
        let c = (2.0 * PI * x).cos();
        let jf = j as f64;
        for u in (1..=t.min(j)).rev() {
            let uf = u as f64;
            mean[u] = ((jf - uf) / jf) * mean[u] + (uf / jf) * c * mean[u - 1];
        }
    }
    mean[t]
}

/// `m_t(ξ)` by a dynamic program over coordinates tracking the ℓ¹ budget
/// spent so far, in `O(d·t²)`. Defined for every `t ≥ 0`.
pub fn m_fast(d: usize, t: u64, xi: &TorusPoint) -> Result<MultiplierValue> {
    if xi.dim() != d || d == 0 {
        return Err(Error::pre(format!(
            "frequency has {} coordinates, expected d={d} ≥ 1",
            xi.dim()
        )));
    }
    let t = t as usize;
    // spent[u]: sum over prefixes with exactly u spent; counts is the same at ξ = 0
    let mut spent = vec![Complex64::new(0.0, 0.0); t + 1];
    let mut counts = vec![0.0f64; t + 1];
    spent[0] = Complex64::new(1.0, 0.0);
    counts[0] = 1.0;
    let mut next = spent.clone();
    let mut next_counts = counts.clone();
    for &x in xi.coords() {
        // Σ_{x∈{±k}} e(x·ξⱼ)
        let shell: Vec<Complex64> = (0..=t)
            .map(|k| {
                if k == 0 {
                    Complex64::new(1.0, 0.0)
                } else {
                    cis(k as f64 * x) + cis(-(k as f64) * x)
                }
            })
            .collect();
        for u in 0..=t {
            let mut acc = Complex64::new(0.0, 0.0);
            let mut acc_n = 0.0;
            for k in 0..=u {
                acc += shell[k] * spent[u - k];
                acc_n += if k == 0 { 1.0 } else { 2.0 } * counts[u - k];
            }
            next[u] = acc;
            next_counts[u] = acc_n;
        }
        let scale = next_counts.iter().fold(0.0f64, |m, v| m.max(*v));
        for u in 0..=t {
            spent[u] = next[u] / scale;
            counts[u] = next_counts[u] / scale;
        }
    }
    let re: CompensatedSum = spent.iter().map(|z| z.re).collect();
    let im: CompensatedSum = spent.iter().map(|z| z.im).collect();
    let total: CompensatedSum = counts.iter().copied().collect();
    let value = Complex64::new(re.value(), im.value()) / total.value();
    if value.im.abs() > IMAGINARY_TOL {
        return Err(Error::Consistency(format!(
            "ball symbol has imaginary part {}",
            value.im
        )));
    }
    Ok(MultiplierValue(value))
}

/// `λ¹_t(ξ) = exp(-(t/d)·Σ sin²(πξᵢ))`.
pub fn lambda1(d: usize, t: u64, xi: &TorusPoint) -> Result<f64> {
    check_dims(d, t, xi)?;
    Ok((-(t as f64) / d as f64 * xi.sin2_sum()).exp())
}

fn prefactor_cache() -> &'static Mutex<HashMap<(usize, u64), i8>> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, u64), i8>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// `|S_t|⁻¹ Σ_{x∈S_t} (-1)^{Σxᵢ}` computed from parity, `(-1)ᵗ`, and
/// confirmed by enumerating `S_t` whenever `|S_t| ≤ PREFACTOR_ENUM_LIMIT`.
pub fn lambda2_prefactor(d: usize, t: u64) -> Result<i8> {
    if t > d as u64 {
        return Err(Error::pre(format!("require t ≤ d, got d={d}, t={t}")));
    }
    let parity: i8 = if t.is_multiple_of(2) { 1 } else { -1 };
    if let Some(&v) = prefactor_cache().lock().unwrap().get(&(d, t)) {
        return Ok(v);
    }
    let count = sphere_count(d as u64, t)?;
    if count.to_u64().is_some_and(|n| n <= PREFACTOR_ENUM_LIMIT) {
        let n = count.to_u64().unwrap() as i64;
        let signed: i64 = enumerate_sphere_capped(d, t, PREFACTOR_ENUM_LIMIT)?
            .map(|p| {
                let s: i64 = p.coords().iter().map(|&c| c as i64).sum();
                if s.rem_euclid(2) == 0 {
                    1
                } else {
                    -1
                }
            })
            .sum();
        if signed != parity as i64 * n {
            return Err(Error::Consistency(format!(
                "λ² prefactor: enumeration gives {signed}/{n}, parity gives {parity}"
            )));
        }
    }
    prefactor_cache().lock().unwrap().insert((d, t), parity);
    Ok(parity)
}

/// `λ²_t(ξ) = prefactor · exp(-(t/d)·Σ cos²(πξᵢ))`.
pub fn lambda2(d: usize, t: u64, xi: &TorusPoint) -> Result<f64> {
    check_dims(d, t, xi)?;
    let pre = lambda2_prefactor(d, t)? as f64;
    Ok(pre * (-(t as f64) / d as f64 * xi.cos2_sum()).exp())
}

/// Evaluates `s_t` through its expansion in Krawtchouk polynomials,
/// `s_t(ξ) = Σ_S a_S(ξ)·kr_t⁽ᵈ⁾(|S|)` with
/// `a_S = Π_{j∉S} cos²(πξⱼ) · Π_{i∈S} sin²(πξᵢ)`, grouped by `|S|`.
#[derive(Debug, Clone)]
pub struct KrawtchoukExpansion {
    d: usize,
    t: u64,
    kr_row: Vec<f64>,
}

impl KrawtchoukExpansion {
    pub fn new(d: usize, t: u64) -> Result<Self> {
        if t < 1 || t > d as u64 {
            return Err(Error::pre(format!("require 1 ≤ t ≤ d, got d={d}, t={t}")));
        }
        let p = KrawtchoukParams::new(d as u64, t)?;
        let kr_row = (0..=d as u64)
            .map(|u| Ok(p.exact(u)?.to_f64().unwrap_or(f64::NAN)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { d, t, kr_row })
    }

    /// Coefficients of `Π_j (cos²(πξⱼ) + y·sin²(πξⱼ))` in `y`.
    pub fn weights(xi: &TorusPoint) -> Vec<f64> {
        let d = xi.dim();
        let mut coef = vec![0.0f64; d + 1];
        coef[0] = 1.0;
        for (j, &x) in xi.coords().iter().enumerate() {
            let c2 = (PI * x).cos().powi(2);
            let s2 = (PI * x).sin().powi(2);
            for u in (0..=j + 1).rev() {
                let keep = coef[u] * c2;
                let shift = if u > 0 { coef[u - 1] * s2 } else { 0.0 };
                coef[u] = keep + shift;
            }
        }
        coef
    }

    pub fn eval(&self, xi: &TorusPoint) -> Result<f64> {
        check_dims(self.d, self.t, xi)?;
        let w = Self::weights(xi);
        Ok(w.iter()
            .zip(&self.kr_row)
            .map(|(a, k)| a * k)
            .collect::<CompensatedSum>()
            .value())
    }
}

/// `s_t` via the Krawtchouk expansion.
pub fn s_krawtchouk(d: usize, t: u64, xi: &TorusPoint) -> Result<f64> {
    KrawtchoukExpansion::new(d, t)?.eval(xi)
}

/// Signed sphere averages `|S_t|⁻¹ Σ_{x∈S_t} (-1)^{Σ_{i∈V} xᵢ}` for arbitrary
/// coordinate sets `V`, from one enumeration of `S_t`.
///
/// The sign of a point only depends on how many of its nonzero coordinates
/// fall in `V`, so the enumerated points are grouped by support.
#[derive(Debug, Clone)]
pub struct SignedSphereAverage {
    d: usize,
    t: u64,
    total: u64,
    groups: Vec<(u64, u64)>,
}

impl SignedSphereAverage {
    pub fn new(d: usize, t: u64) -> Result<Self> {
        if d > SIGNED_AVERAGE_MAX_D {
            return Err(Error::pre(format!(
                "signed sphere averages are enumerated only for d ≤ {SIGNED_AVERAGE_MAX_D}, got d={d}"
            )));
        }
        if t < 1 || t > d as u64 {
            return Err(Error::pre(format!("require 1 ≤ t ≤ d, got d={d}, t={t}")));
        }
        let mut groups: BTreeMap<u64, u64> = BTreeMap::new();
        let mut total = 0u64;
        for p in enumerate_sphere_capped(d, t, enumeration_cap())? {
            *groups.entry(p.support_mask()).or_default() += 1;
            total += 1;
        }
        Ok(Self {
            d,
            t,
            total,
            groups: groups.into_iter().collect(),
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    /// Average for the coordinate set given as a bitmask.
    pub fn eval_bits(&self, v: u64) -> f64 {
        let signed: i64 = self
            .groups
            .iter()
            .map(|&(mask, n)| {
                if (mask & v).count_ones().is_multiple_of(2) {
                    n as i64
                } else {
                    -(n as i64)
                }
            })
            .sum();
        signed as f64 / self.total as f64
    }

    pub fn eval(&self, split: &FrequencySplit) -> f64 {
        self.eval_bits(split.bits())
    }

    /// `V = {1, …, d}`, which reduces to the `λ²` prefactor.
    pub fn full(&self) -> f64 {
        self.eval_bits(if self.d == 64 {
            u64::MAX
        } else {
            (1u64 << self.d) - 1
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_point(rng: &mut ChaCha8Rng, d: usize) -> TorusPoint {
        TorusPoint::wrap((0..d).map(|_| rng.random_range(-0.5..0.5)))
    }

    #[test]
    fn wrapping_is_half_open() {
        assert_eq!(wrap_coordinate(0.5), -0.5);
        assert_eq!(wrap_coordinate(-0.5), -0.5);
        assert_eq!(wrap_coordinate(1.25), 0.25);
        assert_eq!(wrap_coordinate(-0.75), 0.25);
        assert_eq!(wrap_coordinate(0.49999999999999994), 0.49999999999999994);
        assert!(TorusPoint::new(vec![0.5]).is_err());
        assert!(TorusPoint::new(vec![-0.5, 0.1]).is_ok());
    }

    #[test]
    fn s_enum_examples() {
        for d in 1..=6 {
            for t in 1..=d as u64 {
                let one = s_enum(d, t, &TorusPoint::zero(d)).unwrap();
                assert!((one.re() - 1.0).abs() < 1e-12);
                let half = s_enum(d, t, &TorusPoint::constant(d, 0.5)).unwrap();
                let sign = if t % 2 == 0 { 1.0 } else { -1.0 };
                assert!((half.re() - sign).abs() < 1e-12);
                assert!(half.im().abs() < 1e-10);
                let quarter = s_enum(d, t, &TorusPoint::constant(d, 0.25)).unwrap();
                assert!(quarter.abs() < 1e-12, "{d} {t} {quarter:?}");
            }
        }
    }

    #[test]
    fn s_fast_examples() {
        let (a, b, c) = (0.1, -0.3, 0.45);
        let xi = TorusPoint::new(vec![a, b, c]).unwrap();
        let expected = ((2.0 * PI * a).cos() + (2.0 * PI * b).cos() + (2.0 * PI * c).cos()) / 3.0;
        assert!((s_fast(3, 1, &xi).unwrap() - expected).abs() < 1e-15);

        let xi = TorusPoint::constant(2, 0.0);
        let xi = TorusPoint::new(vec![-0.5, xi.coords()[1]]).unwrap();
        assert!(s_fast(2, 1, &xi).unwrap().abs() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let xi = random_point(&mut rng, 8);
        let fast = s_fast(8, 3, &xi).unwrap();
        let slow = s_enum(8, 3, &xi).unwrap();
        assert!((fast - slow.re()).abs() <= 1e-9 * (1.0 + slow.abs()));
    }

    #[test]
    fn m_examples() {
        for d in 1..=5 {
            for t in 1..=d as u64 {
                let v = m_fast(d, t, &TorusPoint::zero(d)).unwrap();
                assert!((v.re() - 1.0).abs() < 1e-12);
            }
        }
        let xi = TorusPoint::new(vec![-0.5]).unwrap();
        assert!((m_fast(1, 1, &xi).unwrap().re() + 1.0 / 3.0).abs() < 1e-15);
        assert!((m_enum(1, 1, &xi).unwrap().re() + 1.0 / 3.0).abs() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let xi = random_point(&mut rng, 4);
            let fast = m_fast(4, 2, &xi).unwrap();
            let slow = m_enum(4, 2, &xi).unwrap();
            assert!((fast.re() - slow.re()).abs() <= 1e-9 * (1.0 + slow.abs()));
        }
    }

    #[test]
    fn m_fast_beyond_dimension_matches_enumeration() {
        let xi = TorusPoint::new(vec![0.13, -0.41]).unwrap();
        let fast = m_fast(2, 5, &xi).unwrap();
        let phases: Complex64 = (-5i32..=5)
            .flat_map(|a| (-5i32..=5).map(move |b| (a, b)))
            .filter(|(a, b)| a.abs() + b.abs() <= 5)
            .map(|(a, b)| cis(a as f64 * 0.13 + b as f64 * -0.41))
            .sum();
        let brute = phases.re / 61.0;
        assert!((fast.re() - brute).abs() < 1e-12);
    }

    #[test]
    fn enumeration_respects_the_cap() {
        crate::combinatorics::set_enumeration_cap(crate::combinatorics::DEFAULT_ENUM_CAP);
        let xi = TorusPoint::zero(30);
        assert!(matches!(
            m_enum(30, 12, &xi),
            Err(Error::EnumerationCap { .. })
        ));
    }

    #[test]
    fn lambda_examples() {
        assert_eq!(lambda1(5, 3, &TorusPoint::zero(5)).unwrap(), 1.0);
        let half = TorusPoint::constant(6, 0.5);
        assert!((lambda1(6, 4, &half).unwrap() - (-4.0f64).exp()).abs() < 1e-15);
        let xi = TorusPoint::new(vec![0.25, 0.0, 0.0, 0.0]).unwrap();
        assert!((lambda1(4, 2, &xi).unwrap() - (-0.25f64).exp()).abs() < 1e-15);

        for d in 1..=8 {
            for t in 1..=d as u64 {
                let pre = lambda2_prefactor(d, t).unwrap();
                assert_eq!(pre, if t.is_multiple_of(2) { 1 } else { -1 });
                let v = lambda2(d, t, &TorusPoint::constant(d, 0.5)).unwrap();
                assert!((v - pre as f64).abs() < 1e-15);
            }
        }
        let v = lambda2(6, 2, &TorusPoint::zero(6)).unwrap();
        assert!((v - (-2.0f64).exp()).abs() < 1e-15);
        assert_eq!(sphere_count(6, 2).unwrap().to_u64(), Some(60));
    }

    #[test]
    fn frequency_split_examples() {
        assert_eq!(frequency_split(&TorusPoint::zero(3)).v_size, 0);
        let s = frequency_split(&TorusPoint::new(vec![0.3, -0.4, 0.1]).unwrap());
        assert_eq!(s.v_size, 2);
        assert_eq!(s.mask, vec![true, true, false]);
        assert_eq!(s.bits(), 0b011);
        let s = frequency_split(&TorusPoint::new(vec![0.25, 0.25]).unwrap());
        assert_eq!(s.v_size, 0);
        let s = frequency_split(&TorusPoint::new(vec![-0.25, -0.5]).unwrap());
        assert_eq!(s.v_size, 1);
        assert!(s.low_branch() && s.high_branch());
    }

    #[test]
    fn precondition_errors() {
        let xi = TorusPoint::zero(3);
        assert!(s_fast(3, 0, &xi).is_err());
        assert!(s_fast(3, 4, &xi).is_err());
        assert!(s_fast(4, 1, &xi).is_err());
        assert!(lambda1(3, 4, &xi).is_err());
        assert!(SignedSphereAverage::new(13, 2).is_err());
    }

    #[test]
    fn krawtchouk_expansion_matches_fast() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for d in 1..=8 {
            for t in 1..=(d as u64 / 2).max(1) {
                let exp = KrawtchoukExpansion::new(d, t).unwrap();
                for _ in 0..50 {
                    let xi = random_point(&mut rng, d);
                    let a = exp.eval(&xi).unwrap();
                    let b = s_fast(d, t, &xi).unwrap();
                    assert!((a - b).abs() < 1e-9, "d={d} t={t}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn signed_average_matches_krawtchouk_value() {
        // averaging (-1)^{|supp ∩ V|} over supports of size t gives kr_t(|V|)
        for d in 1..=8usize {
            for t in 1..=d as u64 {
                let avg = SignedSphereAverage::new(d, t).unwrap();
                let p = KrawtchoukParams::new(d as u64, t).unwrap();
                for v in 0u64..(1 << d) {
                    let expected = p.exact(v.count_ones() as u64).unwrap().to_f64().unwrap();
                    assert!((avg.eval_bits(v) - expected).abs() < 1e-12);
                }
                assert_eq!(avg.full(), lambda2_prefactor(d, t).unwrap() as f64);
            }
        }
    }
}
