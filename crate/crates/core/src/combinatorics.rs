//! Exact lattice point counts for ℓ¹ spheres and balls in ℤᵈ, plus the
//! brute-force point enumerators that back every oracle in the crate.
//!
//! Here the "sphere" `S_t` is the set of `x ∈ {-1,0,1}ᵈ` with exactly `t`
//! nonzero coordinates, while the ball `B_t ∩ ℤᵈ` is every integer point with
//! `Σ|xᵢ| ≤ t`. All counts are arbitrary precision.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Default limit on the number of points a single enumeration may emit.
pub const DEFAULT_ENUM_CAP: u64 = 10_000_000;

static ENUM_CAP: AtomicU64 = AtomicU64::new(DEFAULT_ENUM_CAP);

/// Current enumeration cap shared by every brute-force routine.
pub fn enumeration_cap() -> u64 {
    ENUM_CAP.load(Ordering::Relaxed)
}

/// Overrides the enumeration cap for the whole process.
pub fn set_enumeration_cap(cap: u64) {
    ENUM_CAP.store(cap, Ordering::Relaxed);
}

/// Exact non-negative lattice point count.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LatticeCount(BigUint);

impl LatticeCount {
    pub fn new(value: BigUint) -> Self {
        Self(value)
    }

    pub fn value(&self) -> &BigUint {
        &self.0
    }

    pub fn into_inner(self) -> BigUint {
        self.0
    }

    /// Nearest `f64`; saturates at infinity for astronomically large counts.
    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::INFINITY)
    }

    pub fn to_u64(&self) -> Option<u64> {
        self.0.to_u64()
    }

    pub fn to_bigint(&self) -> BigInt {
        BigInt::from(self.0.clone())
    }

    /// Errors with [`Error::EnumerationCap`] when the count exceeds `cap`.
    pub fn ensure_within(&self, cap: u64) -> Result<u64> {
        match self.0.to_u64() {
            Some(n) if n <= cap => Ok(n),
            _ => Err(Error::EnumerationCap {
                requested: self.0.to_string(),
                cap,
            }),
        }
    }
}

impl fmt::Display for LatticeCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl From<u64> for LatticeCount {
    fn from(v: u64) -> Self {
        Self(BigUint::from(v))
    }
}

/// Integer point of ℤᵈ.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LatticePoint {
    coords: Vec<i32>,
}

impl LatticePoint {
    pub fn new(coords: Vec<i32>) -> Self {
        Self { coords }
    }

    pub fn origin(d: usize) -> Self {
        Self { coords: vec![0; d] }
    }

    pub fn coords(&self) -> &[i32] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn l1_norm(&self) -> u64 {
        self.coords.iter().map(|c| c.unsigned_abs() as u64).sum()
    }

    /// `x ∈ {-1,0,1}ᵈ` with `t` nonzero coordinates.
    pub fn is_in_sphere(&self, t: u64) -> bool {
        self.coords.iter().all(|c| c.abs() <= 1) && self.l1_norm() == t
    }

    pub fn is_in_ball(&self, t: u64) -> bool {
        self.l1_norm() <= t
    }

    pub fn add(&self, other: &LatticePoint) -> LatticePoint {
        LatticePoint::new(
            self.coords
                .iter()
                .zip(&other.coords)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    /// Bitmask of nonzero coordinates; `d ≤ 64`.
    pub fn support_mask(&self) -> u64 {
        self.coords
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0)
            .fold(0u64, |m, (i, _)| m | (1u64 << i))
    }
}

/// Exact binomial coefficient `C(n, k)`, zero outside `0 ≤ k ≤ n`.
pub fn binomial(n: u64, k: i64) -> LatticeCount {
    if k < 0 || k as u64 > n {
        return LatticeCount(BigUint::zero());
    }
    let k = (k as u64).min(n - k as u64);
    let mut acc = BigUint::one();
    for i in 1..=k {
        // Each partial product is C(n-k+i, i), so the division is exact.
        acc *= n - k + i;
        acc /= i;
    }
    LatticeCount(acc)
}

fn binom_big(n: u64, k: i64) -> BigUint {
    binomial(n, k).into_inner()
}

fn check_radius(d: u64, t: u64) -> Result<()> {
    if t > d {
        return Err(Error::pre(format!("radius t={t} exceeds dimension d={d}")));
    }
    Ok(())
}

/// `|S_t| = 2ᵗ·C(d,t)`.
pub fn sphere_count(d: u64, t: u64) -> Result<LatticeCount> {
    check_radius(d, t)?;
    Ok(LatticeCount(binom_big(d, t as i64) << t as usize))
}

/// `|B_t ∩ ℤᵈ| = Σ_{l=0}^{t} 2ˡ·C(d,l)·C(t,l)` for `t ≤ d`.
pub fn ball_count(d: u64, t: u64) -> Result<LatticeCount> {
    check_radius(d, t)?;
    let total = (0..=t)
        .map(|l| (binom_big(d, l as i64) * binom_big(t, l as i64)) << l as usize)
        .sum();
    Ok(LatticeCount(total))
}

/// Number of integer points with `Σ|xᵢ| = k` exactly:
/// `Σ_{l=1}^{k} 2ˡ·C(d,l)·C(k-1,l-1)`, and 1 for `k = 0`.
pub fn shell_count(d: u64, k: u64) -> LatticeCount {
    if k == 0 {
        return LatticeCount(BigUint::one());
    }
    let total = (1..=k.min(d))
        .map(|l| (binom_big(d, l as i64) * binom_big(k - 1, l as i64 - 1)) << l as usize)
        .sum();
    LatticeCount(total)
}

/// Ball count as the sum of exact shells; valid for every `t`, including
/// `t > d` where the closed form is not exposed.
pub fn ball_count_layered(d: u64, t: u64) -> LatticeCount {
    LatticeCount((0..=t).map(|k| shell_count(d, k).into_inner()).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Shape {
    Sphere,
    Ball,
}

/// Lexicographic stream of lattice points of an ℓ¹ sphere or ball.
///
/// Coordinates are ordered with the first coordinate most significant and
/// values increasing, so for sphere points digits run `-1, 0, +1`.
#[derive(Debug, Clone)]
pub struct PointStream {
    shape: Shape,
    t: i64,
    coords: Vec<i32>,
    pending: bool,
}

impl PointStream {
    fn first(shape: Shape, d: usize, t: u64) -> Self {
        let mut coords = vec![0i32; d];
        let pending = match shape {
            Shape::Sphere => {
                for c in coords.iter_mut().take(t as usize) {
                    *c = -1;
                }
                t as usize <= d
            }
            Shape::Ball => {
                if d > 0 {
                    coords[0] = -(t as i32);
                    true
                } else {
                    t == 0
                }
            }
        };
        Self {
            shape,
            t: t as i64,
            coords,
            pending,
        }
    }

    fn advance(&mut self) -> bool {
        let d = self.coords.len();
        match self.shape {
            Shape::Ball => {
                let mut prefix: Vec<i64> = Vec::with_capacity(d + 1);
                prefix.push(0);
                for c in &self.coords {
                    prefix.push(prefix.last().unwrap() + c.unsigned_abs() as i64);
                }
                for i in (0..d).rev() {
                    let budget = self.t - prefix[i];
                    if (self.coords[i] as i64) < budget {
                        self.coords[i] += 1;
                        let remaining = budget - self.coords[i].unsigned_abs() as i64;
                        for (offset, c) in self.coords[i + 1..].iter_mut().enumerate() {
                            *c = if offset == 0 { -(remaining as i32) } else { 0 };
                        }
                        return true;
                    }
                }
                false
            }
            Shape::Sphere => {
                let mut nonzero_before = vec![0i64; d + 1];
                for i in 0..d {
                    nonzero_before[i + 1] = nonzero_before[i] + (self.coords[i] != 0) as i64;
                }
                for i in (0..d).rev() {
                    let need = self.t - nonzero_before[i];
                    let suffix = (d - 1 - i) as i64;
                    for v in (self.coords[i] + 1)..=1 {
                        let left = need - v.abs() as i64;
                        if (0..=suffix).contains(&left) {
                            self.coords[i] = v;
                            for (offset, c) in self.coords[i + 1..].iter_mut().enumerate() {
                                *c = if (offset as i64) < left { -1 } else { 0 };
                            }
                            return true;
                        }
                    }
                }
                false
            }
        }
    }
}

impl Iterator for PointStream {
    type Item = LatticePoint;

    fn next(&mut self) -> Option<LatticePoint> {
        if !self.pending {
            return None;
        }
        let out = LatticePoint::new(self.coords.clone());
        self.pending = self.advance();
        Some(out)
    }
}

/// Streams `S_t` in lexicographic order, guarded by [`enumeration_cap`].
pub fn enumerate_sphere(d: usize, t: u64) -> Result<PointStream> {
    enumerate_sphere_capped(d, t, enumeration_cap())
}

pub fn enumerate_sphere_capped(d: usize, t: u64, cap: u64) -> Result<PointStream> {
    sphere_count(d as u64, t)?.ensure_within(cap)?;
    Ok(PointStream::first(Shape::Sphere, d, t))
}

/// Streams `B_t ∩ ℤᵈ` in lexicographic order; any `t ≥ 0`.
pub fn enumerate_ball(d: usize, t: u64) -> Result<PointStream> {
    enumerate_ball_capped(d, t, enumeration_cap())
}

pub fn enumerate_ball_capped(d: usize, t: u64, cap: u64) -> Result<PointStream> {
    if d == 0 {
        return Err(Error::pre("dimension must be at least 1"));
    }
    ball_count_layered(d as u64, t).ensure_within(cap)?;
    Ok(PointStream::first(Shape::Ball, d, t))
}

/// `(|B_t ∩ ℤᵈ| - |S_t|) / |S_t|` with the exact numerator and denominator.
#[derive(Debug, Clone, PartialEq)]
pub struct ExcessRatio {
    pub numerator: BigUint,
    pub denominator: BigUint,
    pub float_value: f64,
}

impl ExcessRatio {
    pub fn as_rational(&self) -> BigRational {
        BigRational::new(
            BigInt::from(self.numerator.clone()),
            BigInt::from(self.denominator.clone()),
        )
    }
}

impl fmt::Display for ExcessRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = self.as_rational();
        write!(f, "{}/{}", r.numer(), r.denom())
    }
}

fn check_excess_domain(d: u64, t: u64) -> Result<()> {
    if d < 4 {
        return Err(Error::pre(format!(
            "excess ratio requires d ≥ 4, got d={d}"
        )));
    }
    if t < 1 || t * t > d {
        return Err(Error::pre(format!(
            "excess ratio requires 1 ≤ t ≤ √d, got d={d}, t={t}"
        )));
    }
    Ok(())
}

/// Relative excess of the ball over the sphere, for `d ≥ 4`, `1 ≤ t ≤ √d`.
pub fn excess_ratio(d: u64, t: u64) -> Result<ExcessRatio> {
    check_excess_domain(d, t)?;
    let ball = ball_count(d, t)?.into_inner();
    let sphere = sphere_count(d, t)?.into_inner();
    let numerator = ball - &sphere;
    let r = BigRational::new(
        BigInt::from(numerator.clone()),
        BigInt::from(sphere.clone()),
    );
    Ok(ExcessRatio {
        float_value: r.to_f64().unwrap_or(f64::NAN),
        numerator,
        denominator: sphere,
    })
}

/// Outcome of checking `t²/(2d) ≤ ratio ≤ e·t²/d`.
#[derive(Debug, Clone)]
pub struct RatioBoundCheck {
    pub d: u64,
    pub t: u64,
    pub ratio: ExcessRatio,
    pub lower: BigRational,
    /// `e·t²/d` evaluated with `e` rounded up to the next representable double.
    pub upper: f64,
    pub lower_holds: bool,
    pub upper_holds: bool,
}

impl RatioBoundCheck {
    pub fn passed(&self) -> bool {
        self.lower_holds && self.upper_holds
    }

    pub fn lower_f64(&self) -> f64 {
        self.lower.to_f64().unwrap_or(f64::NAN)
    }
}

/// The lower comparison is exact in rationals; the upper one is in floating
/// point with `e` rounded up.
pub fn check_ratio_bounds(d: u64, t: u64) -> Result<RatioBoundCheck> {
    let ratio = excess_ratio(d, t)?;
    let lower = BigRational::new(BigInt::from(t * t), BigInt::from(2 * d));
    // num/den ≥ t²/(2d)  ⇔  num·2d ≥ t²·den
    let lower_holds = &ratio.numerator * (2 * d) >= &ratio.denominator * (t * t);
    let e_up = std::f64::consts::E.next_up();
    let upper = e_up * (t * t) as f64 / d as f64;
    let upper_holds = ratio.float_value <= upper;
    Ok(RatioBoundCheck {
        d,
        t,
        ratio,
        lower,
        upper,
        lower_holds,
        upper_holds,
    })
}

/// Average of `x_j²` over `S_t`, which equals `t/d` for every coordinate `j`.
pub fn coordinate_mass(d: u64, t: u64) -> Result<BigRational> {
    if d == 0 || t < 1 || t > d {
        return Err(Error::pre(format!(
            "coordinate mass requires 1 ≤ t ≤ d, got d={d}, t={t}"
        )));
    }
    Ok(BigRational::new(BigInt::from(t), BigInt::from(d)))
}

/// Same average computed by enumerating `S_t` for coordinate `j`.
pub fn coordinate_mass_enumerated(d: usize, t: u64, j: usize) -> Result<BigRational> {
    coordinate_mass(d as u64, t)?;
    if j >= d {
        return Err(Error::pre(format!(
            "coordinate index {j} out of range for d={d}"
        )));
    }
    let mut hits = 0u64;
    let mut total = 0u64;
    for x in enumerate_sphere(d, t)? {
        let c = x.coords()[j] as i64;
        hits += (c * c) as u64;
        total += 1;
    }
    Ok(BigRational::new(BigInt::from(hits), BigInt::from(total)))
}

/// Dyadic radii `1, 2, 4, …` not exceeding `√d`.
pub fn dyadic_scales(d: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut t = 1u64;
    while t * t <= d {
        out.push(t);
        t *= 2;
    }
    out
}
