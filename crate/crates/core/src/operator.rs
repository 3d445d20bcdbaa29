//! Ball and sphere averages, their dyadic maximal function, and empirical
//! norm probes, on finitely supported functions on ℤᵈ and on `(ℤ/N)ᵈ`.
//!
//! Cyclic functions are stored densely with index `Σ xᵢ·Nⁱ`. Averages on
//! cyclic grids are computed either by direct convolution with the folded
//! kernel or through the discrete Fourier transform using the multiplier
//! symbols; both routes are exposed and tested against each other.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::combinatorics::{
    ball_count, dyadic_scales, enumerate_ball_capped, enumerate_sphere_capped, enumeration_cap,
    shell_count, sphere_count, LatticeCount, LatticePoint,
};
use crate::csv::CsvTable;
use crate::error::{Error, Result};
use crate::multipliers::{lambda1, lambda2, m_fast, s_fast, TorusPoint};
use crate::numeric::{derive_seed, fmt17, CompensatedSum};

/// Default limit on `Nᵈ` for cyclic grids.
pub const DEFAULT_GRID_CAP: u64 = 1 << 24;

static GRID_CAP: AtomicU64 = AtomicU64::new(DEFAULT_GRID_CAP);

pub fn grid_cap() -> u64 {
    GRID_CAP.load(Ordering::Relaxed)
}

pub fn set_grid_cap(cap: u64) {
    GRID_CAP.store(cap, Ordering::Relaxed);
}

/// Bound on the maximal operator on `ℓ²`.
pub const L2_BOUND: f64 = 900.0;
/// Bound for the heat-symbol maximal operators on `ℓ²`.
pub const SEMIGROUP_BOUND: f64 = 2.0;
/// Bound for the maximal ball-minus-sphere difference on `ℓ²`.
pub const DIFFERENCE_BOUND: f64 = 6.0;
/// Slack allowed on probe ratios.
pub const PROBE_TOL: f64 = 1e-9;

/// `30^{4/p}`, the `ℓᵖ` bound for `p ≥ 2`.
pub fn lp_bound(p: f64) -> f64 {
    30f64.powf(4.0 / p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Kernel {
    Ball,
    Sphere,
}

impl Kernel {
    pub fn name(&self) -> &'static str {
        match self {
            Kernel::Ball => "ball",
            Kernel::Sphere => "sphere",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Domain {
    /// Support inside `[-radius, radius]ᵈ`, zero elsewhere on ℤᵈ.
    Box { radius: u64 },
    /// The cyclic group `(ℤ/n)ᵈ`.
    Cyclic { n: usize },
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Domain::Box { radius } => write!(f, "R={radius}"),
            Domain::Cyclic { n } => write!(f, "N={n}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Values {
    Sparse(BTreeMap<LatticePoint, f64>),
    Dense(Vec<f64>),
}

/// A real function on ℤᵈ with support in a box, or on `(ℤ/N)ᵈ`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    d: usize,
    domain: Domain,
    values: Values,
}

fn cells(d: usize, n: usize) -> Result<usize> {
    let total = (n as u128).checked_pow(d as u32).unwrap_or(u128::MAX);
    let cap = grid_cap();
    if total > cap as u128 {
        return Err(Error::GridCap {
            requested: format!("{n}^{d}"),
            cap,
        });
    }
    Ok(total as usize)
}

impl GridFunction {
    /// Zero function on ℤᵈ with support allowed in `[-radius, radius]ᵈ`.
    pub fn new_box(d: usize, radius: u64) -> Result<Self> {
        if d == 0 {
            return Err(Error::pre("dimension must be at least 1"));
        }
        Ok(Self {
            d,
            domain: Domain::Box { radius },
            values: Values::Sparse(BTreeMap::new()),
        })
    }

    /// `δ₀` on ℤᵈ.
    pub fn delta(d: usize) -> Result<Self> {
        let mut f = Self::new_box(d, 0)?;
        f.set(&LatticePoint::origin(d), 1.0)?;
        Ok(f)
    }

    /// Cyclic function from values in index order `Σ xᵢ·nⁱ`.
    pub fn cyclic(d: usize, n: usize, values: Vec<f64>) -> Result<Self> {
        if d == 0 || n == 0 {
            return Err(Error::pre("cyclic grid needs d ≥ 1 and N ≥ 1"));
        }
        let len = cells(d, n)?;
        if values.len() != len {
            return Err(Error::pre(format!(
                "expected {len} values for {n}^{d} grid, got {}",
                values.len()
            )));
        }
        Ok(Self {
            d,
            domain: Domain::Cyclic { n },
            values: Values::Dense(values),
        })
    }

    pub fn cyclic_constant(d: usize, n: usize, v: f64) -> Result<Self> {
        let len = cells(d, n)?;
        Self::cyclic(d, n, vec![v; len])
    }

    pub fn cyclic_delta(d: usize, n: usize) -> Result<Self> {
        let mut f = Self::cyclic_constant(d, n, 0.0)?;
        f.set(&LatticePoint::origin(d), 1.0)?;
        Ok(f)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    /// Dense values of a cyclic function.
    pub fn dense(&self) -> Option<&[f64]> {
        match &self.values {
            Values::Dense(v) => Some(v),
            Values::Sparse(_) => None,
        }
    }

    fn check_point(&self, x: &LatticePoint) -> Result<()> {
        if x.dim() != self.d {
            return Err(Error::pre(format!(
                "point has {} coordinates, function lives in d={}",
                x.dim(),
                self.d
            )));
        }
        Ok(())
    }

    pub fn set(&mut self, x: &LatticePoint, v: f64) -> Result<()> {
        self.check_point(x)?;
        match (&mut self.values, self.domain) {
            (Values::Sparse(map), Domain::Box { radius }) => {
                if x.coords().iter().any(|c| c.unsigned_abs() as u64 > radius) {
                    return Err(Error::pre(format!(
                        "point outside the box of radius {radius}"
                    )));
                }
                if v == 0.0 {
                    map.remove(x);
                } else {
                    map.insert(x.clone(), v);
                }
            }
            (Values::Dense(vals), Domain::Cyclic { n }) => {
                vals[cyclic_index(x.coords(), n)] = v;
            }
            _ => unreachable!(),
        }
        Ok(())
    }

    /// Value at `x`; cyclic functions reduce `x` modulo `N`.
    pub fn value_at(&self, x: &LatticePoint) -> f64 {
        match (&self.values, self.domain) {
            (Values::Sparse(map), _) => map.get(x).copied().unwrap_or(0.0),
            (Values::Dense(vals), Domain::Cyclic { n }) => vals[cyclic_index(x.coords(), n)],
            _ => unreachable!(),
        }
    }

    /// Nonzero entries in lexicographic order (cyclic coordinates in `0..N`).
    pub fn entries(&self) -> Vec<(LatticePoint, f64)> {
        match (&self.values, self.domain) {
            (Values::Sparse(map), _) => map
                .iter()
                .filter(|(_, v)| **v != 0.0)
                .map(|(k, v)| (k.clone(), *v))
                .collect(),
            (Values::Dense(vals), Domain::Cyclic { n }) => {
                let mut out: Vec<(LatticePoint, f64)> = vals
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(i, v)| (LatticePoint::new(cyclic_coords(i, n, self.d)), *v))
                    .collect();
                out.sort_by(|a, b| a.0.cmp(&b.0));
                out
            }
            _ => unreachable!(),
        }
    }

    fn raw_values(&self) -> Box<dyn Iterator<Item = f64> + '_> {
        match &self.values {
            Values::Sparse(map) => Box::new(map.values().copied()),
            Values::Dense(v) => Box::new(v.iter().copied()),
        }
    }

    pub fn sum(&self) -> f64 {
        self.raw_values().collect::<CompensatedSum>().value()
    }

    /// `‖f‖_p` for `1 ≤ p < ∞`, or the sup norm for `p = ∞`.
    pub fn norm(&self, p: f64) -> f64 {
        if p.is_infinite() {
            return self.raw_values().fold(0.0, |m, v| m.max(v.abs()));
        }
        let s: CompensatedSum = self.raw_values().map(|v| v.abs().powf(p)).collect();
        s.value().powf(1.0 / p)
    }

    pub fn is_zero(&self) -> bool {
        self.raw_values().all(|v| v == 0.0)
    }

    fn map_dense(&self, values: Vec<f64>) -> Self {
        Self {
            d: self.d,
            domain: self.domain,
            values: Values::Dense(values),
        }
    }

    /// Pointwise absolute value.
    pub fn abs(&self) -> Self {
        let mut out = self.clone();
        match &mut out.values {
            Values::Sparse(m) => m.values_mut().for_each(|v| *v = v.abs()),
            Values::Dense(v) => v.iter_mut().for_each(|x| *x = x.abs()),
        }
        out
    }

    /// Pointwise `self + other` on the same domain (boxes take the larger radius).
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.combine(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.combine(other, |a, b| a - b)
    }

    fn combine(&self, other: &Self, op: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.d != other.d {
            return Err(Error::pre("dimension mismatch"));
        }
        match (&self.values, &other.values, self.domain, other.domain) {
            (Values::Dense(a), Values::Dense(b), Domain::Cyclic { n }, Domain::Cyclic { n: m })
                if n == m =>
            {
                Ok(self.map_dense(a.iter().zip(b).map(|(x, y)| op(*x, *y)).collect()))
            }
            (
                Values::Sparse(a),
                Values::Sparse(b),
                Domain::Box { radius: r1 },
                Domain::Box { radius: r2 },
            ) => {
                let mut out = BTreeMap::new();
                for k in a.keys().chain(b.keys()) {
                    let v = op(
                        a.get(k).copied().unwrap_or(0.0),
                        b.get(k).copied().unwrap_or(0.0),
                    );
                    if v != 0.0 {
                        out.insert(k.clone(), v);
                    } else {
                        out.remove(k);
                    }
                }
                Ok(Self {
                    d: self.d,
                    domain: Domain::Box { radius: r1.max(r2) },
                    values: Values::Sparse(out),
                })
            }
            _ => Err(Error::pre("functions live on different domains")),
        }
    }

    /// Pointwise maximum of two functions on the same domain.
    pub fn pointwise_max(&self, other: &Self) -> Result<Self> {
        self.combine(other, f64::max)
    }

    /// Translate by `shift` (box domains grow to keep the support inside).
    pub fn translate(&self, shift: &LatticePoint) -> Result<Self> {
        self.check_point(shift)?;
        match (&self.values, self.domain) {
            (Values::Sparse(map), Domain::Box { radius }) => {
                let grow = shift
                    .coords()
                    .iter()
                    .map(|c| c.unsigned_abs() as u64)
                    .max()
                    .unwrap_or(0);
                let mut out = BTreeMap::new();
                for (k, v) in map {
                    out.insert(k.add(shift), *v);
                }
                Ok(Self {
                    d: self.d,
                    domain: Domain::Box {
                        radius: radius + grow,
                    },
                    values: Values::Sparse(out),
                })
            }
            (Values::Dense(vals), Domain::Cyclic { n }) => {
                let mut out = vec![0.0; vals.len()];
                for (i, v) in vals.iter().enumerate() {
                    let x = cyclic_coords(i, n, self.d);
                    let y: Vec<i32> = x.iter().zip(shift.coords()).map(|(a, b)| a + b).collect();
                    out[cyclic_index(&y, n)] = *v;
                }
                Ok(self.map_dense(out))
            }
            _ => unreachable!(),
        }
    }
}

fn cyclic_index(coords: &[i32], n: usize) -> usize {
    let n_i = n as i64;
    coords.iter().rev().fold(0usize, |acc, &c| {
        acc * n + (c as i64).rem_euclid(n_i) as usize
    })
}

fn cyclic_coords(mut index: usize, n: usize, d: usize) -> Vec<i32> {
    (0..d)
        .map(|_| {
            let c = index % n;
            index /= n;
            c as i32
        })
        .collect()
}

/// Uniform kernel on `B_t ∩ ℤᵈ` or `S_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelWeights {
    pub kind: Kernel,
    pub d: usize,
    pub t: u64,
    pub offsets: Vec<LatticePoint>,
    pub count: LatticeCount,
}

impl KernelWeights {
    pub fn new(kind: Kernel, d: usize, t: u64) -> Result<Self> {
        if t < 1 || t > d as u64 {
            return Err(Error::pre(format!("require 1 ≤ t ≤ d, got d={d}, t={t}")));
        }
        let count = match kind {
            Kernel::Ball => ball_count(d as u64, t)?,
            Kernel::Sphere => sphere_count(d as u64, t)?,
        };
        let cap = enumeration_cap();
        count.ensure_within(cap)?;
        let offsets: Vec<LatticePoint> = match kind {
            Kernel::Ball => enumerate_ball_capped(d, t, cap)?.collect(),
            Kernel::Sphere => enumerate_sphere_capped(d, t, cap)?.collect(),
        };
        if Some(offsets.len() as u64) != count.to_u64() {
            return Err(Error::Consistency(format!(
                "{} kernel enumerated {} offsets, count is {count}",
                kind.name(),
                offsets.len()
            )));
        }
        Ok(Self {
            kind,
            d,
            t,
            offsets,
            count,
        })
    }

    /// `1/|K|`; the weights sum to one.
    pub fn weight(&self) -> f64 {
        1.0 / self.count.to_f64()
    }

    /// Offsets reduced modulo `n`, with multiplicities, as flat indices.
    pub fn folded(&self, n: usize) -> Vec<(Vec<i32>, u64)> {
        let mut acc: BTreeMap<Vec<i32>, u64> = BTreeMap::new();
        for o in &self.offsets {
            let r: Vec<i32> = o.coords().iter().map(|&c| c.rem_euclid(n as i32)).collect();
            *acc.entry(r).or_default() += 1;
        }
        acc.into_iter().collect()
    }
}

fn convolve_box(f: &GridFunction, k: &KernelWeights) -> GridFunction {
    let Values::Sparse(map) = &f.values else {
        unreachable!()
    };
    let Domain::Box { radius } = f.domain else {
        unreachable!()
    };
    let w = k.weight();
    let mut acc: HashMap<LatticePoint, f64> = HashMap::new();
    for (x, v) in map {
        for o in &k.offsets {
            *acc.entry(x.add(o)).or_default() += v * w;
        }
    }
    GridFunction {
        d: f.d,
        domain: Domain::Box {
            radius: radius + k.t,
        },
        values: Values::Sparse(acc.into_iter().filter(|(_, v)| *v != 0.0).collect()),
    }
}

fn convolve_cyclic(f: &GridFunction, k: &KernelWeights) -> GridFunction {
    let Domain::Cyclic { n } = f.domain else {
        unreachable!()
    };
    let vals = f.dense().unwrap();
    let d = f.d;
    let w = k.weight();
    let folded = k.folded(n);
    let strides: Vec<usize> = (0..d).map(|i| n.pow(i as u32)).collect();
    let out: Vec<f64> = (0..vals.len())
        .into_par_iter()
        .map(|i| {
            let x = cyclic_coords(i, n, d);
            let mut acc = CompensatedSum::new();
            for (r, mult) in &folded {
                let mut idx = 0usize;
                for a in 0..d {
                    let c = x[a] - r[a];
                    let c = if c < 0 { c + n as i32 } else { c };
                    idx += c as usize * strides[a];
                }
                acc.add(vals[idx] * *mult as f64);
            }
            acc.value() * w
        })
        .collect();
    f.map_dense(out)
}

/// How averages on cyclic grids are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    Direct,
    Spectral,
    /// Direct when `Nᵈ · |folded kernel|` is at most `DIRECT_WORK_LIMIT`.
    Auto,
}

pub const DIRECT_WORK_LIMIT: u64 = 1 << 22;

fn check_t(d: usize, t: u64) -> Result<()> {
    if t < 1 || t > d as u64 {
        return Err(Error::pre(format!("require 1 ≤ t ≤ d, got d={d}, t={t}")));
    }
    Ok(())
}

fn average_direct(f: &GridFunction, kind: Kernel, t: u64) -> Result<GridFunction> {
    let k = KernelWeights::new(kind, f.d, t)?;
    Ok(match f.domain {
        Domain::Box { .. } => convolve_box(f, &k),
        Domain::Cyclic { .. } => convolve_cyclic(f, &k),
    })
}

/// `ℳ_t f`, the average of `f` over `x + (B_t ∩ ℤᵈ)`.
pub fn apply_ball_average(f: &GridFunction, t: u64) -> Result<GridFunction> {
    check_t(f.d, t)?;
    average_direct(f, Kernel::Ball, t)
}

/// `𝒮_t f`, the average of `f` over `x + S_t`.
pub fn apply_sphere_average(f: &GridFunction, t: u64) -> Result<GridFunction> {
    check_t(f.d, t)?;
    average_direct(f, Kernel::Sphere, t)
}

/// Dimension-by-dimension DFT on `(ℤ/N)ᵈ`:
/// `f̂(k) = Σ_x f(x)·e(x·k/N)`, inverse `f(x) = N⁻ᵈ Σ_k f̂(k)·e(−x·k/N)`.
#[derive(Debug, Clone)]
pub struct CyclicDft {
    d: usize,
    n: usize,
    len: usize,
}

impl CyclicDft {
    pub fn new(d: usize, n: usize) -> Result<Self> {
        let len = cells(d, n)?;
        Ok(Self { d, n, len })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// The frequency `k/N` wrapped into the fundamental domain.
    pub fn frequency(&self, index: usize) -> TorusPoint {
        TorusPoint::wrap(
            cyclic_coords(index, self.n, self.d)
                .into_iter()
                .map(|k| k as f64 / self.n as f64),
        )
    }

    fn transform(&self, data: &mut [Complex64], sign: f64) {
        let n = self.n;
        let twiddle: Vec<Complex64> = (0..n)
            .map(|j| Complex64::cis(sign * 2.0 * PI * j as f64 / n as f64))
            .collect();
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for axis in 0..self.d {
            let stride = n.pow(axis as u32);
            let block = stride * n;
            for base in (0..self.len).step_by(block) {
                for off in 0..stride {
                    let start = base + off;
                    for (j, b) in buf.iter_mut().enumerate() {
                        *b = data[start + j * stride];
                    }
                    for k in 0..n {
                        let mut acc = Complex64::new(0.0, 0.0);
                        for (j, b) in buf.iter().enumerate() {
                            acc += b * twiddle[(j * k) % n];
                        }
                        data[start + k * stride] = acc;
                    }
                }
            }
        }
    }

    pub fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut data, 1.0);
        data
    }

    pub fn inverse(&self, spectrum: &[Complex64]) -> Vec<Complex64> {
        let mut data = spectrum.to_vec();
        self.transform(&mut data, -1.0);
        let scale = 1.0 / self.len as f64;
        data.iter_mut().for_each(|z| *z *= scale);
        data
    }

    /// Evaluates a symbol at every frequency `k/N`.
    pub fn symbol(&self, eval: impl Fn(&TorusPoint) -> Result<f64> + Sync) -> Result<Vec<f64>> {
        (0..self.len)
            .into_par_iter()
            .map(|i| eval(&self.frequency(i)))
            .collect()
    }

    /// Real part of the inverse transform of `symbol · f̂`.
    pub fn apply(&self, f_hat: &[Complex64], symbol: &[f64]) -> Vec<f64> {
        let prod: Vec<Complex64> = f_hat.iter().zip(symbol).map(|(z, s)| z * s).collect();
        self.inverse(&prod).into_iter().map(|z| z.re).collect()
    }
}

fn kernel_symbol(kind: Kernel, d: usize, t: u64) -> impl Fn(&TorusPoint) -> Result<f64> + Sync {
    move |xi| match kind {
        Kernel::Ball => Ok(m_fast(d, t, xi)?.re()),
        Kernel::Sphere => s_fast(d, t, xi),
    }
}

fn cyclic_parts(f: &GridFunction) -> Result<(usize, &[f64])> {
    match f.domain {
        Domain::Cyclic { n } => Ok((n, f.dense().unwrap())),
        Domain::Box { .. } => Err(Error::pre("the spectral route needs a cyclic domain")),
    }
}

/// Ball or sphere average on a cyclic grid through the multiplier symbol.
pub fn apply_average_spectral(f: &GridFunction, kind: Kernel, t: u64) -> Result<GridFunction> {
    check_t(f.d, t)?;
    let (n, vals) = cyclic_parts(f)?;
    let dft = CyclicDft::new(f.d, n)?;
    let symbol = dft.symbol(kernel_symbol(kind, f.d, t))?;
    Ok(f.map_dense(dft.apply(&dft.forward(vals), &symbol)))
}

fn direct_is_cheap(f: &GridFunction, kind: Kernel, scales: &[u64]) -> Result<bool> {
    let Domain::Cyclic { n } = f.domain else {
        return Ok(true);
    };
    let len = f.dense().unwrap().len() as u64;
    for &t in scales {
        let count = match kind {
            Kernel::Ball => ball_count(f.d as u64, t)?,
            Kernel::Sphere => sphere_count(f.d as u64, t)?,
        };
        let folded = count.to_u64().unwrap_or(u64::MAX).min(len);
        if folded.saturating_mul(len) > DIRECT_WORK_LIMIT {
            return Ok(false);
        }
    }
    let _ = n;
    Ok(true)
}

/// A symbol evaluated at torus points.
type SymbolFn = Box<dyn Fn(&TorusPoint) -> Result<f64> + Sync>;

/// Precomputed symbols for repeated spectral evaluation on one grid.
pub struct SpectralMaximal {
    dft: CyclicDft,
    symbols: Vec<Vec<f64>>,
}

impl SpectralMaximal {
    fn from_symbols(d: usize, n: usize, evals: Vec<SymbolFn>) -> Result<Self> {
        let dft = CyclicDft::new(d, n)?;
        let symbols = evals
            .iter()
            .map(|e| dft.symbol(e))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { dft, symbols })
    }

    /// `sup_{t dyadic ≤ √d} |A_t f|` for ball or sphere averages.
    pub fn dyadic(kind: Kernel, d: usize, n: usize) -> Result<Self> {
        let evals = dyadic_scales(d as u64)
            .into_iter()
            .map(|t| Box::new(kernel_symbol(kind, d, t)) as SymbolFn)
            .collect();
        Self::from_symbols(d, n, evals)
    }

    /// `sup_{t dyadic ≤ √d} |(ℳ_t − 𝒮_t) f|`.
    pub fn difference(d: usize, n: usize) -> Result<Self> {
        let evals = dyadic_scales(d as u64)
            .into_iter()
            .map(|t| {
                Box::new(move |xi: &TorusPoint| Ok(m_fast(d, t, xi)?.re() - s_fast(d, t, xi)?))
                    as SymbolFn
            })
            .collect();
        Self::from_symbols(d, n, evals)
    }

    /// `sup_{t ∈ t_set} |T_t f|` with `T_t` the heat-type symbol.
    pub fn heat(family: HeatFamily, d: usize, n: usize, t_set: &[u64]) -> Result<Self> {
        for &t in t_set {
            check_t(d, t)?;
        }
        let evals = t_set
            .iter()
            .map(|&t| {
                Box::new(move |xi: &TorusPoint| match family {
                    HeatFamily::First => lambda1(d, t, xi),
                    HeatFamily::Second => lambda2(d, t, xi),
                }) as SymbolFn
            })
            .collect();
        Self::from_symbols(d, n, evals)
    }

    pub fn apply(&self, f: &GridFunction) -> Result<GridFunction> {
        let (n, vals) = cyclic_parts(f)?;
        if n != self.dft.n || f.d != self.dft.d {
            return Err(Error::pre("function does not live on this grid"));
        }
        let f_hat = self.dft.forward(vals);
        let mut out = vec![0.0f64; vals.len()];
        for s in &self.symbols {
            for (o, v) in out.iter_mut().zip(self.dft.apply(&f_hat, s)) {
                *o = o.max(v.abs());
            }
        }
        Ok(f.map_dense(out))
    }
}

/// `sup_{t dyadic ≤ √d} |A_t f|` pointwise.
pub fn maximal(f: &GridFunction, kind: Kernel) -> Result<GridFunction> {
    maximal_with(f, kind, Route::Auto)
}

pub fn maximal_with(f: &GridFunction, kind: Kernel, route: Route) -> Result<GridFunction> {
    let scales = dyadic_scales(f.d as u64);
    let spectral = match (route, f.domain) {
        (Route::Direct, _) | (_, Domain::Box { .. }) => false,
        (Route::Spectral, _) => true,
        (Route::Auto, _) => !direct_is_cheap(f, kind, &scales)?,
    };
    if spectral {
        let (n, _) = cyclic_parts(f)?;
        return SpectralMaximal::dyadic(kind, f.d, n)?.apply(f);
    }
    let mut out: Option<GridFunction> = None;
    for t in scales {
        let a = average_direct(f, kind, t)?.abs();
        out = Some(match out {
            None => a,
            Some(m) => m.pointwise_max(&a)?,
        });
    }
    Ok(out.expect("dyadic scales are never empty"))
}

/// `‖maximal(f)‖_p / ‖f‖_p`.
pub fn norm_ratio(f: &GridFunction, p: f64, kind: Kernel) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::pre(format!("p must be at least 1, got {p}")));
    }
    if f.is_zero() {
        return Err(Error::pre("norm ratio of the zero function"));
    }
    Ok(maximal(f, kind)?.norm(p) / f.norm(p))
}

/// `‖sup_t K_t‖_p` for `δ₀`: the dyadic maximal function of the delta takes
/// the value `1/|B_{tᵢ}|` on `B_{tᵢ} ∖ B_{tᵢ₋₁}`.
pub fn delta_ratio_closed_form(d: usize, p: f64) -> Result<f64> {
    let scales = dyadic_scales(d as u64);
    let counts = scales
        .iter()
        .map(|&t| Ok(ball_count(d as u64, t)?.to_f64()))
        .collect::<Result<Vec<f64>>>()?;
    if p.is_infinite() {
        return Ok(1.0 / counts[0]);
    }
    let mut acc = CompensatedSum::new();
    let mut prev = 0.0;
    for &c in &counts {
        acc.add((c - prev) * c.powf(-p));
        prev = c;
    }
    Ok(acc.value().powf(1.0 / p))
}

/// The same norm summed shell by shell: `Σ_k |A_k|·max_{t ≥ k} |B_t|^{−p}`.
pub fn delta_ratio_shells(d: usize, p: f64) -> Result<f64> {
    let scales = dyadic_scales(d as u64);
    let t_max = *scales.last().unwrap();
    let inv = scales
        .iter()
        .map(|&t| Ok((t, 1.0 / ball_count(d as u64, t)?.to_f64())))
        .collect::<Result<Vec<(u64, f64)>>>()?;
    let height = |k: u64| {
        inv.iter()
            .filter(|(t, _)| *t >= k)
            .map(|(_, v)| *v)
            .fold(0.0f64, f64::max)
    };
    if p.is_infinite() {
        return Ok(height(0));
    }
    let mut acc = CompensatedSum::new();
    for k in 0..=t_max {
        let shell = if k == 0 {
            1.0
        } else {
            shell_count(d as u64, k).to_f64()
        };
        acc.add(shell * height(k).powf(p));
    }
    Ok(acc.value().powf(1.0 / p))
}

/// The delta ratio by explicit convolution on ℤᵈ.
pub fn delta_ratio_spatial(d: usize, p: f64) -> Result<f64> {
    norm_ratio(&GridFunction::delta(d)?, p, Kernel::Ball)
}

/// Which heat-type symbol a semigroup check uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeatFamily {
    /// `λ¹_t`
    First,
    /// `λ²_t`
    Second,
}

impl HeatFamily {
    pub fn name(&self) -> &'static str {
        match self {
            HeatFamily::First => "semigroup_lambda1",
            HeatFamily::Second => "semigroup_lambda2",
        }
    }
}

/// `‖sup_{t∈t_set} |T_t f|‖₂ / ‖f‖₂` on `(ℤ/N)ᵈ`.
pub fn semigroup_check(
    n: usize,
    d: usize,
    t_set: &[u64],
    f: &GridFunction,
    family: HeatFamily,
) -> Result<f64> {
    if t_set.is_empty() {
        return Err(Error::pre("empty t set"));
    }
    if f.is_zero() {
        return Err(Error::pre("norm ratio of the zero function"));
    }
    let op = SpectralMaximal::heat(family, d, n, t_set)?;
    Ok(op.apply(f)?.norm(2.0) / f.norm(2.0))
}

/// `sup_{t dyadic ≤ √d} |(ℳ_t − 𝒮_t) f|` pointwise, by direct convolution.
pub fn difference_maximal(f: &GridFunction) -> Result<GridFunction> {
    let mut out: Option<GridFunction> = None;
    for t in dyadic_scales(f.d as u64) {
        let diff = average_direct(f, Kernel::Ball, t)?
            .sub(&average_direct(f, Kernel::Sphere, t)?)?
            .abs();
        out = Some(match out {
            None => diff,
            Some(m) => m.pointwise_max(&diff)?,
        });
    }
    Ok(out.expect("dyadic scales are never empty"))
}

/// `‖sup_t |(ℳ_t − 𝒮_t) f|‖₂ / ‖f‖₂`.
pub fn difference_ratio(f: &GridFunction) -> Result<f64> {
    if f.is_zero() {
        return Err(Error::pre("norm ratio of the zero function"));
    }
    let use_direct = direct_is_cheap(f, Kernel::Ball, &dyadic_scales(f.d as u64))?;
    let g = if use_direct {
        difference_maximal(f)?
    } else {
        let (n, _) = cyclic_parts(f)?;
        SpectralMaximal::difference(f.d, n)?.apply(f)?
    };
    Ok(g.norm(2.0) / f.norm(2.0))
}

const TAG_RANDOM: u64 = 0x5EED_0001;

/// I.i.d. uniform `[0, 1)` values on `(ℤ/N)ᵈ`, trial `index` of stream `seed`.
pub fn random_nonnegative(d: usize, n: usize, seed: u64, index: u64) -> Result<GridFunction> {
    let len = cells(d, n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, TAG_RANDOM, index));
    let vals = (0..len).map(|_| rng.random::<f64>()).collect();
    GridFunction::cyclic(d, n, vals)
}

/// Spike at the origin, spike pair `2t` apart along the first axis, and the
/// indicator of `B_t`, with `t` the largest dyadic scale.
pub fn adversarial_functions(d: usize, n: usize) -> Result<Vec<GridFunction>> {
    let t = *dyadic_scales(d as u64).last().unwrap();
    let spike = GridFunction::cyclic_delta(d, n)?;
    let mut pair = spike.clone();
    let mut far = vec![0i32; d];
    far[0] = 2 * t as i32;
    let far = LatticePoint::new(far);
    pair.set(&far, pair.value_at(&far) + 1.0)?;
    let mut ball = GridFunction::cyclic_constant(d, n, 0.0)?;
    for x in enumerate_ball_capped(d, t, enumeration_cap())? {
        ball.set(&x, 1.0)?;
    }
    Ok(vec![spike, pair, ball])
}

/// One row of the probe CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeRow {
    pub kind: String,
    pub d: usize,
    pub domain: Domain,
    pub p: f64,
    pub trials: u64,
    pub seed: u64,
    pub max_ratio: f64,
    pub bound: f64,
    pub pass: bool,
}

fn probe_row(
    kind: &str,
    d: usize,
    domain: Domain,
    p: f64,
    trials: u64,
    seed: u64,
    max_ratio: f64,
    bound: f64,
) -> ProbeRow {
    ProbeRow {
        kind: kind.to_string(),
        d,
        domain,
        p,
        trials,
        seed,
        max_ratio,
        bound,
        pass: max_ratio <= bound + PROBE_TOL,
    }
}

/// Delta ratio checked against its closed form. Uses explicit convolution
/// when `d ≤ spatial_max_d` and the shell sum otherwise.
pub fn delta_probe(d: usize, p: f64, spatial_max_d: usize) -> Result<(ProbeRow, f64)> {
    let closed = delta_ratio_closed_form(d, p)?;
    let computed = if d <= spatial_max_d {
        delta_ratio_spatial(d, p)?
    } else {
        delta_ratio_shells(d, p)?
    };
    let bound = if p == 2.0 { L2_BOUND } else { lp_bound(p) };
    let mut row = probe_row(
        "delta",
        d,
        Domain::Box { radius: 0 },
        p,
        1,
        0,
        computed,
        bound,
    );
    let err = (computed - closed).abs();
    row.pass &= err <= 1e-12;
    Ok((row, err))
}

/// Maximum in order, with NaN treated as `+∞`.
fn ordered_max(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(f64::NEG_INFINITY, |m, v| {
        let v = if v.is_nan() { f64::INFINITY } else { v };
        m.max(v)
    })
}

/// Test functions of a probe: the adversaries followed by `trials` random ones.
fn probe_functions(d: usize, n: usize, trials: u64, seed: u64) -> Result<Vec<GridFunction>> {
    let mut fs = adversarial_functions(d, n)?;
    for i in 0..trials {
        fs.push(random_nonnegative(d, n, seed, i)?);
    }
    Ok(fs)
}

/// Ball maximal ratios on `(ℤ/N)ᵈ` for each `p`; the `trials` column counts
/// every function evaluated, adversaries included.
pub fn random_probe(
    d: usize,
    n: usize,
    ps: &[f64],
    trials: u64,
    seed: u64,
) -> Result<Vec<ProbeRow>> {
    let scales = dyadic_scales(d as u64);
    let probe = GridFunction::cyclic_constant(d, n, 0.0)?;
    let spectral = if direct_is_cheap(&probe, Kernel::Ball, &scales)? {
        None
    } else {
        Some(SpectralMaximal::dyadic(Kernel::Ball, d, n)?)
    };
    let fs = probe_functions(d, n, trials, seed)?;
    let per_f: Vec<Vec<f64>> = fs
        .iter()
        .map(|f| {
            let m = match &spectral {
                Some(op) => op.apply(f)?,
                None => maximal_with(f, Kernel::Ball, Route::Direct)?,
            };
            Ok(ps.iter().map(|&p| m.norm(p) / f.norm(p)).collect())
        })
        .collect::<Result<_>>()?;
    Ok(ps
        .iter()
        .enumerate()
        .map(|(j, &p)| {
            let max = ordered_max(per_f.iter().map(|r| r[j]));
            let bound = if p == 2.0 {
                L2_BOUND.min(lp_bound(p))
            } else {
                lp_bound(p)
            };
            probe_row(
                "random",
                d,
                Domain::Cyclic { n },
                p,
                fs.len() as u64,
                seed,
                max,
                bound,
            )
        })
        .collect())
}

/// Heat-symbol maximal ratios over `t ∈ {1, …, d}`.
pub fn semigroup_probe(
    d: usize,
    n: usize,
    family: HeatFamily,
    trials: u64,
    seed: u64,
) -> Result<ProbeRow> {
    let t_set: Vec<u64> = (1..=d as u64).collect();
    let op = SpectralMaximal::heat(family, d, n, &t_set)?;
    let mut fs = probe_functions(d, n, trials, seed)?;
    fs.push(GridFunction::cyclic_constant(d, n, 1.0)?);
    let ratios = fs
        .iter()
        .map(|f| Ok(op.apply(f)?.norm(2.0) / f.norm(2.0)))
        .collect::<Result<Vec<_>>>()?;
    Ok(probe_row(
        family.name(),
        d,
        Domain::Cyclic { n },
        2.0,
        fs.len() as u64,
        seed,
        ordered_max(ratios),
        SEMIGROUP_BOUND,
    ))
}

/// Maximal ball-minus-sphere ratios.
pub fn difference_probe(d: usize, n: usize, trials: u64, seed: u64) -> Result<ProbeRow> {
    if d < 4 {
        return Err(Error::pre(format!(
            "difference probe requires d ≥ 4, got d={d}"
        )));
    }
    let fs = probe_functions(d, n, trials, seed)?;
    let scales = dyadic_scales(d as u64);
    let spectral = if direct_is_cheap(&fs[0], Kernel::Ball, &scales)? {
        None
    } else {
        Some(SpectralMaximal::difference(d, n)?)
    };
    let ratios = fs
        .iter()
        .map(|f| match &spectral {
            Some(op) => Ok(op.apply(f)?.norm(2.0) / f.norm(2.0)),
            None => Ok(difference_maximal(f)?.norm(2.0) / f.norm(2.0)),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(probe_row(
        "difference",
        d,
        Domain::Cyclic { n },
        2.0,
        fs.len() as u64,
        seed,
        ordered_max(ratios),
        DIFFERENCE_BOUND,
    ))
}

/// `max over f` of `difference_ratio(f)` for `f_count` random non-negative `f`.
pub fn difference_norm_check(n: usize, d: usize, f_count: u64, seed: u64) -> Result<f64> {
    if d < 4 {
        return Err(Error::pre(format!("requires d ≥ 4, got d={d}")));
    }
    let ratios = (0..f_count)
        .map(|i| difference_ratio(&random_nonnegative(d, n, seed, i)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(ordered_max(ratios))
}

fn fmt_p(p: f64) -> String {
    if p.is_infinite() {
        "inf".into()
    } else {
        format!("{p}")
    }
}

pub const PROBE_CSV_HEADER: [&str; 9] = [
    "kind",
    "d",
    "N_or_R",
    "p",
    "trials",
    "seed",
    "max_ratio",
    "bound",
    "pass",
];

pub fn probe_csv(rows: &[ProbeRow]) -> CsvTable {
    let mut table = CsvTable::new(&PROBE_CSV_HEADER);
    for r in rows {
        table.push(vec![
            r.kind.clone(),
            r.d.to_string(),
            r.domain.to_string(),
            fmt_p(r.p),
            r.trials.to_string(),
            r.seed.to_string(),
            fmt17(r.max_ratio),
            fmt17(r.bound),
            r.pass.to_string(),
        ]);
    }
    table
}

/// Text snapshot: header `"{d} R={r}"` or `"{d} N={n}"`, then one
/// `x₁ … x_d value` line per nonzero point.
pub fn write_snapshot(f: &GridFunction) -> String {
    let mut out = format!("{} {}\n", f.d, f.domain);
    for (x, v) in f.entries() {
        for c in x.coords() {
            out.push_str(&c.to_string());
            out.push(' ');
        }
        out.push_str(&fmt17(v));
        out.push('\n');
    }
    out
}

pub fn save_snapshot(f: &GridFunction, path: &Path) -> Result<()> {
    std::fs::write(path, write_snapshot(f))?;
    Ok(())
}

pub fn parse_snapshot(text: &str) -> Result<GridFunction> {
    let bad = |m: &str| Error::Parse(format!("snapshot: {m}"));
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| bad("empty input"))?;
    let mut parts = header.split_whitespace();
    let d: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| bad("missing dimension"))?;
    let dom = parts.next().ok_or_else(|| bad("missing domain"))?;
    let mut f = if let Some(r) = dom.strip_prefix("R=") {
        GridFunction::new_box(d, r.parse().map_err(|_| bad("bad radius"))?)?
    } else if let Some(n) = dom.strip_prefix("N=") {
        GridFunction::cyclic_constant(d, n.parse().map_err(|_| bad("bad modulus"))?, 0.0)?
    } else {
        return Err(bad("domain must be R=… or N=…"));
    };
    for line in lines {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != d + 1 {
            return Err(bad(&format!("expected {} fields in '{line}'", d + 1)));
        }
        let coords = fields[..d]
            .iter()
            .map(|s| s.parse::<i32>().map_err(|_| bad("bad coordinate")))
            .collect::<Result<Vec<_>>>()?;
        let v: f64 = fields[d].parse().map_err(|_| bad("bad value"))?;
        f.set(&LatticePoint::new(coords), v)?;
    }
    Ok(f)
}
