//! Sampled verification of the pointwise multiplier inequalities.
//!
//! Each catalog entry pairs a left-hand side (a distance between symbols) with
//! its claimed upper bound. Frequencies come from seeded samplers that target
//! the small-ξ, large-ξ and `|ξᵢ| ≈ 1/4` regimes. Every sample draws from its
//! own RNG derived from `(seed, strategy, index)`, so results do not depend on
//! how the samples are scheduled across threads.

use std::f64::consts::{E, SQRT_2};
use std::fmt;
use std::str::FromStr;

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::combinatorics::dyadic_scales;
use crate::csv::CsvTable;
use crate::error::{Error, Result};
use crate::krawtchouk::decay_constant;
use crate::multipliers::{
    frequency_split, lambda1, lambda2, m_enum, m_fast, s_enum, s_fast, KrawtchoukExpansion,
    SignedSphereAverage, TorusPoint, SIGNED_AVERAGE_MAX_D,
};
use crate::numeric::{derive_seed, fmt17, CompensatedSum};

/// Absolute tolerance on `lhs − rhs` before a sample counts as a violation.
pub const VIOLATION_TOL: f64 = 1e-9;

/// Samples per `(id, d, t, strategy)` unless overridden.
pub const DEFAULT_SAMPLES: u64 = 10_000;

/// Dimensions of the default verification matrix.
pub const DEFAULT_DIMENSIONS: [usize; 7] = [4, 6, 8, 10, 16, 25, 64];

/// Below this dimension every admissible `t` is checked; above it only the
/// dyadic ones and the largest admissible one.
pub const FULL_T_RANGE_MAX_D: usize = 10;

/// Largest dimension for the Krawtchouk expansion entry.
pub const KR_EXPANSION_MAX_D: usize = 8;

/// Redraws allowed per sample when a branch condition filters it out.
pub const MAX_BRANCH_ATTEMPTS: u32 = 256;

/// Relative agreement required between fast and enumerated symbols.
pub const ORACLE_REL_TOL: f64 = 1e-9;

/// Largest imaginary part tolerated in an enumerated symbol.
pub const ORACLE_IMAG_TOL: f64 = 1e-10;

/// `(2e)²·16/15`
pub fn square_sum_bound() -> f64 {
    4.0 * E * E * 16.0 / 15.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum InequalityId {
    /// `|m_t − s_t| ≤ 2e·t²/d`
    SphereBallGap,
    /// `|s_t − 1| ≤ 2(t/d)·Σ sin²(πξᵢ)`
    SphereNearOrigin,
    /// `|s_t| ≤ exp(−ct/(2d)·Σ sin²) + exp(−ct/(2d)·Σ cos²)`
    SphereTwoSidedDecay,
    /// `|s_t − λ¹_t| ≤ 7·min(exp(−ct/(8d)·Σ sin²), (t/d)·Σ sin²)` when `|V_ξ| ≤ d/2`
    LowFrequencyHeat,
    /// `|s_t − λ²_t| ≤ 7·min(exp(−ct/(8d)·Σ cos²), (t/d)·Σ cos²)` when `|V_ξ| ≥ d/2`
    HighFrequencyHeat,
    /// `|s_t − ⟨(−1)^{Σ_{V_ξ} xᵢ}⟩_{S_t}| ≤ 2(t/d)·Σ cos²`
    SignedSphereApprox,
    /// `|⟨(−1)^{Σ_{V_ξ} xᵢ}⟩ − ⟨(−1)^{Σ xᵢ}⟩| ≤ 4(t/d)·Σ cos²`
    SignedSphereSpread,
    /// `Σ_{t dyadic, t ≤ √d} |m_t − s_t|² ≤ (2e)²·16/15`
    DyadicSquareSum,
    /// `s_t` equals its Krawtchouk expansion
    KrawtchoukExpansion,
}

impl InequalityId {
    pub const ALL: [InequalityId; 9] = [
        InequalityId::SphereBallGap,
        InequalityId::SphereNearOrigin,
        InequalityId::SphereTwoSidedDecay,
        InequalityId::LowFrequencyHeat,
        InequalityId::HighFrequencyHeat,
        InequalityId::SignedSphereApprox,
        InequalityId::SignedSphereSpread,
        InequalityId::DyadicSquareSum,
        InequalityId::KrawtchoukExpansion,
    ];

    /// Catalog key used on the command line and in CSV output.
    pub fn key(&self) -> &'static str {
        match self {
            InequalityId::SphereBallGap => "COR_2_5",
            InequalityId::SphereNearOrigin => "LEM_3_1",
            InequalityId::SphereTwoSidedDecay => "LEM_3_4",
            InequalityId::LowFrequencyHeat => "LEM_4_4A",
            InequalityId::HighFrequencyHeat => "LEM_4_4B",
            InequalityId::SignedSphereApprox => "LEM_4_5",
            InequalityId::SignedSphereSpread => "LEM_4_6",
            InequalityId::DyadicSquareSum => "SQSUM_2_6",
            InequalityId::KrawtchoukExpansion => "KR_EXPANSION",
        }
    }

    /// Largest admissible `t` for this dimension, or `None` when the
    /// dimension itself is out of range.
    pub fn max_t(&self, d: usize) -> Option<u64> {
        let d64 = d as u64;
        let t = match self {
            InequalityId::SphereBallGap | InequalityId::DyadicSquareSum => {
                if d < 4 {
                    return None;
                }
                d64.isqrt()
            }
            InequalityId::SphereNearOrigin => d64,
            InequalityId::SphereTwoSidedDecay
            | InequalityId::LowFrequencyHeat
            | InequalityId::HighFrequencyHeat => d64 / 2,
            InequalityId::SignedSphereApprox | InequalityId::SignedSphereSpread => {
                if d > SIGNED_AVERAGE_MAX_D {
                    return None;
                }
                d64
            }
            InequalityId::KrawtchoukExpansion => {
                if d > KR_EXPANSION_MAX_D {
                    return None;
                }
                d64 / 2
            }
        };
        (t >= 1).then_some(t)
    }

    /// Checks the hypotheses on `(d, t)`. The square-sum entry runs over all
    /// dyadic scales and ignores `t`.
    pub fn check(&self, d: usize, t: u64) -> Result<()> {
        let Some(max) = self.max_t(d) else {
            return Err(Error::pre(format!(
                "{} is not defined for d={d}{}",
                self.key(),
                match self {
                    InequalityId::SphereBallGap | InequalityId::DyadicSquareSum =>
                        " (requires d ≥ 4)".to_string(),
                    InequalityId::SignedSphereApprox | InequalityId::SignedSphereSpread =>
                        format!(" (enumeration limited to d ≤ {SIGNED_AVERAGE_MAX_D})"),
                    InequalityId::KrawtchoukExpansion =>
                        format!(" (limited to d ≤ {KR_EXPANSION_MAX_D})"),
                    _ => String::new(),
                }
            )));
        };
        if *self == InequalityId::DyadicSquareSum {
            return Ok(());
        }
        if t < 1 || t > max {
            return Err(Error::pre(format!(
                "{} at d={d} requires 1 ≤ t ≤ {max}, got t={t}",
                self.key()
            )));
        }
        Ok(())
    }

    /// `t` values of the default matrix for dimension `d`.
    pub fn default_ts(&self, d: usize) -> Vec<u64> {
        let Some(max) = self.max_t(d) else {
            return Vec::new();
        };
        if *self == InequalityId::DyadicSquareSum {
            return vec![*dyadic_scales(d as u64).last().unwrap()];
        }
        if d <= FULL_T_RANGE_MAX_D {
            return (1..=max).collect();
        }
        let mut ts: Vec<u64> = std::iter::successors(Some(1u64), |t| Some(t * 2))
            .take_while(|&t| t <= max)
            .collect();
        if ts.last() != Some(&max) {
            ts.push(max);
        }
        ts
    }

    /// `(d, t)` pairs of the default matrix.
    pub fn default_matrix(&self) -> Vec<(usize, u64)> {
        DEFAULT_DIMENSIONS
            .iter()
            .flat_map(|&d| self.default_ts(d).into_iter().map(move |t| (d, t)))
            .collect()
    }
}

impl fmt::Display for InequalityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for InequalityId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        InequalityId::ALL
            .into_iter()
            .find(|id| id.key().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Parse(format!("unknown inequality id '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strategy {
    Uniform,
    NearZero,
    NearHalf,
    SparseAxes,
    BoundaryQuarter,
    Mixed,
}

impl Strategy {
    pub const ALL: [Strategy; 6] = [
        Strategy::Uniform,
        Strategy::NearZero,
        Strategy::NearHalf,
        Strategy::SparseAxes,
        Strategy::BoundaryQuarter,
        Strategy::Mixed,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Uniform => "uniform",
            Strategy::NearZero => "near_zero",
            Strategy::NearHalf => "near_half",
            Strategy::SparseAxes => "sparse_axes",
            Strategy::BoundaryQuarter => "boundary_quarter",
            Strategy::Mixed => "mixed",
        }
    }

    fn code(&self) -> u64 {
        *self as u64 + 1
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown sampling strategy '{s}'")))
    }
}

/// Half-width of the cluster around `|ξᵢ| = 1/4`.
const QUARTER_WIDTH: f64 = 0.02;

/// Deterministic frequency sampler.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct XiSampler {
    pub strategy: Strategy,
    pub seed: u64,
    pub count: u64,
}

impl XiSampler {
    pub fn new(strategy: Strategy, seed: u64, count: u64) -> Self {
        Self {
            strategy,
            seed,
            count,
        }
    }

    /// Sample `index`; `attempt > 0` gives the redraws used by branch filters.
    pub fn draw(&self, d: usize, index: u64, attempt: u32) -> TorusPoint {
        let tag = self.strategy.code() | ((attempt as u64) << 8);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.seed, tag, index));
        let strategy = match self.strategy {
            Strategy::Mixed => Strategy::ALL[rng.random_range(0..5)],
            s => s,
        };
        draw_with(strategy, d, &mut rng)
    }
}

fn random_sign(rng: &mut ChaCha8Rng, m: f64) -> f64 {
    if rng.random_bool(0.5) {
        m
    } else {
        -m
    }
}

fn draw_with(strategy: Strategy, d: usize, rng: &mut ChaCha8Rng) -> TorusPoint {
    let r = 1.0 / (2.0 * (d as f64).sqrt());
    let coords: Vec<f64> = match strategy {
        Strategy::Uniform | Strategy::Mixed => {
            (0..d).map(|_| rng.random_range(-0.5..0.5)).collect()
        }
        Strategy::NearZero => (0..d).map(|_| rng.random_range(-r..=r)).collect(),
        Strategy::NearHalf => (0..d)
            .map(|_| {
                let u: f64 = rng.sample(Open01);
                random_sign(rng, 0.5 - r * u)
            })
            .collect(),
        Strategy::SparseAxes => {
            let k = (d as f64).sqrt().ceil() as usize;
            let mut xi = vec![0.0; d];
            for i in rand::seq::index::sample(rng, d, k.min(d)) {
                xi[i] = rng.random_range(-0.5..0.5);
            }
            xi
        }
        Strategy::BoundaryQuarter => (0..d)
            .map(|_| {
                let m = if rng.random_ratio(1, 8) {
                    0.25
                } else {
                    0.25 + rng.random_range(-QUARTER_WIDTH..QUARTER_WIDTH)
                };
                random_sign(rng, m)
            })
            .collect(),
    };
    TorusPoint::wrap(coords)
}

/// Evaluates both sides of one catalog entry at fixed `(d, t)`.
pub struct InequalityEvaluator {
    id: InequalityId,
    d: usize,
    t: u64,
    c: f64,
    signed: Option<SignedSphereAverage>,
    expansion: Option<KrawtchoukExpansion>,
    full_prefactor: f64,
}

impl InequalityEvaluator {
    pub fn new(id: InequalityId, d: usize, t: u64) -> Result<Self> {
        id.check(d, t)?;
        let t = if id == InequalityId::DyadicSquareSum {
            *dyadic_scales(d as u64).last().unwrap()
        } else {
            t
        };
        let signed = match id {
            InequalityId::SignedSphereApprox | InequalityId::SignedSphereSpread => {
                Some(SignedSphereAverage::new(d, t)?)
            }
            _ => None,
        };
        let full_prefactor = signed.as_ref().map_or(0.0, |s| s.full());
        let expansion = match id {
            InequalityId::KrawtchoukExpansion => Some(KrawtchoukExpansion::new(d, t)?),
            _ => None,
        };
        Ok(Self {
            id,
            d,
            t,
            c: decay_constant(),
            signed,
            expansion,
            full_prefactor,
        })
    }

    pub fn id(&self) -> InequalityId {
        self.id
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// The effective `t`; for the square sum this is the largest dyadic scale.
    pub fn t(&self) -> u64 {
        self.t
    }

    /// `Some((lhs, rhs))`, or `None` when `ξ` lies outside the entry's branch.
    pub fn eval(&self, xi: &TorusPoint) -> Result<Option<(f64, f64)>> {
        let (d, t) = (self.d, self.t);
        let tf = t as f64;
        let df = d as f64;
        let out = match self.id {
            InequalityId::SphereBallGap => {
                let m = m_fast(d, t, xi)?.re();
                let s = s_fast(d, t, xi)?;
                ((m - s).abs(), 2.0 * E * tf * tf / df)
            }
            InequalityId::SphereNearOrigin => {
                let s = s_fast(d, t, xi)?;
                ((s - 1.0).abs(), 2.0 * tf / df * xi.sin2_sum())
            }
            InequalityId::SphereTwoSidedDecay => {
                let s = s_fast(d, t, xi)?;
                let k = self.c * tf / (2.0 * df);
                (
                    s.abs(),
                    (-k * xi.sin2_sum()).exp() + (-k * xi.cos2_sum()).exp(),
                )
            }
            InequalityId::LowFrequencyHeat => {
                if !frequency_split(xi).low_branch() {
                    return Ok(None);
                }
                let gap = (s_fast(d, t, xi)? - lambda1(d, t, xi)?).abs();
                (gap, self.heat_bound(xi.sin2_sum()))
            }
            InequalityId::HighFrequencyHeat => {
                if !frequency_split(xi).high_branch() {
                    return Ok(None);
                }
                let gap = (s_fast(d, t, xi)? - lambda2(d, t, xi)?).abs();
                (gap, self.heat_bound(xi.cos2_sum()))
            }
            InequalityId::SignedSphereApprox => {
                let signed = self.signed.as_ref().unwrap().eval(&frequency_split(xi));
                let s = s_fast(d, t, xi)?;
                ((s - signed).abs(), 2.0 * tf / df * xi.cos2_sum())
            }
            InequalityId::SignedSphereSpread => {
                let signed = self.signed.as_ref().unwrap().eval(&frequency_split(xi));
                (
                    (signed - self.full_prefactor).abs(),
                    4.0 * tf / df * xi.cos2_sum(),
                )
            }
            InequalityId::DyadicSquareSum => {
                let mut acc = CompensatedSum::new();
                for scale in dyadic_scales(d as u64) {
                    let gap = m_fast(d, scale, xi)?.re() - s_fast(d, scale, xi)?;
                    acc.add(gap * gap);
                }
                (acc.value(), square_sum_bound())
            }
            InequalityId::KrawtchoukExpansion => {
                let via = self.expansion.as_ref().unwrap().eval(xi)?;
                ((s_fast(d, t, xi)? - via).abs(), 0.0)
            }
        };
        Ok(Some(out))
    }

    fn heat_bound(&self, mass: f64) -> f64 {
        let tf = self.t as f64;
        let df = self.d as f64;
        7.0 * (-self.c * tf / (8.0 * df) * mass).exp().min(tf / df * mass)
    }
}

/// `lhs / rhs`, with `0/0 = 0` up to the violation tolerance.
pub fn bound_ratio(lhs: f64, rhs: f64) -> f64 {
    if rhs > 0.0 {
        lhs / rhs
    } else if lhs <= VIOLATION_TOL {
        0.0
    } else {
        f64::INFINITY
    }
}

/// A sample at which a maximum was attained.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleWitness {
    pub index: u64,
    pub attempt: u32,
    pub lhs: f64,
    pub rhs: f64,
    pub xi: TorusPoint,
}

impl SampleWitness {
    pub fn slack(&self) -> f64 {
        self.lhs - self.rhs
    }

    pub fn ratio(&self) -> f64 {
        bound_ratio(self.lhs, self.rhs)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InequalityReport {
    pub id: InequalityId,
    pub d: usize,
    pub t: u64,
    /// Sampler name, or `explicit` for caller-supplied points.
    pub strategy: String,
    pub seed: u64,
    /// Samples actually evaluated.
    pub samples: u64,
    /// Samples given up after `MAX_BRANCH_ATTEMPTS` redraws.
    pub dropped: u64,
    pub max_lhs: f64,
    pub max_slack: f64,
    pub violations: u64,
    /// Sample with the largest slack.
    pub witness: Option<SampleWitness>,
    /// Sample with the largest `lhs / rhs`.
    pub ratio_witness: Option<SampleWitness>,
}

impl InequalityReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

#[derive(Debug, Clone, Copy)]
struct Outcome {
    index: u64,
    attempt: u32,
    lhs: f64,
    rhs: f64,
}

fn slack_key(o: &Outcome) -> f64 {
    let s = o.lhs - o.rhs;
    if s.is_nan() {
        f64::INFINITY
    } else {
        s
    }
}

fn ratio_key(o: &Outcome) -> f64 {
    let r = bound_ratio(o.lhs, o.rhs);
    if r.is_nan() {
        f64::INFINITY
    } else {
        r
    }
}

fn summarize(
    eval: &InequalityEvaluator,
    strategy: String,
    seed: u64,
    outcomes: Vec<Option<Outcome>>,
    point: impl Fn(u64, u32) -> TorusPoint,
) -> InequalityReport {
    let mut samples = 0u64;
    let mut dropped = 0u64;
    let mut violations = 0u64;
    let mut max_lhs = f64::NEG_INFINITY;
    let mut best_slack: Option<Outcome> = None;
    let mut best_ratio: Option<Outcome> = None;
    for o in outcomes {
        let Some(o) = o else {
            dropped += 1;
            continue;
        };
        samples += 1;
        if !(o.lhs - o.rhs <= VIOLATION_TOL) {
            violations += 1;
        }
        if o.lhs > max_lhs || o.lhs.is_nan() {
            max_lhs = if o.lhs.is_nan() { f64::INFINITY } else { o.lhs };
        }
        if best_slack.is_none_or(|b| slack_key(&o) > slack_key(&b)) {
            best_slack = Some(o);
        }
        if best_ratio.is_none_or(|b| ratio_key(&o) > ratio_key(&b)) {
            best_ratio = Some(o);
        }
    }
    let witness = |o: Option<Outcome>| {
        o.map(|o| SampleWitness {
            index: o.index,
            attempt: o.attempt,
            lhs: o.lhs,
            rhs: o.rhs,
            xi: point(o.index, o.attempt),
        })
    };
    let witness_slack = witness(best_slack);
    InequalityReport {
        id: eval.id,
        d: eval.d,
        t: eval.t,
        strategy,
        seed,
        samples,
        dropped,
        max_lhs: if samples == 0 { f64::NAN } else { max_lhs },
        max_slack: witness_slack.as_ref().map_or(f64::NAN, |w| w.slack()),
        violations,
        witness: witness_slack,
        ratio_witness: witness(best_ratio),
    }
}

/// Runs one catalog entry against `sampler.count` sampled frequencies.
///
/// For the two heat-symbol entries, samples outside the branch condition are
/// redrawn up to `MAX_BRANCH_ATTEMPTS` times and otherwise dropped.
pub fn verify_inequality(
    id: InequalityId,
    d: usize,
    t: u64,
    sampler: &XiSampler,
) -> Result<InequalityReport> {
    if sampler.count == 0 {
        return Err(Error::pre("sampler count must be at least 1"));
    }
    let eval = InequalityEvaluator::new(id, d, t)?;
    let outcomes = (0..sampler.count)
        .into_par_iter()
        .map(|index| {
            for attempt in 0..MAX_BRANCH_ATTEMPTS {
                let xi = sampler.draw(d, index, attempt);
                if let Some((lhs, rhs)) = eval.eval(&xi)? {
                    return Ok(Some(Outcome {
                        index,
                        attempt,
                        lhs,
                        rhs,
                    }));
                }
            }
            Ok(None)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(
        &eval,
        sampler.strategy.name().to_string(),
        sampler.seed,
        outcomes,
        |i, a| sampler.draw(d, i, a),
    ))
}

/// Runs one catalog entry at the given frequencies. Points outside a branch
/// condition are counted as dropped.
pub fn verify_at_points(
    id: InequalityId,
    d: usize,
    t: u64,
    points: &[TorusPoint],
) -> Result<InequalityReport> {
    if points.is_empty() {
        return Err(Error::pre("no frequencies given"));
    }
    let eval = InequalityEvaluator::new(id, d, t)?;
    let outcomes = points
        .iter()
        .enumerate()
        .map(|(i, xi)| {
            Ok(eval.eval(xi)?.map(|(lhs, rhs)| Outcome {
                index: i as u64,
                attempt: 0,
                lhs,
                rhs,
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(&eval, "explicit".into(), 0, outcomes, |i, _| {
        points[i as usize].clone()
    }))
}

/// Runs `id` over its default matrix with every sampling strategy.
pub fn verify_default(id: InequalityId, samples: u64, seed: u64) -> Result<Vec<InequalityReport>> {
    let mut out = Vec::new();
    for (d, t) in id.default_matrix() {
        for strategy in Strategy::ALL {
            out.push(verify_inequality(
                id,
                d,
                t,
                &XiSampler::new(strategy, seed, samples),
            )?);
        }
    }
    Ok(out)
}

/// Fractions of first draws landing in the `|V_ξ| ≤ d/2` and `|V_ξ| ≥ d/2`
/// branches.
pub fn branch_coverage(d: usize, sampler: &XiSampler) -> (f64, f64) {
    let (low, high) = (0..sampler.count)
        .into_par_iter()
        .map(|i| {
            let split = frequency_split(&sampler.draw(d, i, 0));
            (split.low_branch() as u64, split.high_branch() as u64)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    let n = sampler.count as f64;
    (low as f64 / n, high as f64 / n)
}

pub fn witness_string(xi: &TorusPoint) -> String {
    xi.coords()
        .iter()
        .map(|&x| fmt17(x))
        .collect::<Vec<_>>()
        .join(";")
}

pub const VERIFY_CSV_HEADER: [&str; 10] = [
    "id",
    "d",
    "t",
    "strategy",
    "seed",
    "samples",
    "max_lhs",
    "max_slack",
    "violations",
    "witness",
];

pub fn verify_csv(reports: &[InequalityReport]) -> CsvTable {
    let mut table = CsvTable::new(&VERIFY_CSV_HEADER);
    for r in reports {
        table.push(vec![
            r.id.key().to_string(),
            r.d.to_string(),
            r.t.to_string(),
            r.strategy.clone(),
            r.seed.to_string(),
            r.samples.to_string(),
            fmt17(r.max_lhs),
            fmt17(r.max_slack),
            r.violations.to_string(),
            r.witness
                .as_ref()
                .map(|w| witness_string(&w.xi))
                .unwrap_or_default(),
        ]);
    }
    table
}

/// How `t` is chosen for each dimension of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TRule {
    AllDyadicLeqSqrtD,
    Fixed(u64),
}

impl FromStr for TRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "dyadic" || s == "all_dyadic_leq_sqrt_d" {
            return Ok(TRule::AllDyadicLeqSqrtD);
        }
        let v = s.strip_prefix("fixed:").unwrap_or(s);
        v.parse()
            .map(TRule::Fixed)
            .map_err(|_| Error::Parse(format!("bad t rule '{s}'")))
    }
}

/// Worst sample over all strategies for one `(id, d, t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub id: InequalityId,
    pub d: usize,
    pub t: u64,
    pub strategy: Strategy,
    pub seed: u64,
    pub samples: u64,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub witness: TorusPoint,
}

/// Bound tightness per `(id, d, t)`: the sample maximising `lhs / rhs` over
/// every strategy. Rows are sorted by `(id, d, t)`.
pub fn tightness_sweep(
    id: InequalityId,
    d_list: &[usize],
    t_rule: TRule,
    samples: u64,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    let mut pairs = Vec::new();
    for &d in d_list {
        if id == InequalityId::DyadicSquareSum {
            pairs.push((d, 0));
            continue;
        }
        match t_rule {
            TRule::Fixed(t) => pairs.push((d, t)),
            TRule::AllDyadicLeqSqrtD => {
                pairs.extend(dyadic_scales(d as u64).into_iter().map(|t| (d, t)))
            }
        }
    }
    for &(d, t) in &pairs {
        id.check(d, t)?;
    }
    let mut rows = Vec::new();
    for (d, t) in pairs {
        let mut best: Option<SweepRow> = None;
        for strategy in Strategy::ALL {
            let report = verify_inequality(id, d, t, &XiSampler::new(strategy, seed, samples))?;
            let Some(w) = report.ratio_witness else {
                continue;
            };
            let ratio = w.ratio();
            let key = if ratio.is_nan() { f64::INFINITY } else { ratio };
            if best.as_ref().is_none_or(|b| key > b.ratio) {
                best = Some(SweepRow {
                    id,
                    d,
                    t: report.t,
                    strategy,
                    seed,
                    samples: report.samples,
                    lhs: w.lhs,
                    rhs: w.rhs,
                    ratio: key,
                    witness: w.xi,
                });
            }
        }
        if let Some(row) = best {
            rows.push(row);
        }
    }
    rows.sort_by(|a, b| (a.id, a.d, a.t).cmp(&(b.id, b.d, b.t)));
    Ok(rows)
}

pub const SWEEP_CSV_HEADER: [&str; 10] = [
    "id", "d", "t", "strategy", "seed", "samples", "lhs", "rhs", "ratio", "witness",
];

pub fn sweep_csv(rows: &[SweepRow]) -> CsvTable {
    let mut table = CsvTable::new(&SWEEP_CSV_HEADER);
    for r in rows {
        table.push(vec![
            r.id.key().to_string(),
            r.d.to_string(),
            r.t.to_string(),
            r.strategy.name().to_string(),
            r.seed.to_string(),
            r.samples.to_string(),
            fmt17(r.lhs),
            fmt17(r.rhs),
            fmt17(r.ratio),
            witness_string(&r.witness),
        ]);
    }
    table
}

/// Fast evaluators against the enumeration oracles at uniform random ξ.
#[derive(Debug, Clone, PartialEq)]
pub struct AgreementRow {
    pub d: usize,
    pub t: u64,
    pub seed: u64,
    pub samples: u64,
    /// `max |s_fast − s_enum| / (1 + |s_enum|)`
    pub max_s_err: f64,
    /// `max |m_fast − m_enum| / (1 + |m_enum|)`
    pub max_m_err: f64,
    /// Largest imaginary part of either oracle.
    pub max_imag: f64,
    pub failures: u64,
}

impl AgreementRow {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

pub fn oracle_agreement(d: usize, t: u64, samples: u64, seed: u64) -> Result<AgreementRow> {
    let sampler = XiSampler::new(Strategy::Uniform, seed, samples);
    let per_sample = (0..samples)
        .into_par_iter()
        .map(|i| {
            let xi = sampler.draw(d, i, 0);
            let se = s_enum(d, t, &xi)?;
            let me = m_enum(d, t, &xi)?;
            let s_err = (s_fast(d, t, &xi)? - se.re()).abs() / (1.0 + se.abs());
            let m_err = (m_fast(d, t, &xi)?.re() - me.re()).abs() / (1.0 + me.abs());
            let imag = se.im().abs().max(me.im().abs());
            Ok((s_err, m_err, imag))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut row = AgreementRow {
        d,
        t,
        seed,
        samples,
        max_s_err: 0.0,
        max_m_err: 0.0,
        max_imag: 0.0,
        failures: 0,
    };
    for (s_err, m_err, imag) in per_sample {
        let ok = s_err <= ORACLE_REL_TOL && m_err <= ORACLE_REL_TOL && imag <= ORACLE_IMAG_TOL;
        if !ok {
            row.failures += 1;
        }
        row.max_s_err = row.max_s_err.max(s_err);
        row.max_m_err = row.max_m_err.max(m_err);
        row.max_imag = row.max_imag.max(imag);
    }
    Ok(row)
}

pub fn agreement_csv(rows: &[AgreementRow]) -> CsvTable {
    let mut table = CsvTable::new(&[
        "d",
        "t",
        "seed",
        "samples",
        "max_s_err",
        "max_m_err",
        "max_imag",
        "failures",
    ]);
    for r in rows {
        table.push(vec![
            r.d.to_string(),
            r.t.to_string(),
            r.seed.to_string(),
            r.samples.to_string(),
            fmt17(r.max_s_err),
            fmt17(r.max_m_err),
            fmt17(r.max_imag),
            r.failures.to_string(),
        ]);
    }
    table
}

/// `Σ_{k=0}^{k_max} min(4ᵏx, 1/(4ᵏx))`
pub fn min_sum(x: f64, k_max: u32) -> f64 {
    let mut acc = CompensatedSum::new();
    let mut y = x;
    for _ in 0..=k_max {
        acc.add(y.min(1.0 / y));
        y *= 4.0;
    }
    acc.value()
}

/// `n` points log-spaced from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| {
            if i + 1 == n {
                hi
            } else {
                (a + (b - a) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

pub const MIN_SUM_BOUND: f64 = 8.0 / 3.0;
pub const MIN_SUM_TOL: f64 = 1e-12;
pub const DEFAULT_K_MAX: u32 = 60;

#[derive(Debug, Clone, PartialEq)]
pub struct MinSumReport {
    pub points: usize,
    pub k_max: u32,
    pub max_sum: f64,
    pub argmax: f64,
    pub violations: u64,
}

impl MinSumReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Checks `min_sum(x) ≤ 8/3 + 1e-12` on every grid point.
pub fn verify_lemma_5_1(x_grid: &[f64], k_max: u32) -> Result<MinSumReport> {
    if x_grid.is_empty() {
        return Err(Error::pre("empty grid"));
    }
    if let Some(bad) = x_grid.iter().find(|x| !(**x > 0.0 && x.is_finite())) {
        return Err(Error::pre(format!(
            "grid point {bad} is not a positive real"
        )));
    }
    let x_min = x_grid.iter().copied().fold(f64::INFINITY, f64::min);
    let tail = 4f64.powi(-(k_max as i32)) / x_min;
    if tail >= 1e-15 {
        return Err(Error::pre(format!(
            "k_max={k_max} leaves a tail of {tail:e} at x={x_min:e}"
        )));
    }
    let sums: Vec<f64> = x_grid.par_iter().map(|&x| min_sum(x, k_max)).collect();
    let mut report = MinSumReport {
        points: x_grid.len(),
        k_max,
        max_sum: f64::NEG_INFINITY,
        argmax: f64::NAN,
        violations: 0,
    };
    for (&x, &s) in x_grid.iter().zip(&sums) {
        if !(s <= MIN_SUM_BOUND + MIN_SUM_TOL) {
            report.violations += 1;
        }
        if s > report.max_sum {
            report.max_sum = s;
            report.argmax = x;
        }
    }
    Ok(report)
}

/// The three terms of the final `ℓ²` constant for the maximal operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantChain {
    pub c: f64,
    pub difference_part: f64,
    pub semigroup_part: f64,
    pub decay_part: f64,
    pub total: f64,
}

pub const CHAIN_BOUND: f64 = 900.0;

pub fn constant_chain() -> ConstantChain {
    let c = decay_constant();
    let difference_part = 6.0;
    let semigroup_part = 2.0 * SQRT_2;
    let decay_part = 56.0 / c * (4.0 / 3f64.sqrt());
    ConstantChain {
        c,
        difference_part,
        semigroup_part,
        decay_part,
        total: difference_part + semigroup_part + decay_part,
    }
}

/// `6 + 2√2 + (56/c)·(4/√3)`; panics in debug builds if it exceeds 900.
pub fn verify_constant_chain() -> f64 {
    let total = constant_chain().total;
    debug_assert!(total <= CHAIN_BOUND);
    total
}
