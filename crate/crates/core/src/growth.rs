//! Markov growth of random distance matrices.
//!
//! A matrix is grown one point at a time. The distance from each new point to
//! point 0 is drawn from a law `γ` on the half-line; every further distance,
//! to points `1, 2, ...` in order, is drawn uniformly from the interval of
//! values still compatible with the triangle inequality given everything
//! drawn so far. Draws are consumed in exactly that order, one stream per
//! chain, so a chain is reproducible from `(seed, stream)` alone.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::error::{input, Error, Result};
use crate::matrix::{pair_count, DistanceMatrix};
use crate::rng::{random_permutation, stream_rng, StreamRng};
use crate::stats::{ks_one_sample, ks_two_sample, TestOutcome};

/// Law of the first-row distances.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GammaSpec {
    Uniform { low: f64, high: f64 },
    Exponential { rate: f64 },
    HalfNormal { scale: f64 },
}

impl Default for GammaSpec {
    fn default() -> Self {
        GammaSpec::HalfNormal { scale: 1.0 }
    }
}

impl GammaSpec {
    pub fn uniform(high: f64) -> Self {
        GammaSpec::Uniform { low: 0.0, high }
    }

    pub fn check(&self) -> Result<()> {
        let ok = match *self {
            GammaSpec::Uniform { low, high } => low >= 0.0 && high > low && high.is_finite(),
            GammaSpec::Exponential { rate } => rate > 0.0 && rate.is_finite(),
            GammaSpec::HalfNormal { scale } => scale > 0.0 && scale.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            input(format!("invalid gamma parameters: {self}"))
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            GammaSpec::Uniform { low, high } => low + (high - low) * rng.random::<f64>(),
            GammaSpec::Exponential { rate } => Exp::new(rate).expect("checked rate").sample(rng),
            GammaSpec::HalfNormal { scale } => Normal::new(0.0, scale).expect("checked scale").sample(rng).abs(),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        match *self {
            GammaSpec::Uniform { low, high } => ((x - low) / (high - low)).clamp(0.0, 1.0),
            GammaSpec::Exponential { rate } => 1.0 - (-rate * x).exp(),
            GammaSpec::HalfNormal { scale } => erf(x / (scale * std::f64::consts::SQRT_2)),
        }
    }
}

impl fmt::Display for GammaSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GammaSpec::Uniform { low, high } => write!(f, "unif:{low},{high}"),
            GammaSpec::Exponential { rate } => write!(f, "exp:{rate}"),
            GammaSpec::HalfNormal { scale } => write!(f, "halfnorm:{scale}"),
        }
    }
}

impl FromStr for GammaSpec {
    type Err = Error;

    /// `unif:a,b`, `exp:rate`, `halfnorm:scale`; a bare `exp` or `halfnorm`
    /// uses parameter 1.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, args) = s.split_once(':').unwrap_or((s, ""));
        let nums: Vec<f64> = if args.is_empty() {
            Vec::new()
        } else {
            args.split(',')
                .map(|t| t.trim().parse::<f64>().map_err(|e| Error::Input(format!("bad number {t:?}: {e}"))))
                .collect::<Result<_>>()?
        };
        let g = match (kind, nums.as_slice()) {
            ("unif", [a, b]) => GammaSpec::Uniform { low: *a, high: *b },
            ("unif", [b]) => GammaSpec::Uniform { low: 0.0, high: *b },
            ("exp", []) => GammaSpec::Exponential { rate: 1.0 },
            ("exp", [r]) => GammaSpec::Exponential { rate: *r },
            ("halfnorm", []) => GammaSpec::HalfNormal { scale: 1.0 },
            ("halfnorm", [s]) => GammaSpec::HalfNormal { scale: *s },
            _ => return input(format!("unrecognised gamma spec {s:?}")),
        };
        g.check()?;
        Ok(g)
    }
}

impl Serialize for GammaSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for GammaSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A grown matrix together with the parameters that reproduce it.
///
/// The admissible vectors `r(1), r(2), ...` of the chain are the columns of
/// the upper-triangular storage, so they are not stored twice.
#[derive(Clone, Debug, PartialEq)]
pub struct GrowthChain {
    pub matrix: DistanceMatrix,
    pub seed: u64,
    pub stream: u64,
    pub gamma: GammaSpec,
    pub bound: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct ChainRecord {
    n: usize,
    seed: u64,
    stream: u64,
    gamma: GammaSpec,
    bound: Option<f64>,
    steps: Vec<Vec<f64>>,
}

impl GrowthChain {
    /// Step `k` (for `k = 1..n`): distances from point `k` to points `0..k`.
    pub fn steps(&self) -> impl Iterator<Item = &[f64]> {
        (1..self.matrix.n()).map(|k| self.matrix.column(k))
    }

    /// Rebuild the matrix by attaching the steps one after another.
    pub fn replay(&self, tol: f64) -> Result<DistanceMatrix> {
        let mut m = DistanceMatrix::single();
        for s in self.steps() {
            m = m.extend(s, tol)?;
        }
        Ok(m)
    }
}

impl Serialize for GrowthChain {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ChainRecord {
            n: self.matrix.n(),
            seed: self.seed,
            stream: self.stream,
            gamma: self.gamma,
            bound: self.bound,
            steps: self.steps().map(<[f64]>::to_vec).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for GrowthChain {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let rec = ChainRecord::deserialize(d)?;
        if rec.steps.len() + 1 != rec.n.max(1) {
            return Err(D::Error::custom("step count does not match n"));
        }
        let mut upper = Vec::with_capacity(pair_count(rec.n));
        for (k, s) in rec.steps.iter().enumerate() {
            if s.len() != k + 1 {
                return Err(D::Error::custom(format!("step {} has length {}", k + 1, s.len())));
            }
            upper.extend_from_slice(s);
        }
        let matrix = DistanceMatrix::from_upper(rec.n, upper).map_err(D::Error::custom)?;
        Ok(GrowthChain { matrix, seed: rec.seed, stream: rec.stream, gamma: rec.gamma, bound: rec.bound })
    }
}

/// Uniform draw on `[lo, hi]`, robust to `hi` rounding just below `lo`.
#[inline]
pub(crate) fn uniform_on<R: Rng + ?Sized>(lo: f64, hi: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    if hi <= lo {
        return lo;
    }
    (lo + (hi - lo) * u).min(hi)
}

/// Grow an `n`-point matrix. `first_row(j, rng)` supplies the distance from
/// point `j` to point 0; `interval(m, prefix, k)` the feasible range for the
/// distance to point `k` given `prefix` (distances to `0..k`).
pub(crate) fn grow_with<R, F, I>(n: usize, rng: &mut R, mut first_row: F, interval: I) -> DistanceMatrix
where
    R: Rng + ?Sized,
    F: FnMut(usize, &mut R) -> f64,
    I: Fn(&DistanceMatrix, &[f64], usize) -> (f64, f64),
{
    let mut m = DistanceMatrix::single();
    let mut col = Vec::with_capacity(n);
    for j in 1..n {
        col.clear();
        col.push(first_row(j, rng));
        for k in 1..j {
            let (lo, hi) = interval(&m, &col, k);
            col.push(uniform_on(lo, hi, rng));
        }
        m.push_column(&col);
    }
    m
}

fn metric_interval(bound: Option<f64>) -> impl Fn(&DistanceMatrix, &[f64], usize) -> (f64, f64) {
    move |m, prefix, k| {
        let iv = m.coordinate_bounds(prefix, k);
        let hi = iv.hi_value().unwrap_or(f64::INFINITY);
        (iv.lo, bound.map_or(hi, |b| hi.min(b)))
    }
}

/// Bounded mode needs a first-row law supported in `[0, b]`.
pub(crate) fn check_bound(gamma: GammaSpec, bound: Option<f64>) -> Result<()> {
    gamma.check()?;
    let Some(b) = bound else { return Ok(()) };
    if !(b > 0.0 && b.is_finite()) {
        return input(format!("bound must be positive, got {b}"));
    }
    match gamma {
        GammaSpec::Uniform { high, .. } if high <= b => Ok(()),
        _ => input(format!("bound {b} needs gamma supported in [0, {b}], got {gamma}")),
    }
}

/// One chain on stream `stream` of master seed `seed`.
pub fn sample_chain(n: usize, gamma: GammaSpec, bound: Option<f64>, seed: u64, stream: u64) -> Result<GrowthChain> {
    if n == 0 {
        return input("n must be at least 1");
    }
    check_bound(gamma, bound)?;
    let mut rng = stream_rng(seed, stream);
    let matrix = grow_with(n, &mut rng, |_, r| gamma.sample(r), metric_interval(bound));
    Ok(GrowthChain { matrix, seed, stream, gamma, bound })
}

/// A matrix distributed according to the growth measure with first-row law `gamma`.
pub fn sample_nu_gamma(n: usize, gamma: GammaSpec, seed: u64) -> Result<GrowthChain> {
    sample_chain(n, gamma, None, seed, 0)
}

/// Growth with every distance capped at `b`; `γ` is uniform on `[0, b]`.
pub fn sample_bounded(n: usize, b: f64, seed: u64) -> Result<GrowthChain> {
    sample_chain(n, GammaSpec::uniform(b), Some(b), seed, 0)
}

/// `count` independent chains; chain `c` uses stream `c`.
pub fn sample_ensemble(n: usize, count: usize, gamma: GammaSpec, bound: Option<f64>, seed: u64) -> Result<Vec<GrowthChain>> {
    (0..count as u64)
        .into_par_iter()
        .map(|c| sample_chain(n, gamma, bound, seed, c))
        .collect()
}

/// Growth with an arbitrary first-row law: `first_row(j, rng)` gives the
/// distance from point `j` to point 0.
pub fn sample_with_first_row<F>(n: usize, bound: Option<f64>, seed: u64, stream: u64, first_row: F) -> Result<DistanceMatrix>
where
    F: FnMut(usize, &mut StreamRng) -> f64,
{
    if n == 0 {
        return input("n must be at least 1");
    }
    let mut rng = stream_rng(seed, stream);
    Ok(grow_with(n, &mut rng, first_row, metric_interval(bound)))
}

/// Fill in the remaining distances of a new point whose first distances
/// `prefix` (to points `0..prefix.len()`) are fixed, drawing each further
/// coordinate uniformly from its feasibility interval.
pub fn complete_column<R: Rng + ?Sized>(
    base: &DistanceMatrix,
    prefix: &[f64],
    bound: Option<f64>,
    tol: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if prefix.is_empty() || prefix.len() > base.n() {
        return input(format!("prefix length must be in 1..={}", base.n()));
    }
    // validates the prefix itself
    if prefix.len() < base.n() {
        base.next_coordinate_interval(prefix, tol)?;
    }
    let interval = metric_interval(bound);
    let mut col = prefix.to_vec();
    for k in prefix.len()..base.n() {
        let (lo, hi) = interval(base, &col, k);
        col.push(uniform_on(lo, hi, rng));
    }
    Ok(col)
}

/// Conjugate each matrix by an independent uniform random permutation
/// (matrix `c` uses stream `c`).
pub fn symmetrize_sample(matrices: &[DistanceMatrix], seed: u64) -> Result<Vec<DistanceMatrix>> {
    let Some(first) = matrices.first() else { return Ok(Vec::new()) };
    let n = first.n();
    if let Some(bad) = matrices.iter().position(|m| m.n() != n) {
        return input(format!("matrix {bad} has {} points, expected {n}", matrices[bad].n()));
    }
    matrices
        .par_iter()
        .enumerate()
        .map(|(c, m)| {
            let mut rng = stream_rng(seed, c as u64);
            m.permute(&random_permutation(n, &mut rng))
        })
        .collect()
}

/// Law of the i.i.d. entries of a product-measure matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum EntryLaw {
    Uniform { low: f64, high: f64 },
    Point(f64),
}

impl EntryLaw {
    fn support(&self) -> (f64, f64) {
        match *self {
            EntryLaw::Uniform { low, high } => (low, high),
            EntryLaw::Point(x) => (x, x),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            EntryLaw::Uniform { low, high } => low + (high - low) * rng.random::<f64>(),
            EntryLaw::Point(x) => x,
        }
    }
}

/// Symmetric matrix with i.i.d. off-diagonal entries from a law supported in
/// `[1/2, 1]`; every such matrix satisfies the triangle inequality.
pub fn sample_product_half_one(n: usize, law: EntryLaw, seed: u64) -> Result<DistanceMatrix> {
    let (lo, hi) = law.support();
    if !(0.5..=1.0).contains(&lo) || !(0.5..=1.0).contains(&hi) || lo > hi {
        return input(format!("entry law support [{lo}, {hi}] is not inside [1/2, 1]"));
    }
    if n == 0 {
        return input("n must be at least 1");
    }
    let mut rng = stream_rng(seed, 0);
    let upper = (0..pair_count(n)).map(|_| law.sample(&mut rng)).collect();
    DistanceMatrix::from_upper(n, upper)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StationarityConfig {
    /// Number of column positions per window.
    pub window: usize,
    /// Offset between the reference window and the shifted window.
    pub shift: usize,
    /// Significance level for the pass/fail flag.
    pub level: f64,
}

impl Default for StationarityConfig {
    fn default() -> Self {
        StationarityConfig { window: 4, shift: 4, level: 0.01 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowStationarity {
    /// 0-indexed row.
    pub row: usize,
    pub shifted: TestOutcome,
    /// One-sample test of row 0 against `γ`, when a reference law is given.
    pub against_gamma: Option<TestOutcome>,
    pub stationary: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StationarityReport {
    pub rows: Vec<RowStationarity>,
    pub config: StationarityConfig,
}

impl StationarityReport {
    pub fn all_stationary(&self) -> bool {
        self.rows.iter().all(|r| r.stationary)
    }
}

/// Shift-invariance check for the first `k` rows of an ensemble.
///
/// For row `i`, chain `c` contributes the entry at column
/// `i + 1 + (c mod window)` to the reference sample and the entry `shift`
/// columns further right to the shifted sample, so each sample holds one value
/// per chain. The two samples are compared by a two-sample KS test; row 0 is
/// also tested against `reference` when given.
pub fn stationarity_report(
    chains: &[DistanceMatrix],
    k: usize,
    config: StationarityConfig,
    reference: Option<GammaSpec>,
) -> Result<StationarityReport> {
    if chains.is_empty() || config.window == 0 {
        return input("need at least one chain and a nonempty window");
    }
    let need = k + config.window + config.shift;
    if let Some(m) = chains.iter().find(|m| m.n() < need) {
        return input(format!(
            "chain of length {} is too short for {k} rows with window {} and shift {} (need {need})",
            m.n(),
            config.window,
            config.shift
        ));
    }
    let rows = (0..k)
        .map(|i| {
            let base: Vec<f64> = chains
                .iter()
                .enumerate()
                .map(|(c, m)| m.get(i, i + 1 + c % config.window))
                .collect();
            let moved: Vec<f64> = chains
                .iter()
                .enumerate()
                .map(|(c, m)| m.get(i, i + 1 + config.shift + c % config.window))
                .collect();
            let shifted = ks_two_sample(&base, &moved);
            let against_gamma = match (i, reference) {
                (0, Some(g)) => Some(ks_one_sample(&base, |x| g.cdf(x))),
                _ => None,
            };
            let stationary = !shifted.rejects(config.level) && against_gamma.is_none_or(|t| !t.rejects(config.level));
            RowStationarity { row: i, shifted, against_gamma, stationary }
        })
        .collect();
    Ok(StationarityReport { rows, config })
}
