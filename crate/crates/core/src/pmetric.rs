//! `p`-metrics: `d(i,j)^p <= d(i,k)^p + d(k,j)^p`, and the ultrametric limit
//! `d(i,j) <= max(d(i,k), d(k,j))`.
//!
//! For finite `p` a matrix is a `p`-metric exactly when its entrywise `p`-th
//! power is a metric, so all interval arithmetic happens on powers and is
//! rooted once at the end. The ultrametric case is handled with comparisons
//! only.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};
use crate::growth::{check_bound, grow_with, GammaSpec, GrowthChain};
use crate::matrix::{AmalgamationInterval, DistanceMatrix, ValidationReport, Violation};
use crate::rng::stream_rng;

/// The exponent `p`, either finite and at least 1 or infinite.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PExponent {
    Finite(f64),
    Infinite,
}

impl PExponent {
    pub fn finite(p: f64) -> Result<Self> {
        if p.is_nan() || p < 1.0 {
            return input(format!("p must be at least 1, got {p}"));
        }
        Ok(if p.is_infinite() { PExponent::Infinite } else { PExponent::Finite(p) })
    }
}

impl fmt::Display for PExponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PExponent::Finite(p) => write!(f, "{p}"),
            PExponent::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for PExponent {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "infinity" | "∞" => Ok(PExponent::Infinite),
            t => PExponent::finite(t.parse::<f64>().map_err(|e| Error::Input(format!("bad p {t:?}: {e}")))?),
        }
    }
}

impl Serialize for PExponent {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PExponent {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Entrywise `p`-th power.
pub fn power_matrix(r: &DistanceMatrix, p: f64) -> DistanceMatrix {
    DistanceMatrix::from_upper(r.n(), r.upper().iter().map(|x| x.powf(p)).collect())
        .expect("powers of nonnegative finite entries")
}

/// Check the `p`-triangle inequality on every triple.
///
/// For finite `p`, slacks are reported in the power domain,
/// `d(i,k)^p + d(k,j)^p - d(i,j)^p`, with the tolerance scaled by the largest
/// power. For `p = ∞` the slack is `max(d(i,k), d(k,j)) - d(i,j)`.
pub fn validate_p(r: &DistanceMatrix, p: PExponent, tol: f64) -> ValidationReport {
    match p {
        PExponent::Finite(p) => power_matrix(r, p).validate(tol),
        PExponent::Infinite => {
            let eff = r.scaled_tol(tol);
            let n = r.n();
            let mut violations = Vec::new();
            let mut min_slack = f64::INFINITY;
            for c in 2..n {
                for b in 1..c {
                    for a in 0..b {
                        let (dab, dac, dbc) = (r.get(a, b), r.get(a, c), r.get(b, c));
                        for (i, j, via, slack) in [
                            (a, b, c, dac.max(dbc) - dab),
                            (a, c, b, dab.max(dbc) - dac),
                            (b, c, a, dab.max(dac) - dbc),
                        ] {
                            min_slack = min_slack.min(slack);
                            if slack < -eff {
                                violations.push(Violation { i, j, via, slack });
                            }
                        }
                    }
                }
            }
            ValidationReport { ok: violations.is_empty(), violations, min_slack }
        }
    }
}

/// Whether `a` can be attached to `r` as the distances of a new point
/// without breaking the `p`-triangle inequality.
pub fn is_p_admissible(r: &DistanceMatrix, a: &[f64], p: PExponent, tol: f64) -> Result<bool> {
    if a.len() != r.n() {
        return input(format!("vector has length {}, expected {}", a.len(), r.n()));
    }
    if let Some(index) = a.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    match p {
        PExponent::Finite(p) => {
            let ap: Vec<f64> = a.iter().map(|x| x.powf(p)).collect();
            power_matrix(r, p).is_admissible(&ap, tol)
        }
        PExponent::Infinite => {
            let eff = tol * a.iter().copied().fold(r.max_entry(), f64::max).max(1.0);
            if a.iter().any(|&x| x < -eff) {
                return Ok(false);
            }
            for j in 1..r.n() {
                for i in 0..j {
                    let d = r.get(i, j);
                    if d > a[i].max(a[j]) + eff || a[i] > d.max(a[j]) + eff || a[j] > d.max(a[i]) + eff {
                        return Ok(false);
                    }
                }
            }
            Ok(true)
        }
    }
}

/// Feasible set for the distance between two new points.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum PFiber {
    Interval(AmalgamationInterval),
    Forced(f64),
    Empty,
}

/// Feasible values `h` for the distance between two points attached with
/// `p`-admissible vectors `a` and `b`.
pub fn amalgamation_interval_p(r: &DistanceMatrix, a: &[f64], b: &[f64], p: PExponent, tol: f64) -> Result<PFiber> {
    for (v, what) in [(a, "first vector"), (b, "second vector")] {
        if !is_p_admissible(r, v, p, tol)? {
            return Err(Error::Precondition(format!("{what} is not {p}-admissible")));
        }
    }
    Ok(match p {
        PExponent::Finite(p) => {
            let mut lo: f64 = 0.0;
            let mut hi = f64::INFINITY;
            for (x, y) in a.iter().zip(b) {
                let (xp, yp) = (x.powf(p), y.powf(p));
                lo = lo.max((xp - yp).abs());
                hi = hi.min(xp + yp);
            }
            PFiber::Interval(AmalgamationInterval::finite(lo.powf(1.0 / p), hi.powf(1.0 / p)))
        }
        PExponent::Infinite => ultrametric_fiber(a, b, tol * a.iter().chain(b).copied().fold(1.0, f64::max)),
    })
}

/// The set of `h >= 0` such that every triangle with sides `(a_i, b_i, h)` is
/// ultrametric. No base matrix is consulted.
///
/// A coordinate with `a_i != b_i` forces `h = max(a_i, b_i)`; every coordinate
/// caps `h` at `max(a_i, b_i)`. Coordinates within `tol` count as equal.
pub fn ultrametric_fiber(a: &[f64], b: &[f64], tol: f64) -> PFiber {
    let mut forced: Option<f64> = None;
    let mut conflict = false;
    let mut cap = f64::INFINITY;
    for (&x, &y) in a.iter().zip(b) {
        let m = x.max(y);
        cap = cap.min(m);
        if (x - y).abs() > tol {
            match forced {
                None => forced = Some(m),
                Some(f) if (f - m).abs() > tol => conflict = true,
                Some(_) => {}
            }
        }
    }
    match forced {
        _ if conflict => PFiber::Empty,
        Some(f) if f <= cap + tol => PFiber::Forced(f),
        Some(_) => PFiber::Empty,
        None => PFiber::Interval(if cap.is_finite() {
            AmalgamationInterval::finite(0.0, cap)
        } else {
            AmalgamationInterval::unbounded_from(0.0)
        }),
    }
}

/// Random `p`-metric by the growth chain with `p`-power intervals: each new
/// distance is uniform on `[(max|r^p - a^p|)^{1/p}, (min(r^p + a^p))^{1/p}]`.
pub fn sample_p_metric(
    n: usize,
    p: PExponent,
    gamma: GammaSpec,
    bound: Option<f64>,
    seed: u64,
    stream: u64,
) -> Result<GrowthChain> {
    let PExponent::Finite(p) = p else {
        return Err(Error::Capability(
            "no growth chain for p = inf: ultrametric amalgamation is degenerate; see ultrametric_fiber".into(),
        ));
    };
    if n == 0 {
        return input("n must be at least 1");
    }
    check_bound(gamma, bound)?;
    let mut rng = stream_rng(seed, stream);
    let inv = 1.0 / p;
    let matrix = grow_with(
        n,
        &mut rng,
        |_, r| gamma.sample(r),
        |m, prefix, k| {
            let col = m.column(k);
            let mut lo: f64 = 0.0;
            let mut hi = f64::INFINITY;
            for (&r, &a) in col.iter().zip(prefix) {
                let (rp, ap) = (r.powf(p), a.powf(p));
                lo = lo.max((rp - ap).abs());
                hi = hi.min(rp + ap);
            }
            let hi = hi.powf(inv);
            (lo.powf(inv), bound.map_or(hi, |b| hi.min(b)))
        },
    );
    Ok(GrowthChain { matrix, seed, stream, gamma, bound })
}

/// Random ultrametric from points on a binary tree of the given depth: two
/// points whose labels share a prefix of length `l` are at distance
/// `(depth - l) / depth`. Labels may repeat, giving zero distances.
pub fn sample_tree_ultrametric<R: Rng + ?Sized>(n: usize, depth: u32, rng: &mut R) -> Result<DistanceMatrix> {
    if depth == 0 || depth > 32 {
        return input(format!("depth must be in 1..=32, got {depth}"));
    }
    let labels: Vec<u32> = (0..n).map(|_| rng.random::<u32>() >> (32 - depth)).collect();
    DistanceMatrix::from_fn(n, |i, j| tree_distance(labels[i], labels[j], depth))
}

fn tree_distance(x: u32, y: u32, depth: u32) -> f64 {
    let diff = x ^ y;
    let common = if diff == 0 { depth } else { diff.leading_zeros() - (32 - depth) };
    f64::from(depth - common) / f64::from(depth)
}

/// Fraction of trials in which the ultrametric fiber collapses to a point or
/// to nothing. Each trial draws a tree ultrametric on `base + 1` points,
/// takes the last point's distances as `a`, and replaces `perturbations`
/// coordinates of a copy `b` by fresh tree distances.
pub fn degeneracy_frequency(base: usize, perturbations: usize, trials: usize, seed: u64) -> Result<f64> {
    if perturbations > base {
        return input(format!("cannot perturb {perturbations} of {base} coordinates"));
    }
    let depth = 4;
    let mut rng = stream_rng(seed, 0);
    let mut degenerate = 0usize;
    for _ in 0..trials {
        let m = sample_tree_ultrametric(base + 1, depth, &mut rng)?;
        let a = m.column(base).to_vec();
        let mut b = a.clone();
        for i in crate::rng::random_permutation(base, &mut rng).into_iter().take(perturbations) {
            let label: u32 = rng.random::<u32>() >> (32 - depth);
            b[i] = tree_distance(label, rng.random::<u32>() >> (32 - depth), depth);
        }
        if !matches!(ultrametric_fiber(&a, &b, 0.0), PFiber::Interval(_)) {
            degenerate += 1;
        }
    }
    Ok(degenerate as f64 / trials.max(1) as f64)
}
