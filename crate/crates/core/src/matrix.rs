//! Finite distance matrices and their admissible one-point extensions.
//!
//! A [`DistanceMatrix`] stores only the strict upper triangle, column by
//! column: `d(0,1), d(0,2), d(1,2), d(0,3), ...`. Column `j` of that layout is
//! exactly the vector of distances from point `j` to the points before it, so
//! the north-west corner on `k` points is a prefix of the storage and a
//! one-point extension is an append. Points are 0-indexed throughout.

use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};

/// Default absolute slack for triangle checks.
pub const DEFAULT_TOL: f64 = 1e-9;

#[inline]
fn pair_offset(i: usize, j: usize) -> usize {
    debug_assert!(i < j);
    j * (j - 1) / 2 + i
}

/// `min_k a[k] + b[k]`, in lanes so the loop vectorises.
fn min_sum(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [f64::INFINITY; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            let v = x[l] + y[l];
            acc[l] = if v < acc[l] { v } else { acc[l] };
        }
    }
    let tail = ra.iter().zip(rb).map(|(x, y)| x + y).fold(f64::INFINITY, f64::min);
    acc.iter().copied().fold(tail, f64::min)
}

/// Number of stored entries for `n` points.
#[inline]
pub fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Symmetric nonnegative matrix with zero diagonal on `n` points.
///
/// Construction checks finiteness and nonnegativity only; triangle
/// inequalities are checked by [`DistanceMatrix::validate`], so semimetrics
/// and invalid inputs can still be represented and reported on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixRecord", into = "MatrixRecord")]
pub struct DistanceMatrix {
    n: usize,
    upper: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MatrixRecord {
    n: usize,
    upper: Vec<f64>,
}

impl TryFrom<MatrixRecord> for DistanceMatrix {
    type Error = Error;
    fn try_from(rec: MatrixRecord) -> Result<Self> {
        DistanceMatrix::from_upper(rec.n, rec.upper)
    }
}

impl From<DistanceMatrix> for MatrixRecord {
    fn from(m: DistanceMatrix) -> Self {
        MatrixRecord { n: m.n, upper: m.upper }
    }
}

/// One violated triangle inequality `d(i,j) <= d(i,k) + d(k,j)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub i: usize,
    pub j: usize,
    pub via: usize,
    /// `d(i,k) + d(k,j) - d(i,j)`; negative for a violation.
    pub slack: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
    /// Smallest slack over all checked inequalities (`+inf` when there are none).
    pub min_slack: f64,
}

/// Upper end of a feasibility interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum UpperBound {
    Finite(f64),
    Infinite,
}

/// Closed interval `[lo, hi]` of feasible values for one new distance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmalgamationInterval {
    pub lo: f64,
    pub hi: UpperBound,
}

impl AmalgamationInterval {
    pub fn unbounded_from(lo: f64) -> Self {
        AmalgamationInterval { lo, hi: UpperBound::Infinite }
    }

    pub fn finite(lo: f64, hi: f64) -> Self {
        AmalgamationInterval { lo, hi: UpperBound::Finite(hi) }
    }

    pub fn hi_value(&self) -> Option<f64> {
        match self.hi {
            UpperBound::Finite(h) => Some(h),
            UpperBound::Infinite => None,
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self.hi, UpperBound::Finite(h) if h < self.lo)
    }

    pub fn is_point(&self) -> bool {
        matches!(self.hi, UpperBound::Finite(h) if h == self.lo)
    }

    pub fn contains(&self, x: f64, tol: f64) -> bool {
        x >= self.lo - tol
            && match self.hi {
                UpperBound::Finite(h) => x <= h + tol,
                UpperBound::Infinite => true,
            }
    }

    /// Intersect with `[0, bound]`.
    pub fn cap(&self, bound: f64) -> Self {
        let hi = match self.hi {
            UpperBound::Finite(h) => h.min(bound),
            UpperBound::Infinite => bound,
        };
        AmalgamationInterval::finite(self.lo, hi)
    }

    pub fn midpoint(&self) -> Option<f64> {
        self.hi_value().map(|h| 0.5 * (self.lo + h))
    }
}

/// Result of merging zero-distance points.
#[derive(Clone, Debug, PartialEq)]
pub struct Quotient {
    pub matrix: DistanceMatrix,
    /// Classes of original indices, ordered by their smallest member.
    pub classes: Vec<Vec<usize>>,
    /// Pairs with `0 < d <= tol`: reported but not merged.
    pub near_zero: Vec<(usize, usize)>,
}

impl DistanceMatrix {
    /// Build from the flat upper-triangular storage.
    pub fn from_upper(n: usize, upper: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return input("a distance matrix needs at least one point");
        }
        if upper.len() != pair_count(n) {
            return input(format!(
                "expected {} upper entries for n = {}, got {}",
                pair_count(n),
                n,
                upper.len()
            ));
        }
        for (index, &value) in upper.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFinite { index });
            }
            if value < 0.0 {
                return Err(Error::Negative { index, value });
            }
        }
        Ok(DistanceMatrix { n, upper })
    }

    /// Build from a full square matrix; it must be symmetric with zero diagonal.
    pub fn from_full(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return input("matrix is not square");
        }
        let mut upper = Vec::with_capacity(pair_count(n));
        for (i, row) in rows.iter().enumerate() {
            if row[i] != 0.0 {
                return input(format!("nonzero diagonal entry at ({i},{i})"));
            }
        }
        for j in 1..n {
            for i in 0..j {
                if rows[i][j] != rows[j][i] {
                    return input(format!("asymmetric entries at ({i},{j})"));
                }
                upper.push(rows[i][j]);
            }
        }
        DistanceMatrix::from_upper(n, upper)
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut upper = Vec::with_capacity(pair_count(n));
        for j in 1..n {
            for i in 0..j {
                upper.push(f(i, j));
            }
        }
        DistanceMatrix::from_upper(n, upper)
    }

    /// The one-point space.
    pub fn single() -> Self {
        DistanceMatrix { n: 1, upper: Vec::new() }
    }

    pub fn constant(n: usize, c: f64) -> Result<Self> {
        DistanceMatrix::from_upper(n, vec![c; pair_count(n)])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn into_upper(self) -> Vec<f64> {
        self.upper
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        use std::cmp::Ordering::*;
        match i.cmp(&j) {
            Less => self.upper[pair_offset(i, j)],
            Greater => self.upper[pair_offset(j, i)],
            Equal => 0.0,
        }
    }

    /// Distances from point `j` to points `0..j`.
    #[inline]
    pub fn column(&self, j: usize) -> &[f64] {
        &self.upper[pair_count(j)..pair_count(j + 1)]
    }

    /// Full distance row of point `i`.
    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.n).map(|j| self.get(i, j)).collect()
    }

    pub fn to_full(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.row(i)).collect()
    }

    pub fn max_entry(&self) -> f64 {
        self.upper.iter().copied().fold(0.0, f64::max)
    }

    /// True when no off-diagonal entry is zero.
    pub fn is_proper(&self) -> bool {
        self.upper.iter().all(|&d| d > 0.0)
    }

    /// Tolerance scaled by the largest entry once that exceeds one.
    pub fn scaled_tol(&self, tol: f64) -> f64 {
        tol * self.max_entry().max(1.0)
    }

    /// Check every triangle inequality with slack `>= -tol` (scaled).
    pub fn validate(&self, tol: f64) -> ValidationReport {
        let eff = self.scaled_tol(tol);
        let n = self.n;
        let full: Vec<f64> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| self.get(i, j)).collect();
        let mut violations = Vec::new();
        let mut min_slack = f64::INFINITY;
        for i in 0..n {
            let ri = &full[i * n..(i + 1) * n];
            for j in (i + 1)..n {
                let rj = &full[j * n..(j + 1) * n];
                let dij = ri[j];
                // d(i,j) <= d(i,k) + d(k,j) for k outside {i, j}
                let pair_min = min_sum(&ri[..i], &rj[..i])
                    .min(min_sum(&ri[i + 1..j], &rj[i + 1..j]))
                    .min(min_sum(&ri[j + 1..], &rj[j + 1..]));
                let slack = pair_min - dij;
                min_slack = min_slack.min(slack);
                if slack < -eff {
                    for k in (0..n).filter(|&k| k != i && k != j) {
                        let s = ri[k] + rj[k] - dij;
                        if s < -eff {
                            violations.push(Violation { i, j, via: k, slack: s });
                        }
                    }
                }
            }
        }
        ValidationReport { ok: violations.is_empty(), violations, min_slack }
    }

    pub fn is_valid(&self, tol: f64) -> bool {
        self.validate(tol).ok
    }

    /// Restriction to points `0..k`.
    pub fn nw_corner(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.n {
            return input(format!("corner size {k} out of range 1..={}", self.n));
        }
        Ok(DistanceMatrix { n: k, upper: self.upper[..pair_count(k)].to_vec() })
    }

    /// Drop the first point: entry `(i,j)` of the result is `(i+1,j+1)` here.
    pub fn nw_shift(&self) -> Result<Self> {
        if self.n < 2 {
            return input("cannot shift a one-point matrix");
        }
        DistanceMatrix::from_fn(self.n - 1, |i, j| self.get(i + 1, j + 1))
    }

    /// Submatrix on the listed points, in the given order.
    pub fn restrict(&self, points: &[usize]) -> Result<Self> {
        if points.is_empty() {
            return input("empty index set");
        }
        if let Some(&p) = points.iter().find(|&&p| p >= self.n) {
            return input(format!("index {p} out of range for n = {}", self.n));
        }
        DistanceMatrix::from_fn(points.len(), |i, j| self.get(points[i], points[j]))
    }

    fn check_len(&self, a: &[f64]) -> Result<()> {
        if a.len() != self.n {
            return input(format!("vector has length {}, expected {}", a.len(), self.n));
        }
        if let Some(index) = a.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(())
    }

    fn admissible_tol(&self, a: &[f64], tol: f64) -> f64 {
        tol * a.iter().copied().fold(self.max_entry(), f64::max).max(1.0)
    }

    /// Worst violated constraint of `a` as a candidate new row: returns
    /// `(i, j, slack)` (with `i == j` for a negative coordinate), or `None`.
    pub fn admissibility_violation(&self, a: &[f64], tol: f64) -> Result<Option<(usize, usize, f64)>> {
        self.check_len(a)?;
        let eff = self.admissible_tol(a, tol);
        let mut worst: Option<(usize, usize, f64)> = None;
        let mut note = |i: usize, j: usize, slack: f64| {
            if slack < -eff && worst.is_none_or(|w| slack < w.2) {
                worst = Some((i, j, slack));
            }
        };
        for (i, &ai) in a.iter().enumerate() {
            note(i, i, ai);
        }
        for j in 1..self.n {
            let col = self.column(j);
            for i in 0..j {
                let r = col[i];
                note(i, j, r - (a[i] - a[j]).abs());
                note(i, j, a[i] + a[j] - r);
            }
        }
        Ok(worst)
    }

    /// Whether `a` can be attached as the distances of a new point.
    pub fn is_admissible(&self, a: &[f64], tol: f64) -> Result<bool> {
        Ok(self.admissibility_violation(a, tol)?.is_none())
    }

    fn require_admissible(&self, a: &[f64], tol: f64, what: &str) -> Result<()> {
        if let Some((i, j, slack)) = self.admissibility_violation(a, tol)? {
            return Err(Error::Precondition(format!(
                "{what} is not admissible: worst pair ({i},{j}) has slack {slack}"
            )));
        }
        Ok(())
    }

    /// Attach a new point with distances `a` (must be admissible).
    pub fn extend(&self, a: &[f64], tol: f64) -> Result<Self> {
        self.require_admissible(a, tol, "extension vector")?;
        Ok(self.extend_unchecked(a))
    }

    /// Attach without checking admissibility.
    pub fn extend_unchecked(&self, a: &[f64]) -> Self {
        debug_assert_eq!(a.len(), self.n);
        let mut upper = Vec::with_capacity(pair_count(self.n + 1));
        upper.extend_from_slice(&self.upper);
        upper.extend_from_slice(a);
        DistanceMatrix { n: self.n + 1, upper }
    }

    pub(crate) fn push_column(&mut self, a: &[f64]) {
        debug_assert_eq!(a.len(), self.n);
        self.upper.extend_from_slice(a);
        self.n += 1;
    }

    /// Feasible range for the distance between two points attached
    /// separately with admissible vectors `a` and `b`.
    pub fn amalgamation_interval(&self, a: &[f64], b: &[f64], tol: f64) -> Result<AmalgamationInterval> {
        self.require_admissible(a, tol, "first vector")?;
        self.require_admissible(b, tol, "second vector")?;
        Ok(amalgamation_bounds(a, b))
    }

    /// Feasible range for the distance from a new point to point `k`, given
    /// its distances `prefix` to points `0..k`. Checks that the prefix itself
    /// was built inside the earlier intervals.
    pub fn next_coordinate_interval(&self, prefix: &[f64], tol: f64) -> Result<AmalgamationInterval> {
        let k = prefix.len();
        if k >= self.n {
            return input(format!("prefix of length {k} leaves no coordinate among {} points", self.n));
        }
        if let Some(index) = prefix.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        let eff = self.admissible_tol(prefix, tol);
        for m in 0..k {
            let iv = self.coordinate_bounds(&prefix[..m], m);
            if !iv.contains(prefix[m], eff) {
                // find the binding constraint for the message
                let col = self.column(m);
                let culprit = (0..m)
                    .find(|&i| {
                        (col[i] - prefix[i]).abs() > prefix[m] + eff || col[i] + prefix[i] < prefix[m] - eff
                    })
                    .unwrap_or(0);
                return Err(Error::State(format!(
                    "prefix entry {m} = {} lies outside [{}, {:?}]; first violated constraint involves point {culprit}",
                    prefix[m], iv.lo, iv.hi
                )));
            }
        }
        Ok(self.coordinate_bounds(prefix, k))
    }

    /// Unchecked interval for coordinate `k` given `prefix = a[0..k]`.
    #[inline]
    pub fn coordinate_bounds(&self, prefix: &[f64], k: usize) -> AmalgamationInterval {
        if k == 0 {
            return AmalgamationInterval::unbounded_from(0.0);
        }
        let col = self.column(k);
        let mut lo: f64 = 0.0;
        let mut hi = f64::INFINITY;
        for (&r, &p) in col.iter().zip(prefix) {
            lo = lo.max((r - p).abs());
            hi = hi.min(r + p);
        }
        AmalgamationInterval::finite(lo, hi)
    }

    /// Merge points at distance exactly zero. The matrix must validate.
    pub fn quotient(&self, tol: f64) -> Result<Quotient> {
        let report = self.validate(tol);
        if !report.ok {
            let v = report.violations[0];
            return Err(Error::Precondition(format!(
                "not a semimetric: d({},{}) exceeds the path via {} by {}",
                v.i, v.j, v.via, -v.slack
            )));
        }
        let n = self.n;
        let mut class_of: Vec<usize> = (0..n).collect();
        for j in 1..n {
            for i in 0..j {
                if self.get(i, j) == 0.0 && class_of[j] == j {
                    class_of[j] = class_of[i];
                }
            }
        }
        let reps: Vec<usize> = (0..n).filter(|&i| class_of[i] == i).collect();
        let classes = reps
            .iter()
            .map(|&r| (0..n).filter(|&i| class_of[i] == r).collect())
            .collect();
        let eff = self.scaled_tol(tol);
        let near_zero = (1..n)
            .flat_map(|j| (0..j).map(move |i| (i, j)))
            .filter(|&(i, j)| {
                let d = self.get(i, j);
                d > 0.0 && d <= eff
            })
            .collect();
        Ok(Quotient { matrix: self.restrict(&reps)?, classes, near_zero })
    }

    /// Relabel points: point `i` moves to position `g[i]`, so entry
    /// `(i,j)` of the result is entry `(g⁻¹(i), g⁻¹(j))` of `self`.
    pub fn permute(&self, g: &[usize]) -> Result<Self> {
        let inv = inverse_permutation(g, self.n)?;
        DistanceMatrix::from_fn(self.n, |i, j| self.get(inv[i], inv[j]))
    }
}

/// `[max |a_i - b_i|, min (a_i + b_i)]`, without admissibility checks.
pub fn amalgamation_bounds(a: &[f64], b: &[f64]) -> AmalgamationInterval {
    let mut lo: f64 = 0.0;
    let mut hi = f64::INFINITY;
    for (&x, &y) in a.iter().zip(b) {
        lo = lo.max((x - y).abs());
        hi = hi.min(x + y);
    }
    if hi.is_infinite() {
        AmalgamationInterval::unbounded_from(lo)
    } else {
        AmalgamationInterval::finite(lo, hi)
    }
}

/// Inverse of a permutation of `0..n`, rejecting non-bijections.
pub fn inverse_permutation(g: &[usize], n: usize) -> Result<Vec<usize>> {
    if g.len() != n {
        return input(format!("permutation has length {}, expected {n}", g.len()));
    }
    let mut inv = vec![usize::MAX; n];
    for (i, &gi) in g.iter().enumerate() {
        if gi >= n || inv[gi] != usize::MAX {
            return input(format!("not a bijection on 0..{n}: image {gi} repeated or out of range"));
        }
        inv[gi] = i;
    }
    Ok(inv)
}

/// Apply `g` to a vector indexed by points: `(g·a)[g[i]] = a[i]`.
pub fn permute_vector(a: &[f64], g: &[usize]) -> Vec<f64> {
    let mut out = vec![0.0; a.len()];
    for (i, &gi) in g.iter().enumerate() {
        out[gi] = a[i];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_triangle() -> DistanceMatrix {
        DistanceMatrix::constant(3, 1.0).unwrap()
    }

    #[test]
    fn storage_order_is_column_major_upper() {
        let m = DistanceMatrix::from_fn(4, |i, j| (10 * i + j) as f64).unwrap();
        assert_eq!(m.upper(), &[1.0, 2.0, 12.0, 3.0, 13.0, 23.0]);
        assert_eq!(m.column(3), &[3.0, 13.0, 23.0]);
        assert_eq!(m.get(3, 1), 13.0);
    }

    #[test]
    fn validate_examples() {
        assert!(DistanceMatrix::single().validate(0.0).ok);
        assert!(unit_triangle().validate(0.0).ok);
        let bad = DistanceMatrix::from_upper(3, vec![1.0, 1.0, 3.0]).unwrap();
        let rep = bad.validate(DEFAULT_TOL);
        assert!(!rep.ok);
        assert_eq!(rep.violations.len(), 1);
        let v = rep.violations[0];
        assert_eq!((v.i, v.j, v.via), (1, 2, 0));
        assert_eq!(v.slack, -1.0);
    }

    #[test]
    fn construction_errors() {
        assert!(matches!(
            DistanceMatrix::from_upper(2, vec![f64::NAN]),
            Err(Error::NonFinite { index: 0 })
        ));
        assert!(matches!(
            DistanceMatrix::from_upper(3, vec![1.0, -2.0, 1.0]),
            Err(Error::Negative { index: 1, .. })
        ));
        assert!(DistanceMatrix::from_upper(3, vec![1.0]).is_err());
    }

    #[test]
    fn corner_and_shift() {
        let t = unit_triangle();
        assert_eq!(t.nw_corner(3).unwrap(), t);
        let c = t.nw_corner(2).unwrap();
        assert_eq!((c.n(), c.upper()), (2, &[1.0][..]));
        assert!(t.nw_corner(0).is_err() && t.nw_corner(4).is_err());
        let s = DistanceMatrix::constant(5, 2.5).unwrap().nw_shift().unwrap();
        assert_eq!(s, DistanceMatrix::constant(4, 2.5).unwrap());
        let one = DistanceMatrix::from_upper(2, vec![3.0]).unwrap().nw_shift().unwrap();
        assert_eq!(one, DistanceMatrix::single());
        assert!(DistanceMatrix::single().nw_shift().is_err());
    }

    #[test]
    fn admissibility_examples() {
        let p = DistanceMatrix::single();
        assert!(p.is_admissible(&[0.0], 0.0).unwrap());
        assert!(p.is_admissible(&[17.5], 0.0).unwrap());
        assert!(unit_triangle().is_admissible(&[0.5, 0.5, 0.5], 0.0).unwrap());
        let pair = DistanceMatrix::from_upper(2, vec![1.0]).unwrap();
        assert!(!pair.is_admissible(&[1.0, 3.0], DEFAULT_TOL).unwrap());
        assert!(pair.is_admissible(&[1.0], 0.0).is_err());
    }

    #[test]
    fn extend_examples() {
        let two = DistanceMatrix::single().extend(&[2.0], 0.0).unwrap();
        assert_eq!(two.upper(), &[2.0]);
        let four = unit_triangle().extend(&[0.5, 0.5, 0.5], 0.0).unwrap();
        assert!(four.validate(0.0).ok);
        assert_eq!(four.nw_corner(3).unwrap(), unit_triangle());
        assert_eq!(four.column(3), &[0.5, 0.5, 0.5]);
        let pair = DistanceMatrix::from_upper(2, vec![1.0]).unwrap();
        let err = pair.extend(&[1.0, 3.0], DEFAULT_TOL).unwrap_err();
        assert!(matches!(err, Error::Precondition(ref m) if m.contains("(0,1)")));
    }

    #[test]
    fn amalgamation_examples() {
        let pair = DistanceMatrix::from_upper(2, vec![1.0]).unwrap();
        let iv = pair.amalgamation_interval(&[1.0, 2.0], &[2.0, 1.0], 0.0).unwrap();
        assert_eq!(iv, AmalgamationInterval::finite(1.0, 3.0));
        let a = [0.7, 1.2];
        assert_eq!(pair.amalgamation_interval(&a, &a, 0.0).unwrap().lo, 0.0);
        let t = unit_triangle();
        let h = [0.5, 0.5, 0.5];
        assert_eq!(t.amalgamation_interval(&h, &h, 0.0).unwrap(), AmalgamationInterval::finite(0.0, 1.0));
        assert!(pair.amalgamation_interval(&[1.0, 3.0], &a, 0.0).is_err());
    }

    #[test]
    fn next_coordinate_examples() {
        let t = unit_triangle();
        let iv = t.next_coordinate_interval(&[], 0.0).unwrap();
        assert_eq!(iv.hi, UpperBound::Infinite);
        assert_eq!(iv.lo, 0.0);
        // points 0,1 at distance 1; new point at distance 2 from point 0
        let pair = DistanceMatrix::from_upper(2, vec![1.0]).unwrap();
        assert_eq!(pair.next_coordinate_interval(&[2.0], 0.0).unwrap(), AmalgamationInterval::finite(1.0, 3.0));
        // degenerate interval: new point on top of point 0
        let iv = pair.next_coordinate_interval(&[0.0], 0.0).unwrap();
        assert!(iv.is_point() && iv.lo == 1.0);
        // inconsistent prefix: coordinate 1 must be within 1 of coordinate 0
        let err = t.next_coordinate_interval(&[0.2, 3.0], DEFAULT_TOL).unwrap_err();
        assert!(matches!(err, Error::State(_)));
        assert!(pair.next_coordinate_interval(&[1.0, 1.0], 0.0).is_err());
    }

    #[test]
    fn quotient_examples() {
        let z = DistanceMatrix::constant(4, 0.0).unwrap().quotient(0.0).unwrap();
        assert_eq!(z.matrix, DistanceMatrix::single());
        assert_eq!(z.classes, vec![vec![0, 1, 2, 3]]);
        let t = unit_triangle().quotient(0.0).unwrap();
        assert_eq!(t.matrix, unit_triangle());
        assert_eq!(t.classes, vec![vec![0], vec![1], vec![2]]);
        let m = DistanceMatrix::from_upper(3, vec![0.0, 2.0, 2.0]).unwrap();
        let q = m.quotient(0.0).unwrap();
        assert_eq!(q.matrix, DistanceMatrix::from_upper(2, vec![2.0]).unwrap());
        assert_eq!(q.classes, vec![vec![0, 1], vec![2]]);
        let near = DistanceMatrix::from_upper(3, vec![1e-12, 2.0, 2.0]).unwrap().quotient(1e-9).unwrap();
        assert_eq!(near.matrix.n(), 3);
        assert_eq!(near.near_zero, vec![(0, 1)]);
        assert!(DistanceMatrix::from_upper(3, vec![1.0, 1.0, 3.0]).unwrap().quotient(0.0).is_err());
    }

    #[test]
    fn permute_examples() {
        let m = DistanceMatrix::from_fn(4, |i, j| (i + j) as f64 + 3.0).unwrap();
        assert_eq!(m.permute(&[0, 1, 2, 3]).unwrap(), m);
        let g = [2, 0, 3, 1];
        let inv = inverse_permutation(&g, 4).unwrap();
        assert_eq!(m.permute(&g).unwrap().permute(&inv).unwrap(), m);
        let p = m.permute(&g).unwrap();
        assert_eq!(p.get(g[0], g[3]), m.get(0, 3));
        assert!(m.permute(&[0, 0, 1, 2]).is_err());
        assert!(m.permute(&[0, 1, 2]).is_err());
    }

    #[test]
    fn serde_round_trip_is_bit_exact() {
        let m = DistanceMatrix::from_upper(3, vec![0.1, 0.2 + 0.1, 1.0 / 3.0]).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, r#"{"n":3,"upper":[0.1,0.30000000000000004,0.3333333333333333]}"#);
        let back: DistanceMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
        assert!(serde_json::from_str::<DistanceMatrix>(r#"{"n":2,"upper":[-1]}"#).is_err());
    }
}
