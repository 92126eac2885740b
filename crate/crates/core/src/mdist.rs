//! Matrix distributions of metric measure spaces.
//!
//! Drawing `k` independent points from a metric space with a probability
//! measure and recording their distance matrix gives a law on `k x k`
//! matrices. This module samples that law, evaluates it exactly for finite
//! spaces, inverts it for finite spaces with distinct distances, and runs
//! finite-sample diagnostics on infinite distance matrices.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};
use crate::growth::EntryLaw;
use crate::matrix::{pair_count, DistanceMatrix, DEFAULT_TOL};
use crate::rng::{derive_seed, random_permutation, stream_rng};
use crate::stats::{energy_test, TestOutcome};

/// Largest `n^k` enumerated by [`exact_matrix_distribution`].
pub const EXACT_ENUMERATION_LIMIT: u64 = 10_000_000;

/// A metric space with a probability measure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "lowercase")]
pub enum MetricTriple {
    Finite { matrix: DistanceMatrix, weights: Vec<f64> },
    /// Circle of the given circumference with arc-length metric and uniform measure.
    Circle { circumference: f64 },
    /// `[0, length]` with `|x - y|` and uniform measure.
    Interval { length: f64 },
}

impl MetricTriple {
    pub fn finite(matrix: DistanceMatrix, weights: Vec<f64>) -> Result<Self> {
        let t = MetricTriple::Finite { matrix, weights };
        t.check()?;
        Ok(t)
    }

    pub fn check(&self) -> Result<()> {
        match self {
            MetricTriple::Finite { matrix, weights } => {
                if weights.len() != matrix.n() {
                    return input(format!("{} weights for {} points", weights.len(), matrix.n()));
                }
                if let Some(i) = weights.iter().position(|w| !(*w > 0.0 && w.is_finite())) {
                    return input(format!("weight {i} = {} is not positive", weights[i]));
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return input(format!("weights sum to {total}, not 1"));
                }
                if !matrix.validate(DEFAULT_TOL).ok {
                    return input("triple matrix violates the triangle inequality");
                }
                Ok(())
            }
            MetricTriple::Circle { circumference: c } | MetricTriple::Interval { length: c } => {
                if *c > 0.0 && c.is_finite() {
                    Ok(())
                } else {
                    input(format!("size must be positive, got {c}"))
                }
            }
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            MetricTriple::Finite { matrix, .. } => matrix.max_entry(),
            MetricTriple::Circle { circumference } => circumference / 2.0,
            MetricTriple::Interval { length } => *length,
        }
    }

    /// A point drawn from the measure: an index for finite spaces, a
    /// coordinate otherwise.
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R, cumulative: &[f64]) -> f64 {
        match self {
            MetricTriple::Finite { .. } => {
                let u: f64 = rng.random();
                cumulative.partition_point(|&c| c <= u).min(cumulative.len() - 1) as f64
            }
            MetricTriple::Circle { circumference: c } | MetricTriple::Interval { length: c } => c * rng.random::<f64>(),
        }
    }

    fn dist(&self, x: f64, y: f64) -> f64 {
        match self {
            MetricTriple::Finite { matrix, .. } => matrix.get(x as usize, y as usize),
            MetricTriple::Circle { circumference } => {
                let d = (x - y).abs();
                d.min(circumference - d)
            }
            MetricTriple::Interval { .. } => (x - y).abs(),
        }
    }

    fn cumulative(&self) -> Vec<f64> {
        match self {
            MetricTriple::Finite { weights, .. } => weights
                .iter()
                .scan(0.0, |acc, w| {
                    *acc += w;
                    Some(*acc)
                })
                .collect(),
            _ => Vec::new(),
        }
    }

    /// Distance matrix of `k` independent points.
    pub fn sample_matrix<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> Result<DistanceMatrix> {
        let cum = self.cumulative();
        let pts: Vec<f64> = (0..k).map(|_| self.draw(rng, &cum)).collect();
        DistanceMatrix::from_fn(k, |i, j| self.dist(pts[i], pts[j]))
    }
}

/// A law on `k x k` distance matrices: either a weighted list of distinct
/// matrices (exact) or an unweighted list of draws (sampled).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixDistribution {
    pub k: usize,
    pub samples: Vec<DistanceMatrix>,
    /// Present in exact mode; parallel to `samples`, summing to one.
    pub weights: Option<Vec<f64>>,
    pub origin: String,
}

fn key(m: &DistanceMatrix) -> Vec<u64> {
    m.upper().iter().map(|x| x.to_bits()).collect()
}

fn from_key(k: usize, bits: &[u64]) -> DistanceMatrix {
    DistanceMatrix::from_upper(k, bits.iter().map(|&b| f64::from_bits(b)).collect()).expect("stored matrix")
}

impl MatrixDistribution {
    pub fn is_exact(&self) -> bool {
        self.weights.is_some()
    }

    fn from_atoms(k: usize, atoms: BTreeMap<Vec<u64>, f64>, origin: String) -> Self {
        let (samples, weights) = atoms.into_iter().map(|(b, w)| (from_key(k, &b), w)).unzip();
        MatrixDistribution { k, samples, weights: Some(weights), origin }
    }

    /// Atoms with their probabilities; sampled draws get equal weight and
    /// repeated draws are merged.
    pub fn atoms(&self) -> BTreeMap<Vec<u64>, f64> {
        let mut out = BTreeMap::new();
        let equal = 1.0 / self.samples.len().max(1) as f64;
        for (t, m) in self.samples.iter().enumerate() {
            let w = self.weights.as_ref().map_or(equal, |ws| ws[t]);
            *out.entry(key(m)).or_insert(0.0) += w;
        }
        out
    }

    /// Law of the leading `k' x k'` block.
    pub fn nw_marginal(&self, k: usize) -> Result<MatrixDistribution> {
        if k == 0 || k > self.k {
            return input(format!("marginal order {k} out of range 1..={}", self.k));
        }
        let mut atoms = BTreeMap::new();
        for (b, w) in self.atoms() {
            *atoms.entry(b[..pair_count(k)].to_vec()).or_insert(0.0) += w;
        }
        Ok(MatrixDistribution::from_atoms(k, atoms, format!("{} | marginal k={k}", self.origin)))
    }

    /// Law of the matrices conjugated by `g` (point `i` moved to `g[i]`).
    pub fn conjugate(&self, g: &[usize]) -> Result<MatrixDistribution> {
        let mut atoms = BTreeMap::new();
        let equal = 1.0 / self.samples.len().max(1) as f64;
        for (t, m) in self.samples.iter().enumerate() {
            let w = self.weights.as_ref().map_or(equal, |ws| ws[t]);
            *atoms.entry(key(&m.permute(g)?)).or_insert(0.0) += w;
        }
        Ok(MatrixDistribution::from_atoms(self.k, atoms, format!("{} | conjugated", self.origin)))
    }
}

/// Total-variation distance between two atomic laws.
pub fn total_variation(a: &MatrixDistribution, b: &MatrixDistribution) -> f64 {
    let (pa, pb) = (a.atoms(), b.atoms());
    let keys: BTreeSet<&Vec<u64>> = pa.keys().chain(pb.keys()).collect();
    0.5 * keys
        .into_iter()
        .map(|k| (pa.get(k).copied().unwrap_or(0.0) - pb.get(k).copied().unwrap_or(0.0)).abs())
        .sum::<f64>()
}

/// `count` independent draws of the `k`-point distance matrix.
pub fn sample_matrix_distribution(t: &MetricTriple, k: usize, count: usize, seed: u64) -> Result<MatrixDistribution> {
    if k < 2 {
        return input(format!("matrix order must be at least 2, got {k}"));
    }
    t.check()?;
    let samples = (0..count as u64)
        .into_par_iter()
        .map(|s| t.sample_matrix(k, &mut stream_rng(seed, s)))
        .collect::<Result<Vec<_>>>()?;
    Ok(MatrixDistribution { k, samples, weights: None, origin: format!("sampled k={k} count={count} seed={seed}") })
}

/// Exact law of the `k`-point matrix of a finite triple, by enumerating all
/// `n^k` tuples.
pub fn exact_matrix_distribution(t: &MetricTriple, k: usize) -> Result<MatrixDistribution> {
    let MetricTriple::Finite { matrix, weights } = t else {
        return Err(Error::Capability("exact distributions exist only for finite triples".into()));
    };
    t.check()?;
    if k == 0 {
        return input("matrix order must be positive");
    }
    let n = matrix.n();
    let total = (n as u64).checked_pow(k as u32).filter(|&c| c <= EXACT_ENUMERATION_LIMIT);
    let Some(total) = total else {
        return Err(Error::Capability(format!("{n}^{k} tuples exceed the limit {EXACT_ENUMERATION_LIMIT}")));
    };
    // split on the first point; merge in index order for reproducible sums
    let stride = total / n as u64;
    let parts: Vec<BTreeMap<Vec<u64>, f64>> = (0..n)
        .into_par_iter()
        .map(|first| {
            let mut atoms = BTreeMap::new();
            let mut tuple = vec![0usize; k];
            for code in 0..stride {
                tuple[0] = first;
                let mut c = code;
                for slot in tuple.iter_mut().skip(1) {
                    *slot = (c % n as u64) as usize;
                    c /= n as u64;
                }
                let w: f64 = tuple.iter().map(|&x| weights[x]).product();
                let mut bits = Vec::with_capacity(pair_count(k));
                for j in 1..k {
                    for i in 0..j {
                        bits.push(matrix.get(tuple[i], tuple[j]).to_bits());
                    }
                }
                *atoms.entry(bits).or_insert(0.0) += w;
            }
            atoms
        })
        .collect();
    let mut atoms = BTreeMap::new();
    for part in parts {
        for (b, w) in part {
            *atoms.entry(b).or_insert(0.0) += w;
        }
    }
    Ok(MatrixDistribution::from_atoms(k, atoms, format!("exact n={n} k={k}")))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvarianceOutcome {
    pub invariant: bool,
    /// Total-variation distance (exact mode).
    pub total_variation: Option<f64>,
    /// Energy test of one half against the conjugated other half (sampled mode).
    pub test: Option<TestOutcome>,
}

/// Whether the law is unchanged by conjugation with `g`. Exact laws are
/// compared in total variation against `tol`; sampled ones by an energy test
/// at `level` between the first half and the conjugated second half.
pub fn invariance_check(e: &MatrixDistribution, g: &[usize], tol: f64, level: f64, seed: u64) -> Result<InvarianceOutcome> {
    if g.len() != e.k {
        return input(format!("permutation of length {} for order {}", g.len(), e.k));
    }
    if e.is_exact() {
        let tv = total_variation(e, &e.conjugate(g)?);
        return Ok(InvarianceOutcome { invariant: tv <= tol, total_variation: Some(tv), test: None });
    }
    let half = e.samples.len() / 2;
    let a: Vec<Vec<f64>> = e.samples[..half].iter().map(|m| m.upper().to_vec()).collect();
    let b = e.samples[half..]
        .iter()
        .map(|m| Ok(m.permute(g)?.into_upper()))
        .collect::<Result<Vec<_>>>()?;
    let test = energy_test(&a, &b, 199, &mut stream_rng(seed, 0));
    Ok(InvarianceOutcome { invariant: !test.rejects(level), total_variation: None, test: Some(test) })
}

/// Fraction of sampled distances strictly below `l`.
pub fn ball_measure(row: &[f64], l: f64) -> Result<f64> {
    if row.is_empty() {
        return input("empty sample");
    }
    Ok(row.iter().filter(|&&d| d < l).count() as f64 / row.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reconstruction {
    pub triple: MetricTriple,
    /// Total variation between the reconstruction's exact law and the input.
    pub total_variation: f64,
}

fn not_identifiable<T>(msg: String) -> Result<T> {
    Err(Error::NotIdentifiable(msg))
}

/// Recover a finite triple from its matrix distribution, assuming distinct
/// points are at distinct, nonzero distances.
///
/// The nonzero values of an off-diagonal entry are the `C(n,2)` distances,
/// each with probability `2 w_a w_b`. Values that occur together in a
/// three-point matrix with three distinct nonzero entries are the sides of a
/// triangle, which pins down the incidence of distances and points. Weights
/// follow from `w_a^2 = P(d_ab) P(d_ac) / (2 P(d_bc))`. The result is
/// accepted when its own exact law is within `tol` of the input in total
/// variation.
pub fn reconstruct_finite(e: &MatrixDistribution, tol: f64) -> Result<Reconstruction> {
    let pair = e.nw_marginal(2)?.atoms();
    let mut prob: BTreeMap<u64, f64> = BTreeMap::new();
    for (b, w) in &pair {
        *prob.entry(b[0]).or_insert(0.0) += w;
    }
    let values: Vec<u64> = prob.keys().copied().filter(|&b| f64::from_bits(b) != 0.0).collect();
    let m = values.len();
    let n = (1..).find(|&n: &usize| n * (n - 1) / 2 >= m).expect("finite");
    if n * (n - 1) / 2 != m {
        return not_identifiable(format!("{m} distinct distances is not a triangular number; values tie"));
    }
    let p = |b: u64| prob[&b];
    let (matrix, weights) = match n {
        1 => (DistanceMatrix::single(), vec![1.0]),
        2 => {
            let pd = p(values[0]);
            let disc = (1.0 - 2.0 * pd).max(0.0).sqrt();
            (
                DistanceMatrix::from_upper(2, vec![f64::from_bits(values[0])])?,
                vec![(1.0 + disc) / 2.0, (1.0 - disc) / 2.0],
            )
        }
        _ => {
            if e.k < 3 {
                return not_identifiable(format!("{n} points need the three-point law, got k = {}", e.k));
            }
            let id: HashMap<u64, usize> = values.iter().enumerate().map(|(i, &b)| (b, i)).collect();
            let mut triangles: BTreeSet<[usize; 3]> = BTreeSet::new();
            for b in e.nw_marginal(3)?.atoms().keys() {
                let mut t = [0usize; 3];
                for (slot, v) in t.iter_mut().zip(b) {
                    match id.get(v) {
                        Some(&i) => *slot = i,
                        None => break,
                    }
                }
                if b.iter().all(|v| id.contains_key(v)) && t[0] != t[1] && t[0] != t[2] && t[1] != t[2] {
                    t.sort_unstable();
                    triangles.insert(t);
                }
            }
            let edges = incidence_from_triangles(m, n, &triangles)?;
            let mut vals = vec![vec![0.0; n]; n];
            let mut pr = vec![vec![0.0; n]; n];
            for (e_id, &(a, b)) in edges.iter().enumerate() {
                vals[a][b] = f64::from_bits(values[e_id]);
                vals[b][a] = vals[a][b];
                pr[a][b] = p(values[e_id]);
                pr[b][a] = pr[a][b];
            }
            let mut weights: Vec<f64> = (0..n)
                .map(|a| {
                    let others: Vec<usize> = (0..n).filter(|&x| x != a).collect();
                    let mut acc = 0.0;
                    let mut cnt = 0.0;
                    for (s, &b) in others.iter().enumerate() {
                        for &c in &others[s + 1..] {
                            acc += (pr[a][b] * pr[a][c] / (2.0 * pr[b][c])).sqrt();
                            cnt += 1.0;
                        }
                    }
                    acc / cnt
                })
                .collect();
            let total: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= total);
            (DistanceMatrix::from_full(&vals)?, weights)
        }
    };
    let triple = MetricTriple::Finite { matrix, weights };
    triple.check()?;
    let tv = total_variation(&exact_matrix_distribution(&triple, e.k)?, e);
    if tv > tol {
        return not_identifiable(format!("reconstruction is {tv} from the input in total variation"));
    }
    Ok(Reconstruction { triple, total_variation: tv })
}

/// Endpoints of each of the `m = C(n,2)` edges, given the triangles of `K_n`.
fn incidence_from_triangles(m: usize, n: usize, triangles: &BTreeSet<[usize; 3]>) -> Result<Vec<(usize, usize)>> {
    let expected = n * (n - 1) * (n - 2) / 6;
    if triangles.len() != expected {
        return not_identifiable(format!("found {} triangles, expected {expected}", triangles.len()));
    }
    let third = |x: usize, y: usize| -> Option<usize> {
        triangles.iter().find_map(|t| {
            if t.contains(&x) && t.contains(&y) && x != y {
                t.iter().copied().find(|&z| z != x && z != y)
            } else {
                None
            }
        })
    };
    // edge 0 joins points 0 and 1; each triangle on it contributes one more point
    let around: Vec<[usize; 2]> = triangles
        .iter()
        .filter(|t| t.contains(&0))
        .map(|t| {
            let rest: Vec<usize> = t.iter().copied().filter(|&z| z != 0).collect();
            [rest[0], rest[1]]
        })
        .collect();
    if around.len() != n - 2 {
        return not_identifiable(format!("edge 0 lies on {} triangles, expected {}", around.len(), n - 2));
    }
    // orient: side 0 of each pair is the edge to point 0
    let mut to0 = vec![around[0][0]];
    let mut to1 = vec![around[0][1]];
    for pair in &around[1..] {
        let [x, y] = *pair;
        if third(to0[0], x).is_some() {
            to0.push(x);
            to1.push(y);
        } else if third(to0[0], y).is_some() {
            to0.push(y);
            to1.push(x);
        } else {
            return not_identifiable(format!("edges {x} and {y} share no triangle with edge {}", to0[0]));
        }
    }
    let mut ends = vec![None; m];
    ends[0] = Some((0, 1));
    for (c, (&e0, &e1)) in to0.iter().zip(&to1).enumerate() {
        ends[e0] = Some((0, c + 2));
        ends[e1] = Some((1, c + 2));
    }
    for c in 0..to0.len() {
        for d in (c + 1)..to0.len() {
            let Some(e) = third(to0[c], to0[d]) else {
                return not_identifiable(format!("no triangle through edges {} and {}", to0[c], to0[d]));
            };
            if ends[e].is_some() {
                return not_identifiable(format!("edge {e} assigned twice"));
            }
            ends[e] = Some((c + 2, d + 2));
        }
    }
    ends.into_iter()
        .enumerate()
        .map(|(e, x)| x.map_or_else(|| not_identifiable(format!("edge {e} left unassigned")), Ok))
        .collect()
}

/// Something that can produce the distances from the first `rows` points to
/// a further window of points.
#[derive(Clone, Debug)]
pub enum ColumnSource {
    Matrix(DistanceMatrix),
    Triple { triple: MetricTriple, seed: u64 },
    /// Independent entries, as for a product measure on matrices.
    Product { law: EntryLaw, seed: u64 },
}

impl ColumnSource {
    /// Column `c` of the result lists `r(i, rows + c)` for `i < rows`.
    pub fn block(&self, rows: usize, width: usize) -> Result<Vec<Vec<f64>>> {
        match self {
            ColumnSource::Matrix(m) => {
                if m.n() < rows + width {
                    return input(format!("matrix has {} points, need {}", m.n(), rows + width));
                }
                Ok((rows..rows + width).map(|j| m.column(j)[..rows].to_vec()).collect())
            }
            ColumnSource::Triple { triple, seed } => {
                triple.check()?;
                let mut rng = stream_rng(*seed, 0);
                let cum = triple.cumulative();
                let pts: Vec<f64> = (0..rows + width).map(|_| triple.draw(&mut rng, &cum)).collect();
                Ok((rows..rows + width).map(|j| (0..rows).map(|i| triple.dist(pts[i], pts[j])).collect()).collect())
            }
            ColumnSource::Product { law, seed } => {
                let mut rng = stream_rng(*seed, 0);
                Ok((0..width).map(|_| (0..rows).map(|_| law.sample(&mut rng)).collect()).collect())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Condition4Report {
    /// Smallest passing `N`, if any.
    pub passing_n: Option<usize>,
    /// Fraction of window columns within `eps` of one of the first `N`
    /// points, for `N = 1..=n_max`.
    pub fractions: Vec<f64>,
    pub eps: f64,
    pub horizon: usize,
}

/// For `N = 1..=n_max`, the fraction of the `horizon` columns after the first
/// `n_max` points whose distance to some point `i < N` is below `eps`. `N`
/// passes when that fraction exceeds `1 - eps`.
pub fn condition4_check(source: &ColumnSource, eps: f64, n_max: usize, horizon: usize) -> Result<Condition4Report> {
    if n_max == 0 || horizon == 0 {
        return input("n_max and horizon must be positive");
    }
    let block = source.block(n_max, horizon)?;
    let mut first_hit = vec![0usize; n_max + 1];
    for col in &block {
        let hit = col.iter().position(|&d| d < eps).map_or(n_max, |i| i);
        first_hit[hit] += 1;
    }
    let mut fractions = Vec::with_capacity(n_max);
    let mut covered = 0usize;
    for hits in first_hit.iter().take(n_max) {
        covered += hits;
        fractions.push(covered as f64 / horizon as f64);
    }
    let passing_n = fractions.iter().position(|&f| f > 1.0 - eps).map(|i| i + 1);
    Ok(Condition4Report { passing_n, fractions, eps, horizon })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub test: TestOutcome,
    pub consistent: bool,
    pub columns_per_half: usize,
}

/// Compare the length-`n` prefixes of the columns in the first and second
/// halves of `r` (beyond the leading block) by an energy test; at most
/// `cap` evenly spaced columns per half are used.
pub fn regularity_report(r: &DistanceMatrix, n: usize, cap: usize, level: f64, seed: u64) -> Result<RegularityReport> {
    let avail = r.n().saturating_sub(n);
    if n == 0 || avail < 20 {
        return input(format!("need at least 20 columns beyond the prefix, have {avail}"));
    }
    let half = avail / 2;
    let take = half.min(cap.max(2));
    let pick = |start: usize| -> Vec<Vec<f64>> {
        (0..take).map(|t| r.column(n + start + t * half / take)[..n].to_vec()).collect()
    };
    let test = energy_test(&pick(0), &pick(half), 199, &mut stream_rng(seed, 0));
    Ok(RegularityReport { consistent: !test.rejects(level), test, columns_per_half: take })
}

/// Rows as multisets: each row sorted, with multiplicities across matrices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowDistribution {
    pub rows: Vec<(Vec<f64>, usize)>,
}

impl RowDistribution {
    pub fn from_matrices(ms: &[DistanceMatrix]) -> Self {
        let mut counts: BTreeMap<Vec<u64>, usize> = BTreeMap::new();
        for m in ms {
            for i in 0..m.n() {
                let mut row = m.row(i);
                row.sort_by(f64::total_cmp);
                *counts.entry(row.iter().map(|x| x.to_bits()).collect()).or_insert(0) += 1;
            }
        }
        RowDistribution { rows: counts.into_iter().map(|(b, c)| (b.into_iter().map(f64::from_bits).collect(), c)).collect() }
    }

    pub fn total(&self) -> usize {
        self.rows.iter().map(|r| r.1).sum()
    }
}

/// Largest order for which conjugacy is decided by an exact canonical form.
pub const CANONICAL_FORM_LIMIT: usize = 8;

fn quantize(x: f64, tol: f64) -> i64 {
    (x / tol).round() as i64
}

/// Label-free signature of a matrix after merging points at distance zero:
/// the lexicographically smallest relabelled matrix for small orders, the
/// sorted multiset of sorted rows otherwise.
fn conjugacy_class(m: &DistanceMatrix, tol: f64) -> Result<Vec<i64>> {
    let q = m.quotient(tol)?.matrix;
    let n = q.n();
    if n <= CANONICAL_FORM_LIMIT {
        let mut perm: Vec<usize> = (0..n).collect();
        let mut best: Option<Vec<i64>> = None;
        loop {
            let cand: Vec<i64> = (1..n)
                .flat_map(|j| (0..j).map(move |i| (i, j)))
                .map(|(i, j)| quantize(q.get(perm[i], perm[j]), tol))
                .collect();
            if best.as_ref().is_none_or(|b| cand < *b) {
                best = Some(cand);
            }
            if !next_permutation(&mut perm) {
                break;
            }
        }
        let mut out = vec![n as i64];
        out.extend(best.unwrap_or_default());
        Ok(out)
    } else {
        let mut rows: Vec<Vec<i64>> = (0..n)
            .map(|i| {
                let mut r: Vec<i64> = q.row(i).iter().map(|&x| quantize(x, tol)).collect();
                r.sort_unstable();
                r
            })
            .collect();
        rows.sort();
        let mut out = vec![-(n as i64)];
        out.extend(rows.into_iter().flatten());
        Ok(out)
    }
}

fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let Some(i) = (0..n - 1).rev().find(|&i| p[i] < p[i + 1]) else { return false };
    let j = (i + 1..n).rev().find(|&j| p[j] > p[i]).expect("exists");
    p.swap(i, j);
    p[i + 1..].reverse();
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimplicityReport {
    pub pairs_compared: usize,
    pub conjugate_pairs: usize,
    /// Non-conjugate pairs whose row laws the energy test cannot separate,
    /// with the test p-value.
    pub counterexamples: Vec<(usize, usize, f64)>,
}

impl SimplicityReport {
    pub fn evidence_against_simplicity(&self) -> bool {
        !self.counterexamples.is_empty()
    }
}

/// Look for pairs of matrices that are not relabellings of each other (after
/// merging zero-distance points) but whose rows look alike: rows `i >= w`
/// restricted to the first `w` coordinates are compared by an energy test.
pub fn simplicity_diagnostic(ms: &[DistanceMatrix], w: usize, tol: f64, level: f64, seed: u64) -> Result<SimplicityReport> {
    if ms.len() < 2 {
        return input("need at least two matrices");
    }
    if let Some(m) = ms.iter().find(|m| m.n() < w + 10) {
        return input(format!("matrix of order {} is too small for {w} coordinates", m.n()));
    }
    let classes = ms.iter().map(|m| conjugacy_class(m, tol)).collect::<Result<Vec<_>>>()?;
    let rows: Vec<Vec<Vec<f64>>> = ms.iter().map(|m| (w..m.n()).map(|i| m.row(i)[..w].to_vec()).collect()).collect();
    let mut report = SimplicityReport { pairs_compared: 0, conjugate_pairs: 0, counterexamples: Vec::new() };
    for a in 0..ms.len() {
        for b in (a + 1)..ms.len() {
            report.pairs_compared += 1;
            if classes[a] == classes[b] {
                report.conjugate_pairs += 1;
                continue;
            }
            let mut rng = stream_rng(derive_seed(seed, (a * ms.len() + b) as u64), 0);
            let t = energy_test(&rows[a], &rows[b], 199, &mut rng);
            if !t.rejects(level) {
                report.counterexamples.push((a, b, t.p_value));
            }
        }
    }
    Ok(report)
}

/// Random relabelling of a finite triple.
pub fn relabel(t: &MetricTriple, seed: u64) -> Result<MetricTriple> {
    let MetricTriple::Finite { matrix, weights } = t else {
        return input("only finite triples can be relabelled");
    };
    let g = random_permutation(matrix.n(), &mut stream_rng(seed, 0));
    let mut w = vec![0.0; weights.len()];
    for (i, &gi) in g.iter().enumerate() {
        w[gi] = weights[i];
    }
    Ok(MetricTriple::Finite { matrix: matrix.permute(&g)?, weights: w })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::growth::sample_product_half_one;
    use crate::stats::{binomial_band, ks_one_sample};

    fn two_point() -> MetricTriple {
        MetricTriple::finite(DistanceMatrix::from_upper(2, vec![1.0]).unwrap(), vec![0.5, 0.5]).unwrap()
    }

    fn three_point() -> MetricTriple {
        MetricTriple::finite(DistanceMatrix::from_upper(3, vec![1.0, 2.0, 2.5]).unwrap(), vec![0.2, 0.3, 0.5]).unwrap()
    }

    #[test]
    fn two_point_sampling_frequency() {
        let e = sample_matrix_distribution(&two_point(), 2, 20_000, 1).unwrap();
        let ones = e.samples.iter().filter(|m| m.get(0, 1) == 1.0).count() as f64 / 20_000.0;
        assert!((ones - 0.5).abs() < binomial_band(0.5, 20_000, 3.0));
    }

    #[test]
    fn circle_pair_distance_is_uniform() {
        let e = sample_matrix_distribution(&MetricTriple::Circle { circumference: 1.0 }, 2, 5000, 2).unwrap();
        let xs: Vec<f64> = e.samples.iter().map(|m| m.get(0, 1)).collect();
        assert!(!ks_one_sample(&xs, |x| (2.0 * x).clamp(0.0, 1.0)).rejects(0.01));
    }

    #[test]
    fn empty_and_small_orders() {
        assert!(sample_matrix_distribution(&two_point(), 2, 0, 1).unwrap().samples.is_empty());
        assert!(sample_matrix_distribution(&two_point(), 1, 5, 1).is_err());
    }

    #[test]
    fn exact_two_point() {
        let e = exact_matrix_distribution(&two_point(), 2).unwrap();
        assert_eq!(e.samples.len(), 2);
        assert_eq!(e.weights.as_ref().unwrap(), &vec![0.5, 0.5]);
        let one = MetricTriple::finite(DistanceMatrix::single(), vec![1.0]).unwrap();
        let e = exact_matrix_distribution(&one, 4).unwrap();
        assert_eq!(e.samples, vec![DistanceMatrix::constant(4, 0.0).unwrap()]);
    }

    #[test]
    fn exact_law_is_relabelling_invariant() {
        let t = three_point();
        let e = exact_matrix_distribution(&t, 3).unwrap();
        for s in 0..6 {
            let e2 = exact_matrix_distribution(&relabel(&t, s).unwrap(), 3).unwrap();
            assert!(total_variation(&e, &e2) <= 1e-12);
        }
    }

    #[test]
    fn invariance_and_corruption() {
        let e = exact_matrix_distribution(&three_point(), 3).unwrap();
        for g in [[0, 1, 2], [2, 0, 1], [1, 0, 2]] {
            assert!(invariance_check(&e, &g, 1e-12, 0.01, 0).unwrap().invariant);
        }
        let mut bad = e.clone();
        let w = bad.weights.as_mut().unwrap();
        let last = w.len() - 1;
        w[1] += 1e-3;
        w[last] -= 1e-3;
        assert!(!invariance_check(&bad, &[1, 0, 2], 1e-12, 0.01, 0).unwrap().invariant);
    }

    #[test]
    fn marginal_matches_lower_order() {
        let t = three_point();
        let e4 = exact_matrix_distribution(&t, 4).unwrap();
        let e3 = exact_matrix_distribution(&t, 3).unwrap();
        assert!(total_variation(&e4.nw_marginal(3).unwrap(), &e3) < 1e-12);
    }

    #[test]
    fn ball_measure_on_the_circle() {
        let c = MetricTriple::Circle { circumference: 1.0 };
        let e = sample_matrix_distribution(&c, 2, 20_000, 3).unwrap();
        let row: Vec<f64> = e.samples.iter().map(|m| m.get(0, 1)).collect();
        for l in [0.05f64, 0.1, 0.3] {
            let p = (2.0 * l).min(1.0);
            assert!((ball_measure(&row, l).unwrap() - p).abs() < binomial_band(p, row.len(), 3.0));
        }
        assert_eq!(ball_measure(&row, 0.5 + 1e-12).unwrap(), 1.0);
        assert_eq!(ball_measure(&row, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn reconstruct_three_points() {
        let t = three_point();
        let rec = reconstruct_finite(&exact_matrix_distribution(&t, 3).unwrap(), 1e-9).unwrap();
        assert!(rec.total_variation <= 1e-9);
        let MetricTriple::Finite { matrix, weights } = rec.triple else { panic!() };
        let mut pairs: Vec<(f64, f64, f64)> = Vec::new();
        for j in 1..3 {
            for i in 0..j {
                pairs.push((matrix.get(i, j), weights[i].min(weights[j]), weights[i].max(weights[j])));
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let want = [(1.0, 0.2, 0.3), (2.0, 0.2, 0.5), (2.5, 0.3, 0.5)];
        for (got, want) in pairs.iter().zip(want) {
            assert_eq!(got.0, want.0);
            assert!((got.1 - want.1).abs() < 1e-12 && (got.2 - want.2).abs() < 1e-12);
        }
    }

    #[test]
    fn reconstruct_one_point_and_ties() {
        let one = MetricTriple::finite(DistanceMatrix::single(), vec![1.0]).unwrap();
        let rec = reconstruct_finite(&exact_matrix_distribution(&one, 2).unwrap(), 1e-9).unwrap();
        assert_eq!(rec.triple, one);
        let tie = MetricTriple::finite(DistanceMatrix::constant(3, 1.0).unwrap(), vec![0.2, 0.3, 0.5]).unwrap();
        assert!(matches!(
            reconstruct_finite(&exact_matrix_distribution(&tie, 3).unwrap(), 1e-9),
            Err(Error::NotIdentifiable(_))
        ));
    }

    #[test]
    fn non_isometric_triples_differ() {
        let a = three_point();
        let b = MetricTriple::finite(DistanceMatrix::from_upper(3, vec![1.0, 2.0, 2.5]).unwrap(), vec![0.3, 0.2, 0.5]).unwrap();
        let (ea, eb) = (exact_matrix_distribution(&a, 3).unwrap(), exact_matrix_distribution(&b, 3).unwrap());
        assert!(total_variation(&ea, &eb) > 1e-3);
        let (ra, rb) = (reconstruct_finite(&ea, 1e-9).unwrap(), reconstruct_finite(&eb, 1e-9).unwrap());
        assert_ne!(ra.triple, rb.triple);
    }

    #[test]
    fn condition4_outcomes() {
        let circle = ColumnSource::Triple { triple: MetricTriple::Circle { circumference: 1.0 }, seed: 4 };
        let rep = condition4_check(&circle, 0.1, 100, 10_000).unwrap();
        assert!(rep.passing_n.is_some_and(|n| n <= 60), "{:?}", rep.passing_n);
        let product = ColumnSource::Product { law: EntryLaw::Uniform { low: 0.5, high: 1.0 }, seed: 4 };
        assert_eq!(condition4_check(&product, 0.25, 100, 10_000).unwrap().passing_n, None);
        let ones = ColumnSource::Matrix(DistanceMatrix::constant(300, 1.0).unwrap());
        assert_eq!(condition4_check(&ones, 0.5, 100, 200).unwrap().passing_n, None);
    }

    #[test]
    fn regularity_outcomes() {
        let c = MetricTriple::Circle { circumference: 1.0 };
        let m = c.sample_matrix(600, &mut stream_rng(5, 0)).unwrap();
        assert!(regularity_report(&m, 3, 200, 0.01, 0).unwrap().consistent);
        let ones = DistanceMatrix::constant(100, 1.0).unwrap();
        assert!(regularity_report(&ones, 3, 200, 0.01, 0).unwrap().consistent);
        // first half of the columns sit near point 0, second half far from it
        let n = 600;
        let pts: Vec<f64> = (0..n).map(|j| if j < 3 { j as f64 * 0.1 } else if j < 3 + 298 { 0.05 } else { 0.9 }).collect();
        let pts: Vec<f64> = pts
            .iter()
            .enumerate()
            .map(|(j, x)| x + 0.01 * ((j * 7919) % 100) as f64 / 100.0)
            .collect();
        let adv = DistanceMatrix::from_fn(n, |i, j| (pts[i] - pts[j]).abs()).unwrap();
        assert!(!regularity_report(&adv, 3, 200, 0.01, 0).unwrap().consistent);
    }

    #[test]
    fn row_distribution_total() {
        let ms: Vec<DistanceMatrix> = (0..4).map(|s| three_point().sample_matrix(6, &mut stream_rng(s, 0)).unwrap()).collect();
        assert_eq!(RowDistribution::from_matrices(&ms).total(), 24);
    }

    #[test]
    fn simplicity_evidence() {
        let law = EntryLaw::Uniform { low: 0.5, high: 1.0 };
        let prod: Vec<DistanceMatrix> = (0..2).map(|s| sample_product_half_one(120, law, s).unwrap()).collect();
        assert!(simplicity_diagnostic(&prod, 3, 1e-9, 0.01, 0).unwrap().evidence_against_simplicity());
        let dup = vec![prod[0].clone(), prod[0].permute(&random_permutation(120, &mut stream_rng(1, 1))).unwrap()];
        let rep = simplicity_diagnostic(&dup, 3, 1e-9, 0.01, 0).unwrap();
        assert_eq!(rep.conjugate_pairs, 1);
        assert!(!rep.evidence_against_simplicity());
        let t = three_point();
        let fin: Vec<DistanceMatrix> = (0..3).map(|s| t.sample_matrix(60, &mut stream_rng(s, 0)).unwrap()).collect();
        assert!(!simplicity_diagnostic(&fin, 2, 1e-9, 0.01, 0).unwrap().evidence_against_simplicity());
    }
}
