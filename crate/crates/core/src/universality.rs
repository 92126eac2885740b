//! Finite-scale universality: how densely the columns of a matrix fill the
//! admissible set of its leading block, and searches that embed small target
//! matrices into a large one.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};
use crate::growth::uniform_on;
use crate::matrix::{DistanceMatrix, DEFAULT_TOL};
use crate::polytope::{extreme_points, MAX_ENUMERATION_POINTS};
use crate::rng::{derive_seed, stream_rng, StreamRng};

/// Alternatives tried per level before a search gives up on that branch.
pub const SEARCH_ALTERNATIVES: usize = 32;

/// Largest target size accepted by the embedding searches.
pub const MAX_SEARCH_POINTS: usize = 16;

/// Covering radius of the columns beyond the leading block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DefectReport {
    pub prefix: usize,
    pub targets_tested: usize,
    /// Max over targets of the max-norm distance to the nearest column.
    pub defect: f64,
    pub worst_target: Vec<f64>,
    /// Number of points of the matrix that were used (`N`).
    pub columns_used: usize,
}

/// Where universality targets come from.
#[derive(Clone, Debug, PartialEq)]
pub enum Targets {
    Explicit(Vec<Vec<f64>>),
    /// `count` random admissible vectors: half polytope vertices, half
    /// Dirichlet-weighted vertex combinations. With a bound, only targets in
    /// `[0, bound]^n` are kept; without one, half of the targets are shifted
    /// along the all-ones ray by an `Exp(1)` amount.
    Sampled { count: usize, bound: Option<f64> },
}

/// Random admissible vectors for `prefix` drawn as described on
/// [`Targets::Sampled`]. Prefixes too large for vertex enumeration fall back
/// to coordinatewise uniform draws.
pub fn sample_targets(prefix: &DistanceMatrix, count: usize, bound: Option<f64>, seed: u64) -> Result<Vec<Vec<f64>>> {
    let n = prefix.n();
    let mut rng = stream_rng(derive_seed(seed, 0x7a57), 0);
    if n > MAX_ENUMERATION_POINTS {
        let top = bound.unwrap_or(2.0 * prefix.max_entry().max(1.0));
        return Ok((0..count).map(|_| kernel_target(prefix, top, bound, &mut rng)).collect());
    }
    let vs = extreme_points(prefix)?;
    let fits = |v: &[f64]| bound.is_none_or(|b| v.iter().all(|&x| x <= b));
    let inside: Vec<&Vec<f64>> = vs.vertices.iter().filter(|v| fits(v)).collect();
    let mut out = Vec::with_capacity(count);
    for t in 0..count {
        let mut target = None;
        if t % 2 == 1 {
            for _ in 0..64 {
                let w: Vec<f64> = vs.vertices.iter().map(|_| Exp1.sample(&mut rng)).collect();
                let total: f64 = w.iter().sum();
                let mut v = vec![0.0; n];
                for (wk, vert) in w.iter().zip(&vs.vertices) {
                    for (x, y) in v.iter_mut().zip(vert) {
                        *x += wk / total * y;
                    }
                }
                if fits(&v) {
                    target = Some(v);
                    break;
                }
            }
        }
        let mut v = match target {
            Some(v) => v,
            None if !inside.is_empty() => inside[rng.random_range(0..inside.len())].clone(),
            None => prefix.row(rng.random_range(0..n)),
        };
        if bound.is_none() && rng.random::<bool>() {
            let s: f64 = Exp1.sample(&mut rng);
            v.iter_mut().for_each(|x| *x += s);
        }
        out.push(v);
    }
    Ok(out)
}

fn kernel_target(prefix: &DistanceMatrix, top: f64, bound: Option<f64>, rng: &mut StreamRng) -> Vec<f64> {
    let mut v = vec![uniform_on(0.0, top, rng)];
    for k in 1..prefix.n() {
        let iv = prefix.coordinate_bounds(&v, k);
        let hi = iv.hi_value().unwrap_or(f64::INFINITY);
        v.push(uniform_on(iv.lo, bound.map_or(hi, |b| hi.min(b)), rng));
    }
    v
}

fn nearest_column(r: &DistanceMatrix, n: usize, target: &[f64]) -> f64 {
    (n..r.n())
        .map(|j| {
            r.column(j)[..n]
                .iter()
                .zip(target)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Covering radius of the columns `n..N` (restricted to their first `n`
/// coordinates) over a set of admissible targets for the leading `n` points.
pub fn universality_defect(r: &DistanceMatrix, n: usize, targets: &Targets, seed: u64) -> Result<DefectReport> {
    if n == 0 || n >= r.n() {
        return input(format!("prefix {n} must be in 1..{}", r.n()));
    }
    let prefix = r.nw_corner(n)?;
    let list = resolve_targets(&prefix, targets, seed)?;
    Ok(defect_over(r, n, &list))
}

fn resolve_targets(prefix: &DistanceMatrix, targets: &Targets, seed: u64) -> Result<Vec<Vec<f64>>> {
    match targets {
        Targets::Explicit(list) => {
            for (t, a) in list.iter().enumerate() {
                if let Some((i, j, slack)) = prefix.admissibility_violation(a, DEFAULT_TOL)? {
                    return input(format!("target {t} {a:?} is not admissible: pair ({i},{j}) slack {slack}"));
                }
            }
            Ok(list.clone())
        }
        Targets::Sampled { count, bound } => sample_targets(prefix, *count, *bound, seed),
    }
}

fn defect_over(r: &DistanceMatrix, n: usize, targets: &[Vec<f64>]) -> DefectReport {
    let dists: Vec<f64> = targets.par_iter().map(|t| nearest_column(r, n, t)).collect();
    // worst target, smallest index on ties
    let (worst, defect) = dists
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bd), (i, &d)| if d > bd { (i, d) } else { (bi, bd) });
    DefectReport {
        prefix: n,
        targets_tested: targets.len(),
        defect: if targets.is_empty() { 0.0 } else { defect },
        worst_target: targets.get(worst).cloned().unwrap_or_default(),
        columns_used: r.n(),
    }
}

/// Defect of the nested corners on `sizes` points, all measured against the
/// same targets.
pub fn defect_curve(r: &DistanceMatrix, n: usize, targets: &Targets, sizes: &[usize], seed: u64) -> Result<Vec<DefectReport>> {
    if n == 0 || n >= r.n() {
        return input(format!("prefix {n} must be in 1..{}", r.n()));
    }
    let list = resolve_targets(&r.nw_corner(n)?, targets, seed)?;
    sizes
        .iter()
        .map(|&size| {
            if size <= n || size > r.n() {
                return input(format!("size {size} must be in {}..={}", n + 1, r.n()));
            }
            Ok(defect_over(&r.nw_corner(size)?, n, &list))
        })
        .collect()
}

/// Result of an embedding search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub found: bool,
    /// Increasing indices into the large matrix; on failure, the best
    /// greedy assignment (possibly shorter than the target).
    pub indices: Vec<usize>,
    /// Max entrywise deviation of `indices` from the target.
    pub deviation: f64,
}

struct Search<'a> {
    r: &'a DistanceMatrix,
    q: &'a DistanceMatrix,
    eps: f64,
    first_free: usize,
}

impl Search<'_> {
    /// Candidates for target point `level` after `chosen`, sorted by
    /// deviation then index.
    fn candidates(&self, chosen: &[usize]) -> Vec<(f64, usize)> {
        let level = chosen.len();
        let k = self.q.n();
        let start = chosen.last().map_or(self.first_free, |&c| c + 1).max(self.first_free);
        let end = self.r.n().saturating_sub(k - level - 1);
        let mut c: Vec<(f64, usize)> = (start..end)
            .map(|j| {
                let dev = chosen
                    .iter()
                    .enumerate()
                    .map(|(a, &i)| (self.r.get(i, j) - self.q.get(a, level)).abs())
                    .fold(0.0, f64::max);
                (dev, j)
            })
            .collect();
        c.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        c
    }

    fn dfs(&self, chosen: &mut Vec<usize>, dev: f64) -> Option<f64> {
        if chosen.len() == self.q.n() {
            return Some(dev);
        }
        for (d, j) in self.candidates(chosen).into_iter().take(SEARCH_ALTERNATIVES) {
            if d >= self.eps {
                break;
            }
            chosen.push(j);
            if let Some(total) = self.dfs(chosen, dev.max(d)) {
                return Some(total);
            }
            chosen.pop();
        }
        None
    }

    fn greedy(&self, mut chosen: Vec<usize>) -> SearchOutcome {
        let mut dev: f64 = 0.0;
        while chosen.len() < self.q.n() {
            match self.candidates(&chosen).first() {
                Some(&(d, j)) => {
                    dev = dev.max(d);
                    chosen.push(j);
                }
                None => break,
            }
        }
        SearchOutcome { found: false, indices: chosen, deviation: dev }
    }

    fn run(&self, fixed: Vec<usize>) -> SearchOutcome {
        let mut chosen = fixed.clone();
        match self.dfs(&mut chosen, 0.0) {
            Some(deviation) => SearchOutcome { found: true, indices: chosen, deviation },
            None => self.greedy(fixed),
        }
    }
}

/// Find `i_1 < ... < i_k` with `|r(i_a, i_b) - q(a, b)| < eps` for all pairs,
/// choosing one point at a time and backtracking over at most
/// [`SEARCH_ALTERNATIVES`] candidates per point.
pub fn almost_universality_search(r: &DistanceMatrix, q: &DistanceMatrix, eps: f64) -> Result<SearchOutcome> {
    if q.n() > MAX_SEARCH_POINTS {
        return Err(Error::Capability(format!("targets are limited to {MAX_SEARCH_POINTS} points")));
    }
    if q.n() > r.n() {
        return Ok(SearchOutcome { found: false, indices: Vec::new(), deviation: f64::INFINITY });
    }
    Ok(Search { r, q, eps, first_free: 0 }.run(Vec::new()))
}

/// Extend the identity on the first `n` points to an `eps`-isometric
/// embedding of `q`, whose leading `n x n` block must equal that of `r`.
pub fn epsilon_extend(r: &DistanceMatrix, q: &DistanceMatrix, n: usize, eps: f64) -> Result<SearchOutcome> {
    if n == 0 || n > q.n() || n > r.n() {
        return input(format!("corner size {n} out of range"));
    }
    if q.n() - n > MAX_SEARCH_POINTS {
        return Err(Error::Capability(format!("at most {MAX_SEARCH_POINTS} new points")));
    }
    let (qc, rc) = (q.nw_corner(n)?, r.nw_corner(n)?);
    let tol = rc.scaled_tol(DEFAULT_TOL);
    if let Some(p) = qc.upper().iter().zip(rc.upper()).position(|(a, b)| (a - b).abs() > tol) {
        return input(format!("leading {n}x{n} blocks differ at stored entry {p}"));
    }
    Ok(Search { r, q, eps, first_free: n }.run((0..n).collect()))
}

/// A partial isometry built by alternating extension steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matching {
    pub pairs: Vec<(usize, usize)>,
    /// Max of `|rA(i, i') - rB(j, j')|` over matched pairs.
    pub distortion: f64,
    /// Number of pairs matched; equals the requested depth on success.
    pub depth_reached: usize,
    pub complete: bool,
    /// Search nodes expanded.
    pub nodes: usize,
}

/// Node budget for the backtracking in [`back_and_forth`].
pub const MATCHING_NODE_BUDGET: usize = 20_000;

struct BackForth<'a> {
    ra: &'a DistanceMatrix,
    rb: &'a DistanceMatrix,
    depth: usize,
    eps: f64,
    nodes: usize,
    best: Vec<(usize, usize)>,
}

impl BackForth<'_> {
    /// Partners for the next step within `eps`, best first (ties by index).
    fn step_candidates(&self, pairs: &[(usize, usize)]) -> Option<(bool, usize, Vec<(f64, usize)>)> {
        let forth = pairs.len() % 2 == 0;
        let (src, dst) = if forth { (self.ra, self.rb) } else { (self.rb, self.ra) };
        let matched: Vec<(usize, usize)> = pairs.iter().map(|&(a, b)| if forth { (a, b) } else { (b, a) }).collect();
        let mut used_src = vec![false; src.n()];
        let mut used_dst = vec![false; dst.n()];
        for &(s, d) in &matched {
            used_src[s] = true;
            used_dst[d] = true;
        }
        let x = used_src.iter().position(|u| !u)?;
        let want: Vec<f64> = matched.iter().map(|&(s, _)| src.get(x, s)).collect();
        let mut cands: Vec<(f64, usize)> = (0..dst.n())
            .into_par_iter()
            .filter(|&y| !used_dst[y])
            .filter_map(|y| {
                let mut dev: f64 = 0.0;
                for (&(_, d), w) in matched.iter().zip(&want) {
                    dev = dev.max((dst.get(y, d) - w).abs());
                    if dev >= self.eps {
                        return None;
                    }
                }
                Some((dev, y))
            })
            .collect();
        cands.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.cmp(&q.1)));
        cands.truncate(SEARCH_ALTERNATIVES);
        Some((forth, x, cands))
    }

    fn dfs(&mut self, pairs: &mut Vec<(usize, usize)>) -> bool {
        if pairs.len() > self.best.len() {
            self.best = pairs.clone();
        }
        if pairs.len() == self.depth {
            return true;
        }
        let Some((forth, x, cands)) = self.step_candidates(pairs) else { return false };
        for (_, y) in cands {
            if self.nodes >= MATCHING_NODE_BUDGET {
                return false;
            }
            self.nodes += 1;
            pairs.push(if forth { (x, y) } else { (y, x) });
            if self.dfs(pairs) {
                return true;
            }
            pairs.pop();
        }
        false
    }
}

/// Back-and-forth matching: odd steps take the smallest unmatched point of
/// `ra` and look for a partner in `rb`, even steps go the other way. A
/// partner must keep every matched distance within `eps`. Partners are tried
/// best first; when a later step finds none, earlier steps fall back to their
/// next alternative (at most [`SEARCH_ALTERNATIVES`] per step and
/// [`MATCHING_NODE_BUDGET`] in total). On failure the deepest partial
/// matching is returned.
pub fn back_and_forth(ra: &DistanceMatrix, rb: &DistanceMatrix, depth: usize, eps: f64) -> Result<Matching> {
    for (m, name) in [(ra, "first"), (rb, "second")] {
        if !m.validate(DEFAULT_TOL).ok {
            return Err(Error::Precondition(format!("{name} matrix violates the triangle inequality")));
        }
    }
    let mut search = BackForth { ra, rb, depth, eps, nodes: 0, best: Vec::new() };
    let mut pairs = Vec::with_capacity(depth);
    let complete = search.dfs(&mut pairs);
    let pairs = if complete { pairs } else { search.best };
    let distortion = pairs
        .iter()
        .enumerate()
        .flat_map(|(t, &(a, b))| pairs[..t].iter().map(move |&(c, d)| (ra.get(a, c) - rb.get(b, d)).abs()))
        .fold(0.0, f64::max);
    Ok(Matching { depth_reached: pairs.len(), complete, pairs, distortion, nodes: search.nodes })
}

/// Raw grid size above which a dense family is sampled instead of listed.
const ENUMERATION_CAP: usize = 4096;

/// Dense family of admissible vectors for one leading block, visited level
/// by level with the grid step `delta / 2^level`. Small grids are listed in
/// shuffled order; large ones are sampled coordinatewise.
struct Family {
    prefix: DistanceMatrix,
    level: u32,
    listed: Option<Vec<Vec<f64>>>,
    pos: usize,
    draws: usize,
    rng: StreamRng,
}

impl Family {
    fn new(prefix: DistanceMatrix, seed: u64) -> Self {
        let rng = stream_rng(seed, prefix.n() as u64);
        Family { prefix, level: 0, listed: None, pos: 0, draws: 0, rng }
    }

    fn next_level(&mut self) {
        self.level += 1;
        self.listed = None;
        self.pos = 0;
        self.draws = 0;
    }

    fn next(&mut self, delta: f64, bound: Option<f64>) -> Vec<f64> {
        loop {
            let step = delta / 2f64.powi(self.level as i32);
            let extent = bound.unwrap_or_else(|| f64::from(self.level + 1) * self.prefix.max_entry().max(1.0));
            let cells = ((extent / step) + 1e-9).floor().max(1.0) as usize;
            let listable = (cells as f64).powi(self.prefix.n() as i32) <= ENUMERATION_CAP as f64;
            if listable {
                if self.listed.is_none() {
                    let mut grid = self.grid(cells, step);
                    grid.shuffle(&mut self.rng);
                    self.listed = Some(grid);
                }
                let grid = self.listed.as_ref().expect("just filled");
                if self.pos < grid.len() {
                    self.pos += 1;
                    return grid[self.pos - 1].clone();
                }
                self.next_level();
            } else {
                if self.draws == ENUMERATION_CAP {
                    self.next_level();
                    continue;
                }
                self.draws += 1;
                return self.draw(cells, step, bound);
            }
        }
    }

    /// All admissible vectors with coordinates in `step * {1..=cells}`.
    fn grid(&self, cells: usize, step: f64) -> Vec<Vec<f64>> {
        let n = self.prefix.n();
        let mut idx = vec![1usize; n];
        let mut out = Vec::new();
        loop {
            let v: Vec<f64> = idx.iter().map(|&i| step * i as f64).collect();
            if self.prefix.is_admissible(&v, DEFAULT_TOL).unwrap_or(false) {
                out.push(v);
            }
            let mut k = 0;
            while k < n && idx[k] == cells {
                idx[k] = 1;
                k += 1;
            }
            if k == n {
                return out;
            }
            idx[k] += 1;
        }
    }

    fn draw(&mut self, cells: usize, step: f64, bound: Option<f64>) -> Vec<f64> {
        let n = self.prefix.n();
        let mut v = Vec::with_capacity(n);
        v.push(step * self.rng.random_range(1..=cells) as f64);
        for k in 1..n {
            let iv = self.prefix.coordinate_bounds(&v, k);
            let hi = iv.hi_value().unwrap_or(f64::INFINITY);
            let hi = bound.map_or(hi, |b| hi.min(b));
            let first = ((iv.lo / step) - 1e-9).ceil().max(1.0) as usize;
            let last = ((hi / step) + 1e-9).floor() as usize;
            v.push(if first <= last {
                step * self.rng.random_range(first..=last) as f64
            } else {
                0.5 * (iv.lo + hi)
            });
        }
        v
    }
}

/// Prefix length used for the column of point `j` (`j >= 1`): the sequence
/// `1; 1, 2; 1, 2, 3; ...`, so every prefix length recurs infinitely often.
pub fn dovetail_prefix(j: usize) -> usize {
    let t = j - 1;
    let mut round = 1;
    let mut start = 0;
    while start + round <= t {
        start += round;
        round += 1;
    }
    t - start + 1
}

/// Deterministic approximation of a universal matrix on `n_points` points.
///
/// The column of point `j` starts with the next member of the dense family of
/// admissible vectors for the leading block of size [`dovetail_prefix`]`(j)`;
/// its remaining coordinates are the midpoints of their feasibility intervals
/// (capped at `bound`).
pub fn construct_universal(n_points: usize, delta: f64, bound: Option<f64>, seed: u64) -> Result<DistanceMatrix> {
    if n_points == 0 {
        return input("need at least one point");
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return input(format!("grid step must be positive, got {delta}"));
    }
    if let Some(b) = bound {
        if !(b > 0.0 && b.is_finite()) {
            return input(format!("bound must be positive, got {b}"));
        }
    }
    let family_seed = derive_seed(seed, 0xc0457);
    let mut m = DistanceMatrix::single();
    let mut families: Vec<Family> = Vec::new();
    for j in 1..n_points {
        let n = dovetail_prefix(j);
        while families.len() < n {
            let k = families.len() + 1;
            families.push(Family::new(m.nw_corner(k)?, family_seed));
        }
        let mut col = families[n - 1].next(delta, bound);
        for k in n..j {
            let iv = m.coordinate_bounds(&col, k);
            let hi = iv.hi_value().expect("k >= 1");
            let hi = bound.map_or(hi, |b| hi.min(b));
            col.push(0.5 * (iv.lo + hi));
        }
        m.push_column(&col);
    }
    Ok(m)
}
