//! Graphs as (0,1) adjacency matrices: random graphs, universality of column
//! prefixes, the one-point extension property, and the passage to
//! {1,2}-valued metrics.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};
use crate::matrix::DistanceMatrix;
use crate::rng::stream_rng;

/// Largest word length checked by [`word_universality_depth`].
pub const MAX_WORD_DEPTH: usize = 20;

/// Number of missing words listed in a report (all are counted).
pub const MISSING_WORDS_LISTED: usize = 64;

/// Symmetric boolean matrix with zero diagonal, stored as bitset rows.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AdjacencyMatrix {
    n: usize,
    rows: Vec<Vec<u64>>,
}

#[derive(Serialize, Deserialize)]
struct GraphRecord {
    n: usize,
    rows: Vec<String>,
}

impl AdjacencyMatrix {
    pub fn empty(n: usize) -> Self {
        AdjacencyMatrix { n, rows: vec![vec![0; n.div_ceil(64)]; n] }
    }

    pub fn complete(n: usize) -> Self {
        let mut a = Self::empty(n);
        for j in 1..n {
            for i in 0..j {
                a.set(i, j, true);
            }
        }
        a
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut a = Self::empty(n);
        for &(i, j) in edges {
            if i >= n || j >= n || i == j {
                return input(format!("bad edge ({i},{j}) for {n} vertices"));
            }
            a.set(i, j, true);
        }
        Ok(a)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn adjacent(&self, i: usize, j: usize) -> bool {
        self.rows[i][j / 64] >> (j % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize, j: usize, on: bool) {
        if i == j {
            return;
        }
        for (a, b) in [(i, j), (j, i)] {
            if on {
                self.rows[a][b / 64] |= 1 << (b % 64);
            } else {
                self.rows[a][b / 64] &= !(1 << (b % 64));
            }
        }
    }

    pub fn edge_count(&self) -> usize {
        self.rows.iter().map(|r| r.iter().map(|w| w.count_ones() as usize).sum::<usize>()).sum::<usize>() / 2
    }

    pub fn degree(&self, i: usize) -> usize {
        self.rows[i].iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Copy with one extra vertex joined to every other vertex.
    pub fn with_apex(&self) -> Self {
        let mut a = Self::empty(self.n + 1);
        for j in 1..self.n {
            for i in 0..j {
                if self.adjacent(i, j) {
                    a.set(i, j, true);
                }
            }
        }
        for i in 0..self.n {
            a.set(i, self.n, true);
        }
        a
    }

    fn row_hex(&self, i: usize) -> String {
        (0..self.n.div_ceil(4))
            .map(|c| {
                let nib = (0..4).fold(0u32, |acc, b| {
                    let j = 4 * c + b;
                    acc << 1 | u32::from(j < self.n && self.adjacent(i, j))
                });
                char::from_digit(nib, 16).expect("nibble")
            })
            .collect()
    }
}

impl Serialize for AdjacencyMatrix {
    /// `{"n": .., "rows": [..]}`; each row is hex, four columns per digit,
    /// the lowest column in the high bit.
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        GraphRecord { n: self.n, rows: (0..self.n).map(|i| self.row_hex(i)).collect() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for AdjacencyMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let rec = GraphRecord::deserialize(d)?;
        if rec.rows.len() != rec.n {
            return Err(D::Error::custom(format!("{} rows for n = {}", rec.rows.len(), rec.n)));
        }
        let mut a = AdjacencyMatrix::empty(rec.n);
        for (i, row) in rec.rows.iter().enumerate() {
            if row.len() != rec.n.div_ceil(4) {
                return Err(D::Error::custom(format!("row {i} has {} hex digits", row.len())));
            }
            for (c, ch) in row.chars().enumerate() {
                let nib = ch.to_digit(16).ok_or_else(|| D::Error::custom(format!("row {i}: bad digit {ch:?}")))?;
                for b in 0..4 {
                    let j = 4 * c + b;
                    if nib >> (3 - b) & 1 == 1 {
                        if j >= rec.n || j == i {
                            return Err(D::Error::custom(format!("row {i}: bit {j} set outside the matrix or on the diagonal")));
                        }
                        a.rows[i][j / 64] |= 1 << (j % 64);
                    }
                }
            }
        }
        for i in 0..rec.n {
            for j in 0..i {
                if a.adjacent(i, j) != a.adjacent(j, i) {
                    return Err(D::Error::custom(format!("not symmetric at ({j},{i})")));
                }
            }
        }
        Ok(a)
    }
}

/// Erdős–Rényi graph: each pair joined independently with probability `p`,
/// pairs drawn in storage order `(0,1), (0,2), (1,2), (0,3), ...`.
pub fn sample_er(n: usize, p: f64, seed: u64) -> Result<AdjacencyMatrix> {
    if !(p > 0.0 && p < 1.0) {
        return input(format!("edge probability must lie in (0, 1), got {p}"));
    }
    let mut rng = stream_rng(seed, 0);
    let mut a = AdjacencyMatrix::empty(n);
    for j in 1..n {
        for i in 0..j {
            if rng.random::<f64>() < p {
                a.set(i, j, true);
            }
        }
    }
    Ok(a)
}

/// Deterministic graph on `0..n` with `i ~ j` (for `i < j`) iff bit `i` of
/// `j` is set. Column `k` then begins with the binary digits of `k`, so every
/// word of length `d` occurs once `n >= 2^d + d`.
pub fn construct_universal_graph(n: usize) -> Result<AdjacencyMatrix> {
    if n < 2 {
        return input("need at least two vertices");
    }
    let mut a = AdjacencyMatrix::empty(n);
    for j in 1..n {
        for i in 0..j.min(64) {
            if j >> i & 1 == 1 {
                a.set(i, j, true);
            }
        }
    }
    Ok(a)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WordReport {
    pub depth: usize,
    pub universal: bool,
    pub missing_count: usize,
    /// Up to [`MISSING_WORDS_LISTED`] missing words, shortest first; letter
    /// `t` is the adjacency to vertex `t`.
    pub missing: Vec<String>,
}

fn word(code: usize, len: usize) -> String {
    (0..len).map(|t| if code >> t & 1 == 1 { '1' } else { '0' }).collect()
}

/// Whether every 0/1 word of length `l <= depth` appears as the first `l`
/// entries `(a(0,k), ..., a(l-1,k))` of some column `k >= l`.
pub fn word_universality_depth(a: &AdjacencyMatrix, depth: usize) -> Result<WordReport> {
    if depth > MAX_WORD_DEPTH {
        return Err(Error::Capability(format!("word depth is limited to {MAX_WORD_DEPTH}")));
    }
    let mut missing = Vec::new();
    let mut missing_count = 0;
    for len in 1..=depth {
        let mut seen = vec![false; 1 << len];
        for k in len..a.n() {
            let code = (0..len).fold(0usize, |acc, t| acc | usize::from(a.adjacent(t, k)) << t);
            seen[code] = true;
        }
        for (code, _) in seen.iter().enumerate().filter(|(_, s)| !**s) {
            missing_count += 1;
            if missing.len() < MISSING_WORDS_LISTED {
                missing.push(word(code, len));
            }
        }
    }
    Ok(WordReport { depth, universal: missing_count == 0, missing_count, missing })
}

/// A vertex outside `U ∪ V` adjacent to all of `U` and none of `V`.
pub fn extension_property_check(a: &AdjacencyMatrix, u: &[usize], v: &[usize]) -> Result<Option<usize>> {
    if let Some(&x) = u.iter().chain(v).find(|&&x| x >= a.n()) {
        return input(format!("vertex {x} out of range"));
    }
    if let Some(&x) = u.iter().find(|x| v.contains(x)) {
        return input(format!("vertex {x} is in both sets"));
    }
    Ok((0..a.n()).find(|&z| {
        !u.contains(&z) && !v.contains(&z) && u.iter().all(|&x| a.adjacent(x, z)) && v.iter().all(|&y| !a.adjacent(y, z))
    }))
}

/// Every pair of disjoint sets `U, V` drawn from `0..within` with
/// `|U| + |V| <= max_size`, in a fixed order.
pub fn disjoint_pairs(within: usize, max_size: usize) -> Vec<(Vec<usize>, Vec<usize>)> {
    let mut out = Vec::new();
    // each vertex of 0..within is outside, in U, or in V
    let mut state = vec![0u8; within];
    loop {
        let used = state.iter().filter(|&&s| s != 0).count();
        if used <= max_size {
            let pick = |want: u8| state.iter().enumerate().filter(|(_, &s)| s == want).map(|(i, _)| i).collect();
            out.push((pick(1), pick(2)));
        }
        let mut t = 0;
        while t < within && state[t] == 2 {
            state[t] = 0;
            t += 1;
        }
        if t == within {
            return out;
        }
        state[t] += 1;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtensionScan {
    pub checked: usize,
    /// Pairs `(U, V)` without a witness, up to the first 64.
    pub failures: Vec<(Vec<usize>, Vec<usize>)>,
    pub failure_count: usize,
}

/// Check the extension property for every `(U, V)` from [`disjoint_pairs`].
pub fn extension_scan(a: &AdjacencyMatrix, within: usize, max_size: usize) -> Result<ExtensionScan> {
    if within > a.n() {
        return input(format!("cannot scan {within} vertices of {}", a.n()));
    }
    if within > 16 {
        return Err(Error::Capability("exhaustive scans are limited to 16 vertices".into()));
    }
    let pairs = disjoint_pairs(within, max_size);
    let fails: Vec<(Vec<usize>, Vec<usize>)> = pairs
        .par_iter()
        .filter(|(u, v)| extension_property_check(a, u, v).map(|w| w.is_none()).unwrap_or(true))
        .cloned()
        .collect();
    Ok(ExtensionScan { checked: pairs.len(), failure_count: fails.len(), failures: fails.into_iter().take(64).collect() })
}

/// Shortest-path metric of a graph of diameter at most two: 1 on edges,
/// 2 elsewhere.
pub fn graph_to_distance(a: &AdjacencyMatrix) -> Result<DistanceMatrix> {
    let n = a.n();
    for j in 1..n {
        for i in 0..j {
            if !a.adjacent(i, j) && !a.rows[i].iter().zip(&a.rows[j]).any(|(x, y)| x & y != 0) {
                return input(format!("vertices {i} and {j} are at distance more than 2"));
            }
        }
    }
    DistanceMatrix::from_fn(n, |i, j| if a.adjacent(i, j) { 1.0 } else { 2.0 })
}

/// Lower bound `1 - 2^d (1 - 2^-d)^(n-d)` on the probability that a
/// `G(n, 1/2)` graph has all words of length `d`.
pub fn er_universality_bound(n: usize, d: usize) -> f64 {
    let q = 1.0 - 0.5f64.powi(d as i32);
    (1.0 - 2f64.powi(d as i32) * q.powi(n.saturating_sub(d) as i32)).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::universality::{universality_defect, Targets};

    #[test]
    fn er_edge_count_and_determinism() {
        let g = sample_er(100, 0.5, 3).unwrap();
        let pairs = 4950.0;
        assert!((g.edge_count() as f64 - pairs / 2.0).abs() < 3.0 * (pairs * 0.25f64).sqrt());
        assert_eq!(g, sample_er(100, 0.5, 3).unwrap());
        assert!(sample_er(10, 0.0, 1).is_err() && sample_er(10, 1.0, 1).is_err());
    }

    #[test]
    fn complete_and_empty_graphs_miss_words() {
        let k = word_universality_depth(&AdjacencyMatrix::complete(10), 1).unwrap();
        assert!(!k.universal);
        assert_eq!(k.missing, vec!["0"]);
        let e = word_universality_depth(&AdjacencyMatrix::empty(10), 1).unwrap();
        assert_eq!(e.missing, vec!["1"]);
        assert!(word_universality_depth(&AdjacencyMatrix::empty(10), 21).is_err());
    }

    #[test]
    fn bit_graph_words() {
        let g = construct_universal_graph(128).unwrap();
        assert!(word_universality_depth(&g, 6).unwrap().universal);
        for d in 1..=6 {
            assert!(word_universality_depth(&g, d).unwrap().universal);
        }
        for d in 1..=5 {
            let n = (1 << d) + d;
            assert!(word_universality_depth(&construct_universal_graph(n).unwrap(), d).unwrap().universal, "d={d}");
        }
        let small = word_universality_depth(&construct_universal_graph(4).unwrap(), 2).unwrap();
        // columns 2 and 3 give words 01 and 11 only
        assert!(!small.universal);
        assert_eq!(small.missing, vec!["00", "10"]);
        for j in 0..128 {
            assert!(!g.adjacent(j, j));
            for i in 0..128 {
                assert_eq!(g.adjacent(i, j), g.adjacent(j, i));
            }
        }
    }

    #[test]
    fn prefix_extension_scan() {
        let g = construct_universal_graph(128).unwrap();
        let scan = extension_scan(&g, 6, 4).unwrap();
        assert_eq!(scan.failure_count, 0);
        assert!(scan.checked > 0);
    }

    #[test]
    fn bit_graph_is_not_globally_extensible() {
        let g = construct_universal_graph(128).unwrap();
        assert_eq!(extension_property_check(&g, &[100, 101], &[102, 103]).unwrap(), None);
    }

    #[test]
    fn extension_on_complete_graph() {
        let k = AdjacencyMatrix::complete(10);
        assert_eq!(extension_property_check(&k, &[], &[1]).unwrap(), None);
        assert!(extension_property_check(&k, &[1], &[1]).is_err());
    }

    #[test]
    fn words_match_partition_extensions() {
        for s in 0..50 {
            let g = sample_er(64, 0.5, s).unwrap();
            for d in 1..=3 {
                let words = word_universality_depth(&g, d).unwrap().universal;
                let parts = disjoint_pairs(d, d)
                    .into_iter()
                    .filter(|(u, v)| u.len() + v.len() == d)
                    .all(|(u, v)| (d..64).any(|z| u.iter().all(|&x| g.adjacent(x, z)) && v.iter().all(|&y| !g.adjacent(y, z))));
                assert_eq!(words, parts);
            }
        }
    }

    #[test]
    fn distance_bridge() {
        let g = construct_universal_graph(128).unwrap();
        assert!(graph_to_distance(&g).unwrap_err().to_string().contains("more than 2"));
        let d = graph_to_distance(&g.with_apex()).unwrap();
        assert!(d.validate(0.0).ok);
        assert!(d.upper().iter().all(|&x| x == 1.0 || x == 2.0));
        for len in 1..=4usize {
            let targets: Vec<Vec<f64>> = (0..1usize << len)
                .map(|c| (0..len).map(|t| if c >> t & 1 == 1 { 1.0 } else { 2.0 }).collect())
                .collect();
            let rep = universality_defect(&d, len, &Targets::Explicit(targets), 0).unwrap();
            assert_eq!(rep.defect, 0.0);
        }
        let path = AdjacencyMatrix::from_edges(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        assert!(graph_to_distance(&path).is_err());
    }

    #[test]
    fn hex_round_trip() {
        let g = sample_er(37, 0.3, 9).unwrap();
        let s = serde_json::to_string(&g).unwrap();
        assert_eq!(serde_json::from_str::<AdjacencyMatrix>(&s).unwrap(), g);
        let p = AdjacencyMatrix::from_edges(5, &[(0, 1), (0, 4)]).unwrap();
        assert_eq!(serde_json::to_string(&p).unwrap(), r#"{"n":5,"rows":["48","80","00","00","80"]}"#);
    }

    #[test]
    fn er_depth_four_frequency() {
        let hits = (0..100).filter(|&s| word_universality_depth(&sample_er(200, 0.5, s).unwrap(), 4).unwrap().universal).count();
        assert!(hits >= 99, "{hits}");
        assert!(er_universality_bound(200, 4) > 0.99);
    }
}
