//! The polyhedron of admissible vectors of a distance matrix.
//!
//! For a base matrix `r` on `n` points, the admissible set is cut out by
//! `|a_i - a_j| <= r_ij`, `a_i + a_j >= r_ij` and `a_i >= 0`. It splits as a
//! compact polytope (the convex hull of its vertices) plus the ray of constant
//! vectors. Vertices and rays are enumerated with the double description
//! method on the homogenised cone `{(a, t) : G a <= h t, t >= 0}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{self, Constraint, Relation};
use crate::matrix::{DistanceMatrix, DEFAULT_TOL};

/// Largest base size accepted by [`extreme_points`].
pub const MAX_ENUMERATION_POINTS: usize = 7;

/// Tolerance used to merge vertices (max-norm).
pub const VERTEX_MERGE_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    /// `|coeffs · a| <= rhs`
    AbsLe,
    /// `coeffs · a >= rhs`
    Ge,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Inequality {
    pub coeffs: Vec<f64>,
    pub rhs: f64,
    pub sense: Sense,
}

impl Inequality {
    /// Signed slack at `a` (nonnegative when satisfied).
    pub fn slack(&self, a: &[f64]) -> f64 {
        let v: f64 = self.coeffs.iter().zip(a).map(|(c, x)| c * x).sum();
        match self.sense {
            Sense::AbsLe => self.rhs - v.abs(),
            Sense::Ge => v - self.rhs,
        }
    }
}

/// H-representation of the admissible set of `base`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmissiblePolyhedron {
    pub base: DistanceMatrix,
    pub inequalities: Vec<Inequality>,
}

impl AdmissiblePolyhedron {
    pub fn dim(&self) -> usize {
        self.base.n()
    }

    pub fn contains(&self, a: &[f64], tol: f64) -> bool {
        a.len() == self.dim() && self.inequalities.iter().all(|q| q.slack(a) >= -tol)
    }

    /// The same set as rows `g · a <= h`.
    pub fn halfspaces(&self) -> Vec<(Vec<f64>, f64)> {
        let mut out = Vec::new();
        for q in &self.inequalities {
            match q.sense {
                Sense::AbsLe => {
                    out.push((q.coeffs.clone(), q.rhs));
                    out.push((q.coeffs.iter().map(|c| -c).collect(), q.rhs));
                }
                Sense::Ge => out.push((q.coeffs.iter().map(|c| -c).collect(), -q.rhs)),
            }
        }
        out
    }
}

/// Inequality description of the admissible set: per pair `i < j` (storage
/// order) a two-sided difference bound and a sum bound, then `a_i >= 0`.
pub fn h_representation(r: &DistanceMatrix) -> AdmissiblePolyhedron {
    let n = r.n();
    let unit = |i: usize, j: usize, sj: f64| {
        let mut c = vec![0.0; n];
        c[i] = 1.0;
        c[j] = sj;
        c
    };
    let mut inequalities = Vec::with_capacity(n * n);
    for j in 1..n {
        for i in 0..j {
            let d = r.get(i, j);
            inequalities.push(Inequality { coeffs: unit(i, j, -1.0), rhs: d, sense: Sense::AbsLe });
            inequalities.push(Inequality { coeffs: unit(i, j, 1.0), rhs: d, sense: Sense::Ge });
        }
    }
    for i in 0..n {
        let mut c = vec![0.0; n];
        c[i] = 1.0;
        inequalities.push(Inequality { coeffs: c, rhs: 0.0, sense: Sense::Ge });
    }
    AdmissiblePolyhedron { base: r.clone(), inequalities }
}

/// Vertices and recession rays of an admissible polyhedron.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VertexSet {
    /// Sorted lexicographically.
    pub vertices: Vec<Vec<f64>>,
    /// Extreme rays of the recession cone, normalised to max coordinate 1.
    pub rays: Vec<Vec<f64>>,
    /// Affine dimension of the vertex set.
    pub vertex_dimension: usize,
}

impl VertexSet {
    /// Whether `p` lies in `conv(vertices) + cone(rays)`, decided by LP.
    pub fn contains(&self, p: &[f64], tol: f64) -> bool {
        let nv = self.vertices.len();
        let nr = self.rays.len();
        let nvar = nv + nr;
        let mut cons = Vec::with_capacity(p.len() * 2 + 1);
        for (i, &pi) in p.iter().enumerate() {
            let coeffs: Vec<f64> = self.vertices.iter().chain(&self.rays).map(|v| v[i]).collect();
            // |sum - p_i| <= tol as two rows
            cons.push(Constraint { coeffs: coeffs.clone(), relation: Relation::Le, rhs: pi + tol });
            cons.push(Constraint { coeffs, relation: Relation::Ge, rhs: pi - tol });
        }
        let mut sum = vec![1.0; nv];
        sum.extend(std::iter::repeat_n(0.0, nr));
        cons.push(Constraint { coeffs: sum, relation: Relation::Eq, rhs: 1.0 });
        lp::feasible(nvar, &cons).is_some()
    }
}

type Bits = Vec<u64>;

fn bit_set(b: &mut Bits, i: usize) {
    b[i / 64] |= 1 << (i % 64);
}

fn bits_and(a: &Bits, b: &Bits) -> Bits {
    a.iter().zip(b).map(|(x, y)| x & y).collect()
}

fn bits_subset(a: &Bits, b: &Bits) -> bool {
    a.iter().zip(b).all(|(x, y)| x & !y == 0)
}

fn bits_count(a: &Bits) -> usize {
    a.iter().map(|x| x.count_ones() as usize).sum()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) {
    let m = v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    if m > 0.0 {
        v.iter_mut().for_each(|x| *x /= m);
    }
}

/// Solve the square system `a x = b` by Gaussian elimination with partial
/// pivoting; `None` when (numerically) singular.
pub(crate) fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in (col + 1)..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = ((i + 1)..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Some(x)
}

/// Indices of a maximal linearly independent subset of `rows`, greedy in order.
fn independent_rows(rows: &[Vec<f64>], candidates: impl Iterator<Item = usize>, want: usize) -> Vec<usize> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut picked = Vec::new();
    for idx in candidates {
        let mut v = rows[idx].clone();
        for b in &basis {
            let p = b.iter().position(|x| x.abs() > 1e-12).unwrap();
            let f = v[p] / b[p];
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= f * y);
        }
        if let Some(p) = v.iter().position(|x| x.abs() > 1e-9) {
            let s = v[p];
            v.iter_mut().for_each(|x| *x /= s);
            // keep the pivot column unique to this basis vector
            for b in basis.iter_mut() {
                let f = b[p];
                if f != 0.0 {
                    b.iter_mut().zip(&v).for_each(|(x, y)| *x -= f * y);
                }
            }
            basis.push(v);
            picked.push(idx);
            if picked.len() == want {
                break;
            }
        }
    }
    picked
}

/// Rank of a set of vectors.
pub(crate) fn rank(vectors: &[Vec<f64>], tol: f64) -> usize {
    let mut rows: Vec<Vec<f64>> = vectors.to_vec();
    let mut r = 0;
    let cols = rows.first().map_or(0, |v| v.len());
    for c in 0..cols {
        let Some(p) = (r..rows.len()).max_by(|&i, &j| rows[i][c].abs().total_cmp(&rows[j][c].abs())) else {
            break;
        };
        if rows[p][c].abs() <= tol {
            continue;
        }
        rows.swap(r, p);
        for i in (r + 1)..rows.len() {
            let f = rows[i][c] / rows[r][c];
            for k in c..cols {
                rows[i][k] -= f * rows[r][k];
            }
        }
        r += 1;
    }
    r
}

/// Extreme rays of the pointed cone `{x : a x <= 0}` by double description.
/// `rows` must have full column rank.
fn cone_extreme_rays(rows: &[Vec<f64>], zero_tol: f64) -> Vec<Vec<f64>> {
    let d = rows[0].len();
    let m = rows.len();
    let words = m.div_ceil(64);
    let init = independent_rows(rows, 0..m, d);
    assert_eq!(init.len(), d, "constraint system must have full column rank");
    // rays of {x : B x <= 0} are the columns of -B^{-1}
    let bmat: Vec<Vec<f64>> = init.iter().map(|&i| rows[i].clone()).collect();
    let mut rays: Vec<(Vec<f64>, Bits)> = Vec::with_capacity(d);
    for k in 0..d {
        let mut rhs = vec![0.0; d];
        rhs[k] = -1.0;
        let mut x = solve_square(bmat.clone(), rhs).expect("independent rows");
        normalize(&mut x);
        let mut z = vec![0u64; words];
        for (pos, &ri) in init.iter().enumerate() {
            if pos != k {
                bit_set(&mut z, ri);
            }
        }
        rays.push((x, z));
    }
    let mut done = vec![false; m];
    for &i in &init {
        done[i] = true;
    }
    for (ri, row) in rows.iter().enumerate() {
        if done[ri] {
            continue;
        }
        let vals: Vec<f64> = rays.iter().map(|(x, _)| dot(row, x)).collect();
        let mut plus = Vec::new();
        let mut minus = Vec::new();
        let mut next: Vec<(Vec<f64>, Bits)> = Vec::with_capacity(rays.len());
        for (k, v) in vals.iter().enumerate() {
            if *v > zero_tol {
                plus.push(k);
            } else {
                let (x, mut z) = rays[k].clone();
                if *v >= -zero_tol {
                    bit_set(&mut z, ri);
                } else {
                    minus.push(k);
                }
                next.push((x, z));
            }
        }
        let mut created = Vec::new();
        for &p in &plus {
            for &q in &minus {
                let common = bits_and(&rays[p].1, &rays[q].1);
                if bits_count(&common) + 2 < d {
                    continue;
                }
                let adjacent = rays
                    .iter()
                    .enumerate()
                    .all(|(k, (_, z))| k == p || k == q || !bits_subset(&common, z));
                if !adjacent {
                    continue;
                }
                let (vp, vq) = (vals[p], vals[q]);
                let mut x: Vec<f64> = rays[q].0.iter().zip(&rays[p].0).map(|(xq, xp)| vp * xq - vq * xp).collect();
                normalize(&mut x);
                let mut z = common;
                bit_set(&mut z, ri);
                created.push((x, z));
            }
        }
        next.extend(created);
        rays = next;
        done[ri] = true;
    }
    rays.into_iter().map(|(x, _)| x).collect()
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    std::cmp::Ordering::Equal
}

fn dedup_sorted(mut pts: Vec<Vec<f64>>, tol: f64) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(pts.len());
    pts.sort_by(|a, b| lex_cmp(a, b));
    for p in pts {
        let dup = out
            .iter()
            .any(|q| q.iter().zip(&p).all(|(x, y)| (x - y).abs() <= tol));
        if !dup {
            out.push(p);
        }
    }
    out
}

/// Re-solve a vertex from `n` independent tight constraints to remove the
/// rounding accumulated by the cone arithmetic.
fn polish_vertex(v: &[f64], halfspaces: &[(Vec<f64>, f64)], tol: f64) -> Vec<f64> {
    let n = v.len();
    let mut tight: Vec<usize> = (0..halfspaces.len())
        .filter(|&k| (dot(&halfspaces[k].0, v) - halfspaces[k].1).abs() <= tol)
        .collect();
    tight.sort_by(|&a, &b| {
        let sa = (dot(&halfspaces[a].0, v) - halfspaces[a].1).abs();
        let sb = (dot(&halfspaces[b].0, v) - halfspaces[b].1).abs();
        sa.total_cmp(&sb).then(a.cmp(&b))
    });
    let rows: Vec<Vec<f64>> = halfspaces.iter().map(|h| h.0.clone()).collect();
    let pick = independent_rows(&rows, tight.into_iter(), n);
    if pick.len() < n {
        return v.to_vec();
    }
    let a = pick.iter().map(|&k| rows[k].clone()).collect();
    let b = pick.iter().map(|&k| halfspaces[k].1).collect();
    match solve_square(a, b) {
        Some(x) if x.iter().zip(v).all(|(p, q)| (p - q).abs() <= 1e-6 * (1.0 + q.abs())) => x,
        _ => v.to_vec(),
    }
}

/// Vertices and recession rays of the admissible set of `r`.
pub fn extreme_points(r: &DistanceMatrix) -> Result<VertexSet> {
    let n = r.n();
    if n > MAX_ENUMERATION_POINTS {
        return Err(Error::Capability(format!(
            "vertex enumeration is limited to n <= {MAX_ENUMERATION_POINTS} (got {n}); sample admissible vectors instead"
        )));
    }
    if !r.validate(DEFAULT_TOL).ok {
        return Err(Error::Precondition("base matrix violates the triangle inequality".into()));
    }
    let poly = h_representation(r);
    let hs = poly.halfspaces();
    let scale = r.max_entry().max(1.0);
    // homogenise: g·a - h t <= 0, and -t <= 0
    let mut rows: Vec<Vec<f64>> = hs
        .iter()
        .map(|(g, h)| {
            let mut row = g.clone();
            row.push(-h / scale);
            row
        })
        .collect();
    let mut trow = vec![0.0; n + 1];
    trow[n] = -1.0;
    rows.push(trow);
    let raw = cone_extreme_rays(&rows, 1e-10);
    let mut vertices = Vec::new();
    let mut rays = Vec::new();
    for x in raw {
        let t = x[n];
        if t > 1e-9 {
            let v: Vec<f64> = x[..n].iter().map(|a| a / t * scale).collect();
            let v: Vec<f64> = v.iter().map(|&a| if a.abs() < 1e-13 * scale { 0.0 } else { a }).collect();
            // adding 0.0 turns -0.0 into 0.0
            vertices.push(polish_vertex(&v, &hs, 1e-7 * scale).into_iter().map(|a| a + 0.0).collect());
        } else {
            let mut ray = x[..n].to_vec();
            let m = ray.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            ray.iter_mut().for_each(|a| *a /= m);
            rays.push(ray);
        }
    }
    let vertices = dedup_sorted(vertices, VERTEX_MERGE_TOL * scale);
    let rays = dedup_sorted(rays, 1e-9);
    let diffs: Vec<Vec<f64>> = vertices
        .iter()
        .skip(1)
        .map(|v| v.iter().zip(&vertices[0]).map(|(a, b)| a - b).collect())
        .collect();
    let vertex_dimension = if diffs.is_empty() { 0 } else { rank(&diffs, 1e-9 * scale) };
    Ok(VertexSet { vertices, rays, vertex_dimension })
}

/// Recession cone of the admissible set, as extreme rays normalised to max
/// coordinate 1. The cone does not depend on the entries of `r`; the flag
/// reports whether `r` was proper.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecessionCone {
    pub rays: Vec<Vec<f64>>,
    pub base_proper: bool,
}

pub fn recession_cone(r: &DistanceMatrix) -> Result<RecessionCone> {
    let n = r.n();
    if !r.validate(DEFAULT_TOL).ok {
        return Err(Error::Precondition("base matrix violates the triangle inequality".into()));
    }
    if n == 1 {
        return Ok(RecessionCone { rays: vec![vec![1.0]], base_proper: true });
    }
    let rows: Vec<Vec<f64>> = h_representation(r).halfspaces().into_iter().map(|(g, _)| g).collect();
    let raw = cone_extreme_rays(&rows, 1e-12);
    let rays = raw
        .into_iter()
        .map(|mut x| {
            let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            x.iter_mut().for_each(|a| *a /= m);
            x
        })
        .collect();
    Ok(RecessionCone { rays: dedup_sorted(rays, 1e-9), base_proper: r.is_proper() })
}

/// The seven vertices of the admissible set of a proper triangle with sides
/// `alpha = d(0,1)`, `beta = d(0,2)`, `gamma = d(1,2)`, with
/// `delta = (alpha + beta + gamma) / 2`: the vertex nearest the origin, the
/// three nondegenerate vertices with one coordinate equal to `delta`, and the
/// three copies of the base points.
pub fn triangle_vertices_closed_form(alpha: f64, beta: f64, gamma: f64) -> Result<[[f64; 3]; 7]> {
    let strict = alpha > 0.0
        && beta > 0.0
        && gamma > 0.0
        && alpha < beta + gamma
        && beta < alpha + gamma
        && gamma < alpha + beta;
    if !strict || ![alpha, beta, gamma].iter().all(|x| x.is_finite()) {
        return Err(Error::Input(format!(
            "({alpha}, {beta}, {gamma}) is not a strict triangle; use the general enumerator"
        )));
    }
    let delta = 0.5 * (alpha + beta + gamma);
    Ok([
        [delta - gamma, delta - beta, delta - alpha],
        [delta, delta - alpha, delta - beta],
        [delta - alpha, delta, delta - gamma],
        [delta - beta, delta - gamma, delta],
        [0.0, alpha, beta],
        [alpha, 0.0, gamma],
        [beta, gamma, 0.0],
    ])
}
