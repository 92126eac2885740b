//! Eigenvalues of distance matrices and bulk statistics over ensembles.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};
use crate::growth::{sample_ensemble, symmetrize_sample, GammaSpec};
use crate::matrix::DistanceMatrix;
use crate::rng::{derive_seed, stream_rng};

const QL_MAX_SWEEPS: usize = 60;

/// Minimum ensemble size for [`ensemble_spectrum_stats`].
pub const MIN_ENSEMBLE: usize = 30;

/// Fourth-moment ratio of the semicircle law.
pub const SEMICIRCLE_MOMENT_RATIO: f64 = 2.0;

/// Reduce a symmetric row-major matrix to tridiagonal form by Householder
/// reflections. Returns the diagonal and the subdiagonal (last entry zero).
fn tridiagonalize(mut a: Vec<f64>, n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut w = vec![0.0; n];
    for k in 0..n.saturating_sub(2) {
        d[k] = a[k * n + k];
        let m = n - k - 1;
        let off = k + 1;
        let norm = (0..m).map(|i| a[(off + i) * n + k].powi(2)).sum::<f64>().sqrt();
        if norm == 0.0 {
            e[k] = 0.0;
            continue;
        }
        let x0 = a[off * n + k];
        let alpha = if x0 > 0.0 { -norm } else { norm };
        for i in 0..m {
            v[i] = a[(off + i) * n + k];
        }
        v[0] -= alpha;
        let vv: f64 = v[..m].iter().map(|x| x * x).sum();
        let beta = 2.0 / vv;
        for i in 0..m {
            let row = &a[(off + i) * n + off..(off + i) * n + off + m];
            w[i] = beta * row.iter().zip(&v[..m]).map(|(x, y)| x * y).sum::<f64>();
        }
        let kk = 0.5 * beta * w[..m].iter().zip(&v[..m]).map(|(x, y)| x * y).sum::<f64>();
        for i in 0..m {
            w[i] -= kk * v[i];
        }
        for i in 0..m {
            let (vi, wi) = (v[i], w[i]);
            let row = &mut a[(off + i) * n + off..(off + i) * n + off + m];
            for ((x, &vj), &wj) in row.iter_mut().zip(&v[..m]).zip(&w[..m]) {
                *x -= vi * wj + wi * vj;
            }
        }
        e[k] = alpha;
    }
    if n >= 2 {
        d[n - 2] = a[(n - 2) * n + n - 2];
        e[n - 2] = a[(n - 1) * n + n - 2];
    }
    if n >= 1 {
        d[n - 1] = a[n * n - 1];
    }
    (d, e)
}

/// Eigenvalues of a symmetric tridiagonal matrix by QL with implicit
/// Wilkinson shifts. `e[i]` couples `i` and `i + 1`.
fn tridiagonal_eigenvalues(mut d: Vec<f64>, mut e: Vec<f64>) -> Result<Vec<f64>> {
    let n = d.len();
    for l in 0..n {
        let mut sweeps = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            sweeps += 1;
            if sweeps > QL_MAX_SWEEPS {
                return Err(Error::State(format!("QL iteration did not converge at index {l}")));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                let r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                let t = (d[i] - g) * s + 2.0 * c * b;
                p = s * t;
                d[i + 1] = g + p;
                g = c * t - b;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    d.sort_by(f64::total_cmp);
    Ok(d)
}

/// Ascending eigenvalues of a symmetric matrix given as full rows.
pub fn symmetric_eigenvalues(rows: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = rows.len();
    let mut a = Vec::with_capacity(n * n);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n {
            return input(format!("row {i} has {} entries, expected {n}", row.len()));
        }
        if let Some(j) = row.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { index: i * n + j });
        }
        a.extend_from_slice(row);
    }
    for i in 0..n {
        for j in 0..i {
            if a[i * n + j] != a[j * n + i] {
                return input(format!("matrix is not symmetric at ({j},{i})"));
            }
        }
    }
    let (d, e) = tridiagonalize(a, n);
    tridiagonal_eigenvalues(d, e)
}

/// Ascending eigenvalues of a distance matrix.
pub fn spectrum(r: &DistanceMatrix) -> Result<Vec<f64>> {
    symmetric_eigenvalues(&r.to_full())
}

/// Where ensemble matrices come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SpectrumSource {
    /// Growth chains, each conjugated by a random permutation.
    Growth { gamma: GammaSpec, bound: Option<f64> },
    /// Symmetric matrices with i.i.d. standard normal off-diagonal entries
    /// and zero diagonal.
    Wigner,
    Constant { value: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub left: f64,
    pub right: f64,
    pub density: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub n: usize,
    pub count: usize,
    /// Top eigenvalue of each matrix.
    pub perron: Vec<f64>,
    /// Whether every top eigenvalue is positive and separated from the next.
    pub perron_simple: bool,
    /// Largest `|sum of eigenvalues - trace| / (n * max(1, max |entry|))`.
    pub trace_error: f64,
    /// `E[x^4] / E[x^2]^2` of the pooled standardized bulk; `None` if degenerate.
    pub moment_ratio: Option<f64>,
    pub degenerate: bool,
    pub histogram: Vec<HistogramBin>,
}

impl SpectrumReport {
    /// Histogram as CSV with header `bin_left,bin_right,density`.
    pub fn histogram_csv(&self) -> String {
        let mut s = String::from("bin_left,bin_right,density\n");
        for b in &self.histogram {
            s.push_str(&format!("{},{},{}\n", b.left, b.right, b.density));
        }
        s
    }
}

fn wigner_rows(n: usize, seed: u64, stream: u64) -> Vec<Vec<f64>> {
    let mut rng = stream_rng(seed, stream);
    let mut rows = vec![vec![0.0; n]; n];
    for j in 1..n {
        for i in 0..j {
            let x: f64 = rng.sample(StandardNormal);
            rows[i][j] = x;
            rows[j][i] = x;
        }
    }
    rows
}

/// Matrices of the ensemble as full rows.
pub fn ensemble_rows(source: &SpectrumSource, n: usize, count: usize, seed: u64) -> Result<Vec<Vec<Vec<f64>>>> {
    match source {
        SpectrumSource::Growth { gamma, bound } => {
            let chains = sample_ensemble(n, count, *gamma, *bound, seed)?;
            let ms: Vec<DistanceMatrix> = chains.into_iter().map(|c| c.matrix).collect();
            Ok(symmetrize_sample(&ms, derive_seed(seed, 0x5e11))?.iter().map(|m| m.to_full()).collect())
        }
        SpectrumSource::Wigner => Ok((0..count as u64).into_par_iter().map(|c| wigner_rows(n, seed, c)).collect()),
        SpectrumSource::Constant { value } => Ok(vec![DistanceMatrix::constant(n, *value)?.to_full(); count]),
    }
}

/// Eigen-statistics of a sampled ensemble.
pub fn ensemble_spectrum_stats(source: &SpectrumSource, n: usize, count: usize, bins: usize, seed: u64) -> Result<SpectrumReport> {
    if count < MIN_ENSEMBLE {
        return Err(Error::Precondition(format!("need at least {MIN_ENSEMBLE} matrices, got {count}")));
    }
    spectrum_stats(&ensemble_rows(source, n, count, seed)?, bins)
}

/// Eigen-statistics of given symmetric matrices: the top eigenvalue of each is
/// removed, the rest is centered and scaled to unit variance per matrix, and
/// the standardized values are pooled.
pub fn spectrum_stats(matrices: &[Vec<Vec<f64>>], bins: usize) -> Result<SpectrumReport> {
    let Some(first) = matrices.first() else { return input("empty ensemble") };
    let n = first.len();
    if n < 3 {
        return input("need at least 3 points for a bulk spectrum");
    }
    if bins == 0 {
        return input("need at least one bin");
    }
    if let Some(bad) = matrices.iter().position(|m| m.len() != n) {
        return input(format!("matrix {bad} has {} rows, expected {n}", matrices[bad].len()));
    }
    let spectra: Vec<Vec<f64>> = matrices.par_iter().map(|m| symmetric_eigenvalues(m)).collect::<Result<_>>()?;

    let mut trace_error: f64 = 0.0;
    let mut perron = Vec::with_capacity(spectra.len());
    let mut perron_simple = true;
    let mut degenerate = false;
    let mut pooled = Vec::new();
    for (m, ev) in matrices.iter().zip(&spectra) {
        let scale = m.iter().flatten().fold(1.0f64, |a, x| a.max(x.abs()));
        let trace: f64 = (0..n).map(|i| m[i][i]).sum();
        trace_error = trace_error.max((ev.iter().sum::<f64>() - trace).abs() / (n as f64 * scale));
        let top = ev[n - 1];
        perron.push(top);
        perron_simple &= top > 0.0 && top - ev[n - 2] > 1e-9 * scale;
        let bulk = &ev[..n - 1];
        let mean = bulk.iter().sum::<f64>() / bulk.len() as f64;
        let var = bulk.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / bulk.len() as f64;
        if var.sqrt() <= 1e-9 * scale {
            degenerate = true;
            continue;
        }
        let sd = var.sqrt();
        pooled.extend(bulk.iter().map(|x| (x - mean) / sd));
    }

    let (moment_ratio, histogram) = if degenerate {
        (None, Vec::new())
    } else {
        let m2 = pooled.iter().map(|x| x * x).sum::<f64>() / pooled.len() as f64;
        let m4 = pooled.iter().map(|x| x.powi(4)).sum::<f64>() / pooled.len() as f64;
        (Some(m4 / (m2 * m2)), histogram(&pooled, bins))
    };
    Ok(SpectrumReport { n, count: matrices.len(), perron, perron_simple, trace_error, moment_ratio, degenerate, histogram })
}

fn histogram(xs: &[f64], bins: usize) -> Vec<HistogramBin> {
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; bins];
    for &x in xs {
        counts[(((x - lo) / width) as usize).min(bins - 1)] += 1;
    }
    counts
        .iter()
        .enumerate()
        .map(|(b, &c)| HistogramBin {
            left: lo + b as f64 * width,
            right: lo + (b + 1) as f64 * width,
            density: c as f64 / (xs.len() as f64 * width),
        })
        .collect()
}

/// Semicircle density of unit variance, `sqrt(4 - x^2) / (2 pi)` on `[-2, 2]`.
pub fn semicircle_density(x: f64) -> f64 {
    if x.abs() >= 2.0 {
        0.0
    } else {
        (4.0 - x * x).sqrt() / (2.0 * std::f64::consts::PI)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::growth::sample_nu_gamma;
    use crate::rng::random_permutation;

    // Characteristic polynomial coefficients by the Faddeev-LeVerrier recursion:
    // det(xI - A) = x^n + c[1] x^(n-1) + ... + c[n].
    fn char_poly(a: &[Vec<f64>]) -> Vec<f64> {
        let n = a.len();
        let mut c = vec![1.0; n + 1];
        let mut m = vec![vec![0.0; n]; n];
        for k in 1..=n {
            // M_k = A M_{k-1} + c_{k-1} I
            let mut next = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in 0..n {
                    next[i][j] = (0..n).map(|t| a[i][t] * m[t][j]).sum::<f64>() + if i == j { c[k - 1] } else { 0.0 };
                }
            }
            m = next;
            let tr: f64 = (0..n).map(|i| (0..n).map(|t| a[i][t] * m[t][i]).sum::<f64>()).sum();
            c[k] = -tr / k as f64;
        }
        c
    }

    fn poly_roots_by_bisection(c: &[f64], lo: f64, hi: f64) -> Vec<f64> {
        let eval = |x: f64| c.iter().fold(0.0, |acc, &ci| acc * x + ci);
        let steps = 200_000;
        let h = (hi - lo) / steps as f64;
        let mut roots = Vec::new();
        for s in 0..steps {
            let (mut a, mut b) = (lo + s as f64 * h, lo + (s + 1) as f64 * h);
            let (fa, fb) = (eval(a), eval(b));
            if fa == 0.0 {
                roots.push(a);
                continue;
            }
            if fa * fb > 0.0 {
                continue;
            }
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if eval(mid) * eval(a) <= 0.0 {
                    b = mid;
                } else {
                    a = mid;
                }
            }
            roots.push(0.5 * (a + b));
        }
        roots
    }

    #[test]
    fn trivial_spectra() {
        let two = spectrum(&DistanceMatrix::constant(2, 3.0).unwrap()).unwrap();
        assert!((two[0] + 3.0).abs() < 1e-12 && (two[1] - 3.0).abs() < 1e-12);
        let tri = spectrum(&DistanceMatrix::constant(3, 1.0).unwrap()).unwrap();
        for (x, y) in tri.iter().zip([-1.0, -1.0, 2.0]) {
            assert!((x - y).abs() < 1e-12);
        }
        assert_eq!(spectrum(&DistanceMatrix::single()).unwrap(), vec![0.0]);
    }

    #[test]
    fn matches_characteristic_polynomial() {
        for n in 2..=6 {
            for s in 0..20 {
                let r = sample_nu_gamma(n, GammaSpec::uniform(1.0), s).unwrap().matrix;
                let full = r.to_full();
                let bound = full.iter().map(|row| row.iter().sum::<f64>()).fold(0.0, f64::max) + 1.0;
                let roots = poly_roots_by_bisection(&char_poly(&full), -bound, bound);
                let ev = spectrum(&r).unwrap();
                if roots.len() != n {
                    continue; // a double root without a sign change
                }
                for (x, y) in ev.iter().zip(&roots) {
                    assert!((x - y).abs() < 1e-8, "n={n} s={s}: {ev:?} vs {roots:?}");
                }
            }
        }
    }

    #[test]
    fn invariants_on_samples() {
        for s in 0..10 {
            let r = sample_nu_gamma(40, GammaSpec::default(), s).unwrap().matrix;
            let ev = spectrum(&r).unwrap();
            let scale = r.max_entry().max(1.0);
            assert!(ev.iter().sum::<f64>().abs() < 1e-8 * 40.0 * scale);
            let g = random_permutation(40, &mut stream_rng(s, 1));
            let ev2 = spectrum(&r.permute(&g).unwrap()).unwrap();
            for (x, y) in ev.iter().zip(&ev2) {
                assert!((x - y).abs() < 1e-9 * scale);
            }
            assert!(ev[39] > 0.0 && ev[39] - ev[38] > 1e-9);
        }
    }

    #[test]
    fn diagonal_and_block_inputs() {
        let ev = symmetric_eigenvalues(&[vec![3.0, 0.0, 0.0], vec![0.0, -1.0, 0.0], vec![0.0, 0.0, 2.0]]).unwrap();
        assert_eq!(ev, vec![-1.0, 2.0, 3.0]);
        assert!(symmetric_eigenvalues(&[vec![0.0, 1.0], vec![2.0, 0.0]]).is_err());
        assert!(symmetric_eigenvalues(&[vec![0.0, f64::NAN], vec![f64::NAN, 0.0]]).is_err());
    }

    #[test]
    fn constant_ensemble_is_degenerate() {
        let rep = ensemble_spectrum_stats(&SpectrumSource::Constant { value: 1.0 }, 20, 30, 10, 0).unwrap();
        assert!(rep.degenerate && rep.moment_ratio.is_none());
        assert!(rep.perron.iter().all(|&p| (p - 19.0).abs() < 1e-9));
        assert!(ensemble_spectrum_stats(&SpectrumSource::Wigner, 20, 29, 10, 0).is_err());
    }

    #[test]
    fn wigner_control_ratio() {
        let rep = ensemble_spectrum_stats(&SpectrumSource::Wigner, 200, 30, 20, 4).unwrap();
        let ratio = rep.moment_ratio.unwrap();
        assert!((ratio - SEMICIRCLE_MOMENT_RATIO).abs() < 0.15, "{ratio}");
        let total: f64 = rep.histogram.iter().map(|b| b.density * (b.right - b.left)).sum();
        assert!((total - 1.0).abs() < 1e-9);
        assert!(rep.trace_error < 1e-10);
    }
}
