//! Goodness-of-fit statistics shared by the samplers and diagnostics.

use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Result of a hypothesis test: the statistic and its (approximate) p-value.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TestOutcome {
    pub statistic: f64,
    pub p_value: f64,
}

impl TestOutcome {
    pub fn rejects(&self, level: f64) -> bool {
        self.p_value < level
    }
}

/// Survival function of the Kolmogorov distribution, `P(K > lambda)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn ks_p_value(d: f64, effective_n: f64) -> f64 {
    let sq = effective_n.sqrt();
    kolmogorov_sf((sq + 0.12 + 0.11 / sq) * d)
}

/// One-sample Kolmogorov-Smirnov test against a continuous CDF.
pub fn ks_one_sample(samples: &[f64], cdf: impl Fn(f64) -> f64) -> TestOutcome {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    TestOutcome { statistic: d, p_value: ks_p_value(d, n) }
}

/// Two-sample Kolmogorov-Smirnov test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> TestOutcome {
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (n, m) = (xs.len(), ys.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let t = xs[i].min(ys[j]);
        while i < n && xs[i] <= t {
            i += 1;
        }
        while j < m && ys[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    TestOutcome { statistic: d, p_value: ks_p_value(d, ne) }
}

/// Pearson chi-square test of `counts` against equal expected cell counts.
pub fn chi_square_uniform(counts: &[u64]) -> TestOutcome {
    let total: u64 = counts.iter().sum();
    let k = counts.len();
    let expected = total as f64 / k as f64;
    let stat: f64 = counts
        .iter()
        .map(|&c| {
            let d = c as f64 - expected;
            d * d / expected
        })
        .sum();
    let dist = ChiSquared::new((k - 1) as f64).expect("positive degrees of freedom");
    TestOutcome { statistic: stat, p_value: dist.sf(stat) }
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn energy_from_gram(d: &[f64], m: usize, idx: &[usize], split: usize) -> f64 {
    let (xs, ys) = idx.split_at(split);
    let mean = |p: &[usize], q: &[usize]| -> f64 {
        let mut s = 0.0;
        for &i in p {
            for &j in q {
                s += d[i * m + j];
            }
        }
        s / (p.len() * q.len()) as f64
    };
    2.0 * mean(xs, ys) - mean(xs, xs) - mean(ys, ys)
}

/// Energy-distance two-sample test on vectors, with a seeded permutation
/// p-value (`permutations` resamples).
pub fn energy_test<R: Rng + ?Sized>(
    a: &[Vec<f64>],
    b: &[Vec<f64>],
    permutations: usize,
    rng: &mut R,
) -> TestOutcome {
    let pooled: Vec<&Vec<f64>> = a.iter().chain(b.iter()).collect();
    let m = pooled.len();
    let mut gram = vec![0.0; m * m];
    for i in 0..m {
        for j in (i + 1)..m {
            let v = euclid(pooled[i], pooled[j]);
            gram[i * m + j] = v;
            gram[j * m + i] = v;
        }
    }
    let mut idx: Vec<usize> = (0..m).collect();
    let observed = energy_from_gram(&gram, m, &idx, a.len());
    let mut exceed = 0usize;
    for _ in 0..permutations {
        use rand::seq::SliceRandom;
        idx.shuffle(rng);
        if energy_from_gram(&gram, m, &idx, a.len()) >= observed - 1e-12 {
            exceed += 1;
        }
    }
    TestOutcome {
        statistic: observed,
        p_value: (exceed + 1) as f64 / (permutations + 1) as f64,
    }
}

/// Half-width of a `z`-sigma binomial band for a frequency estimate.
pub fn binomial_band(p: f64, n: usize, z: f64) -> f64 {
    z * (p * (1.0 - p) / n as f64).sqrt()
}
