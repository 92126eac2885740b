use proptest::prelude::*;

use umet::graph;
use umet::growth::{sample_chain, GammaSpec};
use umet::matrix::permute_vector;
use umet::pmetric::{self, PExponent, PFiber};
use umet::polytope::{extreme_points, h_representation};
use umet::rng::{random_permutation, stream_rng};
use umet::spectra::spectrum;
use umet::universality::{defect_curve, universality_defect, Targets};
use umet::DistanceMatrix;

fn gamma_strategy() -> impl Strategy<Value = GammaSpec> {
    prop_oneof![
        (0.1f64..3.0).prop_map(GammaSpec::uniform),
        (0.2f64..4.0).prop_map(|rate| GammaSpec::Exponential { rate }),
        (0.2f64..3.0).prop_map(|scale| GammaSpec::HalfNormal { scale }),
    ]
}

fn matrix(n: usize, gamma: GammaSpec, seed: u64) -> DistanceMatrix {
    sample_chain(n, gamma, None, seed, 0).unwrap().matrix
}

fn permutation(n: usize, seed: u64) -> Vec<usize> {
    random_permutation(n, &mut stream_rng(seed, 99))
}

proptest! {
    #[test]
    fn samples_validate_and_reproduce(n in 1usize..14, g in gamma_strategy(), seed in any::<u64>(), bound in prop::option::of(0.5f64..3.0)) {
        let fits = match (g, bound) {
            (_, None) => true,
            (GammaSpec::Uniform { high, .. }, Some(b)) => high <= b,
            _ => false,
        };
        if !fits {
            prop_assert!(sample_chain(n, g, bound, seed, 3).is_err());
            return Ok(());
        }
        let a = sample_chain(n, g, bound, seed, 3).unwrap();
        let rep = a.matrix.validate(0.0);
        prop_assert!(rep.min_slack >= -1e-12, "slack {}", rep.min_slack);
        if let Some(b) = bound {
            prop_assert!(a.matrix.upper().iter().all(|&x| x <= b));
        }
        prop_assert_eq!(&a, &sample_chain(n, g, bound, seed, 3).unwrap());
    }

    #[test]
    fn amalgamation_interval_is_nonempty_and_realised(n in 1usize..9, g in gamma_strategy(), seed in any::<u64>(), t in 0.0f64..=1.0) {
        let m = matrix(n + 2, g, seed);
        let r = m.nw_corner(n).unwrap();
        let (a, b) = (&m.column(n)[..n], &m.column(n + 1)[..n]);
        let iv = r.amalgamation_interval(a, b, 1e-9).unwrap();
        let hi = iv.hi_value().unwrap();
        prop_assert!(iv.lo <= hi);
        let mut col = b.to_vec();
        col.push(iv.lo + t * (hi - iv.lo));
        prop_assert!(r.extend(a, 1e-9).unwrap().extend_unchecked(&col).validate(1e-9).ok);
    }

    #[test]
    fn extend_then_corner_is_identity(n in 1usize..10, g in gamma_strategy(), seed in any::<u64>()) {
        let m = matrix(n + 1, g, seed);
        let r = m.nw_corner(n).unwrap();
        let a = &m.column(n)[..n];
        prop_assert!(r.is_admissible(a, 1e-9).unwrap());
        let e = r.extend(a, 1e-9).unwrap();
        prop_assert!(e.validate(1e-9).ok);
        prop_assert_eq!(e.nw_corner(n).unwrap(), r);
    }

    #[test]
    fn admissibility_is_permutation_covariant(n in 1usize..9, seed in any::<u64>(), shift in -0.5f64..0.5) {
        let m = matrix(n + 1, GammaSpec::default(), seed);
        let r = m.nw_corner(n).unwrap();
        // perturb one coordinate so both outcomes occur
        let mut a = m.column(n)[..n].to_vec();
        a[0] = (a[0] + shift).max(0.0);
        let g = permutation(n, seed);
        prop_assert_eq!(
            r.is_admissible(&a, 1e-9).unwrap(),
            r.permute(&g).unwrap().is_admissible(&permute_vector(&a, &g), 1e-9).unwrap()
        );
    }

    #[test]
    fn quotient_is_proper_and_idempotent(n in 2usize..9, seed in any::<u64>(), zeros in prop::collection::vec(any::<bool>(), 8)) {
        // glue some consecutive points together to create zero distances
        let base = matrix(n, GammaSpec::default(), seed);
        let rep: Vec<usize> = (0..n).scan(0usize, |c, i| { if i > 0 && !zeros[i - 1] { *c = i; } Some(*c) }).collect();
        let m = DistanceMatrix::from_fn(n, |i, j| if rep[i] == rep[j] { 0.0 } else { base.get(rep[i], rep[j]) }).unwrap();
        let q = m.quotient(1e-9).unwrap();
        prop_assert!(q.matrix.is_proper());
        prop_assert!(q.matrix.validate(1e-9).ok);
        prop_assert_eq!(q.matrix.quotient(1e-9).unwrap().matrix, q.matrix.clone());
        let distinct: std::collections::BTreeSet<usize> = rep.iter().copied().collect();
        prop_assert_eq!(q.matrix.n(), distinct.len());
    }

    #[test]
    fn h_representation_agrees_with_admissibility(n in 1usize..7, seed in any::<u64>(), v in prop::collection::vec(0.0f64..3.0, 6)) {
        let r = matrix(n, GammaSpec::default(), seed);
        let a = &v[..n];
        prop_assert_eq!(h_representation(&r).contains(a, 1e-9), r.is_admissible(a, 1e-9).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn strict_triangles_have_seven_vertices(a in 0.1f64..1.0, b in 0.1f64..1.0, c in 0.1f64..1.0) {
        prop_assume!((a + b - c).min(a + c - b).min(b + c - a) > 1e-3);
        let vs = extreme_points(&DistanceMatrix::from_upper(3, vec![a, b, c]).unwrap()).unwrap();
        prop_assert_eq!(vs.vertices.len(), 7);
        prop_assert_eq!(vs.vertex_dimension, 3);
    }

    #[test]
    fn vertices_are_tight_and_admissible(n in 2usize..6, seed in any::<u64>()) {
        let r = matrix(n, GammaSpec::default(), seed);
        let scale = r.max_entry().max(1.0);
        let hs = h_representation(&r).halfspaces();
        for v in extreme_points(&r).unwrap().vertices {
            prop_assert!(r.is_admissible(&v, 1e-9).unwrap());
            let tight = hs.iter().filter(|(g, h)| (g.iter().zip(&v).map(|(x, y)| x * y).sum::<f64>() - h).abs() <= 1e-7 * scale).count();
            prop_assert!(tight >= n, "{tight} tight constraints at {v:?}");
        }
    }

    #[test]
    fn triangle_vertices_are_permutation_covariant(seed in any::<u64>()) {
        let r = matrix(3, GammaSpec::default(), seed);
        let base = extreme_points(&r).unwrap().vertices;
        for g in [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]] {
            let moved = extreme_points(&r.permute(&g).unwrap()).unwrap().vertices;
            prop_assert_eq!(moved.len(), base.len());
            for v in &base {
                let w = permute_vector(v, &g);
                prop_assert!(moved.iter().any(|u| u.iter().zip(&w).all(|(x, y)| (x - y).abs() < 1e-9)), "{w:?} missing");
            }
        }
    }

    #[test]
    fn defect_is_monotone_in_columns(seed in any::<u64>(), n in 1usize..4) {
        let r = sample_chain(200, GammaSpec::uniform(1.0), Some(1.0), seed, 0).unwrap().matrix;
        let sizes = [10, 20, 50, 100, 200];
        let curve = defect_curve(&r, n, &Targets::Sampled { count: 30, bound: Some(1.0) }, &sizes, seed).unwrap();
        for w in curve.windows(2) {
            prop_assert!(w[1].defect <= w[0].defect);
        }
    }

    #[test]
    fn defect_ignores_relabelling_of_later_points(seed in any::<u64>(), n in 1usize..4) {
        let r = sample_chain(60, GammaSpec::uniform(1.0), Some(1.0), seed, 0).unwrap().matrix;
        let tail = permutation(60 - n, seed);
        let g: Vec<usize> = (0..n).chain(tail.iter().map(|&t| t + n)).collect();
        let targets = Targets::Explicit((n..60).step_by(7).map(|j| r.column(j)[..n].iter().map(|x| x * 0.9).collect()).filter(|a: &Vec<f64>| r.nw_corner(n).unwrap().is_admissible(a, 1e-9).unwrap()).collect());
        let d1 = universality_defect(&r, n, &targets, 0).unwrap().defect;
        let d2 = universality_defect(&r.permute(&g).unwrap(), n, &targets, 0).unwrap().defect;
        prop_assert_eq!(d1, d2);
    }

    #[test]
    fn spectrum_invariants(n in 2usize..40, seed in any::<u64>(), g in gamma_strategy()) {
        let r = matrix(n, g, seed);
        let ev = spectrum(&r).unwrap();
        let scale = r.max_entry().max(1.0);
        prop_assert!(ev.iter().sum::<f64>().abs() <= 1e-8 * n as f64 * scale);
        let moved = spectrum(&r.permute(&permutation(n, seed)).unwrap()).unwrap();
        for (x, y) in ev.iter().zip(&moved) {
            prop_assert!((x - y).abs() <= 1e-9 * scale);
        }
        if r.is_proper() {
            prop_assert!(ev[n - 1] > 0.0 && ev[n - 1] - ev[n - 2] > 1e-12 * scale);
        }
    }

    #[test]
    fn word_depth_is_monotone(n in 8usize..80, p in 0.2f64..0.8, seed in any::<u64>()) {
        let g = graph::sample_er(n, p, seed).unwrap();
        let mut prev = true;
        for d in 1..=5 {
            let now = graph::word_universality_depth(&g, d).unwrap().universal;
            prop_assert!(prev || !now, "depth {d} universal but a smaller depth is not");
            prev = now;
        }
    }

    #[test]
    fn bridged_graphs_are_metrics(n in 2usize..60, p in 0.05f64..0.95, seed in any::<u64>()) {
        let g = graph::sample_er(n, p, seed).unwrap().with_apex();
        let d = graph::graph_to_distance(&g).unwrap();
        prop_assert!(d.validate(0.0).ok);
        prop_assert!(d.upper().iter().all(|&x| x == 1.0 || x == 2.0));
    }

    #[test]
    fn p_fibers_shrink_as_p_grows(n in 1usize..6, seed in any::<u64>()) {
        let p3 = PExponent::finite(3.0).unwrap();
        let m = pmetric::sample_p_metric(n + 2, p3, GammaSpec::uniform(1.0), Some(1.0), seed, 0).unwrap().matrix;
        let r = m.nw_corner(n).unwrap();
        let (a, b) = (&m.column(n)[..n], &m.column(n + 1)[..n]);
        let mut prev: Option<(f64, f64)> = None;
        for p in [3.0, 2.0, 1.5, 1.0] {
            let pe = PExponent::finite(p).unwrap();
            let PFiber::Interval(iv) = pmetric::amalgamation_interval_p(&r, a, b, pe, 1e-9).unwrap() else {
                return Err(TestCaseError::fail("finite p gives an interval"));
            };
            let hi = iv.hi_value().unwrap();
            // grid oracle: membership of the interval equals validity of the extension
            let ra = r.extend_unchecked(a);
            for k in 0..=20 {
                let h = 2.0 * k as f64 / 20.0;
                let mut col = b.to_vec();
                col.push(h);
                let valid = pmetric::validate_p(&ra.extend_unchecked(&col), pe, 1e-9).ok;
                let inside = h >= iv.lo - 1e-7 && h <= hi + 1e-7;
                let near_edge = (h - iv.lo).abs() < 1e-6 || (h - hi).abs() < 1e-6;
                prop_assert!(valid == inside || near_edge, "p={p} h={h} [{}, {hi}]", iv.lo);
            }
            if let Some((lo, up)) = prev {
                prop_assert!(iv.lo <= lo + 1e-12 && hi >= up - 1e-12, "p={p}: [{}, {hi}] does not contain [{lo}, {up}]", iv.lo);
            }
            prev = Some((iv.lo, hi));
        }
    }
}
