mod common;

use common::{b, check_1d, check_nd, distinct, exhaustive_sse, grouping_sse, ids, table2};
use pathdist_core::histogram::{
    auto_bucket_count, bucket_sse, build_1d, build_nd, convolve, entropy, entropy_1d, fold_errors,
    hb2bu, kl_divergence, kl_divergence_1d, marginal_sum, marginalize_onto, rearrange, sum_pairs,
    trapezoid_cdf, v_optimal, Cell, VOptimal,
};
use pathdist_core::{HistError, HistParams, Histogram1D, HistogramND};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn params() -> HistParams {
    HistParams::default()
}

fn hist(pairs: &[(f64, f64, f64)]) -> Histogram1D {
    Histogram1D::new(pairs.iter().map(|&(l, u, p)| (b(l, u), p)).collect()).unwrap()
}

#[test]
fn v_optimal_constant_values() {
    let h = v_optimal(&[10.0, 10.0, 10.0], 1, 1.0).unwrap();
    assert_eq!(h.buckets(), &[(b(10.0, 11.0), 1.0)]);
}

#[test]
fn v_optimal_splits_small_from_large() {
    let values = [1.0, 1.0, 2.0, 9.0, 10.0];
    let h = v_optimal(&values, 2, 1.0).unwrap();
    assert_eq!(h.len(), 2);
    assert!((h.buckets()[0].1 - 0.6).abs() < 1e-12);
    assert_eq!(h.buckets()[0].0, b(1.0, 3.0));
    assert_eq!(h.buckets()[1].0, b(9.0, 11.0));
    let (v, f) = distinct(&values);
    let chosen = grouping_sse(&v, &f, &[0, 2]);
    assert!((chosen - exhaustive_sse(&v, &f, 2)).abs() < 1e-12);
}

#[test]
fn v_optimal_with_one_bucket_per_value_is_exact() {
    let values = [3.0, 4.0, 4.0, 7.0, 12.0, 12.0, 12.0];
    let mut solver = VOptimal::new(&values, 1.0).unwrap();
    let m = solver.distinct();
    assert!(solver.sse(m).unwrap().abs() < 1e-15);
    let h = solver.histogram(m).unwrap();
    assert!(bucket_sse(&values, &h, 1.0).abs() < 1e-15);
}

#[test]
fn v_optimal_rejects_bad_input() {
    assert_eq!(v_optimal(&[], 1, 1.0), Err(HistError::Empty));
    assert!(matches!(
        v_optimal(&[1.0, 2.0], 0, 1.0),
        Err(HistError::BadBucketCount { .. })
    ));
    assert!(matches!(
        v_optimal(&[1.0, 2.0], 3, 1.0),
        Err(HistError::BadBucketCount { .. })
    ));
}

#[test]
fn v_optimal_matches_exhaustive_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..300 {
        let m = rng.gen_range(1..=10);
        let pool: Vec<f64> = (0..m).map(|_| rng.gen_range(0..30) as f64).collect();
        let values: Vec<f64> = (0..rng.gen_range(m..40)).map(|i| pool[i % m]).collect();
        let (v, f) = distinct(&values);
        let mut solver = VOptimal::new(&values, 1.0).unwrap();
        for k in 1..=v.len().min(4) {
            let oracle = exhaustive_sse(&v, &f, k);
            assert!((solver.sse(k).unwrap() - oracle).abs() < 1e-12);
            let h = solver.histogram(k).unwrap();
            assert!((bucket_sse(&values, &h, 1.0) - oracle).abs() < 1e-12);
        }
    }
}

#[test]
fn auto_bucket_count_of_constant_values_is_one() {
    assert_eq!(auto_bucket_count(&[42.0; 40], &params()).unwrap(), 1);
    let (_, errors) = fold_errors(&[42.0; 40], &params()).unwrap();
    assert_eq!(errors[0], 0.0);
}

fn clusters(centres: &[f64], per: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    centres
        .iter()
        .flat_map(|&c| {
            (0..per)
                .map(|_| c + rng.gen_range(-2..=2) as f64)
                .collect::<Vec<_>>()
        })
        .collect()
}

#[test]
fn two_separated_clusters_give_two_buckets() {
    let values = clusters(&[10.0, 100.0], 50, 1);
    assert_eq!(auto_bucket_count(&values, &params()).unwrap(), 2);
    let h = build_1d(&values, &params()).unwrap();
    assert_eq!(h.len(), 2);
    assert!((h.buckets()[0].1 - 0.5).abs() < 1e-12);
    assert!(h.buckets()[0].0.u <= 13.0 && h.buckets()[1].0.l >= 98.0);
}

#[test]
fn four_modes_give_four_buckets_with_an_elbow() {
    let values = clusters(&[20.0, 60.0, 110.0, 170.0], 60, 2);
    let (b, errors) = fold_errors(&values, &params()).unwrap();
    assert_eq!(b, 4);
    // Falling error up to four buckets, then no real improvement.
    assert!(errors.windows(2).take(3).all(|w| w[1] < w[0]));
    assert!(errors[3] < 0.5 * errors[0]);
    assert!(errors[4] > 0.9 * errors[3]);
}

#[test]
fn auto_bucket_count_needs_enough_samples() {
    assert!(matches!(
        auto_bucket_count(&[1.0, 2.0], &params()),
        Err(HistError::TooFewSamples { .. })
    ));
    // build_1d falls back to one bucket instead.
    let h = build_1d(&[1.0, 5.0], &params()).unwrap();
    assert_eq!(h.buckets(), &[(b(1.0, 6.0), 1.0)]);
    assert_eq!(build_1d(&[], &params()), Err(HistError::Empty));
}

#[test]
fn bucket_cap_bounds_the_count() {
    let values: Vec<f64> = (0..400).map(|i| ((i % 40) * 25) as f64).collect();
    let capped = HistParams {
        max_buckets: 3,
        ..params()
    };
    assert!(auto_bucket_count(&values, &capped).unwrap() <= 3);
}

#[test]
fn build_nd_forms_the_product_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let xs = [20.0, 50.0, 80.0];
    let ys = [30.0, 90.0];
    let vectors: Vec<Vec<f64>> = (0..600)
        .map(|i| {
            let x = xs[i % 3] + rng.gen_range(-1..=1) as f64;
            let y = ys[(i / 3) % 2] + rng.gen_range(-1..=1) as f64;
            vec![x, y]
        })
        .collect();
    let h = build_nd(&vectors, ids(&["ea", "eb"]), &params()).unwrap();
    assert_eq!(h.cells().len(), 6);
    check_nd(&h).unwrap();
    for c in h.cells() {
        assert!((c.pr - 1.0 / 6.0).abs() < 1e-12);
    }
}

#[test]
fn build_nd_in_one_dimension_is_build_1d() {
    let values = clusters(&[10.0, 40.0, 45.0], 30, 3);
    let vectors: Vec<Vec<f64>> = values.iter().map(|&v| vec![v]).collect();
    let nd = build_nd(&vectors, ids(&["e1"]), &params()).unwrap();
    let (a, c) = (nd.to_1d().unwrap(), build_1d(&values, &params()).unwrap());
    assert_eq!(a.len(), c.len());
    for (x, y) in a.buckets().iter().zip(c.buckets()) {
        assert_eq!(x.0, y.0);
        assert!((x.1 - y.1).abs() < 1e-12);
    }
}

#[test]
fn build_nd_rejects_ragged_vectors() {
    let v = vec![vec![1.0, 2.0], vec![1.0]];
    assert_eq!(
        build_nd(&v, ids(&["a", "b"]), &params()).unwrap_err(),
        HistError::Dimensionality
    );
}

#[test]
fn entropy_examples() {
    assert_eq!(entropy_1d(&hist(&[(0.0, 1.0, 1.0)])), 0.0);
    assert!((entropy_1d(&hist(&[(0.0, 1.0, 0.5), (1.0, 2.0, 0.5)])) - 2f64.ln()).abs() < 1e-12);
    assert!((entropy(&table2()) - 1.3762).abs() < 5e-5);
}

#[test]
fn kl_examples() {
    let p = hist(&[(0.0, 1.0, 1.0)]);
    let q = hist(&[(0.0, 2.0, 1.0)]);
    assert_eq!(kl_divergence_1d(&p, &p), 0.0);
    assert!((kl_divergence_1d(&p, &q) - 2f64.ln()).abs() < 1e-12);
    // The reverse direction pays for p's missing half of q's support.
    assert!(kl_divergence_1d(&q, &p) > 5.0);
    let t = table2();
    assert_eq!(kl_divergence(&t, &t).unwrap(), 0.0);
    let one = p.to_nd(ids(&["e7"])[0].clone());
    assert_eq!(kl_divergence(&t, &one), Err(HistError::DimensionMismatch));
}

#[test]
fn convolve_point_masses() {
    let h = convolve(&hist(&[(10.0, 11.0, 1.0)]), &hist(&[(20.0, 21.0, 1.0)]));
    assert_eq!((h.min(), h.max()), (30.0, 32.0));
    check_1d(&h).unwrap();
}

#[test]
fn convolve_with_a_narrow_point_mass_shifts() {
    let h = hist(&[(10.0, 20.0, 0.3), (20.0, 25.0, 0.7)]);
    let eps = 1e-3;
    let c = convolve(&h, &hist(&[(0.0, eps, 1.0)]));
    for x in [12.0, 19.0, 22.0, 24.0] {
        assert!((c.cdf(x) - h.cdf(x)).abs() < 1e-3);
    }
    assert!(c.max() <= h.max() + eps + 1e-12);
}

#[test]
fn convolve_two_uniforms_is_a_triangle() {
    let u = hist(&[(0.0, 2.0, 1.0)]);
    let t = convolve(&u, &u);
    assert!((t.mass_in(0.0, 2.0) - 0.5).abs() < 1e-12);
    assert!((t.mass_in(2.0, 4.0) - 0.5).abs() < 1e-12);
    // The exact density integrated by the discretization is the triangle.
    assert!((trapezoid_cdf(1.0, 2.0, 2.0) - 0.125).abs() < 1e-12);
    assert!((trapezoid_cdf(2.0, 2.0, 2.0) - 0.5).abs() < 1e-12);
}

fn sample(h: &Histogram1D, rng: &mut ChaCha8Rng) -> f64 {
    let mut x: f64 = rng.gen();
    for (bk, p) in h.buckets() {
        if x < *p {
            return rng.gen_range(bk.l..bk.u);
        }
        x -= p;
    }
    let last = h.buckets().last().unwrap().0;
    rng.gen_range(last.l..last.u)
}

fn random_hist(rng: &mut ChaCha8Rng, k: usize) -> Histogram1D {
    let mut at = rng.gen_range(0..20) as f64;
    let mut pairs = Vec::new();
    for _ in 0..k {
        if rng.gen_bool(0.3) {
            at += rng.gen_range(1..5) as f64;
        }
        let w = rng.gen_range(1..12) as f64;
        pairs.push((b(at, at + w), rng.gen_range(0.1..1.0)));
        at += w;
    }
    Histogram1D::normalized(pairs).unwrap()
}

#[test]
fn convolve_agrees_with_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..3 {
        let h1 = random_hist(&mut rng, 4);
        let h2 = random_hist(&mut rng, 3);
        let c = convolve(&h1, &h2);
        check_1d(&c).unwrap();
        let draws = 1_000_000;
        let sums: Vec<f64> = (0..draws)
            .map(|_| sample(&h1, &mut rng) + sample(&h2, &mut rng))
            .collect();
        for (bk, p) in c.buckets() {
            let mc = sums.iter().filter(|&&s| bk.contains(s)).count() as f64 / draws as f64;
            assert!((mc - p).abs() < 0.005, "bucket {bk:?}: {p} vs {mc}");
        }
    }
}

#[test]
fn hb2bu_sums_bounds() {
    assert_eq!(hb2bu(&[b(20.0, 30.0), b(20.0, 40.0)]), b(40.0, 70.0));
    assert_eq!(hb2bu(&[b(3.0, 8.0)]), b(3.0, 8.0));
    assert_eq!(hb2bu(&[b(1.0, 2.0), b(1.0, 2.0), b(1.0, 2.0)]), b(3.0, 6.0));
}

#[test]
fn rearrange_splits_overlaps_uniformly() {
    let pairs = [(b(40.0, 70.0), 0.6), (b(60.0, 90.0), 0.4)];
    let h = rearrange(&pairs).unwrap();
    let expect = [
        (40.0, 60.0, 0.4),
        (60.0, 70.0, 1.0 / 3.0),
        (70.0, 90.0, 0.8 / 3.0),
    ];
    assert_eq!(h.len(), 3);
    for ((bk, p), (l, u, q)) in h.buckets().iter().zip(expect) {
        assert_eq!(*bk, b(l, u));
        assert!((p - q).abs() < 1e-12);
    }
}

#[test]
fn rearrange_identity_and_additivity() {
    let disjoint = [(b(5.0, 6.0), 0.25), (b(0.0, 1.0), 0.75)];
    let h = rearrange(&disjoint).unwrap();
    assert_eq!(h.buckets(), &[(b(0.0, 1.0), 0.75), (b(5.0, 6.0), 0.25)]);
    let dup = rearrange(&[(b(0.0, 1.0), 0.5), (b(0.0, 1.0), 0.5)]).unwrap();
    assert_eq!(dup.buckets(), &[(b(0.0, 1.0), 1.0)]);
    assert!(matches!(
        rearrange(&[(b(0.0, 1.0), -0.5), (b(0.0, 1.0), 1.5)]),
        Err(HistError::BadProbability(_))
    ));
}

#[test]
fn worked_example_pairs_and_marginal() {
    let t = table2();
    let pairs = sum_pairs(&t);
    let expect_pairs = [
        (40.0, 70.0, 0.30),
        (60.0, 90.0, 0.20),
        (50.0, 90.0, 0.25),
        (70.0, 110.0, 0.25),
    ];
    assert_eq!(pairs.len(), 4);
    for ((bk, p), (l, u, q)) in pairs.iter().zip(expect_pairs) {
        assert_eq!(*bk, b(l, u));
        assert!((p - q).abs() < 1e-12);
    }
    let m = marginal_sum(&t);
    let exact = [
        (40.0, 50.0, 0.1),
        (50.0, 60.0, 0.1625),
        (60.0, 70.0, 0.1 + 0.1 / 1.5 + 0.0625),
        (70.0, 90.0, 0.2 / 1.5 + 0.125 + 0.125),
        (90.0, 110.0, 0.125),
    ];
    assert_eq!(m.len(), 5);
    for ((bk, p), (l, u, q)) in m.buckets().iter().zip(exact) {
        assert_eq!(*bk, b(l, u));
        assert!((p - q).abs() < 1e-12);
    }
}

#[test]
fn marginal_sum_of_one_dimension_is_identity() {
    let h = hist(&[(1.0, 4.0, 0.2), (6.0, 7.0, 0.8)]);
    assert_eq!(marginal_sum(&h.to_nd(ids(&["e1"])[0].clone())), h);
}

fn random_nd(rng: &mut ChaCha8Rng, dims: usize) -> HistogramND {
    let grids: Vec<Vec<f64>> = (0..dims)
        .map(|_| {
            let mut g = vec![rng.gen_range(0..10) as f64];
            for _ in 0..rng.gen_range(1..4) {
                let next = g.last().unwrap() + rng.gen_range(1..8) as f64;
                g.push(next);
            }
            g
        })
        .collect();
    let mut cells = vec![Cell {
        idx: vec![0; dims],
        pr: 1.0,
    }];
    for _ in 0..8 {
        let idx = grids
            .iter()
            .map(|g| rng.gen_range(0..g.len() - 1) as u32)
            .collect();
        cells.push(Cell {
            idx,
            pr: rng.gen_range(0.1..1.0),
        });
    }
    let names: Vec<String> = (0..dims).map(|d| format!("d{d}")).collect();
    let names: Vec<&str> = names.iter().map(String::as_str).collect();
    HistogramND::normalized(ids(&names), grids, cells).unwrap()
}

#[test]
fn marginal_sum_matches_fine_grid_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let res = 0.01;
    for _ in 0..30 {
        let dims = rng.gen_range(2..=3);
        let h = random_nd(&mut rng, dims);
        let m = marginal_sum(&h);
        check_1d(&m).unwrap();
        let (lo, hi) = h.sum_bounds();
        let cells = ((hi - lo) / res).round() as usize;
        let mut fine = vec![0.0; cells];
        for c in h.cells() {
            let bk = hb2bu(&h.hyper_bucket(c));
            let a = ((bk.l - lo) / res).round() as usize;
            let z = ((bk.u - lo) / res).round() as usize;
            for f in &mut fine[a..z] {
                *f += c.pr / (z - a) as f64;
            }
        }
        for (bk, p) in m.buckets() {
            let a = ((bk.l - lo) / res).round() as usize;
            let z = ((bk.u - lo) / res).round() as usize;
            let brute: f64 = fine[a..z].iter().sum();
            assert!((brute - p).abs() < 1e-6);
        }
    }
}

#[test]
fn marginalize_worked_example() {
    let t = table2();
    let e7 = marginalize_onto(&t, &ids(&["e7"]))
        .unwrap()
        .to_1d()
        .unwrap();
    assert_eq!(e7.boundaries(), vec![20.0, 30.0, 50.0]);
    assert!((e7.buckets()[0].1 - 0.5).abs() < 1e-12 && (e7.buckets()[1].1 - 0.5).abs() < 1e-12);
    let e8 = marginalize_onto(&t, &ids(&["e8"]))
        .unwrap()
        .to_1d()
        .unwrap();
    assert_eq!(e8.boundaries(), vec![20.0, 40.0, 60.0]);
    assert!((e8.buckets()[0].1 - 0.55).abs() < 1e-12 && (e8.buckets()[1].1 - 0.45).abs() < 1e-12);
    assert_eq!(marginalize_onto(&t, &ids(&["e7", "e8"])).unwrap(), t);
    assert!(matches!(
        marginalize_onto(&t, &ids(&["e9"])),
        Err(HistError::UnknownDimension(_))
    ));
}

#[test]
fn marginalize_composes() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..20 {
        let h = random_nd(&mut rng, 4);
        let two = marginalize_onto(
            &marginalize_onto(&h, &ids(&["d0", "d2", "d3"])).unwrap(),
            &ids(&["d0", "d3"]),
        )
        .unwrap();
        let one = marginalize_onto(&h, &ids(&["d0", "d3"])).unwrap();
        assert_eq!(one.boundaries(), two.boundaries());
        for (a, c) in one.cells().iter().zip(two.cells()) {
            assert_eq!(a.idx, c.idx);
            assert!((a.pr - c.pr).abs() < 1e-12);
        }
    }
}

#[test]
fn json_representation_round_trips() {
    let t = table2();
    let s = serde_json::to_string(&t).unwrap();
    assert!(s.contains("\"dims\"") && s.contains("\"boundaries\"") && s.contains("\"cells\""));
    let back: HistogramND = serde_json::from_str(&s).unwrap();
    assert_eq!(back, t);
    let bad = s.replace("0.3", "0.9");
    assert!(serde_json::from_str::<HistogramND>(&bad).is_err());
}

proptest! {
    #[test]
    fn v_optimal_error_is_non_increasing(values in prop::collection::vec(0u32..60, 1..50)) {
        let values: Vec<f64> = values.into_iter().map(f64::from).collect();
        let mut solver = VOptimal::new(&values, 1.0).unwrap();
        let mut prev = f64::INFINITY;
        for k in 1..=solver.distinct() {
            let e = solver.sse(k).unwrap();
            prop_assert!(e <= prev + 1e-12);
            prev = e;
            let h = solver.histogram(k).unwrap();
            prop_assert!(check_1d(&h).is_ok());
        }
    }

    #[test]
    fn build_1d_is_normalized(values in prop::collection::vec(0.0f64..500.0, 1..200), seed in 0u64..4) {
        let h = build_1d(&values, &HistParams { seed, ..params() }).unwrap();
        prop_assert!(check_1d(&h).is_ok());
        prop_assert!(values.iter().all(|&v| h.buckets().iter().any(|(bk, _)| bk.contains(v))));
    }

    #[test]
    fn build_nd_places_every_vector_once(raw in prop::collection::vec((0u32..100, 0u32..100, 0u32..100), 1..120)) {
        let vectors: Vec<Vec<f64>> = raw.iter().map(|&(a, b, c)| vec![a as f64, b as f64, c as f64]).collect();
        let h = build_nd(&vectors, ids(&["x", "y", "z"]), &params()).unwrap();
        prop_assert!(check_nd(&h).is_ok());
        for v in &vectors {
            let hits = h
                .cells()
                .iter()
                .filter(|c| h.hyper_bucket(c).iter().zip(v).all(|(bk, &x)| bk.contains(x)))
                .count();
            prop_assert_eq!(hits, 1);
        }
    }

    #[test]
    fn kl_is_non_negative_and_zero_on_itself(seed in 0u64..500, k1 in 1usize..6, k2 in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_hist(&mut rng, k1);
        let q = random_hist(&mut rng, k2);
        prop_assert!(kl_divergence_1d(&p, &q) >= 0.0);
        prop_assert!(kl_divergence_1d(&p, &p).abs() < 1e-12);
    }

    #[test]
    fn uniform_masses_maximize_entropy(masses in prop::collection::vec(0.01f64..1.0, 1..10)) {
        let pairs: Vec<_> = masses.iter().enumerate().map(|(i, &m)| (b(i as f64, i as f64 + 1.0), m)).collect();
        let h = Histogram1D::normalized(pairs).unwrap();
        prop_assert!(entropy_1d(&h) <= (masses.len() as f64).ln() + 1e-12);
    }

    #[test]
    fn rearrange_preserves_mass(seed in 0u64..500, k in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pairs: Vec<_> = (0..k)
            .map(|_| {
                let l = rng.gen_range(0..50) as f64;
                (b(l, l + rng.gen_range(1..20) as f64), rng.gen_range(0.1..1.0))
            })
            .collect();
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        for p in &mut pairs {
            p.1 /= total;
        }
        let h = rearrange(&pairs).unwrap();
        prop_assert!(check_1d(&h).is_ok());
        for (bk, p) in h.buckets() {
            let expect: f64 = pairs.iter().map(|(a, m)| m * a.overlap(bk) / a.width()).sum();
            prop_assert!((expect - p).abs() < 1e-12);
        }
    }
}
