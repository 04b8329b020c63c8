use std::f64::consts::PI;

use proptest::prelude::*;
use trigroots::charprobe::{exponent_bound, log_abs_charfn};
use trigroots::diophantine::{check_condition_st, check_condition_t};
use trigroots::edgeworth::{c_n_alpha, h_alpha, MultiIndex, Normalization};
use trigroots::mcstats::MomentAccumulator;
use trigroots::polyeval::{covariance_v, eval_point, grid_from_coefficients, min_grid_points, WindowSpec};
use trigroots::rootcount::{count_roots, default_grid_points};
use trigroots::DistributionSpec;

fn dist_strategy() -> impl Strategy<Value = DistributionSpec> {
    prop_oneof![
        Just(DistributionSpec::Gaussian),
        Just(DistributionSpec::Rademacher),
        Just(DistributionSpec::UniformUnitVariance),
        Just(DistributionSpec::discrete(vec![(-1.0 / 2f64.sqrt(), 2.0 / 3.0), (2f64.sqrt(), 1.0 / 3.0)]).unwrap()),
    ]
}

fn window_strategy() -> impl Strategy<Value = WindowSpec> {
    prop_oneof![Just(WindowSpec::Full), Just(WindowSpec::Half)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn charfn_bounded_and_hermitian(dist in dist_strategy(), theta in -50.0f64..50.0) {
        let a = dist.charfn(theta);
        let b = dist.charfn(-theta);
        prop_assert!(a.norm() <= 1.0 + 1e-12);
        prop_assert!((a - b.conj()).norm() < 1e-12);
    }

    #[test]
    fn rademacher_xi_norm_half_periodic(w in -3.0f64..3.0) {
        let d = DistributionSpec::Rademacher;
        prop_assert!((d.xi_norm_sq(w) - d.xi_norm_sq(w + 0.5)).abs() < 1e-12);
    }

    #[test]
    fn fft_grid_matches_direct(
        dist in dist_strategy(),
        n in 1usize..64,
        window in window_strategy(),
        extra in 0usize..3,
        seed in any::<u64>(),
    ) {
        let s = dist.sample(n, seed, 0).unwrap();
        let m = (min_grid_points(n, 8) << extra).next_power_of_two();
        let g = grid_from_coefficients(&s.y, window, m, 8).unwrap();
        let scale = 1.0 + g.p.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for k in (0..m).step_by((m / 37).max(1)) {
            let (p, dp) = eval_point(&s, g.t(k));
            prop_assert!((p - g.p[k]).abs() <= 1e-9 * scale);
            prop_assert!((dp - g.pprime[k]).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn grid_derivative_consistent(n in 2usize..40, seed in any::<u64>()) {
        let s = DistributionSpec::Gaussian.sample(n, seed, 1).unwrap();
        let m = min_grid_points(n, 8) * 4;
        let g = grid_from_coefficients(&s.y, WindowSpec::Full, m, 8).unwrap();
        let h = g.spacing;
        for k in (2..m - 2).step_by(m / 11) {
            let d1 = (g.p[k + 1] - g.p[k - 1]) / (2.0 * h);
            let d2 = (g.p[k + 2] - g.p[k - 2]) / (4.0 * h);
            // Richardson removes the h² term.
            let rich = (4.0 * d1 - d2) / 3.0;
            prop_assert!((rich - g.pprime[k]).abs() < 1e-4, "k={} {} vs {}", k, rich, g.pprime[k]);
        }
    }

    #[test]
    fn covariance_entries_bounded(n in 1usize..300, t in -1000.0f64..1000.0) {
        let v = covariance_v(n, t, None);
        for row in &v.entries {
            for e in row {
                prop_assert!(e.abs() <= 1.0 + 1e-12);
            }
        }
        prop_assert!(v.trace() >= 1.0 - 1e-12 && v.trace() <= 2.0 + 1e-12);
    }

    #[test]
    fn full_window_count_is_even(dist in dist_strategy(), n in 1usize..48, seed in any::<u64>()) {
        let s = dist.sample(n, seed, 0).unwrap();
        let r = count_roots(&s, WindowSpec::Full, default_grid_points(n), 1e-12 * n as f64).unwrap();
        if !r.uncertain {
            prop_assert_eq!(r.count % 2, 0);
        }
        prop_assert!(r.count <= 2 * n);
        prop_assert!(r.roots.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn roots_stable_under_tighter_tolerance(n in 2usize..40, seed in any::<u64>()) {
        let s = DistributionSpec::Rademacher.sample(n, seed, 2).unwrap();
        let m = default_grid_points(n);
        let tol = 1e-8;
        let a = count_roots(&s, WindowSpec::Full, m, tol).unwrap();
        let b = count_roots(&s, WindowSpec::Full, m, tol / 2.0).unwrap();
        prop_assert_eq!(a.count, b.count);
        for (x, y) in a.roots.iter().zip(&b.roots) {
            prop_assert!((x - y).abs() < 2.0 * tol);
        }
    }

    #[test]
    fn accumulator_merge_matches_single_pass(xs in prop::collection::vec(-100.0f64..100.0, 2..200), cut in 0usize..200) {
        let cut = cut.min(xs.len());
        let mut whole = MomentAccumulator::default();
        xs.iter().for_each(|&x| whole.push(x));
        let (mut a, mut b) = (MomentAccumulator::default(), MomentAccumulator::default());
        xs[..cut].iter().for_each(|&x| a.push(x));
        xs[cut..].iter().for_each(|&x| b.push(x));
        a.merge(&b);
        let close = |p: f64, q: f64| (p - q).abs() <= 1e-9 * (1.0 + p.abs().max(q.abs()));
        prop_assert!(close(a.mean, whole.mean));
        prop_assert!(close(a.m2, whole.m2));
        prop_assert!(close(a.m3, whole.m3));
        prop_assert!(close(a.m4, whole.m4));
    }

    #[test]
    fn c_n_permutation_invariant(
        dist in dist_strategy(),
        n in 1usize..200,
        t in -50.0f64..50.0,
        s in -50.0f64..50.0,
        alpha in prop::collection::vec(1usize..=4, 3..=4),
        rot in 1usize..4,
    ) {
        let a = MultiIndex::new(&alpha);
        let mut p = alpha.clone();
        p.rotate_left(rot % alpha.len());
        let b = MultiIndex::new(&p);
        let norm = Normalization::limit(4);
        let x = c_n_alpha(n, t, Some(s), &dist, &a, &norm).unwrap();
        let y = c_n_alpha(n, t, Some(s), &dist, &b, &norm).unwrap();
        prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
        let xv = [0.3, -1.1, 0.7, 2.0];
        prop_assert_eq!(h_alpha(&a, &xv), h_alpha(&b, &xv));
    }

    #[test]
    fn odd_deltas_vanish_without_skew(
        n in 1usize..300,
        t in -50.0f64..50.0,
        alpha in prop::collection::vec(1usize..=2, 3..=3),
    ) {
        for dist in [DistributionSpec::Rademacher, DistributionSpec::UniformUnitVariance] {
            let v = c_n_alpha(n, t, None, &dist, &MultiIndex::new(&alpha), &Normalization::Raw).unwrap();
            prop_assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn condition_monotone_in_tau(
        n in 10usize..100_000,
        x in -1.0f64..1.0,
        y in -1.0f64..1.0,
        t1 in 0.01f64..0.12,
        dt in 0.0f64..0.05,
    ) {
        let t = x * PI * n as f64;
        let s = y * PI * n as f64;
        let t2 = (t1 + dt).min(0.1249);
        if !check_condition_t(n, t, t1).satisfied {
            prop_assert!(!check_condition_t(n, t, t2).satisfied);
        }
        if !check_condition_st(n, s, t, t1).satisfied {
            prop_assert!(!check_condition_st(n, s, t, t2).satisfied);
        }
    }

    #[test]
    fn pair_condition_symmetric_and_implies_single(
        n in 10usize..100_000,
        x in -1.0f64..1.0,
        y in -1.0f64..1.0,
        tau in 0.01f64..0.12,
    ) {
        let t = x * PI * n as f64;
        let s = y * PI * n as f64;
        let a = check_condition_st(n, s, t, tau);
        let b = check_condition_st(n, t, s, tau);
        prop_assert_eq!(a.satisfied, b.satisfied);
        prop_assert_eq!(a.witness.map(|w| w.distance), b.witness.map(|w| w.distance));
        if a.satisfied {
            prop_assert!(check_condition_t(n, s, tau).satisfied && check_condition_t(n, t, tau).satisfied);
        } else {
            let w = a.witness.unwrap();
            prop_assert!(w.distance <= a.threshold && w.k.abs().max(w.l.abs()) <= a.l_max);
        }
    }

    #[test]
    fn exponent_bound_dominates(
        dist in dist_strategy(),
        n in 1usize..200,
        t in -300.0f64..300.0,
        s in prop::option::of(-300.0f64..300.0),
        x in prop::collection::vec(-5.0f64..5.0, 4),
    ) {
        let d = if s.is_some() { 4 } else { 2 };
        let l = log_abs_charfn(n, t, s, &dist, &x[..d]).unwrap();
        let b = exponent_bound(n, t, s, &dist, &x[..d]).unwrap();
        prop_assert!(l <= b + 1e-9, "{} > {}", l, b);
    }

    #[test]
    fn four_dim_embedding_is_exact(dist in dist_strategy(), n in 1usize..100, t in -50.0f64..50.0, s in -50.0f64..50.0, x1 in -3.0f64..3.0, x2 in -3.0f64..3.0) {
        let a = log_abs_charfn(n, t, Some(s), &dist, &[x1, x2, 0.0, 0.0]).unwrap();
        let b = log_abs_charfn(n, t, None, &dist, &[x1, x2]).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn gaussian_charfn_is_quadratic(n in 1usize..200, t in -300.0f64..300.0, x1 in -3.0f64..3.0, x2 in -3.0f64..3.0) {
        let v = covariance_v(n, t, None).entries;
        let q = x1 * x1 * v[0][0] + 2.0 * x1 * x2 * v[0][1] + x2 * x2 * v[1][1];
        let exact = -0.5 * n as f64 * q;
        let got = log_abs_charfn(n, t, None, &DistributionSpec::Gaussian, &[x1, x2]).unwrap();
        prop_assert!((got - exact).abs() <= 1e-10 * (1.0 + exact.abs()));
    }
}
