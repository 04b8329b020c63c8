use std::f64::consts::PI;

use trigroots::charprobe::{inf_smallball_mc, smallball_1d_scan};
use trigroots::edgeworth::v_n_mc;
use trigroots::mcstats::run_experiment;
use trigroots::polyeval::{eval_point, WindowSpec};
use trigroots::rootcount::{count_kacrice, count_roots_default, gaussian_expectation_exact};
use trigroots::DistributionSpec;

/// Sign changes of `P` on a uniform scan of the window.
fn dense_scan_count(sample: &trigroots::CoefficientSample, window: WindowSpec, points: usize) -> usize {
    let n = sample.n;
    let (a, b) = (window.start(n), window.end(n));
    let h = (b - a) / points as f64;
    let mut prev = eval_point(sample, a).0;
    let mut count = 0;
    for k in 1..=points {
        let v = eval_point(sample, a + k as f64 * h).0;
        if (prev < 0.0) != (v < 0.0) {
            count += 1;
        }
        prev = v;
    }
    count
}

#[test]
fn dense_scan_agrees_at_small_degree() {
    for dist in [DistributionSpec::Gaussian, DistributionSpec::Rademacher, DistributionSpec::UniformUnitVariance] {
        for trial in 0..100 {
            let s = dist.sample(4, 11, trial).unwrap();
            for window in [WindowSpec::Full, WindowSpec::Half] {
                let r = count_roots_default(&s, window).unwrap();
                // A sign scan cannot see roots sitting exactly on the window
                // ends, which lattice-valued coefficients produce.
                let at_end = [window.start(4), window.end(4)].iter().any(|&t| eval_point(&s, t).0.abs() < 1e-12);
                if r.uncertain || at_end {
                    continue;
                }
                let dense = dense_scan_count(&s, window, 200_000);
                assert_eq!(r.count, dense, "{dist} trial {trial} {window}");
            }
        }
    }
}

#[test]
fn residuals_are_small() {
    for trial in 0..50 {
        let s = DistributionSpec::Gaussian.sample(64, 3, trial).unwrap();
        let r = count_roots_default(&s, WindowSpec::Full).unwrap();
        for (&t, &res) in r.roots.iter().zip(&r.residuals) {
            assert!(res.abs() < 1e-9, "residual {res} at {t}");
            assert!(t > -PI * 64.0 && t <= PI * 64.0);
        }
    }
}

#[test]
fn kacrice_with_sample_scaled_delta_is_exact() {
    for trial in 0..200 {
        let s = DistributionSpec::Rademacher.sample(16, 5, trial).unwrap();
        let r = count_roots_default(&s, WindowSpec::Full).unwrap();
        if r.count < 2 || r.uncertain {
            continue;
        }
        let mut roots = r.roots.clone();
        roots.push(roots[0] + 2.0 * PI * 16.0);
        let gap = roots.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        let slope = r
            .roots
            .iter()
            .map(|&t| eval_point(&s, t).1.abs())
            .fold(f64::INFINITY, f64::min);
        let delta = 1e-3 * gap * slope;
        let kr = count_kacrice(&s, WindowSpec::Full, delta).unwrap();
        assert!((kr.value - r.count as f64).abs() < 1e-6, "trial {trial}: {} vs {}", kr.value, r.count);
    }
}

#[test]
fn parity_over_many_trials() {
    let mut odd = 0;
    for trial in 0..1000 {
        let s = DistributionSpec::Rademacher.sample(24, 17, trial).unwrap();
        let r = count_roots_default(&s, WindowSpec::Full).unwrap();
        if !r.uncertain && r.count % 2 == 1 {
            odd += 1;
        }
    }
    assert_eq!(odd, 0);
}

#[test]
fn half_window_mean_is_half_of_full() {
    let n = 40;
    let rec = run_experiment(&DistributionSpec::Gaussian, n, WindowSpec::Half, 2000, 9, 0).unwrap();
    let exact = gaussian_expectation_exact(n, WindowSpec::Half);
    assert!((exact - 0.5 * gaussian_expectation_exact(n, WindowSpec::Full)).abs() < 1e-12);
    assert!((rec.estimate.mean - exact).abs() < 3.0 * rec.estimate.se_mean);
}

#[test]
fn covariance_of_crossing_densities_vanishes_far_apart() {
    let n = 64;
    let t = PI * n as f64 * 0.61;
    let s = -PI * n as f64 * 0.29;
    let e = v_n_mc(n, s, t, &DistributionSpec::Gaussian, 0.1, 200_000, 4, 0).unwrap();
    assert!(e.value.abs() <= 3.0 * e.se, "{} ± {}", e.value, e.se);
    assert!(e.joint_hits > 0);
}

#[test]
fn inf_small_ball_frequency_falls_with_n() {
    let d = DistributionSpec::Gaussian;
    let a = inf_smallball_mc(50, 1.2, 0.1, &d, 4000, 1, 0).unwrap();
    let b = inf_smallball_mc(200, 1.2, 0.1, &d, 4000, 1, 0).unwrap();
    assert!(a.hits >= 10, "{a:?}");
    assert!(b.probability < a.probability, "{} !< {}", b.probability, a.probability);
    // At θ = 2 the threshold is already below what desk trial counts reach.
    let c = inf_smallball_mc(50, 2.0, 0.1, &d, 4000, 1, 0).unwrap();
    let e = inf_smallball_mc(200, 2.0, 0.1, &d, 4000, 1, 0).unwrap();
    assert!(e.probability <= c.probability);
    let r = inf_smallball_mc(50, 1.2, 0.1, &DistributionSpec::Rademacher, 4000, 1, 0).unwrap();
    let ratio = r.probability / a.probability;
    assert!((1.0 / 3.0..3.0).contains(&ratio), "rademacher {} vs gaussian {}", r.probability, a.probability);
}

#[test]
fn one_dimensional_small_ball_cap() {
    let n = 200;
    let t = PI * n as f64 * (5f64.sqrt() - 1.0) / 2.0;
    let delta: f64 = 0.05;
    let centers: Vec<f64> = (0..21).map(|k| -1.0 + 0.1 * k as f64).collect();
    let r = smallball_1d_scan(n, t, &DistributionSpec::Rademacher, &centers, delta, 50_000, 6, 0).unwrap();
    assert!(r.max_probability <= 0.5 * delta.powf(0.8) * 20.0);
    assert!(r.max_probability / delta.powf(0.8) < 1.0);
}
