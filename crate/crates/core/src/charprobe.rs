//! Characteristic-function products of `S_n/√n` in ℝ² and ℝ⁴, their
//! exponent bound through the ξ-norm, decay scans and Monte Carlo small-ball
//! probabilities.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::diophantine::{check_condition_st, check_condition_t, DEFAULT_TAU};
use crate::ensemble::{trial_rng, DistributionSpec};
use crate::error::{Error, Result};
use crate::mcstats::{thread_pool, BATCH};
use crate::polyeval::{c_matrix, covariance_v, grid_from_coefficients, PolyEvaluator, WindowSpec, DEFAULT_OVERSAMPLE};
use crate::quad;

/// Phase convention for `e(y)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    /// `e(y) = e^{iy}`, with the ξ-norm taken at `⟨w, x⟩/2π`.
    #[default]
    Unit,
    /// `e(y) = e^{2πiy}`, with the ξ-norm taken at `⟨w, x⟩`.
    TwoPi,
}

impl Convention {
    fn phase_scale(self) -> f64 {
        match self {
            Self::Unit => 1.0,
            Self::TwoPi => 2.0 * PI,
        }
    }
}

fn dimension(s: Option<f64>) -> usize {
    if s.is_some() {
        4
    } else {
        2
    }
}

fn check_dim(s: Option<f64>, x: &[f64]) -> Result<()> {
    if x.len() != dimension(s) {
        return Err(Error::InvalidArgument(format!(
            "x has dimension {}, expected {}",
            x.len(),
            dimension(s)
        )));
    }
    Ok(())
}

/// `(⟨w_i, x⟩, ⟨w_i′, x⟩)` for `i = 1..n`.
fn projections(n: usize, t: f64, s: Option<f64>, x: &[f64]) -> impl Iterator<Item = (f64, f64)> + '_ {
    (1..=n).map(move |i| {
        let c = c_matrix(n, i, t, s);
        c.iter()
            .zip(x)
            .fold((0.0, 0.0), |(a, b), (row, xa)| (a + row[0] * xa, b + row[1] * xa))
    })
}

fn log_abs_scalar(dist: &DistributionSpec, theta: f64) -> f64 {
    match dist {
        DistributionSpec::Gaussian => -0.5 * theta * theta,
        _ => dist.charfn(theta).norm().ln(),
    }
}

/// `log |Π_i φ_i(x)|`; `−∞` when a factor vanishes.
pub fn log_abs_charfn(n: usize, t: f64, s: Option<f64>, dist: &DistributionSpec, x: &[f64]) -> Result<f64> {
    log_abs_charfn_with(n, t, s, dist, x, Convention::Unit)
}

pub fn log_abs_charfn_with(
    n: usize,
    t: f64,
    s: Option<f64>,
    dist: &DistributionSpec,
    x: &[f64],
    conv: Convention,
) -> Result<f64> {
    check_dim(s, x)?;
    let k = conv.phase_scale();
    Ok(projections(n, t, s, x)
        .map(|(a, b)| log_abs_scalar(dist, k * a) + log_abs_scalar(dist, k * b))
        .sum())
}

/// `−½ Σ_i (‖⟨w_i, x/2π⟩‖_ξ² + ‖⟨w_i′, x/2π⟩‖_ξ²)`, an upper bound for
/// [`log_abs_charfn`].
pub fn exponent_bound(n: usize, t: f64, s: Option<f64>, dist: &DistributionSpec, x: &[f64]) -> Result<f64> {
    exponent_bound_with(n, t, s, dist, x, Convention::Unit)
}

pub fn exponent_bound_with(
    n: usize,
    t: f64,
    s: Option<f64>,
    dist: &DistributionSpec,
    x: &[f64],
    conv: Convention,
) -> Result<f64> {
    check_dim(s, x)?;
    let k = conv.phase_scale() / (2.0 * PI);
    Ok(-0.5
        * projections(n, t, s, x)
            .map(|(a, b)| dist.xi_norm_sq(k * a) + dist.xi_norm_sq(k * b))
            .sum::<f64>())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub radii: Vec<f64>,
    /// Max over sampled directions of `log |Π φ_i|` at each radius.
    pub worst_log_abs: Vec<f64>,
    /// Exponent bound at the maximizing direction.
    pub bound_log: Vec<f64>,
    /// Radius inside `[n^{5τ−1/2}, n^{C*}]`.
    pub regime_flags: Vec<bool>,
    /// Whether `t` (or `(s, t)`) passed the non-resonance condition.
    pub condition_satisfied: bool,
}

/// Uniform direction on the unit sphere of ℝ^d.
fn random_direction<R: Rng>(rng: &mut R, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if r > 1e-8 {
            return v.into_iter().map(|x| x / r).collect();
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub fn decay_scan(
    n: usize,
    t: f64,
    s: Option<f64>,
    dist: &DistributionSpec,
    radii: &[f64],
    tau: f64,
    c_star: f64,
    directions_per_radius: usize,
    seed: u64,
) -> Result<DecayReport> {
    let condition_satisfied = match s {
        Some(s) => check_condition_st(n, s, t, tau).satisfied,
        None => check_condition_t(n, t, tau).satisfied,
    };
    let nf = n as f64;
    let (lo, hi) = (nf.powf(5.0 * tau - 0.5), nf.powf(c_star));
    let d = dimension(s);
    let rows: Vec<(f64, f64)> = radii
        .par_iter()
        .enumerate()
        .map(|(j, &r)| {
            let mut rng = trial_rng(seed, j as u64);
            let mut best = (f64::NEG_INFINITY, Vec::new());
            for _ in 0..directions_per_radius.max(1) {
                let x: Vec<f64> = random_direction(&mut rng, d).into_iter().map(|v| v * r).collect();
                let v = log_abs_charfn(n, t, s, dist, &x)?;
                if v > best.0 || best.1.is_empty() {
                    best = (v, x);
                }
            }
            Ok((best.0, exponent_bound(n, t, s, dist, &best.1)?))
        })
        .collect::<Result<_>>()?;
    Ok(DecayReport {
        radii: radii.to_vec(),
        worst_log_abs: rows.iter().map(|r| r.0).collect(),
        bound_log: rows.iter().map(|r| r.1).collect(),
        regime_flags: radii.iter().map(|&r| r >= lo && r <= hi).collect(),
        condition_satisfied,
    })
}

/// `count` log-spaced radii from `lo` to `hi`.
pub fn log_radii(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count <= 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|k| (a + (b - a) * k as f64 / (count - 1) as f64).exp())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmallBallEstimate {
    pub center: Vec<f64>,
    pub probability: f64,
    pub se: f64,
    pub hits: u64,
    pub trials: u64,
}

fn ball_volume(d: usize, delta: f64) -> f64 {
    match d {
        1 => 2.0 * delta,
        2 => PI * delta * delta,
        4 => 0.5 * PI * PI * delta.powi(4),
        _ => unreachable!(),
    }
}

/// Density of `N(0, V)` at `x`.
fn gaussian_density(v: &DMatrix<f64>, x: &[f64]) -> f64 {
    let d = x.len();
    let chol = match v.clone().cholesky() {
        Some(c) => c,
        None => return f64::INFINITY,
    };
    let xv = DVector::from_column_slice(x);
    let q = xv.dot(&chol.solve(&xv));
    (-0.5 * q).exp() / ((2.0 * PI).powi(d as i32) * chol.determinant()).sqrt()
}

/// Refuses when the Gaussian approximation predicts fewer than ten hits at
/// every center.
fn feasibility(v: &DMatrix<f64>, centers: &[Vec<f64>], delta: f64, trials: u64) -> Result<()> {
    let d = v.nrows();
    let p = centers
        .iter()
        .map(|c| (ball_volume(d, delta) * gaussian_density(v, c)).min(1.0))
        .fold(0.0, f64::max);
    let expected = p * trials as f64;
    if expected < 10.0 {
        return Err(Error::Infeasible {
            expected_hits: expected,
            required_trials: if p > 0.0 { (10.0 / p).ceil() as u64 } else { u64::MAX },
        });
    }
    Ok(())
}

/// Frequency of `S_n/√n ∈ B(a, δ)` at each center, from one shared set of
/// trials.
#[allow(clippy::too_many_arguments)]
pub fn small_ball_scan(
    n: usize,
    t: f64,
    s: Option<f64>,
    dist: &DistributionSpec,
    centers: &[Vec<f64>],
    delta: f64,
    trials: u64,
    seed: u64,
    parallelism: usize,
) -> Result<Vec<SmallBallEstimate>> {
    for c in centers {
        check_dim(s, c)?;
    }
    if !(delta > 0.0) || trials == 0 {
        return Err(Error::InvalidArgument("need δ > 0 and at least one trial".into()));
    }
    feasibility(&covariance_v(n, t, s).matrix(), centers, delta, trials)?;
    let pool = thread_pool(parallelism)?;
    let d2 = delta * delta;
    let hits: Vec<u64> = pool.install(|| {
        (0..trials.div_ceil(BATCH))
            .into_par_iter()
            .map(|b| {
                let mut y = vec![[0.0; 2]; n];
                let mut hits = vec![0u64; centers.len()];
                for trial in b * BATCH..((b + 1) * BATCH).min(trials) {
                    dist.fill(&mut y, seed, trial);
                    let ev = PolyEvaluator::new(&y);
                    let (p, dp) = ev.eval(t);
                    let mut point = vec![p, dp];
                    if let Some(s) = s {
                        let (q, dq) = ev.eval(s);
                        point.extend([q, dq]);
                    }
                    for (h, c) in hits.iter_mut().zip(centers) {
                        let r2: f64 = point.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum();
                        if r2 < d2 {
                            *h += 1;
                        }
                    }
                }
                hits
            })
            .reduce(
                || vec![0u64; centers.len()],
                |mut a, b| {
                    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                    a
                },
            )
    });
    Ok(centers
        .iter()
        .zip(hits)
        .map(|(c, h)| binomial(c.clone(), h, trials))
        .collect())
}

fn binomial(center: Vec<f64>, hits: u64, trials: u64) -> SmallBallEstimate {
    let p = hits as f64 / trials as f64;
    SmallBallEstimate {
        center,
        probability: p,
        se: (p * (1.0 - p) / trials as f64).sqrt(),
        hits,
        trials,
    }
}

#[allow(clippy::too_many_arguments)]
pub fn small_ball_mc(
    n: usize,
    t: f64,
    s: Option<f64>,
    dist: &DistributionSpec,
    center: &[f64],
    delta: f64,
    trials: u64,
    seed: u64,
    parallelism: usize,
) -> Result<SmallBallEstimate> {
    let mut v = small_ball_scan(n, t, s, dist, &[center.to_vec()], delta, trials, seed, parallelism)?;
    Ok(v.remove(0))
}

/// `P(X ∈ B(a, δ))` for `X ~ N(0, V)` in ℝ², by Gauss–Legendre quadrature in
/// polar coordinates around `a`.
pub fn gaussian_ball_probability(v: &[[f64; 2]; 2], center: &[f64; 2], delta: f64) -> f64 {
    let m = DMatrix::from_row_slice(2, 2, &[v[0][0], v[0][1], v[1][0], v[1][1]]);
    let (xr, wr) = quad::gauss_legendre(48);
    let (xa, wa) = quad::gauss_legendre(96);
    let mut acc = 0.0;
    for (r, wr) in xr.iter().zip(&wr) {
        let r = 0.5 * delta * (r + 1.0);
        for (a, wa) in xa.iter().zip(&wa) {
            let a = PI * (a + 1.0);
            let x = [center[0] + r * a.cos(), center[1] + r * a.sin()];
            acc += wr * wa * r * gaussian_density(&m, &x);
        }
    }
    acc * 0.5 * delta * PI
}

/// `P(|Z − a| < δ)` for `Z ~ N(0, σ²)`.
pub fn normal_interval_probability(sigma: f64, center: f64, delta: f64) -> f64 {
    let z = Normal::new(0.0, sigma).expect("positive σ");
    z.cdf(center + delta) - z.cdf(center - delta)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmallBall1d {
    pub delta: f64,
    pub estimates: Vec<SmallBallEstimate>,
    pub max_probability: f64,
    pub argmax_center: f64,
}

/// `max_a P(|P_n(t)| − a| < δ)` over the given centers.
#[allow(clippy::too_many_arguments)]
pub fn smallball_1d_scan(
    n: usize,
    t: f64,
    dist: &DistributionSpec,
    centers: &[f64],
    delta: f64,
    trials: u64,
    seed: u64,
    parallelism: usize,
) -> Result<SmallBall1d> {
    if !(delta > 0.0) || trials == 0 || centers.is_empty() {
        return Err(Error::InvalidArgument("need δ > 0, trials and centers".into()));
    }
    let sigma = covariance_v(n, t, None).entries[0][0].sqrt();
    let p = centers
        .iter()
        .map(|&a| normal_interval_probability(sigma, a, delta))
        .fold(0.0, f64::max)
        .min(1.0);
    if p * (trials as f64) < 10.0 {
        return Err(Error::Infeasible {
            expected_hits: p * trials as f64,
            required_trials: if p > 0.0 { (10.0 / p).ceil() as u64 } else { u64::MAX },
        });
    }
    let pool = thread_pool(parallelism)?;
    let hits: Vec<u64> = pool.install(|| {
        (0..trials.div_ceil(BATCH))
            .into_par_iter()
            .map(|b| {
                let mut y = vec![[0.0; 2]; n];
                let mut hits = vec![0u64; centers.len()];
                for trial in b * BATCH..((b + 1) * BATCH).min(trials) {
                    dist.fill(&mut y, seed, trial);
                    let (p, _) = PolyEvaluator::new(&y).eval(t);
                    for (h, c) in hits.iter_mut().zip(centers) {
                        if (p - c).abs() < delta {
                            *h += 1;
                        }
                    }
                }
                hits
            })
            .reduce(
                || vec![0u64; centers.len()],
                |mut a, b| {
                    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                    a
                },
            )
    });
    let estimates: Vec<SmallBallEstimate> = centers
        .iter()
        .zip(hits)
        .map(|(&c, h)| binomial(vec![c], h, trials))
        .collect();
    let best = estimates
        .iter()
        .max_by(|a, b| a.probability.total_cmp(&b.probability))
        .expect("nonempty");
    Ok(SmallBall1d {
        delta,
        max_probability: best.probability,
        argmax_center: best.center[0],
        estimates: estimates.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfSmallBall {
    pub n: usize,
    pub theta: f64,
    pub eps: f64,
    /// `n^{−θ+ε/2}`.
    pub threshold: f64,
    pub probability: f64,
    pub se: f64,
    pub hits: u64,
    pub trials: u64,
}

const INF_CANDIDATES: usize = 6;

/// `min_t ‖(P(t), P′(t))‖` over points `t` of the period passing the
/// single-point condition: a dense FFT grid locates the smallest local minima
/// of `P² + P′²`, each refined by golden-section search.
pub fn inf_norm(y: &[[f64; 2]], good: &[bool], m: usize) -> Result<f64> {
    let grid = grid_from_coefficients(y, WindowSpec::Full, m, DEFAULT_OVERSAMPLE)?;
    let f: Vec<f64> = grid.p.iter().zip(&grid.pprime).map(|(p, d)| p * p + d * d).collect();
    let mut minima: Vec<(f64, usize)> = (0..m)
        .filter(|&k| good[k] && f[k] <= f[(k + m - 1) % m] && f[k] <= f[(k + 1) % m])
        .map(|k| (f[k], k))
        .collect();
    minima.sort_by(|a, b| a.0.total_cmp(&b.0));
    let ev = PolyEvaluator::new(y);
    let norm2 = |t: f64| {
        let (p, d) = ev.eval(t);
        p * p + d * d
    };
    let mut best = f64::INFINITY;
    for &(fk, k) in minima.iter().take(INF_CANDIDATES) {
        let (mut a, mut b) = (grid.t(k) - grid.spacing, grid.t(k) + grid.spacing);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let (mut c, mut d) = (b - g * (b - a), a + g * (b - a));
        let (mut fc, mut fd) = (norm2(c), norm2(d));
        for _ in 0..60 {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - g * (b - a);
                fc = norm2(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + g * (b - a);
                fd = norm2(d);
            }
        }
        best = best.min(fk).min(fc).min(fd);
    }
    Ok(best.sqrt())
}

/// Frequency of `min_t ‖(P, P′)‖ ≤ n^{−θ+ε/2}` over good `t`.
#[allow(clippy::too_many_arguments)]
pub fn inf_smallball_mc(
    n: usize,
    theta: f64,
    eps: f64,
    dist: &DistributionSpec,
    trials: u64,
    seed: u64,
    parallelism: usize,
) -> Result<InfSmallBall> {
    if trials == 0 {
        return Err(Error::InvalidArgument("need at least one trial".into()));
    }
    let m = (64 * n).next_power_of_two();
    let spacing = 2.0 * PI * n as f64 / m as f64;
    let good: Vec<bool> = (0..m)
        .map(|k| check_condition_t(n, -PI * n as f64 + k as f64 * spacing, DEFAULT_TAU).satisfied)
        .collect();
    let threshold = (n as f64).powf(-theta + 0.5 * eps);
    let pool = thread_pool(parallelism)?;
    let hits: u64 = pool.install(|| {
        (0..trials.div_ceil(BATCH))
            .into_par_iter()
            .map(|b| -> Result<u64> {
                let mut y = vec![[0.0; 2]; n];
                let mut h = 0;
                for trial in b * BATCH..((b + 1) * BATCH).min(trials) {
                    dist.fill(&mut y, seed, trial);
                    if inf_norm(&y, &good, m)? <= threshold {
                        h += 1;
                    }
                }
                Ok(h)
            })
            .sum::<Result<u64>>()
    })?;
    let est = binomial(Vec::new(), hits, trials);
    Ok(InfSmallBall {
        n,
        theta,
        eps,
        threshold,
        probability: est.probability,
        se: est.se,
        hits,
        trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn good_t(n: usize) -> f64 {
        PI * n as f64 * (5f64.sqrt() - 1.0) / 2.0
    }

    #[test]
    fn charfn_at_origin() {
        for d in [DistributionSpec::Rademacher, DistributionSpec::UniformUnitVariance] {
            assert_eq!(log_abs_charfn(30, 1.0, None, &d, &[0.0, 0.0]).unwrap(), 0.0);
            assert_eq!(exponent_bound(30, 1.0, Some(2.0), &d, &[0.0; 4]).unwrap(), 0.0);
        }
        assert!(log_abs_charfn(30, 1.0, None, &DistributionSpec::Gaussian, &[0.0; 4]).is_err());
    }

    #[test]
    fn single_rademacher_factor() {
        let t = 0.8;
        let x = [1.3, -0.4];
        let c = c_matrix(1, 1, t, None);
        let a = c[0][0] * x[0] + c[1][0] * x[1];
        let b = c[0][1] * x[0] + c[1][1] * x[1];
        let v = log_abs_charfn(1, t, None, &DistributionSpec::Rademacher, &x).unwrap();
        assert!((v - (a.cos().abs().ln() + b.cos().abs().ln())).abs() < 1e-15);
    }

    #[test]
    fn gaussian_quadratic_form() {
        let n = 40;
        for s in [None, Some(-7.3)] {
            let x: Vec<f64> = if s.is_some() { vec![0.3, -1.2, 0.5, 0.8] } else { vec![0.7, -0.2] };
            let v = covariance_v(n, 3.1, s).matrix();
            let xv = DVector::from_column_slice(&x);
            let exact = -0.5 * n as f64 * xv.dot(&(&v * &xv));
            let got = log_abs_charfn(n, 3.1, s, &DistributionSpec::Gaussian, &x).unwrap();
            assert!((got - exact).abs() < 1e-10 * exact.abs().max(1.0));
        }
    }

    #[test]
    fn embedding_in_four_dimensions() {
        let d = DistributionSpec::UniformUnitVariance;
        let a = log_abs_charfn(25, 2.0, Some(9.0), &d, &[0.4, 1.1, 0.0, 0.0]).unwrap();
        let b = log_abs_charfn(25, 2.0, None, &d, &[0.4, 1.1]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bound_dominates() {
        let mut rng = trial_rng(1, 0);
        for dist in [DistributionSpec::Rademacher, DistributionSpec::UniformUnitVariance, DistributionSpec::Gaussian] {
            for _ in 0..20 {
                let n = rng.random_range(1..=200);
                let t = rng.random_range(-PI * n as f64..PI * n as f64);
                let x: Vec<f64> = random_direction(&mut rng, 2).into_iter().map(|v| v * rng.random_range(0.0..10.0)).collect();
                let l = log_abs_charfn(n, t, None, &dist, &x).unwrap();
                let b = exponent_bound(n, t, None, &dist, &x).unwrap();
                assert!(l <= b + 1e-9, "{dist}: {l} > {b}");
            }
        }
    }

    #[test]
    fn gaussian_bound_is_weaker() {
        let x = [0.05, 0.02];
        let l = log_abs_charfn(50, 7.0, None, &DistributionSpec::Gaussian, &x).unwrap();
        let b = exponent_bound(50, 7.0, None, &DistributionSpec::Gaussian, &x).unwrap();
        assert!(b > l);
    }

    #[test]
    fn convention_switch_rescales() {
        let d = DistributionSpec::Rademacher;
        let x = [0.3, 0.1];
        let a = log_abs_charfn_with(20, 1.0, None, &d, &x, Convention::TwoPi).unwrap();
        let b = log_abs_charfn(20, 1.0, None, &d, &[x[0] * 2.0 * PI, x[1] * 2.0 * PI]).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn decay_at_unit_radius() {
        let n = 500;
        let r = decay_scan(n, good_t(n), None, &DistributionSpec::Rademacher, &[1.0], 0.05, 1.0, 64, 3).unwrap();
        assert!(r.condition_satisfied && r.regime_flags[0]);
        assert!(r.worst_log_abs[0] <= -5.0, "{:?}", r.worst_log_abs);
        assert!(r.worst_log_abs[0] <= r.bound_log[0] + 1e-9);
    }

    #[test]
    fn sampled_worst_case_close_to_dense_grid() {
        let n = 50;
        let d = DistributionSpec::Rademacher;
        let t = good_t(n);
        let r = decay_scan(n, t, None, &d, &[1.0], 0.05, 1.0, 400, 4).unwrap();
        let dense = (0..4000)
            .map(|k| {
                let a = 2.0 * PI * k as f64 / 4000.0;
                log_abs_charfn(n, t, None, &d, &[a.cos(), a.sin()]).unwrap()
            })
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(r.worst_log_abs[0] <= dense + 1e-12);
        assert!(r.worst_log_abs[0] >= dense - 0.05 * dense.abs());
    }

    #[test]
    fn small_radius_is_out_of_regime() {
        let n = 500;
        let r = decay_scan(n, good_t(n), None, &DistributionSpec::Rademacher, &[1e-3], 0.05, 1.0, 8, 3).unwrap();
        assert!(!r.regime_flags[0]);
        assert!(r.worst_log_abs[0] > -1e-2);
    }

    #[test]
    fn resonant_point_shows_no_decay() {
        let n = 400;
        let t = PI * n as f64 / 2.0;
        // Needs `⌊n^τ⌋ ≥ 2` to see the resonance at `l = 2`.
        assert!(check_condition_t(n, t, 0.05).satisfied);
        assert!(!check_condition_t(n, t, 0.12).satisfied);
        let v = log_abs_charfn(n, t, None, &DistributionSpec::Rademacher, &[PI, 0.0]).unwrap();
        assert!(v >= -1.0, "{v}");
    }

    #[test]
    fn whole_space_ball() {
        let e = small_ball_mc(20, 1.0, None, &DistributionSpec::Rademacher, &[0.0, 0.0], 100.0, 200, 1, 1).unwrap();
        assert_eq!((e.probability, e.se), (1.0, 0.0));
    }

    #[test]
    fn gaussian_ball_oracle() {
        let n = 60;
        let t = good_t(n);
        let v = covariance_v(n, t, None).entries;
        let center = [0.3, -0.2];
        let exact = gaussian_ball_probability(&[[v[0][0], v[0][1]], [v[1][0], v[1][1]]], &center, 0.2);
        let e = small_ball_mc(n, t, None, &DistributionSpec::Gaussian, &center, 0.2, 40_000, 8, 0).unwrap();
        assert!((e.probability - exact).abs() < 3.0 * e.se, "{} vs {exact}", e.probability);
        // Whole-plane limit of the quadrature.
        let one = gaussian_ball_probability(&[[1.0, 0.0], [0.0, 1.0]], &[0.0, 0.0], 12.0);
        assert!((one - 1.0).abs() < 1e-10);
    }

    #[test]
    fn infeasible_radius_refused() {
        let r = small_ball_mc(50, 1.0, None, &DistributionSpec::Rademacher, &[0.0, 0.0], 1e-4, 1000, 1, 1);
        assert!(matches!(r, Err(Error::Infeasible { .. })));
    }

    #[test]
    fn one_dimensional_gaussian_oracle() {
        let n = 80;
        let t = good_t(n);
        let r = smallball_1d_scan(n, t, &DistributionSpec::Gaussian, &[0.0, 0.5], 0.05, 40_000, 2, 0).unwrap();
        let sigma = covariance_v(n, t, None).entries[0][0].sqrt();
        for e in &r.estimates {
            let exact = normal_interval_probability(sigma, e.center[0], 0.05);
            assert!((e.probability - exact).abs() < 3.0 * e.se);
        }
        let all = smallball_1d_scan(n, t, &DistributionSpec::Rademacher, &[0.0], 10.0, 100, 2, 1).unwrap();
        assert_eq!(all.max_probability, 1.0);
    }

    #[test]
    fn inf_norm_of_single_mode() {
        let n = 8;
        let y: Vec<[f64; 2]> = (0..n).map(|i| if i == 0 { [1.0, 0.0] } else { [0.0, 0.0] }).collect();
        let m = 64 * n;
        let good = vec![true; m];
        // P = cos(t/n)/√n has simple roots with |P′| = 1/(n√n).
        let v = inf_norm(&y, &good, m).unwrap();
        let expected = 1.0 / (n as f64 * (n as f64).sqrt());
        assert!((v - expected).abs() < 1e-9, "{v} vs {expected}");
    }

    #[test]
    fn huge_theta_never_hits() {
        let r = inf_smallball_mc(20, 50.0, 0.1, &DistributionSpec::Rademacher, 200, 1, 1).unwrap();
        assert_eq!(r.hits, 0);
    }
}
