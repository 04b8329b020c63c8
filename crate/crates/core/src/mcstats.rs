//! Monte Carlo estimates of `E N_n` and `Var N_n`.
//!
//! Trials are grouped into fixed batches of [`BATCH`] consecutive indices.
//! Batches run in parallel, but their accumulators are merged in batch order,
//! so the estimate is bit-identical for every thread count.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::DistributionSpec;
use crate::error::{Error, Result};
use crate::polyeval::{PolyEvaluator, WindowSpec};
use crate::rootcount::{self, default_grid_points};

pub const BATCH: u64 = 64;

/// Share of flagged trials above which a record is marked unreliable.
pub const UNRELIABLE_FRACTION: f64 = 1e-3;

/// Streaming central moments up to order four, mergeable.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MomentAccumulator {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
    pub m3: f64,
    pub m4: f64,
}

impl MomentAccumulator {
    pub fn push(&mut self, x: f64) {
        let n1 = self.count as f64;
        self.count += 1;
        let n = self.count as f64;
        let delta = x - self.mean;
        let dn = delta / n;
        let dn2 = dn * dn;
        let term1 = delta * dn * n1;
        self.mean += dn;
        self.m4 += term1 * dn2 * (n * n - 3.0 * n + 3.0) + 6.0 * dn2 * self.m2 - 4.0 * dn * self.m3;
        self.m3 += term1 * dn * (n - 2.0) - 3.0 * dn * self.m2;
        self.m2 += term1;
    }

    pub fn merge(&mut self, other: &Self) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let na = self.count as f64;
        let nb = other.count as f64;
        let n = na + nb;
        let delta = other.mean - self.mean;
        let d2 = delta * delta;
        let d3 = d2 * delta;
        let d4 = d2 * d2;
        let m4 = self.m4
            + other.m4
            + d4 * na * nb * (na * na - na * nb + nb * nb) / (n * n * n)
            + 6.0 * d2 * (na * na * other.m2 + nb * nb * self.m2) / (n * n)
            + 4.0 * delta * (na * other.m3 - nb * self.m3) / n;
        let m3 = self.m3
            + other.m3
            + d3 * na * nb * (na - nb) / (n * n)
            + 3.0 * delta * (na * other.m2 - nb * self.m2) / n;
        let m2 = self.m2 + other.m2 + d2 * na * nb / n;
        self.mean += delta * nb / n;
        self.m2 = m2;
        self.m3 = m3;
        self.m4 = m4;
        self.count += other.count;
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        (self.m2 / (self.count as f64 - 1.0)).max(0.0)
    }

    pub fn estimate(&self, n: usize) -> VarianceEstimate {
        let t = self.count as f64;
        let var = self.variance();
        let mu4 = self.m4 / t;
        let se_var = if self.count > 3 {
            ((mu4 - var * var * (t - 3.0) / (t - 1.0)) / t).max(0.0).sqrt()
        } else {
            0.0
        };
        let pop_var = self.m2 / t;
        let (skewness, excess_kurtosis) = if pop_var > 0.0 {
            (
                self.m3 / t / pop_var.powf(1.5),
                mu4 / (pop_var * pop_var) - 3.0,
            )
        } else {
            (0.0, 0.0)
        };
        VarianceEstimate {
            trials: self.count,
            mean: self.mean,
            variance: var,
            se_mean: (var / t).sqrt(),
            se_variance: se_var,
            var_over_n: var / n as f64,
            skewness,
            excess_kurtosis,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceEstimate {
    pub trials: u64,
    pub mean: f64,
    pub variance: f64,
    pub se_mean: f64,
    pub se_variance: f64,
    pub var_over_n: f64,
    /// Shape of the count distribution; a sanity report, not a test target.
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

impl VarianceEstimate {
    pub fn se_var_over_n(&self, n: usize) -> f64 {
        self.se_variance / n as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dist: DistributionSpec,
    pub n: usize,
    pub window: WindowSpec,
    pub trials: u64,
    pub seed: u64,
    /// Grid points; `None` selects [`default_grid_points`].
    pub grid_points: Option<usize>,
    pub parallelism: usize,
}

impl ExperimentConfig {
    pub fn new(dist: DistributionSpec, n: usize, window: WindowSpec, trials: u64, seed: u64) -> Self {
        Self {
            dist,
            n,
            window,
            trials,
            seed,
            grid_points: None,
            parallelism: 1,
        }
    }

    pub fn with_parallelism(mut self, p: usize) -> Self {
        self.parallelism = p;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub dist: DistributionSpec,
    pub n: usize,
    pub window: WindowSpec,
    pub grid_points: usize,
    pub tol: f64,
    pub seed: u64,
    pub trials: u64,
    pub estimate: VarianceEstimate,
    pub theoretical_slope: Option<f64>,
    pub flagged_trial_count: u64,
    pub unreliable: bool,
    /// Excluded from equality-sensitive outputs by callers that need
    /// byte-identical reruns.
    pub wall_time_s: f64,
}

struct BatchResult {
    acc: MomentAccumulator,
    flagged: u64,
}

fn run_batch(cfg: &ExperimentConfig, m: usize, batch: u64) -> Result<BatchResult> {
    let mut acc = MomentAccumulator::default();
    let mut flagged = 0;
    let mut y = vec![[0.0; 2]; cfg.n];
    let first = batch * BATCH;
    let last = (first + BATCH).min(cfg.trials);
    for trial in first..last {
        cfg.dist.fill(&mut y, cfg.seed, trial);
        let ev = PolyEvaluator::new(&y);
        let tally = match rootcount::count_only(&y, &ev, cfg.window, m) {
            Ok(t) => t,
            // An all-zero draw (possible for discrete laws) has no isolated roots.
            Err(Error::DegeneratePolynomial) => {
                flagged += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        if tally.uncertain {
            flagged += 1;
        }
        acc.push(tally.count as f64);
    }
    Ok(BatchResult { acc, flagged })
}

pub(crate) fn thread_pool(parallelism: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))
}

pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentRecord> {
    if cfg.trials < 2 {
        return Err(Error::InvalidArgument("at least two trials are needed".into()));
    }
    if cfg.n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let m = cfg.grid_points.unwrap_or_else(|| default_grid_points(cfg.n));
    let start = Instant::now();
    let batches = cfg.trials.div_ceil(BATCH);
    let pool = thread_pool(cfg.parallelism)?;
    let results: Vec<Result<BatchResult>> =
        pool.install(|| (0..batches).into_par_iter().map(|b| run_batch(cfg, m, b)).collect());
    let mut acc = MomentAccumulator::default();
    let mut flagged = 0;
    for r in results {
        let r = r?;
        acc.merge(&r.acc);
        flagged += r.flagged;
    }
    let estimate = acc.estimate(cfg.n);
    Ok(ExperimentRecord {
        dist: cfg.dist.clone(),
        n: cfg.n,
        window: cfg.window,
        grid_points: m,
        tol: rootcount::default_tol(cfg.n),
        seed: cfg.seed,
        trials: cfg.trials,
        estimate,
        theoretical_slope: None,
        flagged_trial_count: flagged,
        unreliable: flagged as f64 > UNRELIABLE_FRACTION * cfg.trials as f64,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

pub fn run_experiment(
    dist: &DistributionSpec,
    n: usize,
    window: WindowSpec,
    trials: u64,
    seed: u64,
    parallelism: usize,
) -> Result<ExperimentRecord> {
    run(&ExperimentConfig::new(dist.clone(), n, window, trials, seed).with_parallelism(parallelism))
}

/// Limit of `Var(N_n)/n`: `cg + (2/15)(m4 − 3)` on the full window and
/// `cg + (1/30)(m4 − 3)` on the half window, where `cg` is the Gaussian
/// limit for that window.
pub fn theoretical_slope(dist: &DistributionSpec, window: WindowSpec, cg: f64) -> f64 {
    let coef = match window {
        WindowSpec::Full => 2.0 / 15.0,
        WindowSpec::Half => 1.0 / 30.0,
    };
    cg + coef * dist.moments().excess_kurtosis
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeRow {
    pub dist: String,
    pub n: usize,
    pub trials: u64,
    pub mean: f64,
    pub var_over_n: f64,
    pub se: f64,
    pub flagged: u64,
}

pub fn slope_series(
    dist: &DistributionSpec,
    n_list: &[usize],
    trials_per_n: u64,
    seed: u64,
    window: WindowSpec,
    parallelism: usize,
) -> Result<Vec<SlopeRow>> {
    if n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("n_list must be strictly increasing".into()));
    }
    n_list
        .iter()
        .map(|&n| {
            let rec = run_experiment(dist, n, window, trials_per_n, seed, parallelism)?;
            Ok(SlopeRow {
                dist: dist.to_string(),
                n,
                trials: trials_per_n,
                mean: rec.estimate.mean,
                var_over_n: rec.estimate.var_over_n,
                se: rec.estimate.se_var_over_n(n),
                flagged: rec.flagged_trial_count,
            })
        })
        .collect()
}

pub fn write_slope_csv<W: Write>(out: &mut W, rows: &[SlopeRow]) -> std::io::Result<()> {
    writeln!(out, "dist,n,trials,mean,var_over_n,se,flagged")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{:.10},{:.10},{:.10},{}",
            csv_field(&r.dist),
            r.n,
            r.trials,
            r.mean,
            r.var_over_n,
            r.se,
            r.flagged
        )?;
    }
    Ok(())
}

pub(crate) fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub n: usize,
    pub variance: f64,
    pub var_over_n: f64,
    pub var_over_n2: f64,
    pub se_variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub dist: String,
    pub rows: Vec<ScalingRow>,
    /// Smallest ratio `(Var/n²)(n_j) / (Var/n²)(n_{j+1})` per unit of
    /// `log₄(n_{j+1}/n_j)`; equals 4 for exactly linear variance.
    pub min_step_decrease: f64,
    pub var_over_n_band: f64,
    pub strictly_decreasing: bool,
}

pub fn scaling_check(
    dist: &DistributionSpec,
    n_list: &[usize],
    trials: u64,
    seed: u64,
    parallelism: usize,
) -> Result<ScalingReport> {
    if n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("n_list must be strictly increasing".into()));
    }
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let rec = run_experiment(dist, n, WindowSpec::Full, trials, seed, parallelism)?;
        let nf = n as f64;
        rows.push(ScalingRow {
            n,
            variance: rec.estimate.variance,
            var_over_n: rec.estimate.variance / nf,
            var_over_n2: rec.estimate.variance / (nf * nf),
            se_variance: rec.estimate.se_variance,
        });
    }
    let mut min_step = f64::INFINITY;
    let mut strictly = true;
    for w in rows.windows(2) {
        let ratio = w[0].var_over_n2 / w[1].var_over_n2;
        let steps = ((w[1].n as f64) / (w[0].n as f64)).log(4.0);
        min_step = min_step.min(ratio.powf(1.0 / steps));
        strictly &= w[1].var_over_n2 < w[0].var_over_n2;
    }
    let (lo, hi) = rows.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), r| {
        (lo.min(r.var_over_n), hi.max(r.var_over_n))
    });
    Ok(ScalingReport {
        dist: dist.to_string(),
        rows,
        min_step_decrease: min_step,
        var_over_n_band: if lo > 0.0 { hi / lo } else { f64::INFINITY },
        strictly_decreasing: strictly,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn direct(xs: &[f64]) -> (f64, f64, f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let c = |k: i32| xs.iter().map(|x| (x - mean).powi(k)).sum::<f64>();
        (mean, c(2), c(3), c(4))
    }

    #[test]
    fn accumulator_matches_two_pass() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37 % 101) as f64).sqrt() + 1e6).collect();
        let mut acc = MomentAccumulator::default();
        xs.iter().for_each(|&x| acc.push(x));
        let (mean, m2, m3, m4) = direct(&xs);
        assert!((acc.mean - mean).abs() < 1e-9);
        assert!((acc.m2 - m2).abs() < 1e-9 * m2);
        assert!((acc.m3 - m3).abs() < 1e-7 * m2.powf(1.5));
        assert!((acc.m4 - m4).abs() < 1e-9 * m4);
    }

    #[test]
    fn merge_equals_single_pass() {
        let xs: Vec<f64> = (0..777).map(|i| ((i * 13 % 17) as f64) * 0.5 - 3.0).collect();
        let mut whole = MomentAccumulator::default();
        xs.iter().for_each(|&x| whole.push(x));
        let mut a = MomentAccumulator::default();
        let mut b = MomentAccumulator::default();
        xs[..300].iter().for_each(|&x| a.push(x));
        xs[300..].iter().for_each(|&x| b.push(x));
        a.merge(&b);
        for (u, v) in [(a.mean, whole.mean), (a.m2, whole.m2), (a.m3, whole.m3), (a.m4, whole.m4)] {
            assert!((u - v).abs() <= 1e-9 * v.abs().max(1.0), "{u} vs {v}");
        }
    }

    #[test]
    fn n_one_has_exactly_two_roots() {
        let rec = run_experiment(&DistributionSpec::Gaussian, 1, WindowSpec::Full, 1000, 5, 1).unwrap();
        assert_eq!(rec.estimate.mean, 2.0);
        assert_eq!(rec.estimate.variance, 0.0);
        assert_eq!(rec.flagged_trial_count, 0);
    }

    #[test]
    fn theoretical_slopes() {
        let cg = 0.55826;
        assert_eq!(theoretical_slope(&DistributionSpec::Gaussian, WindowSpec::Full, cg), cg);
        let r = theoretical_slope(&DistributionSpec::Rademacher, WindowSpec::Full, cg);
        assert!((r - 0.29159).abs() < 1e-5);
        let h = theoretical_slope(&DistributionSpec::Rademacher, WindowSpec::Half, 0.3);
        assert!((h - (0.3 - 1.0 / 15.0)).abs() < 1e-15);
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let a = run_experiment(&DistributionSpec::Rademacher, 24, WindowSpec::Full, 300, 9, 1).unwrap();
        let b = run_experiment(&DistributionSpec::Rademacher, 24, WindowSpec::Full, 300, 9, 3).unwrap();
        assert_eq!(a.estimate, b.estimate);
    }

    #[test]
    fn rejects_single_trial() {
        assert!(run_experiment(&DistributionSpec::Gaussian, 4, WindowSpec::Full, 1, 0, 1).is_err());
    }

    #[test]
    fn slope_csv_single_row() {
        let rows = slope_series(&DistributionSpec::Gaussian, &[8], 50, 1, WindowSpec::Full, 1).unwrap();
        assert_eq!(rows.len(), 1);
        let mut buf = Vec::new();
        write_slope_csv(&mut buf, &rows).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 2);
    }

    #[test]
    fn scaling_singleton_is_trivial() {
        let r = scaling_check(&DistributionSpec::Gaussian, &[8], 50, 1, 1).unwrap();
        assert!(r.strictly_decreasing);
        assert_eq!(r.rows.len(), 1);
    }
}
