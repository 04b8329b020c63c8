//! Edgeworth correction objects for `S_n/√n = n^{-1/2} Σ_k X_{n,k}` with
//! `X_{n,k} = C_n(k) Y_k`: Hermite products, moment deltas against the
//! Gaussian, the averaged deltas `c_n(α)`, the correctors `Γ_{n,1}`, `Γ_{n,2}`
//! and the Gaussian functionals `E[Ψ_δ(I^{1/2}W) H_α(W)]`.
//!
//! Multi-indices are 1-based. In ℝ⁴ coordinates 1, 2 are `(P, P′)` at `t`
//! and 3, 4 the same at `s`, matching [`polyeval::c_matrix`]. All sums over
//! multi-indices run over ordered tuples.

use std::collections::HashMap;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{DistributionSpec, MomentProfile};
use crate::error::{Error, Result};
use crate::mcstats::{thread_pool, MomentAccumulator, BATCH};
use crate::polyeval::{self, PolyEvaluator};
use crate::quad;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MultiIndex(pub Vec<usize>);

impl MultiIndex {
    pub fn new(entries: &[usize]) -> Self {
        Self(entries.to_vec())
    }

    pub fn order(&self) -> usize {
        self.0.len()
    }

    /// `n_j(α)`: how often coordinate `j` (1-based) occurs, for `j ≤ d`.
    pub fn multiplicities(&self, d: usize) -> Vec<usize> {
        let mut m = vec![0; d];
        for &a in &self.0 {
            m[a - 1] += 1;
        }
        m
    }

    fn sorted(&self) -> Vec<usize> {
        let mut v = self.0.clone();
        v.sort_unstable();
        v
    }

    fn check(&self, d: usize) -> Result<()> {
        if self.0.iter().any(|&a| a == 0 || a > d) {
            return Err(Error::InvalidArgument(format!("multi-index {:?} outside 1..={d}", self.0)));
        }
        Ok(())
    }

    pub fn concat(&self, other: &Self) -> Self {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Self(v)
    }
}

/// All ordered tuples in `{1..d}^m`.
pub fn all_tuples(d: usize, m: usize) -> Vec<MultiIndex> {
    let mut out = Vec::with_capacity(d.pow(m as u32));
    let mut cur = vec![1; m];
    loop {
        out.push(MultiIndex(cur.clone()));
        let mut pos = m;
        loop {
            if pos == 0 {
                return out;
            }
            pos -= 1;
            if cur[pos] < d {
                cur[pos] += 1;
                for c in cur.iter_mut().skip(pos + 1) {
                    *c = 1;
                }
                break;
            }
        }
    }
}

/// Probabilists' Hermite polynomial `h_k(x)`.
pub fn hermite(k: usize, x: f64) -> f64 {
    let (mut h0, mut h1) = (1.0, x);
    if k == 0 {
        return h0;
    }
    for j in 1..k {
        let h2 = x * h1 - j as f64 * h0;
        h0 = h1;
        h1 = h2;
    }
    h1
}

/// `H_α(x) = Π_j h_{n_j(α)}(x_j)`.
pub fn h_alpha(alpha: &MultiIndex, x: &[f64]) -> f64 {
    alpha
        .multiplicities(x.len())
        .iter()
        .zip(x)
        .map(|(&k, &xi)| hermite(k, xi))
        .product()
}

/// `E Π_j X_{α_j}` for `X = C Y`, `Y = (Y_1, Y_2)` iid with the given moments.
pub fn moment_ex_alpha(c: &[[f64; 2]], moments: &MomentProfile, alpha: &MultiIndex) -> f64 {
    let m = alpha.order();
    assert!(m <= 4, "moment order {m} not supported");
    let mut total = 0.0;
    for mask in 0..(1usize << m) {
        let mut coef = 1.0;
        let mut c1 = 0;
        for (j, &a) in alpha.0.iter().enumerate() {
            let l = (mask >> j) & 1;
            coef *= c[a - 1][l];
            if l == 0 {
                c1 += 1;
            }
        }
        if coef != 0.0 {
            total += coef * moments.raw(c1) * moments.raw(m - c1);
        }
    }
    total
}

/// `Δ_α = E X^α − E G^α` for a single `X = C Y`.
pub fn delta_alpha(c: &[[f64; 2]], moments: &MomentProfile, alpha: &MultiIndex) -> f64 {
    moment_ex_alpha(c, moments, alpha) - moment_ex_alpha(c, &MomentProfile::gaussian(), alpha)
}

/// Scaling applied to `X_{n,k}` before moments are taken.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Normalization {
    Raw,
    /// `I(λ)^{-1/2} X`: row `a` divided by `√λ_a`.
    Diagonal(Vec<f64>),
}

impl Normalization {
    /// `λ = (1, 1/3)` or `(1, 1/3, 1, 1/3)`, the limits of `V_n`.
    pub fn limit(d: usize) -> Self {
        Self::Diagonal(default_lambdas(d))
    }

    fn apply(&self, rows: &mut [[f64; 2]]) -> Result<()> {
        if let Self::Diagonal(l) = self {
            if l.len() != rows.len() {
                return Err(Error::InvalidArgument(format!(
                    "{} scaling entries for dimension {}",
                    l.len(),
                    rows.len()
                )));
            }
            for (row, &lam) in rows.iter_mut().zip(l) {
                if !(lam > 0.0) {
                    return Err(Error::InvalidArgument(format!("nonpositive λ = {lam}")));
                }
                let s = 1.0 / lam.sqrt();
                row[0] *= s;
                row[1] *= s;
            }
        }
        Ok(())
    }
}

pub fn default_lambdas(d: usize) -> Vec<f64> {
    [1.0, 1.0 / 3.0].iter().copied().cycle().take(d).collect()
}

/// `c_n(α) = n⁻¹ Σ_k Δ_α(X_{n,k})`.
pub fn c_n_alpha(
    n: usize,
    t: f64,
    s: Option<f64>,
    dist: &DistributionSpec,
    alpha: &MultiIndex,
    norm: &Normalization,
) -> Result<f64> {
    let d = if s.is_some() { 4 } else { 2 };
    alpha.check(d)?;
    if !(3..=4).contains(&alpha.order()) {
        return Err(Error::InvalidArgument("c_n needs an order 3 or 4 multi-index".into()));
    }
    let moments = dist.moments();
    let mut acc = 0.0;
    for k in 1..=n {
        let mut rows = polyeval::c_matrix(n, k, t, s);
        norm.apply(&mut rows)?;
        acc += delta_alpha(&rows, &moments, alpha);
    }
    Ok(acc / n as f64)
}

/// `2·3^{i+j−4}(m4 − 3)/(2i + 2j − 4)` for `α ~ (i, i, j, j)`, `i ≤ 2 < j`.
///
/// Matches [`cn_limit_closed_form`] only at `(i, j) = (1, 3)`.
pub fn cn_limit_reference(i: usize, j: usize, m4: f64) -> f64 {
    let p = (i + j) as i32 - 4;
    2.0 * 3f64.powi(p) * (m4 - 3.0) / (2 * (i + j) - 4) as f64
}

/// Limit of `c_n(α, ns, nt)` for `α ~ (i, i, j, j)`, `i ≤ 2 < j`, under the
/// `λ = (1, 1/3, 1, 1/3)` normalization and generic `(s, t)`.
///
/// Only the fourth cumulant survives: `Δ_α = (m4 − 3) Σ_l a_l² b_l²` with
/// `a`, `b` the normalized rows. Rows 2 and 4 carry `√3·(k/n)`, and the phase
/// averages give `1/2`, so the limit is `(m4 − 3)·3^p/(2(2p + 1))` with
/// `p = [i = 2] + [j = 4]`.
pub fn cn_limit_closed_form(i: usize, j: usize, m4: f64) -> f64 {
    let p = (i == 2) as i32 + (j == 4) as i32;
    (m4 - 3.0) * 3f64.powi(p) / (2.0 * (2 * p + 1) as f64)
}

/// `(2π²/24)·Σ_α L_Ψ(α)·c(α)` over all orderings of `(i, i, j, j)`,
/// `i ∈ {1, 2}`, `j ∈ {3, 4}`, where `L_Ψ = (−1)^{i+j}/(3π²)`. With the
/// closed-form limits this is `(m4 − 3)/15`.
pub fn aggregate_constant<F: Fn(usize, usize) -> f64>(limit: F) -> f64 {
    let mut acc = 0.0;
    for i in 1..=2usize {
        for j in 3..=4 {
            let sign = if (i + j).is_multiple_of(2) { 1.0 } else { -1.0 };
            acc += 6.0 * sign / (3.0 * PI * PI) * limit(i, j);
        }
    }
    2.0 * PI * PI / 24.0 * acc
}

/// The six orderings of `(i, i, j, j)`.
pub fn orderings(i: usize, j: usize) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    for a in 0..4 {
        for b in a + 1..4 {
            let mut v = vec![j; 4];
            v[a] = i;
            v[b] = i;
            out.push(MultiIndex(v));
        }
    }
    out
}

/// Cached `c_n` values for one `(n, t, s, dist, normalization)`.
#[derive(Debug, Clone)]
pub struct CorrectorModel {
    pub n: usize,
    pub d: usize,
    cache: HashMap<Vec<usize>, f64>,
    order3: Vec<(MultiIndex, f64)>,
    order4: Vec<(MultiIndex, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectorTerms {
    pub gamma1: f64,
    pub gamma2_prime: f64,
    pub gamma2_double_prime: f64,
    pub gamma2: f64,
    pub q_n2: f64,
}

impl CorrectorModel {
    pub fn new(n: usize, t: f64, s: Option<f64>, dist: &DistributionSpec, norm: &Normalization) -> Result<Self> {
        let d = if s.is_some() { 4 } else { 2 };
        let mut cache = HashMap::new();
        let mut lookup = |alpha: &MultiIndex| -> Result<f64> {
            let key = alpha.sorted();
            if let Some(v) = cache.get(&key) {
                return Ok(*v);
            }
            let v = c_n_alpha(n, t, s, dist, alpha, norm)?;
            cache.insert(key, v);
            Ok(v)
        };
        let order3 = all_tuples(d, 3)
            .into_iter()
            .map(|a| lookup(&a).map(|v| (a, v)))
            .collect::<Result<Vec<_>>>()?;
        let order4 = all_tuples(d, 4)
            .into_iter()
            .map(|a| lookup(&a).map(|v| (a, v)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            n,
            d,
            cache,
            order3,
            order4,
        })
    }

    /// `c_n(α)` for any ordering of a cached multiset.
    pub fn c(&self, alpha: &MultiIndex) -> Option<f64> {
        self.cache.get(&alpha.sorted()).copied()
    }

    /// `Γ_{n,1} = (1/6) Σ_{|α|=3} c_n(α) H_α(x)`.
    pub fn gamma1(&self, x: &[f64]) -> f64 {
        self.order3.iter().map(|(a, c)| c * h_alpha(a, x)).sum::<f64>() / 6.0
    }

    /// `Γ′_{n,2} = (1/24) Σ_{|β|=4} c_n(β) H_β(x)`.
    pub fn gamma2_prime(&self, x: &[f64]) -> f64 {
        self.order4.iter().map(|(a, c)| c * h_alpha(a, x)).sum::<f64>() / 24.0
    }

    /// `Γ″_{n,2} = (1/72) Σ_{|ρ|=3} Σ_{|β|=3} c_n(β) c_n(ρ) H_{β,ρ}(x)`, both
    /// orders of each pair counted.
    pub fn gamma2_double_prime(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (b, cb) in &self.order3 {
            if *cb == 0.0 {
                continue;
            }
            for (r, cr) in &self.order3 {
                if *cr != 0.0 {
                    acc += cb * cr * h_alpha(&b.concat(r), x);
                }
            }
        }
        acc / 72.0
    }

    pub fn terms(&self, x: &[f64]) -> CorrectorTerms {
        let gamma1 = self.gamma1(x);
        let gamma2_prime = self.gamma2_prime(x);
        let gamma2_double_prime = self.gamma2_double_prime(x);
        let gamma2 = gamma2_prime + gamma2_double_prime;
        let nf = self.n as f64;
        CorrectorTerms {
            gamma1,
            gamma2_prime,
            gamma2_double_prime,
            gamma2,
            q_n2: 1.0 + gamma1 / nf.sqrt() + gamma2 / nf,
        }
    }
}

pub fn gamma_terms(
    n: usize,
    t: f64,
    s: Option<f64>,
    dist: &DistributionSpec,
    x: &[f64],
    norm: &Normalization,
) -> Result<CorrectorTerms> {
    let model = CorrectorModel::new(n, t, s, dist, norm)?;
    if x.len() != model.d {
        return Err(Error::InvalidArgument(format!("x has dimension {}, expected {}", x.len(), model.d)));
    }
    Ok(model.terms(x))
}

/// `E[Q_{n,2}(W)]` for `W ~ N(0, I_d)` by tensor Gauss–Hermite quadrature.
pub fn q_normalization(model: &CorrectorModel, nodes: usize) -> f64 {
    let (x, w) = quad::gauss_hermite_normal(nodes);
    let d = model.d;
    let mut idx = vec![0usize; d];
    let mut total = 0.0;
    loop {
        let point: Vec<f64> = idx.iter().map(|&i| x[i]).collect();
        let weight: f64 = idx.iter().map(|&i| w[i]).product();
        total += weight * model.terms(&point).q_n2;
        let mut pos = 0;
        loop {
            if pos == d {
                return total;
            }
            idx[pos] += 1;
            if idx[pos] < nodes {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

const QUAD_TOL: f64 = 1e-12;

/// `E[F_δ(√λ W) h_k(W)]`; the limit `δ → 0` is `φ(0) h_k(0)/√λ`.
fn indicator_factor(k: usize, lambda: f64, delta: Option<f64>) -> Result<f64> {
    match delta {
        None => Ok(std_normal_pdf(0.0) * hermite(k, 0.0) / lambda.sqrt()),
        Some(delta) => {
            let b = delta / lambda.sqrt();
            let r = quad::integrate(|w| hermite(k, w) * std_normal_pdf(w), -b, b, QUAD_TOL, 1e-12)?;
            Ok(r.value / (2.0 * delta))
        }
    }
}

/// `E[√λ |W| h_k(W)]`.
fn abs_factor(k: usize, lambda: f64) -> Result<f64> {
    if k % 2 == 1 {
        return Ok(0.0);
    }
    let r = quad::integrate_breakpoints(
        |w| w * hermite(k, w) * std_normal_pdf(w),
        &[0.0, 2.0, 4.0, 8.0, 16.0, 40.0],
        QUAD_TOL,
    )?;
    Ok(2.0 * lambda.sqrt() * r.value)
}

/// `E[Ψ_δ(I(λ)^{1/2} W) H_α(W)]` (ℝ⁴) or `E[Φ_δ(I(λ)^{1/2} W) H_α(W)]` (ℝ²),
/// with `Φ_δ(x) = |x_2| F_δ(x_1)` and `F_δ = 1{|·|<δ}/(2δ)`. `delta = None`
/// gives the `δ → 0` limit.
pub fn gauss_expect_psi_h(alpha: &MultiIndex, delta: Option<f64>, lambdas: &[f64]) -> Result<f64> {
    let d = lambdas.len();
    if d != 2 && d != 4 {
        return Err(Error::InvalidArgument(format!("dimension {d} is not 2 or 4")));
    }
    if let Some(&l) = lambdas.iter().find(|l| !(**l > 0.0)) {
        return Err(Error::NumericalDomain {
            t: l,
            detail: "λ must be positive".into(),
        });
    }
    if let Some(dl) = delta {
        if !(dl > 0.0) {
            return Err(Error::InvalidArgument(format!("δ must be positive, got {dl}")));
        }
    }
    alpha.check(d)?;
    let mult = alpha.multiplicities(d);
    if mult.iter().any(|k| k % 2 == 1) {
        return Ok(0.0);
    }
    let mut acc = 1.0;
    for (c, (&k, &lam)) in mult.iter().zip(lambdas).enumerate() {
        acc *= if c % 2 == 0 {
            indicator_factor(k, lam, delta)?
        } else {
            abs_factor(k, lam)?
        };
    }
    Ok(acc)
}

/// `(−1)^{i+j}/(3π²)`.
pub fn psi_limit(i: usize, j: usize) -> f64 {
    let sign = if (i + j).is_multiple_of(2) { 1.0 } else { -1.0 };
    sign / (3.0 * PI * PI)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceEstimate {
    pub value: f64,
    pub se: f64,
    pub trials: u64,
    pub hits_s: u64,
    pub hits_t: u64,
    pub joint_hits: u64,
}

/// Monte Carlo `Cov(φ_δ(s), φ_δ(t))` with `φ_δ(t) = |P′(t)|·1{|P(t)| < δ}/(2δ)`.
#[allow(clippy::too_many_arguments)]
pub fn v_n_mc(
    n: usize,
    s: f64,
    t: f64,
    dist: &DistributionSpec,
    delta: f64,
    trials: u64,
    seed: u64,
    parallelism: usize,
) -> Result<CovarianceEstimate> {
    if !(delta > 0.0) || trials < 2 {
        return Err(Error::InvalidArgument("need δ > 0 and at least two trials".into()));
    }
    // P(|P| < δ) ≈ 2δ φ(0) for unit variance.
    let p_hit = (2.0 * delta * std_normal_pdf(0.0)).min(1.0);
    let p_joint = if s == t { p_hit } else { p_hit * p_hit };
    let expected = p_joint * trials as f64;
    if expected < 10.0 {
        return Err(Error::Infeasible {
            expected_hits: expected,
            required_trials: (10.0 / p_joint).ceil() as u64,
        });
    }
    let pool = thread_pool(parallelism)?;
    let batches = trials.div_ceil(BATCH);
    let scale = 1.0 / (2.0 * delta);
    let per_batch: Vec<[f64; 6]> = pool.install(|| {
        (0..batches)
            .into_par_iter()
            .map(|b| {
                let mut y = vec![[0.0; 2]; n];
                // [Σφs, Σφt, Σφsφt, hits_s, hits_t, joint]
                let mut acc = [0.0; 6];
                for trial in b * BATCH..((b + 1) * BATCH).min(trials) {
                    dist.fill(&mut y, seed, trial);
                    let ev = PolyEvaluator::new(&y);
                    let (ps, dps) = ev.eval(s);
                    let (pt, dpt) = ev.eval(t);
                    let fs = if ps.abs() < delta { dps.abs() * scale } else { 0.0 };
                    let ft = if pt.abs() < delta { dpt.abs() * scale } else { 0.0 };
                    acc[0] += fs;
                    acc[1] += ft;
                    acc[2] += fs * ft;
                    acc[3] += (fs > 0.0) as u8 as f64;
                    acc[4] += (ft > 0.0) as u8 as f64;
                    acc[5] += (fs > 0.0 && ft > 0.0) as u8 as f64;
                }
                acc
            })
            .collect()
    });
    let mut tot = [0.0; 6];
    for b in &per_batch {
        for (a, v) in tot.iter_mut().zip(b) {
            *a += v;
        }
    }
    let nt = trials as f64;
    let ms = tot[0] / nt;
    let mt = tot[1] / nt;
    let cov = (tot[2] - nt * ms * mt) / (nt - 1.0);
    // Standard error from the spread of the centred products, second pass.
    let mut spread = MomentAccumulator::default();
    let products: Vec<Vec<f64>> = pool.install(|| {
        (0..batches)
            .into_par_iter()
            .map(|b| {
                let mut y = vec![[0.0; 2]; n];
                let mut out = Vec::with_capacity(BATCH as usize);
                for trial in b * BATCH..((b + 1) * BATCH).min(trials) {
                    dist.fill(&mut y, seed, trial);
                    let ev = PolyEvaluator::new(&y);
                    let (ps, dps) = ev.eval(s);
                    let (pt, dpt) = ev.eval(t);
                    let fs = if ps.abs() < delta { dps.abs() * scale } else { 0.0 };
                    let ft = if pt.abs() < delta { dpt.abs() * scale } else { 0.0 };
                    out.push((fs - ms) * (ft - mt));
                }
                out
            })
            .collect()
    });
    for v in products.iter().flatten() {
        spread.push(*v);
    }
    Ok(CovarianceEstimate {
        value: cov,
        se: (spread.variance() / nt).sqrt(),
        trials,
        hits_s: tot[3] as u64,
        hits_t: tot[4] as u64,
        joint_hits: tot[5] as u64,
    })
}
