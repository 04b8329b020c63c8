//! Non-resonance conditions on `t` and `(s, t)`, the good-pair region of
//! `ε`-boxes and directional energy of the basis vectors.
//!
//! With `x = t/(πn)`, `t` is resonant if `‖l x‖_{ℝ/ℤ} ≤ n^{−1+8τ}` for some
//! `0 < |l| ≤ ⌊n^τ⌋`; the pair version uses `k x_s + l x_t`.

use nalgebra::Matrix4;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::trial_rng;
use crate::error::Result;
use crate::mcstats::thread_pool;
use crate::polyeval::{basis_vectors, reduced_turns, turns};

pub const DEFAULT_TAU: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub k: i64,
    pub l: i64,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub satisfied: bool,
    pub witness: Option<Witness>,
    pub tau: f64,
    pub threshold: f64,
    pub l_max: i64,
    /// `⌊n^τ⌋ = 0`: nothing to scan, so the condition holds trivially.
    pub vacuous: bool,
}

pub fn threshold(n: usize, tau: f64) -> f64 {
    (n as f64).powf(-1.0 + 8.0 * tau)
}

pub fn l_max(n: usize, tau: f64) -> i64 {
    ((n as f64).powf(tau) * (1.0 + 1e-12)).floor() as i64
}

/// `x / (πn)` in double-double, as twice the turn count.
fn unit_coord(x: f64, n: usize) -> (f64, f64) {
    let (h, l) = turns(x, n);
    (2.0 * h, 2.0 * l)
}

fn better(w: &Witness, best: &Option<Witness>) -> bool {
    match best {
        None => true,
        Some(b) => {
            w.distance < b.distance
                || (w.distance == b.distance && w.k.abs().max(w.l.abs()) < b.k.abs().max(b.l.abs()))
        }
    }
}

fn report(n: usize, tau: f64, scan: impl Fn(i64, f64) -> Option<Witness>) -> ConditionReport {
    let thr = threshold(n, tau);
    let lm = l_max(n, tau);
    ConditionReport {
        satisfied: lm == 0 || scan(lm, thr).is_none(),
        witness: if lm == 0 { None } else { scan(lm, thr) },
        tau,
        threshold: thr,
        l_max: lm,
        vacuous: lm == 0,
    }
}

/// Single-point condition; the witness has `k = 0`, `l > 0` and the smallest
/// distance found.
pub fn check_condition_t(n: usize, t: f64, tau: f64) -> ConditionReport {
    let x = unit_coord(t, n);
    report(n, tau, |lm, thr| {
        let mut best = None;
        for l in 1..=lm {
            let w = Witness {
                k: 0,
                l,
                distance: reduced_turns(l as f64, x).abs(),
            };
            if w.distance <= thr && better(&w, &best) {
                best = Some(w);
            }
        }
        best
    })
}

/// Pair condition over `0 < max(|k|, |l|) ≤ ⌊n^τ⌋`, witnesses normalized to
/// `k > 0` or `k = 0 < l`.
pub fn check_condition_st(n: usize, s: f64, t: f64, tau: f64) -> ConditionReport {
    let xs = unit_coord(s, n);
    let xt = unit_coord(t, n);
    report(n, tau, |lm, thr| {
        let mut best = None;
        for k in 0..=lm {
            let fs = reduced_turns(k as f64, xs);
            let l_lo = if k == 0 { 1 } else { -lm };
            for l in l_lo..=lm {
                let f = fs + reduced_turns(l as f64, xt);
                let w = Witness {
                    k,
                    l,
                    distance: (f - f.round()).abs(),
                };
                if w.distance <= thr && better(&w, &best) {
                    best = Some(w);
                }
            }
        }
        best
    })
}

/// Directions `(a, b)` up to sign: `b > 0`, or `b = 0 < a`.
fn directions(lm: i64) -> Vec<(i64, i64)> {
    let mut out = Vec::new();
    for b in 0..=lm {
        for a in -lm..=lm {
            if b > 0 || a > 0 {
                out.push((a, b));
            }
        }
    }
    out
}

/// Partition of `(−nπ, nπ)` into `ε`-intervals and the pairs `(k, p)`,
/// `k < p`, on which the pair condition holds for every `s ∈ I_p`, `t ∈ I_k`.
/// Membership is decided lazily by interval arithmetic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoodPairRegion {
    pub n: usize,
    pub eps: f64,
    pub tau: f64,
    pub threshold: f64,
    pub l_max: i64,
    pub intervals: usize,
    dirs: Vec<(i64, i64)>,
    /// Interval width in units of `πn`.
    h: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BadSetReport {
    pub n: usize,
    pub eps: f64,
    pub tau: f64,
    pub intervals: usize,
    pub total_pairs: u64,
    pub bad_pairs: u64,
    pub fraction: f64,
}

pub fn build_d(n: usize, eps: f64, tau: f64) -> GoodPairRegion {
    assert!(eps > 0.0, "interval length must be positive");
    let h = eps / (std::f64::consts::PI * n as f64);
    let intervals = ((2.0 / h) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let lm = l_max(n, tau);
    GoodPairRegion {
        n,
        eps,
        tau,
        threshold: threshold(n, tau),
        l_max: lm,
        intervals,
        dirs: directions(lm),
        h,
    }
}

impl GoodPairRegion {
    fn unit_interval(&self, j: usize) -> (f64, f64) {
        let lo = -1.0 + j as f64 * self.h;
        (lo, (lo + self.h).min(1.0))
    }

    /// `I_j` in the original `t` scale.
    pub fn interval(&self, j: usize) -> (f64, f64) {
        let scale = std::f64::consts::PI * self.n as f64;
        let (a, b) = self.unit_interval(j);
        (a * scale, b * scale)
    }

    pub fn total_pairs(&self) -> u64 {
        let m = self.intervals as u64;
        m * m.saturating_sub(1) / 2
    }

    fn box_bad(&self, (a, b): (i64, i64), sb: (f64, f64), tb: (f64, f64)) -> bool {
        let span = |c: i64, (x0, x1): (f64, f64)| {
            let (p, q) = (c as f64 * x0, c as f64 * x1);
            (p.min(q), p.max(q))
        };
        let (s0, s1) = span(a, sb);
        let (t0, t1) = span(b, tb);
        let (lo, hi) = (s0 + t0, s1 + t1);
        (hi + self.threshold).floor() >= lo - self.threshold
    }

    /// First direction `(k, l)` whose image of `I_p × I_k` comes within the
    /// threshold of an integer.
    pub fn box_witness(&self, k: usize, p: usize) -> Option<(i64, i64)> {
        let (sb, tb) = (self.unit_interval(p), self.unit_interval(k));
        self.dirs.iter().copied().find(|&d| self.box_bad(d, sb, tb))
    }

    pub fn contains(&self, k: usize, p: usize) -> bool {
        k < p && p < self.intervals && self.box_witness(k, p).is_none()
    }

    /// Good pairs in row-major order of `p`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (1..self.intervals).flat_map(move |p| (0..p).filter(move |&k| self.contains(k, p)).map(move |k| (k, p)))
    }

    /// Number of `k < p` with `(k, p)` bad. Each direction only needs the
    /// `k` near the preimages of integers, found by solving for the box
    /// centre and confirmed with the exact box test.
    pub fn bad_in_row(&self, p: usize) -> u64 {
        if p == 0 {
            return 0;
        }
        let sb = self.unit_interval(p);
        let ms = 0.5 * (sb.0 + sb.1);
        let ws = 0.5 * (sb.1 - sb.0);
        let mut bad = Vec::new();
        for &(a, b) in &self.dirs {
            if b == 0 {
                if self.box_bad((a, b), sb, (0.0, 0.0)) {
                    return p as u64;
                }
                continue;
            }
            let (af, bf) = (a as f64, b as f64);
            let reach = self.threshold + af.abs() * ws + 0.5 * bf * self.h;
            let centre = |q: f64| af * ms + bf * (-1.0 + (q + 0.5) * self.h);
            let q_of = |c: f64| ((c - af * ms) / bf + 1.0) / self.h - 0.5;
            let m_lo = (centre(0.0) - reach).ceil() as i64;
            let m_hi = (centre((p - 1) as f64) + reach).floor() as i64;
            for m in m_lo..=m_hi {
                let qa = (q_of(m as f64 - reach).floor() - 1.0).max(0.0) as usize;
                let qb = (q_of(m as f64 + reach).ceil() + 1.0).min((p - 1) as f64);
                if qb < 0.0 {
                    continue;
                }
                for q in qa..=qb as usize {
                    if self.box_bad((a, b), sb, self.unit_interval(q)) {
                        bad.push(q);
                    }
                }
            }
        }
        bad.sort_unstable();
        bad.dedup();
        bad.len() as u64
    }

    pub fn bad_fraction(&self, parallelism: usize) -> Result<BadSetReport> {
        let pool = thread_pool(parallelism)?;
        let bad: u64 = pool.install(|| (1..self.intervals).into_par_iter().map(|p| self.bad_in_row(p)).sum());
        let total = self.total_pairs();
        Ok(BadSetReport {
            n: self.n,
            eps: self.eps,
            tau: self.tau,
            intervals: self.intervals,
            total_pairs: total,
            bad_pairs: bad,
            fraction: if total == 0 { 0.0 } else { bad as f64 / total as f64 },
        })
    }
}

/// Which family of basis vectors an energy is taken over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VectorFamily {
    /// `v_i = (cos, −(i/n) sin)` at `t` then `s`.
    V,
    /// `v_i′ = (sin, (i/n) cos)` at `t` then `s`.
    VPrime,
}

fn family_vector(n: usize, i: usize, s: f64, t: f64, family: VectorFamily) -> [f64; 4] {
    let b = basis_vectors(n, i, t, Some(s)).expect("index checked by caller");
    match family {
        VectorFamily::V => b.v.unwrap(),
        VectorFamily::VPrime => b.v_prime.unwrap(),
    }
}

/// `Σ_{i∈I} ⟨e, v_i⟩²`.
pub fn directional_energy<I: IntoIterator<Item = usize>>(
    n: usize,
    s: f64,
    t: f64,
    e: &[f64; 4],
    indices: I,
    family: VectorFamily,
) -> f64 {
    indices
        .into_iter()
        .map(|i| {
            let v = family_vector(n, i, s, t, family);
            let d: f64 = v.iter().zip(e).map(|(a, b)| a * b).sum();
            d * d
        })
        .sum()
}

/// Gram matrix `Σ_{i∈I} v_i v_iᵀ`; its smallest eigenvalue is the minimum
/// energy over all unit directions.
pub fn energy_gram<I: IntoIterator<Item = usize>>(n: usize, s: f64, t: f64, indices: I, family: VectorFamily) -> Matrix4<f64> {
    let mut g = Matrix4::zeros();
    for i in indices {
        let v = nalgebra::Vector4::from(family_vector(n, i, s, t, family));
        g += v * v.transpose();
    }
    g
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyScan {
    pub draws: usize,
    pub min_sampled: f64,
    pub min_exact: f64,
    pub bound: f64,
}

/// Minimum energy over `draws` random unit directions and over all
/// directions, against `n^{1−τ}`.
pub fn energy_scan(n: usize, s: f64, t: f64, family: VectorFamily, tau: f64, draws: usize, seed: u64) -> EnergyScan {
    let gram = energy_gram(n, s, t, 1..=n, family);
    let mut rng = trial_rng(seed, 0);
    let mut min_sampled = f64::INFINITY;
    for _ in 0..draws {
        let mut e = [0.0; 4];
        loop {
            for c in e.iter_mut() {
                *c = rng.random_range(-1.0..1.0);
            }
            let r2: f64 = e.iter().map(|x| x * x).sum();
            if r2 > 1e-4 && r2 <= 1.0 {
                let r = r2.sqrt();
                e.iter_mut().for_each(|x| *x /= r);
                break;
            }
        }
        let v = nalgebra::Vector4::from(e);
        min_sampled = min_sampled.min((v.transpose() * gram * v)[0]);
    }
    EnergyScan {
        draws,
        min_sampled,
        min_exact: gram.symmetric_eigenvalues().min(),
        bound: (n as f64).powf(1.0 - tau),
    }
}
