//! The Gaussian variance constant
//! `c_G = (4/3π) ∫_0^∞ f(t) dt + 2/√3`, with
//! `f = (1 − g² − 3g′²)/(1 − g²)^{3/2} · (√(1 − R*²) + R* arcsin R*) − 1`,
//! `g(t) = sin t / t` and
//! `R* = (g″(1 − g²) + g g′²) / ((1 − g²)/3 − g′²)`.
//!
//! Near zero both `1 − g²` and the denominator of `R*` vanish (to orders 2
//! and 4), so below `t₀` the quotients are replaced by their Taylor series.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// `R*(t) = Σ r_k t^{2k}`.
const RSTAR_SERIES: [f64; 13] = [
    1.0,
    -1.0 / 70.0,
    31.0 / 88_200.0,
    -3401.0 / 203_742_000.0,
    -737_483.0 / 2_224_862_640_000.0,
    -1_169_369.0 / 155_740_384_800_000.0,
    -4.329_612_154_866_708_4e-12,
    5.178_723_195_214_802e-12,
    2.146_361_100_499_815_8e-13,
    4.823_515_384_102_543e-15,
    3.506_147_472_149_237e-17,
    -2.182_751_907_322_551e-18,
    -1.145_828_755_067_281e-19,
];

/// `(1 − g² − 3g′²)/(1 − g²)^{3/2} = t·Σ a_k t^{2k}`; the first six carry a
/// factor √3 applied at use.
const A_SERIES_RATIONAL: [f64; 6] = [
    1.0 / 15.0,
    1.0 / 175.0,
    4.0 / 23_625.0,
    -1.0 / 218_295.0,
    -226.0 / 354_729_375.0,
    -1424.0 / 62_077_640_625.0,
];
const A_SERIES_TAIL: [f64; 7] = [
    3.923_940_757_238_237e-10,
    1.074_071_852_766_276_2e-10,
    4.687_786_076_753_417e-12,
    1.129_546_314_890_196_8e-14,
    -9.320_625_162_185_633e-15,
    -4.975_136_719_489_505e-16,
    -5.825_009_292_221_867e-18,
];

/// Slack allowed above `|R*| = 1` before it is reported as a domain error.
pub const RSTAR_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CgQuadratureConfig {
    /// Below this, series replace the closed forms.
    pub t0: f64,
    /// Upper limit of the explicit quadrature, rounded to a multiple of π.
    pub t_max: f64,
    pub abs_tol: f64,
    /// 0: no tail; 1: `c/t²` envelope; 2: `c/t² + d/t³`.
    pub tail_order: u32,
}

impl Default for CgQuadratureConfig {
    fn default() -> Self {
        Self {
            t0: 0.05,
            t_max: 1e4,
            abs_tol: 1e-8,
            tail_order: 2,
        }
    }
}

impl CgQuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t0 > 0.0 && self.t0 < 1.0 && self.t_max > 1.0 && self.t_max.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "need 0 < t0 < 1 < t_max, got t0 = {}, t_max = {}",
                self.t0, self.t_max
            )));
        }
        if !(self.abs_tol > 0.0) {
            return Err(Error::InvalidArgument("abs_tol must be positive".into()));
        }
        if self.tail_order > 2 {
            return Err(Error::InvalidArgument("tail_order must be 0, 1 or 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralFunctions {
    pub t: f64,
    pub g: f64,
    pub g1: f64,
    pub g2: f64,
}

fn even_series(coeffs: &[f64], t2: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * t2 + c)
}

/// `g`, `g′`, `g″` for `t ≥ 0`; Taylor series of degree 10 below `t0`.
pub fn g_funcs_with(t: f64, t0: f64) -> SpectralFunctions {
    if t < t0 {
        // sin t / t = Σ (−1)^k t^{2k} / (2k+1)!
        let t2 = t * t;
        let mut g = 0.0;
        let mut g1 = 0.0;
        let mut g2 = 0.0;
        let mut fact = 1.0; // (2k+1)!
        for k in 0..=5 {
            if k > 0 {
                fact *= (2 * k) as f64 * (2 * k + 1) as f64;
            }
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let c = sign / fact;
            let kk = (2 * k) as f64;
            g += c * t2.powi(k);
            if k >= 1 {
                g1 += c * kk * t.powi(2 * k - 1);
                g2 += c * kk * (kk - 1.0) * t.powi(2 * k - 2);
            }
        }
        SpectralFunctions { t, g, g1, g2 }
    } else {
        let (s, c) = t.sin_cos();
        let t2 = t * t;
        SpectralFunctions {
            t,
            g: s / t,
            g1: (t * c - s) / t2,
            g2: -s / t - 2.0 * c / t2 + 2.0 * s / (t2 * t),
        }
    }
}

pub fn g_funcs(t: f64) -> SpectralFunctions {
    g_funcs_with(t, CgQuadratureConfig::default().t0)
}

/// `(1 − g, g′, g″)` to full relative precision: a long Taylor series below
/// 1 (where the closed forms cancel), the closed forms above.
fn accurate_parts(t: f64) -> (f64, f64, f64) {
    if t >= 1.0 {
        let s = g_funcs_with(t, 0.0);
        return (1.0 - s.g, s.g1, s.g2);
    }
    let t2 = t * t;
    let (mut one_m_g, mut g1, mut g2) = (0.0, 0.0, 0.0);
    let mut fact = 1.0;
    for k in 1..=12 {
        fact *= (2 * k) as f64 * (2 * k + 1) as f64;
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let c = sign / fact;
        let kk = (2 * k) as f64;
        let p = t2.powi(k - 1);
        one_m_g -= c * p * t2;
        g1 += c * kk * p * t;
        g2 += c * kk * (kk - 1.0) * p;
    }
    (one_m_g, g1, g2)
}

pub fn rstar_with(t: f64, t0: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::NumericalDomain {
            t,
            detail: "R* is defined for t > 0".into(),
        });
    }
    let r = if t < t0 {
        even_series(&RSTAR_SERIES, t * t)
    } else {
        let (omg, g1, g2) = accurate_parts(t);
        let g = 1.0 - omg;
        let one_m_g2 = omg * (1.0 + g);
        let num = g2 * one_m_g2 + g * g1 * g1;
        let den = one_m_g2 / 3.0 - g1 * g1;
        num / den
    };
    if r.abs() > 1.0 + RSTAR_SLACK || r.is_nan() {
        return Err(Error::NumericalDomain {
            t,
            detail: format!("|R*| = {} exceeds 1", r.abs()),
        });
    }
    Ok(r.clamp(-1.0, 1.0))
}

pub fn rstar(t: f64) -> Result<f64> {
    rstar_with(t, CgQuadratureConfig::default().t0)
}

/// Denominator `(1 − g²)/3 − g′²` of `R*`; positive on `(0, ∞)`.
pub fn rstar_denominator(t: f64) -> f64 {
    let (omg, g1, _) = accurate_parts(t);
    omg * (2.0 - omg) / 3.0 - g1 * g1
}

fn amplitude(t: f64, t0: f64) -> f64 {
    if t < t0 {
        let t2 = t * t;
        let rational = even_series(&A_SERIES_RATIONAL, t2);
        let tail = even_series(&A_SERIES_TAIL, t2) * t2.powi(6);
        t * (SQRT3 * rational + tail)
    } else {
        let (omg, g1, _) = accurate_parts(t);
        let one_m_g2 = omg * (2.0 - omg);
        (one_m_g2 - 3.0 * g1 * g1) / one_m_g2.powf(1.5)
    }
}

pub fn cg_integrand_with(t: f64, t0: f64) -> Result<f64> {
    if t == 0.0 {
        return Ok(-1.0);
    }
    let r = rstar_with(t, t0)?;
    let a = amplitude(t, t0);
    Ok(a * ((1.0 - r * r).max(0.0).sqrt() + r * r.asin()) - 1.0)
}

pub fn cg_integrand(t: f64) -> Result<f64> {
    cg_integrand_with(t, CgQuadratureConfig::default().t0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CgResult {
    pub value: f64,
    pub error_estimate: f64,
    /// `∫_0^T f`, before the tail.
    pub integral: f64,
    pub tail: f64,
    /// Fitted `c` in the envelope `c/t²`.
    pub tail_coefficient: f64,
    pub t_max: f64,
    pub panels: usize,
    pub evaluations: usize,
}

impl CgResult {
    /// `c_G − 2/√3`.
    pub fn integral_term(&self) -> f64 {
        self.value - 2.0 / SQRT3
    }
}

fn panel(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<quad::QuadResult> {
    quad::integrate(f, a, b, tol, 0.0)
}

pub fn compute_cg(config: &CgQuadratureConfig) -> Result<CgResult> {
    config.validate()?;
    let t0 = config.t0;
    let k_max = (config.t_max / PI).round().max(4.0) as usize;
    let t_max = k_max as f64 * PI;

    // The integrand only fails if R* leaves [−1, 1]; surface that as an error.
    let mut failure = None;
    let cell = std::cell::RefCell::new(&mut failure);
    let f = |t: f64| match cg_integrand_with(t, t0) {
        Ok(v) => v,
        Err(e) => {
            cell.borrow_mut().get_or_insert(e);
            0.0
        }
    };

    let mut breaks = vec![0.0, t0];
    breaks.extend((1..=k_max).map(|k| k as f64 * PI));
    let per_panel = config.abs_tol * 1e-2 / breaks.len() as f64;
    let mut values = Vec::with_capacity(breaks.len());
    let mut err = 0.0;
    let mut evaluations = 0;
    for w in breaks.windows(2) {
        let r = match panel(&f, w[0], w[1], per_panel) {
            Ok(r) => r,
            Err(Error::QuadratureNonConvergence { value, error, .. }) => quad::QuadResult {
                value,
                error,
                evaluations: 0,
            },
            Err(e) => return Err(e),
        };
        values.push((w[1], r.value));
        err += r.error;
        evaluations += r.evaluations;
    }
    if let Some(e) = failure {
        return Err(e);
    }
    let integral: f64 = values.iter().map(|v| v.1).sum();

    // Envelope fit on [T/4, T/2] and [T/2, T] (π-panel aligned).
    let sum_between = |a: f64, b: f64| -> f64 {
        values
            .iter()
            .filter(|(end, _)| *end > a + 1e-9 && *end <= b + 1e-9)
            .map(|v| v.1)
            .sum()
    };
    let half = (k_max / 2) as f64 * PI;
    let quarter = (k_max / 4) as f64 * PI;
    let i_hi = sum_between(half, t_max);
    let i_lo = sum_between(quarter, half);
    // ∫_a^b c/t² = c(1/a − 1/b); ∫_a^b d/t³ = d(1/a² − 1/b²)/2.
    let w1 = |a: f64, b: f64| 1.0 / a - 1.0 / b;
    let w2 = |a: f64, b: f64| 0.5 * (1.0 / (a * a) - 1.0 / (b * b));
    let c1 = i_hi / w1(half, t_max);
    let (tail, c, tail_err) = match config.tail_order {
        0 => (0.0, 0.0, c1.abs() / t_max),
        1 => {
            let c_lo = i_lo / w1(quarter, half);
            (c1 / t_max, c1, (c1 - c_lo).abs() / t_max)
        }
        _ => {
            let (a11, a12, a21, a22) = (w1(half, t_max), w2(half, t_max), w1(quarter, half), w2(quarter, half));
            let det = a11 * a22 - a12 * a21;
            let c = (i_hi * a22 - a12 * i_lo) / det;
            let d = (a11 * i_lo - a21 * i_hi) / det;
            let tail = c / t_max + d / (2.0 * t_max * t_max);
            (tail, c, (tail - c1 / t_max).abs())
        }
    };
    let scale = 4.0 / (3.0 * PI);
    let total = integral + tail;
    let error_estimate = scale * (err + tail_err);
    let result = CgResult {
        value: scale * total + 2.0 / SQRT3,
        error_estimate,
        integral,
        tail,
        tail_coefficient: c,
        t_max,
        panels: breaks.len() - 1,
        evaluations,
    };
    if error_estimate > config.abs_tol {
        return Err(Error::QuadratureNonConvergence {
            value: result.value,
            error: error_estimate,
            tolerance: config.abs_tol,
        });
    }
    Ok(result)
}

/// Fourth-moment limits `y(α)` that enter the half-window corrector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourthMomentLimits {
    pub y1122: f64,
    pub y2211: f64,
    pub y1111: f64,
    pub y2222: f64,
}

impl FourthMomentLimits {
    /// iid coefficients with `E ξ⁴ = m4`.
    pub fn iid(m4: f64) -> Self {
        Self {
            y1122: 1.0,
            y2211: 1.0,
            y1111: m4,
            y2222: m4,
        }
    }
}

/// `y* = (y(1,1,2,2) − 1) + (y(2,2,1,1) − 1) + (y(1,1,1,1) − 3) + (y(2,2,2,2) − 3)`.
pub fn ystar(y: &FourthMomentLimits) -> f64 {
    (y.y1122 - 1.0) + (y.y2211 - 1.0) + (y.y1111 - 3.0) + (y.y2222 - 3.0)
}
