//! Evaluation of `P_n(t) = n^{-1/2} Σ y_{i1} cos(it/n) + y_{i2} sin(it/n)` and
//! its derivative, pointwise and on equispaced grids, together with the
//! basis vectors and average covariance matrices built from the phases.

use std::cell::RefCell;
use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::ensemble::CoefficientSample;
use crate::error::{Error, Result};

pub const DEFAULT_OVERSAMPLE: usize = 8;

const TWO_PI_HI: f64 = std::f64::consts::TAU;
const TWO_PI_LO: f64 = 2.449_293_598_294_706_4e-16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowSpec {
    /// One full period `(-nπ, nπ]`.
    Full,
    /// `[0, nπ]`.
    Half,
}

impl WindowSpec {
    pub fn length(self, n: usize) -> f64 {
        match self {
            Self::Full => 2.0 * PI * n as f64,
            Self::Half => PI * n as f64,
        }
    }

    pub fn start(self, n: usize) -> f64 {
        match self {
            Self::Full => -PI * n as f64,
            Self::Half => 0.0,
        }
    }

    pub fn end(self, n: usize) -> f64 {
        PI * n as f64
    }
}

impl std::str::FromStr for WindowSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "full" => Ok(Self::Full),
            "half" => Ok(Self::Half),
            other => Err(Error::InvalidArgument(format!("unknown window '{other}'"))),
        }
    }
}

impl std::fmt::Display for WindowSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Full => "full",
            Self::Half => "half",
        })
    }
}

/// `P` and `P′` on `t_k = start + k·h`, `k < M`, `h = length / M`.
///
/// For the half window the closing endpoint `nπ` is not a grid point and is
/// carried separately in `endpoint`; the full window is periodic, so
/// `t_M ≡ t_0`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationGrid {
    pub window: WindowSpec,
    pub n: usize,
    pub m: usize,
    pub start: f64,
    pub spacing: f64,
    pub p: Vec<f64>,
    pub pprime: Vec<f64>,
    pub endpoint: Option<(f64, f64)>,
}

impl EvaluationGrid {
    pub fn t(&self, k: usize) -> f64 {
        self.start + k as f64 * self.spacing
    }

    /// Values at `t_k` for `k ≤ M`, resolving the closing point.
    pub fn value_at(&self, k: usize) -> (f64, f64) {
        if k < self.m {
            (self.p[k], self.pprime[k])
        } else {
            match self.endpoint {
                Some(e) => e,
                None => (self.p[0], self.pprime[0]),
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceMatrix {
    pub dim: usize,
    pub entries: Vec<Vec<f64>>,
}

impl CovarianceMatrix {
    fn from_matrix(m: &DMatrix<f64>) -> Self {
        Self {
            dim: m.nrows(),
            entries: (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
                .collect(),
        }
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| self.entries[i][j])
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.matrix()).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Spectral norm of `self − diag(d)`.
    pub fn distance_to_diag(&self, d: &[f64]) -> f64 {
        let mut m = self.matrix();
        for (i, v) in d.iter().enumerate() {
            m[(i, i)] -= v;
        }
        SymmetricEigen::new(m)
            .eigenvalues
            .iter()
            .fold(0.0, |acc: f64, v| acc.max(v.abs()))
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.entries[i][i]).sum()
    }
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// `t / (2πn)` as an unevaluated sum `hi + lo`.
pub fn turns(t: f64, n: usize) -> (f64, f64) {
    let (dh, dl0) = two_prod(TWO_PI_HI, n as f64);
    let dl = dl0 + TWO_PI_LO * n as f64;
    let q1 = t / dh;
    let r = (-q1).mul_add(dh, t) - q1 * dl;
    (q1, r / dh)
}

/// `m·turns` reduced mod 1 to `[-1/2, 1/2]`.
pub fn reduced_turns(m: f64, turns: (f64, f64)) -> f64 {
    let (ph, pl) = two_prod(m, turns.0);
    let f = ph - ph.round();
    let frac = f + (pl + m * turns.1);
    frac - frac.round()
}

/// `m·t/n` reduced to `[-π, π]` from a precomputed `turns(t, n)`.
pub fn reduced_phase(m: f64, turns: (f64, f64)) -> f64 {
    TWO_PI_HI * reduced_turns(m, turns)
}

/// Direct, compensated evaluation of `(P(t), P′(t))`.
pub fn eval_point(sample: &CoefficientSample, t: f64) -> (f64, f64) {
    let n = sample.n;
    let tr = turns(t, n);
    let mut p = Neumaier::default();
    let mut dp = Neumaier::default();
    for (idx, y) in sample.y.iter().enumerate() {
        let i = (idx + 1) as f64;
        let (s, c) = reduced_phase(i, tr).sin_cos();
        p.add(y[0] * c);
        p.add(y[1] * s);
        let k = i / n as f64;
        dp.add(-k * y[0] * s);
        dp.add(k * y[1] * c);
    }
    let scale = 1.0 / (n as f64).sqrt();
    (p.sum() * scale, dp.sum() * scale)
}

#[derive(Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn sum(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Fast evaluator: Horner's rule in `w = e^{it/n}` on `z_i = y_{i1} − i y_{i2}`.
///
/// `P = Re Σ z_k w^k / √n` and `P′ = −Im Σ (k/n) z_k w^k / √n`.
#[derive(Debug, Clone)]
pub struct PolyEvaluator {
    n: usize,
    z: Vec<Complex64>,
    zd: Vec<Complex64>,
    scale: f64,
}

impl PolyEvaluator {
    pub fn new(y: &[[f64; 2]]) -> Self {
        let n = y.len();
        let z: Vec<Complex64> = y.iter().map(|c| Complex64::new(c[0], -c[1])).collect();
        let zd = z
            .iter()
            .enumerate()
            .map(|(i, zi)| zi * ((i + 1) as f64 / n as f64))
            .collect();
        Self {
            n,
            z,
            zd,
            scale: 1.0 / (n as f64).sqrt(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `e^{it/n}` with the phase reduced accurately.
    pub fn rotor(&self, t: f64) -> Complex64 {
        Complex64::cis(reduced_phase(1.0, turns(t, self.n)))
    }

    pub fn eval(&self, t: f64) -> (f64, f64) {
        self.eval_rotor(self.rotor(t))
    }

    /// Evaluates at `base + offset` where `rotor = self.rotor(base)`; keeps
    /// full relative precision in `offset` when it is tiny.
    pub fn eval_offset(&self, rotor: Complex64, offset: f64) -> (f64, f64) {
        self.eval_rotor(rotor * Complex64::cis(offset / self.n as f64))
    }

    fn eval_rotor(&self, w: Complex64) -> (f64, f64) {
        let mut s = Complex64::new(0.0, 0.0);
        let mut d = Complex64::new(0.0, 0.0);
        for (zk, zdk) in self.z.iter().zip(&self.zd).rev() {
            s = s * w + zk;
            d = d * w + zdk;
        }
        s *= w;
        d *= w;
        (s.re * self.scale, -d.im * self.scale)
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub fn min_grid_points(n: usize, oversample: usize) -> usize {
    2 * n * oversample
}

/// Grid values via one inverse FFT, requiring `M ≥ 2n·8`.
pub fn eval_grid(sample: &CoefficientSample, window: WindowSpec, m: usize) -> Result<EvaluationGrid> {
    eval_grid_with(sample, window, m, DEFAULT_OVERSAMPLE)
}

pub fn eval_grid_with(
    sample: &CoefficientSample,
    window: WindowSpec,
    m: usize,
    oversample: usize,
) -> Result<EvaluationGrid> {
    grid_from_coefficients(&sample.y, window, m, oversample)
}

/// Same as [`eval_grid_with`] on a raw coefficient slice.
pub fn grid_from_coefficients(
    y: &[[f64; 2]],
    window: WindowSpec,
    m: usize,
    oversample: usize,
) -> Result<EvaluationGrid> {
    let n = y.len();
    if n == 0 {
        return Err(Error::InvalidArgument("empty coefficient sample".into()));
    }
    let required = min_grid_points(n, oversample.max(1));
    if m < required {
        return Err(Error::GridTooSmall {
            n,
            points: m,
            required,
        });
    }
    // Full window: phase i t_k / n = -iπ + 2π i k / M, so pre-rotate by (-1)^i.
    // Half window: phase π i k / M, a length-2M transform truncated to M.
    let (len, rotate) = match window {
        WindowSpec::Full => (m, true),
        WindowSpec::Half => (2 * m, false),
    };
    let nf = n as f64;
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    for (idx, c) in y.iter().enumerate() {
        let i = idx + 1;
        let sign = if rotate && i % 2 == 1 { -1.0 } else { 1.0 };
        let a = Complex64::new(c[0], -c[1]) * (0.5 * sign);
        let b = a * (i as f64 / nf);
        // P spectrum (a, conj a); P′ = Re(i·B) has spectrum (i b, conj(i b)).
        // Packing P + i·P′ into one transform gives (a − b, conj(a + b)).
        buf[i % len] += a - b;
        buf[(len - i) % len] += (a + b).conj();
    }
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(len).process(&mut buf));
    let scale = 1.0 / nf.sqrt();
    let mut p = Vec::with_capacity(m);
    let mut pprime = Vec::with_capacity(m);
    for v in &buf[..m] {
        p.push(v.re * scale);
        pprime.push(v.im * scale);
    }
    let endpoint = match window {
        WindowSpec::Full => None,
        WindowSpec::Half => Some(PolyEvaluator::new(y).eval(window.end(n))),
    };
    Ok(EvaluationGrid {
        window,
        n,
        m,
        start: window.start(n),
        spacing: window.length(n) / m as f64,
        p,
        pprime,
        endpoint,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisVectors {
    pub u: [f64; 2],
    pub u_prime: [f64; 2],
    /// `(u_i(t), u_i(s))` when `s` is supplied.
    pub v: Option<[f64; 4]>,
    pub v_prime: Option<[f64; 4]>,
}

fn u_pair(n: usize, i: usize, t: f64) -> ([f64; 2], [f64; 2]) {
    let (s, c) = reduced_phase(i as f64, turns(t, n)).sin_cos();
    let k = i as f64 / n as f64;
    ([c, -k * s], [s, k * c])
}

pub fn basis_vectors(n: usize, i: usize, t: f64, s: Option<f64>) -> Result<BasisVectors> {
    if i == 0 || i > n {
        return Err(Error::InvalidArgument(format!("index {i} outside 1..={n}")));
    }
    let (u, u_prime) = u_pair(n, i, t);
    let (v, v_prime) = match s {
        Some(s) => {
            let (us, us_prime) = u_pair(n, i, s);
            (
                Some([u[0], u[1], us[0], us[1]]),
                Some([u_prime[0], u_prime[1], us_prime[0], us_prime[1]]),
            )
        }
        None => (None, None),
    };
    Ok(BasisVectors {
        u,
        u_prime,
        v,
        v_prime,
    })
}

/// Rows of `C_n(k, t)` (2×2) or `C_n(k, t, s)` (4×2, `t`-block first);
/// column `j` is the direction multiplying `y_{k,j+1}`.
pub fn c_matrix(n: usize, k: usize, t: f64, s: Option<f64>) -> Vec<[f64; 2]> {
    let (u, up) = u_pair(n, k, t);
    let mut rows = vec![[u[0], up[0]], [u[1], up[1]]];
    if let Some(s) = s {
        let (us, usp) = u_pair(n, k, s);
        rows.push([us[0], usp[0]]);
        rows.push([us[1], usp[1]]);
    }
    rows
}

/// `V_n = n⁻¹ Σ_k C_n(k) C_n(k)ᵀ`.
pub fn covariance_v(n: usize, t: f64, s: Option<f64>) -> CovarianceMatrix {
    let dim = if s.is_some() { 4 } else { 2 };
    let mut acc = DMatrix::<f64>::zeros(dim, dim);
    for k in 1..=n {
        let c = c_matrix(n, k, t, s);
        for a in 0..dim {
            for b in a..dim {
                acc[(a, b)] += c[a][0] * c[b][0] + c[a][1] * c[b][1];
            }
        }
    }
    for a in 0..dim {
        for b in a..dim {
            let v = acc[(a, b)] / n as f64;
            acc[(a, b)] = v;
            acc[(b, a)] = v;
        }
    }
    CovarianceMatrix::from_matrix(&acc)
}
