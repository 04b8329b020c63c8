//! Coefficient laws, their moments and characteristic functions, and
//! reproducible coefficient samples.
//!
//! Every law is normalized to mean zero and variance one. Samples are drawn
//! from a ChaCha stream keyed by `(seed, trial_index)`; within a trial the
//! coefficients are consumed in the order `y_11, y_12, y_21, y_22, ...`, so a
//! trial's draw never depends on which worker produced it.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;

const NORMALIZATION_TOL: f64 = 1e-12;
const SQRT3: f64 = 1.732_050_807_568_877_2;

/// A finitely supported law given by `(value, probability)` atoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct DiscreteLaw {
    atoms: Vec<(f64, f64)>,
    cumulative: Vec<f64>,
}

impl DiscreteLaw {
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidDistribution("no atoms".into()));
        }
        if let Some((v, p)) = atoms
            .iter()
            .find(|(v, p)| !v.is_finite() || !p.is_finite() || *p < 0.0)
        {
            return Err(Error::InvalidDistribution(format!(
                "atom ({v}, {p}) has a negative or non-finite entry"
            )));
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        let mean: f64 = atoms.iter().map(|(v, p)| v * p).sum();
        let second: f64 = atoms.iter().map(|(v, p)| v * v * p).sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        if mean.abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidDistribution(format!("mean is {mean}, not 0")));
        }
        if (second - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidDistribution(format!(
                "variance is {second}, not 1"
            )));
        }
        let mut acc = 0.0;
        let cumulative = atoms
            .iter()
            .map(|a| {
                acc += a.1;
                acc
            })
            .collect();
        Ok(Self { atoms, cumulative })
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    fn raw_moment(&self, k: i32) -> f64 {
        self.atoms.iter().map(|(v, p)| p * v.powi(k)).sum()
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let idx = self.cumulative.partition_point(|&c| c <= u);
        self.atoms[idx.min(self.atoms.len() - 1)].0
    }
}

impl TryFrom<Vec<(f64, f64)>> for DiscreteLaw {
    type Error = Error;
    fn try_from(atoms: Vec<(f64, f64)>) -> Result<Self> {
        Self::new(atoms)
    }
}

impl From<DiscreteLaw> for Vec<(f64, f64)> {
    fn from(law: DiscreteLaw) -> Self {
        law.atoms
    }
}

/// The law of a single coefficient ξ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "atoms")]
pub enum DistributionSpec {
    Gaussian,
    Rademacher,
    /// Uniform on `[-√3, √3]`.
    UniformUnitVariance,
    Discrete(DiscreteLaw),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentProfile {
    pub m3: f64,
    pub m4: f64,
    pub excess_kurtosis: f64,
}

impl MomentProfile {
    fn new(m3: f64, m4: f64) -> Self {
        Self {
            m3,
            m4,
            excess_kurtosis: m4 - 3.0,
        }
    }

    pub fn gaussian() -> Self {
        Self::new(0.0, 3.0)
    }

    /// `E ξ^k` for `k ≤ 4` under the mean-zero, unit-variance normalization.
    pub fn raw(&self, k: usize) -> f64 {
        match k {
            0 => 1.0,
            1 => 0.0,
            2 => 1.0,
            3 => self.m3,
            4 => self.m4,
            _ => panic!("moment order {k} not tracked"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSample {
    pub n: usize,
    /// `y[i] = (y_{i+1,1}, y_{i+1,2})`.
    pub y: Vec<[f64; 2]>,
    pub seed: u64,
    pub trial_index: u64,
}

impl CoefficientSample {
    pub fn from_coefficients(y: Vec<[f64; 2]>) -> Self {
        Self {
            n: y.len(),
            y,
            seed: 0,
            trial_index: 0,
        }
    }
}

/// Stream for one trial. Distinct trials use distinct ChaCha streams.
pub fn trial_rng(seed: u64, trial_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial_index);
    rng
}

impl DistributionSpec {
    pub fn discrete(atoms: Vec<(f64, f64)>) -> Result<Self> {
        Ok(Self::Discrete(DiscreteLaw::new(atoms)?))
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self, Self::Gaussian)
    }

    pub fn moments(&self) -> MomentProfile {
        match self {
            Self::Gaussian => MomentProfile::new(0.0, 3.0),
            Self::Rademacher => MomentProfile::new(0.0, 1.0),
            Self::UniformUnitVariance => MomentProfile::new(0.0, 9.0 / 5.0),
            Self::Discrete(law) => MomentProfile::new(law.raw_moment(3), law.raw_moment(4)),
        }
    }

    pub fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Gaussian => rng.sample(StandardNormal),
            Self::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            Self::UniformUnitVariance => SQRT3 * (2.0 * rng.random::<f64>() - 1.0),
            Self::Discrete(law) => law.draw(rng),
        }
    }

    /// Fills `out` with iid draws from the `(seed, trial_index)` stream.
    pub fn fill(&self, out: &mut [[f64; 2]], seed: u64, trial_index: u64) {
        let mut rng = trial_rng(seed, trial_index);
        for pair in out.iter_mut() {
            pair[0] = self.draw(&mut rng);
            pair[1] = self.draw(&mut rng);
        }
    }

    pub fn sample(&self, n: usize, seed: u64, trial_index: u64) -> Result<CoefficientSample> {
        if n == 0 {
            return Err(Error::InvalidArgument("n must be at least 1".into()));
        }
        let mut y = vec![[0.0; 2]; n];
        self.fill(&mut y, seed, trial_index);
        Ok(CoefficientSample {
            n,
            y,
            seed,
            trial_index,
        })
    }

    /// `E e^{iθξ}`.
    pub fn charfn(&self, theta: f64) -> Complex64 {
        match self {
            Self::Gaussian => Complex64::new((-0.5 * theta * theta).exp(), 0.0),
            Self::Rademacher => Complex64::new(theta.cos(), 0.0),
            Self::UniformUnitVariance => Complex64::new(sinc(SQRT3 * theta), 0.0),
            Self::Discrete(law) => law
                .atoms
                .iter()
                .map(|&(v, p)| Complex64::from_polar(p, theta * v))
                .sum(),
        }
    }

    /// `‖w‖_ξ² = E ‖w(ξ₁ − ξ₂)‖²_{ℝ/ℤ}` for iid copies ξ₁, ξ₂.
    ///
    /// Exact double sum for discrete laws; for continuous laws an adaptive
    /// quadrature against the density of ξ₁ − ξ₂, split at the kinks of the
    /// nearest-integer distance.
    pub fn xi_norm_sq(&self, w: f64) -> f64 {
        if w == 0.0 {
            return 0.0;
        }
        let atoms: &[(f64, f64)] = match self {
            Self::Rademacher => &[(-1.0, 0.5), (1.0, 0.5)],
            Self::Discrete(law) => &law.atoms,
            Self::Gaussian => {
                // ξ₁ − ξ₂ ~ N(0, 2); symmetric, integrate over [0, L].
                let density = |d: f64| (-0.25 * d * d).exp() / (2.0 * std::f64::consts::PI.sqrt());
                return 2.0 * continuous_xi_norm(w, 12.0, density);
            }
            Self::UniformUnitVariance => {
                // Triangular density on [-2√3, 2√3].
                let half = 2.0 * SQRT3;
                let density = move |d: f64| ((half - d.abs()) / 12.0).max(0.0);
                return 2.0 * continuous_xi_norm(w, half, density);
            }
        };
        let mut acc = 0.0;
        for &(a, pa) in atoms {
            for &(b, pb) in atoms {
                let d = dist_to_int(w * (a - b));
                acc += pa * pb * d * d;
            }
        }
        acc
    }
}

/// `∫_0^L ‖w d‖² ρ(d) dd`, with breakpoints where `w d` is a half-integer.
fn continuous_xi_norm<F: Fn(f64) -> f64>(w: f64, upper: f64, density: F) -> f64 {
    let aw = w.abs();
    let mut points = vec![0.0];
    let mut k = 0.5;
    while k / aw < upper {
        points.push(k / aw);
        k += 1.0;
    }
    points.push(upper);
    let integrand = |d: f64| {
        let r = dist_to_int(w * d);
        r * r * density(d)
    };
    match quad::integrate_breakpoints(integrand, &points, 5e-11) {
        Ok(r) => r.value,
        Err(Error::QuadratureNonConvergence { value, .. }) => value,
        Err(_) => f64::NAN,
    }
}

/// Distance from `x` to the nearest integer.
pub fn dist_to_int(x: f64) -> f64 {
    (x - x.round()).abs()
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

impl fmt::Display for DistributionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Gaussian => write!(f, "gaussian"),
            Self::Rademacher => write!(f, "rademacher"),
            Self::UniformUnitVariance => write!(f, "uniform"),
            Self::Discrete(law) => {
                write!(f, "discrete:")?;
                for (i, (v, p)) in law.atoms.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{v}:{p}")?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for DistributionSpec {
    type Err = Error;

    /// `gaussian | rademacher | uniform | discrete:v1:p1,v2:p2,...`
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => return Ok(Self::Gaussian),
            "rademacher" | "bernoulli" => return Ok(Self::Rademacher),
            "uniform" => return Ok(Self::UniformUnitVariance),
            _ => {}
        }
        let body = s
            .strip_prefix("discrete:")
            .ok_or_else(|| Error::InvalidDistribution(format!("unknown law '{s}'")))?;
        let atoms = body
            .split(',')
            .map(|atom| {
                let (v, p) = atom
                    .split_once(':')
                    .ok_or_else(|| Error::InvalidDistribution(format!("bad atom '{atom}'")))?;
                let parse = |x: &str| {
                    x.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::InvalidDistribution(format!("bad number '{x}'")))
                };
                Ok((parse(v)?, parse(p)?))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::discrete(atoms)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn skewed() -> DistributionSpec {
        // Values {-1/√2, √2} with weights 2/3, 1/3: mean 0, variance 1, m3 = 1/√2.
        DistributionSpec::discrete(vec![(-1.0 / 2f64.sqrt(), 2.0 / 3.0), (2f64.sqrt(), 1.0 / 3.0)])
            .unwrap()
    }

    #[test]
    fn builtin_moments() {
        let g = DistributionSpec::Gaussian.moments();
        assert_eq!((g.m3, g.m4, g.excess_kurtosis), (0.0, 3.0, 0.0));
        let r = DistributionSpec::Rademacher.moments();
        assert_eq!((r.m3, r.m4, r.excess_kurtosis), (0.0, 1.0, -2.0));
        let u = DistributionSpec::UniformUnitVariance.moments();
        // ∫ x⁴/(2√3) over [-√3, √3] = (√3)^4 / 5.
        assert!((u.m4 - 1.8).abs() < 1e-15);
        assert!((u.excess_kurtosis + 1.2).abs() < 1e-15);
    }

    #[test]
    fn discrete_moments_and_bounds() {
        let m = skewed().moments();
        assert!((m.m3 - 1.0 / 2f64.sqrt()).abs() < 1e-12);
        assert!(m.m4 >= m.m3 * m.m3 + 1.0 - 1e-12);
        assert_eq!(m.excess_kurtosis, m.m4 - 3.0);
    }

    #[test]
    fn rejects_unnormalized_discrete() {
        assert!(DistributionSpec::discrete(vec![(1.0, 0.5), (-1.0, 0.4)]).is_err());
        assert!(DistributionSpec::discrete(vec![(2.0, 0.5), (-2.0, 0.5)]).is_err());
        assert!(DistributionSpec::discrete(vec![(1.0, 0.5), (-0.5, 0.5)]).is_err());
        assert!(DistributionSpec::discrete(vec![(1.0, 1.5), (-1.0, -0.5)]).is_err());
    }

    #[test]
    fn parse_and_display_round_trip() {
        for s in ["gaussian", "rademacher", "uniform", "discrete:-1:0.5,1:0.5"] {
            let d: DistributionSpec = s.parse().unwrap();
            assert_eq!(d.to_string().parse::<DistributionSpec>().unwrap(), d);
        }
        assert!("cauchy".parse::<DistributionSpec>().is_err());
        assert!("discrete:1:0.5".parse::<DistributionSpec>().is_err());
    }

    #[test]
    fn serde_round_trip() {
        for d in [DistributionSpec::Gaussian, skewed()] {
            let json = serde_json::to_string(&d).unwrap();
            assert_eq!(serde_json::from_str::<DistributionSpec>(&json).unwrap(), d);
        }
    }

    #[test]
    fn rademacher_support_and_determinism() {
        let d = DistributionSpec::Rademacher;
        let a = d.sample(500, 11, 3).unwrap();
        assert!(a.y.iter().flatten().all(|&v| v == 1.0 || v == -1.0));
        let b = d.sample(500, 11, 3).unwrap();
        assert_eq!(a, b);
        let c = d.sample(500, 11, 4).unwrap();
        assert_ne!(a.y, c.y);
    }

    #[test]
    fn gaussian_sample_statistics() {
        let n = 100_000;
        let s = DistributionSpec::Gaussian.sample(n, 2024, 0).unwrap();
        let vals: Vec<f64> = s.y.iter().flatten().copied().collect();
        let m = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / m;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0);
        assert!(mean.abs() <= 4.0 / m.sqrt());
        assert!((var - 1.0).abs() <= 4.0 * (2.0 / m).sqrt());
    }

    #[test]
    fn monte_carlo_moments_within_five_se() {
        for d in [
            DistributionSpec::Gaussian,
            DistributionSpec::Rademacher,
            DistributionSpec::UniformUnitVariance,
            skewed(),
        ] {
            let mut rng = trial_rng(99, 0);
            let draws: Vec<f64> = (0..1_000_000).map(|_| d.draw(&mut rng)).collect();
            let m = d.moments();
            let n = draws.len() as f64;
            for (k, target) in [(3, m.m3), (4, m.m4)] {
                let vals: Vec<f64> = draws.iter().map(|x| x.powi(k)).collect();
                let mean = vals.iter().sum::<f64>() / n;
                let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
                let se = sd / n.sqrt();
                assert!(
                    (mean - target).abs() <= 5.0 * se + 1e-12,
                    "{d} moment {k}: {mean} vs {target}"
                );
            }
        }
    }

    #[test]
    fn charfn_values() {
        assert!((DistributionSpec::Rademacher.charfn(std::f64::consts::PI).re + 1.0).abs() < 1e-15);
        assert!((DistributionSpec::Gaussian.charfn(1.0).re - (-0.5f64).exp()).abs() < 1e-15);
        for d in [DistributionSpec::Gaussian, DistributionSpec::UniformUnitVariance, skewed()] {
            assert!((d.charfn(0.0) - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn charfn_modulus_and_conjugate_symmetry() {
        let laws = [
            DistributionSpec::Gaussian,
            DistributionSpec::Rademacher,
            DistributionSpec::UniformUnitVariance,
            skewed(),
        ];
        for d in &laws {
            for k in -200..=200 {
                let theta = k as f64 * 0.173;
                let a = d.charfn(theta);
                assert!(a.norm() <= 1.0 + 1e-14);
                assert!((d.charfn(-theta) - a.conj()).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn rademacher_xi_norm_closed_form() {
        let d = DistributionSpec::Rademacher;
        assert_eq!(d.xi_norm_sq(0.5), 0.0);
        assert!((d.xi_norm_sq(0.25) - 0.125).abs() < 1e-15);
        for &w in &[0.0, 0.1, 0.37, 1.3, -2.2] {
            let two = dist_to_int(2.0 * w);
            assert!((d.xi_norm_sq(w) - two * two / 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn xi_norm_zero_argument() {
        for d in [DistributionSpec::Gaussian, DistributionSpec::UniformUnitVariance, skewed()] {
            assert_eq!(d.xi_norm_sq(0.0), 0.0);
        }
    }

    #[test]
    fn rademacher_xi_norm_has_half_period() {
        let d = DistributionSpec::Rademacher;
        for k in 0..200 {
            let w = -3.0 + k as f64 * 0.0311;
            assert!((d.xi_norm_sq(w) - d.xi_norm_sq(w + 0.5)).abs() < 1e-14);
        }
    }

    /// Independent route: ‖z‖² = 1/12 + Σ_k (-1)^k cos(2πkz)/(π²k²), so
    /// ‖w‖_ξ² = 1/12 + Σ_k (-1)^k |φ(2πkw)|² / (π²k²).
    fn xi_norm_fourier(d: &DistributionSpec, w: f64) -> f64 {
        let pi2 = std::f64::consts::PI.powi(2);
        let mut acc = 1.0 / 12.0;
        for k in 1..200_000 {
            let kf = k as f64;
            let phi = d.charfn(2.0 * std::f64::consts::PI * kf * w).norm_sqr();
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * phi / (pi2 * kf * kf);
        }
        acc
    }

    #[test]
    fn continuous_xi_norm_matches_fourier_route() {
        for d in [DistributionSpec::Gaussian, DistributionSpec::UniformUnitVariance] {
            for &w in &[0.05, 0.2, 0.5, 1.1, 2.7] {
                let quad = d.xi_norm_sq(w);
                let fourier = xi_norm_fourier(&d, w);
                assert!((quad - fourier).abs() < 1e-9, "{d} w={w}: {quad} vs {fourier}");
            }
        }
    }

    #[test]
    fn small_w_xi_norm_is_quadratic() {
        // ‖w(ξ₁-ξ₂)‖ = |w(ξ₁-ξ₂)| when the product stays below 1/2, so the norm is 2w².
        let d = DistributionSpec::UniformUnitVariance;
        let w = 0.1; // |w d| ≤ 0.1 * 2√3 < 1/2
        assert!((d.xi_norm_sq(w) - 2.0 * w * w).abs() < 1e-10);
    }
}
