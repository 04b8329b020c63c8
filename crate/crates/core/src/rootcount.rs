//! Real-root counting on a window: FFT sign scan with a tangency audit,
//! safeguarded Newton refinement, and an independent count from the
//! approximate Kac–Rice integral `(1/2δ)∫|P′|·1{|P|<δ}`.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::ensemble::CoefficientSample;
use crate::error::{Error, Result};
use crate::polyeval::{self, EvaluationGrid, PolyEvaluator, WindowSpec, DEFAULT_OVERSAMPLE};
use crate::quad;

/// Below this |P| at an interior extremum a touching root cannot be told
/// apart from a near miss.
pub const TANGENCY_EPS: f64 = 1e-12;

/// Grid size used when the caller does not choose one: the next power of two
/// at or above `2n·8`.
pub fn default_grid_points(n: usize) -> usize {
    polyeval::min_grid_points(n, DEFAULT_OVERSAMPLE).next_power_of_two()
}

pub fn default_tol(n: usize) -> f64 {
    1e-12 * n as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TangencyResolution {
    /// The extremum stays on the side of the cell endpoints.
    NoRoot,
    /// The extremum crosses zero; two roots were added.
    TwoRoots,
    /// `|P|` at the extremum is below [`TANGENCY_EPS`].
    Unresolved,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangencyCell {
    pub cell: usize,
    pub t_left: f64,
    pub t_right: f64,
    /// Smallest `|P|` found in the cell (at the located extremum if any).
    pub min_abs_p: f64,
    pub resolution: TangencyResolution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootCountResult {
    pub count: usize,
    pub roots: Vec<f64>,
    pub residuals: Vec<f64>,
    pub tangency_flags: Vec<TangencyCell>,
    /// Set when some tangency cell stayed unresolved.
    pub uncertain: bool,
}

/// Count without refinement, for Monte Carlo loops.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RootTally {
    pub count: usize,
    pub uncertain: bool,
}

#[derive(Debug, Clone, Copy)]
enum Event {
    /// Root exactly at the half window's left end.
    ZeroAtStart { touching: bool },
    SignChange(usize),
    /// Zero at `t_{k+1}` with both neighbours on the same side: a root that
    /// touches zero within rounding and cannot be classified.
    Touch(usize),
    Tangency(usize),
}

struct Scan {
    grid: EvaluationGrid,
    events: Vec<Event>,
}

/// Magnitude under which a grid value is treated as an exact zero: the
/// transform's rounding error scaled by the coefficient mass.
fn zero_threshold(y: &[[f64; 2]]) -> f64 {
    let l1: f64 = y.iter().map(|c| c[0].abs() + c[1].abs()).sum();
    64.0 * f64::EPSILON * l1 / (y.len() as f64).sqrt()
}

fn crosses(a: f64, b: f64) -> bool {
    (a < 0.0 && b >= 0.0) || (a > 0.0 && b <= 0.0)
}

/// Smallest `|H|` over interior critical points of the cubic Hermite
/// interpolant on a cell (`∞` if it has none), and whether `H` changes sign.
fn hermite_dip(a: f64, b: f64, da: f64, db: f64, h: f64) -> (f64, bool) {
    let c1 = h * da;
    let c2 = 3.0 * (b - a) - h * (2.0 * da + db);
    let c3 = 2.0 * (a - b) + h * (da + db);
    let eval = |s: f64| a + s * (c1 + s * (c2 + s * c3));
    let mut min = f64::INFINITY;
    let mut neg = a < 0.0 || b < 0.0;
    let mut pos = a > 0.0 || b > 0.0;
    let mut visit = |s: f64| {
        if s > 0.0 && s < 1.0 {
            let v = eval(s);
            min = min.min(v.abs());
            neg |= v < 0.0;
            pos |= v > 0.0;
        }
    };
    // Critical points solve c1 + 2 c2 s + 3 c3 s² = 0.
    let (qa, qb, qc) = (3.0 * c3, 2.0 * c2, c1);
    if qa.abs() < 1e-300 {
        if qb != 0.0 {
            visit(-qc / qb);
        }
    } else {
        let disc = qb * qb - 4.0 * qa * qc;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            let q = -0.5 * (qb + qb.signum() * sq);
            visit(q / qa);
            if q != 0.0 {
                visit(qc / q);
            }
        }
    }
    (min, neg && pos)
}

fn scan(y: &[[f64; 2]], window: WindowSpec, m: usize) -> Result<Scan> {
    if y.iter().all(|c| c[0] == 0.0 && c[1] == 0.0) {
        return Err(Error::DegeneratePolynomial);
    }
    let mut grid = polyeval::grid_from_coefficients(y, window, m, DEFAULT_OVERSAMPLE)?;
    let eps = zero_threshold(y);
    for v in grid.p.iter_mut() {
        if v.abs() < eps {
            *v = 0.0;
        }
    }
    if let Some(e) = grid.endpoint.as_mut() {
        if e.0.abs() < eps {
            e.0 = 0.0;
        }
    }
    let h = grid.spacing;
    let mut events = Vec::new();
    if window == WindowSpec::Half && grid.p[0] == 0.0 {
        events.push(Event::ZeroAtStart {
            touching: grid.pprime[0].abs() < eps,
        });
    }
    for k in 0..grid.m {
        let (a, da) = grid.value_at(k);
        let (b, db) = grid.value_at(k + 1);
        if crosses(a, b) {
            // A zero with no neighbour beyond it is judged by its slope.
            let touch = b == 0.0
                && match window {
                    WindowSpec::Full => {
                        let c = grid.value_at((k + 2) % grid.m).0;
                        c != 0.0 && (c < 0.0) == (a < 0.0)
                    }
                    WindowSpec::Half if k + 2 <= grid.m => {
                        let c = grid.value_at(k + 2).0;
                        c != 0.0 && (c < 0.0) == (a < 0.0)
                    }
                    WindowSpec::Half => db.abs() < eps,
                };
            events.push(if touch { Event::Touch(k) } else { Event::SignChange(k) });
            continue;
        }
        if a == 0.0 || b == 0.0 {
            // A zero endpoint is owned by the neighbouring cell.
            continue;
        }
        // Only interior dips are audited: a small endpoint value next to a
        // root of the neighbouring cell is not a tangency.
        let (dip, changes) = hermite_dip(a, b, da, db, h);
        if changes || dip < 0.5 * h * da.abs().max(db.abs()) {
            events.push(Event::Tangency(k));
        }
    }
    Ok(Scan { grid, events })
}

/// Local view of one cell: evaluations at `t_k + u`, `u ∈ [0, h]`.
struct Cell<'a> {
    ev: &'a PolyEvaluator,
    rotor: Complex64,
    t_left: f64,
    h: f64,
}

impl<'a> Cell<'a> {
    fn new(ev: &'a PolyEvaluator, grid: &EvaluationGrid, k: usize) -> Self {
        let t_left = grid.t(k);
        Self {
            ev,
            rotor: ev.rotor(t_left),
            t_left,
            h: grid.spacing,
        }
    }

    fn at(&self, u: f64) -> (f64, f64) {
        self.ev.eval_offset(self.rotor, u)
    }
}

/// Safeguarded Newton on `[lo, hi]` where `f(lo)`, `f(hi)` bracket a root.
fn rtsafe<F: Fn(f64) -> (f64, f64)>(f: F, mut lo: f64, mut hi: f64, flo: f64, tol: f64) -> f64 {
    let lo_neg = flo < 0.0;
    let mut x = 0.5 * (lo + hi);
    let mut dx_old = hi - lo;
    let mut dx = dx_old;
    let (mut fx, mut dfx) = f(x);
    for _ in 0..200 {
        if fx == 0.0 {
            return x;
        }
        if (fx < 0.0) == lo_neg {
            lo = x;
        } else {
            hi = x;
        }
        let newton_ok = dfx != 0.0 && {
            let nx = x - fx / dfx;
            nx > lo && nx < hi && (2.0 * fx).abs() <= (dx_old * dfx).abs()
        };
        dx_old = dx;
        if newton_ok {
            dx = fx / dfx;
            x -= dx;
        } else {
            dx = 0.5 * (hi - lo);
            x = lo + dx;
        }
        if dx.abs() < tol || hi - lo < tol {
            return x;
        }
        (fx, dfx) = f(x);
    }
    x
}

/// Illinois variant of regula falsi on `g` over `[lo, hi]` with a sign change.
fn illinois<G: Fn(f64) -> f64>(g: G, mut lo: f64, mut hi: f64, mut glo: f64, mut ghi: f64, tol: f64) -> f64 {
    let mut side = 0i8;
    for _ in 0..200 {
        let x = (lo * ghi - hi * glo) / (ghi - glo);
        let x = if x > lo && x < hi { x } else { 0.5 * (lo + hi) };
        let gx = g(x);
        if gx == 0.0 || hi - lo < tol {
            return x;
        }
        if (gx < 0.0) == (glo < 0.0) {
            lo = x;
            glo = gx;
            if side == -1 {
                ghi *= 0.5;
            }
            side = -1;
        } else {
            hi = x;
            ghi = gx;
            if side == 1 {
                glo *= 0.5;
            }
            side = 1;
        }
    }
    0.5 * (lo + hi)
}

struct Inspection {
    extremum: f64,
    p_ext: f64,
    resolution: TangencyResolution,
}

/// Looks for an interior extremum of a flagged cell whose endpoints share a
/// sign, and decides whether it dips through zero.
fn inspect(cell: &Cell<'_>, a: f64, tol: f64) -> Inspection {
    let (pa, da) = cell.at(0.0);
    let (pb, db) = cell.at(cell.h);
    let (extremum, p_ext) = if (da < 0.0) != (db < 0.0) && da != 0.0 && db != 0.0 {
        let u = illinois(|u| cell.at(u).1, 0.0, cell.h, da, db, tol.min(1e-3 * cell.h));
        (u, cell.at(u).0)
    } else {
        // No derivative sign change at the ends: probe the interior.
        let mut best = if pa.abs() < pb.abs() { (0.0, pa) } else { (cell.h, pb) };
        let steps = 16;
        let mut prev = (0.0, da);
        for j in 1..=steps {
            let u = cell.h * j as f64 / steps as f64;
            let (p, d) = cell.at(u);
            if p.abs() < best.1.abs() {
                best = (u, p);
            }
            if (d < 0.0) != (prev.1 < 0.0) {
                let e = illinois(|v| cell.at(v).1, prev.0, u, prev.1, d, tol.min(1e-3 * cell.h));
                let pe = cell.at(e).0;
                if pe.abs() < best.1.abs() {
                    best = (e, pe);
                }
            }
            prev = (u, d);
        }
        best
    };
    let resolution = if p_ext.abs() < TANGENCY_EPS {
        TangencyResolution::Unresolved
    } else if (p_ext < 0.0) != (a < 0.0) {
        TangencyResolution::TwoRoots
    } else {
        TangencyResolution::NoRoot
    };
    Inspection {
        extremum,
        p_ext,
        resolution,
    }
}

/// Counts sign changes plus resolved tangencies, without refining roots.
pub fn count_only(y: &[[f64; 2]], ev: &PolyEvaluator, window: WindowSpec, m: usize) -> Result<RootTally> {
    let s = scan(y, window, m)?;
    let mut tally = RootTally {
        count: 0,
        uncertain: false,
    };
    let tol = default_tol(y.len());
    for e in &s.events {
        match *e {
            Event::ZeroAtStart { touching } => {
                tally.count += 1;
                tally.uncertain |= touching;
            }
            Event::SignChange(_) => tally.count += 1,
            Event::Touch(_) => {
                tally.count += 1;
                tally.uncertain = true;
            }
            Event::Tangency(k) => {
                let cell = Cell::new(ev, &s.grid, k);
                match inspect(&cell, s.grid.value_at(k).0, tol).resolution {
                    TangencyResolution::TwoRoots => tally.count += 2,
                    TangencyResolution::Unresolved => tally.uncertain = true,
                    TangencyResolution::NoRoot => {}
                }
            }
        }
    }
    Ok(tally)
}

/// Roots of `P_n` in the window, refined to width `tol`.
pub fn count_roots(sample: &CoefficientSample, window: WindowSpec, m: usize, tol: f64) -> Result<RootCountResult> {
    let ev = PolyEvaluator::new(&sample.y);
    count_roots_with(&sample.y, &ev, window, m, tol)
}

pub fn count_roots_default(sample: &CoefficientSample, window: WindowSpec) -> Result<RootCountResult> {
    count_roots(sample, window, default_grid_points(sample.n), default_tol(sample.n))
}

pub fn count_roots_with(
    y: &[[f64; 2]],
    ev: &PolyEvaluator,
    window: WindowSpec,
    m: usize,
    tol: f64,
) -> Result<RootCountResult> {
    let s = scan(y, window, m)?;
    if !(tol > 0.0 && tol < s.grid.spacing) {
        return Err(Error::InvalidArgument(format!(
            "tolerance {tol} must lie in (0, {})",
            s.grid.spacing
        )));
    }
    let mut roots = Vec::new();
    let mut residuals = Vec::new();
    let mut flags = Vec::new();
    let mut uncertain = false;
    let mut push = |t: f64, r: f64| {
        roots.push(t);
        residuals.push(r);
    };
    for e in &s.events {
        match *e {
            Event::ZeroAtStart { touching } => {
                push(0.0, ev.eval(0.0).0.abs());
                uncertain |= touching;
            }
            Event::SignChange(k) => {
                let cell = Cell::new(ev, &s.grid, k);
                let (u, r) = refine_in(&cell, 0.0, cell.h, s.grid.value_at(k + 1).0 == 0.0, tol);
                push(cell.t_left + u, r);
            }
            Event::Touch(k) => {
                let t = s.grid.t(k + 1);
                let r = ev.eval(t).0.abs();
                push(t, r);
                uncertain = true;
                flags.push(TangencyCell {
                    cell: k,
                    t_left: s.grid.t(k),
                    t_right: t,
                    min_abs_p: r,
                    resolution: TangencyResolution::Unresolved,
                });
            }
            Event::Tangency(k) => {
                let cell = Cell::new(ev, &s.grid, k);
                let ins = inspect(&cell, s.grid.value_at(k).0, tol);
                match ins.resolution {
                    TangencyResolution::TwoRoots => {
                        let (u1, r1) = refine_in(&cell, 0.0, ins.extremum, false, tol);
                        let (u2, r2) = refine_in(&cell, ins.extremum, cell.h, false, tol);
                        push(cell.t_left + u1, r1);
                        push(cell.t_left + u2, r2);
                    }
                    TangencyResolution::Unresolved => uncertain = true,
                    TangencyResolution::NoRoot => {}
                }
                flags.push(TangencyCell {
                    cell: k,
                    t_left: cell.t_left,
                    t_right: cell.t_left + cell.h,
                    min_abs_p: ins.p_ext.abs(),
                    resolution: ins.resolution,
                });
            }
        }
    }
    Ok(RootCountResult {
        count: roots.len(),
        roots,
        residuals,
        tangency_flags: flags,
        uncertain,
    })
}

/// Refines the root in `[lo, hi]` (local coordinates); returns `(u, |P(u)|)`.
fn refine_in(cell: &Cell<'_>, lo: f64, hi: f64, right_is_zero: bool, tol: f64) -> (f64, f64) {
    if right_is_zero {
        return (hi, cell.at(hi).0.abs());
    }
    let flo = cell.at(lo).0;
    let fhi = cell.at(hi).0;
    if flo == 0.0 || fhi == 0.0 || (flo < 0.0) == (fhi < 0.0) {
        // Direct evaluation disagrees with the grid at the noise level; the
        // root sits at whichever end is closer to zero.
        return if flo.abs() <= fhi.abs() {
            (lo, flo.abs())
        } else {
            (hi, fhi.abs())
        };
    }
    let u = rtsafe(|u| cell.at(u), lo, hi, flo, tol);
    (u, cell.at(u).0.abs())
}

/// Expected number of roots for Gaussian coefficients.
///
/// Full window: `2√((2n+1)(n+1)/6)`. Half window: half of it, by
/// stationarity of the Gaussian process in `t`.
pub fn gaussian_expectation_exact(n: usize, window: WindowSpec) -> f64 {
    let nf = n as f64;
    let full = 2.0 * ((2.0 * nf + 1.0) * (nf + 1.0) / 6.0).sqrt();
    match window {
        WindowSpec::Full => full,
        WindowSpec::Half => 0.5 * full,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KacRiceFlag {
    /// `|P| < δ` at a window endpoint.
    EndpointBelowDelta { t: f64 },
    /// `|P| + |P′| < δ` at a grid point.
    GridPointBelowDelta { t: f64 },
    /// `|P|` never reaches `δ` between two roots; the whole gap was integrated.
    GapBelowDelta { left: f64, right: f64 },
    /// A root-free tangency cell dips below `δ`.
    TangencyBelowDelta { t_left: f64, min_abs_p: f64 },
    /// The root count itself carries an unresolved tangency.
    UncertainRoots,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KacRiceResult {
    pub value: f64,
    pub delta: f64,
    pub flags: Vec<KacRiceFlag>,
}

impl KacRiceResult {
    pub fn flagged(&self) -> bool {
        !self.flags.is_empty()
    }
}

struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    fn new() -> Self {
        let (nodes, weights) = quad::gauss_legendre(15);
        Self { nodes, weights }
    }

    /// `∫_a^b |P′(base + u)| du` in local coordinates.
    fn abs_deriv(&self, ev: &PolyEvaluator, rotor: Complex64, a: f64, b: f64) -> f64 {
        let c = 0.5 * (a + b);
        let r = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * ev.eval_offset(rotor, c + r * x).1.abs())
            .sum::<f64>()
            * r
    }

    /// Same on `[a, b]` split into `pieces` equal panels.
    fn abs_deriv_split(&self, ev: &PolyEvaluator, rotor: Complex64, a: f64, b: f64, pieces: usize) -> f64 {
        let w = (b - a) / pieces as f64;
        (0..pieces)
            .map(|j| self.abs_deriv(ev, rotor, a + j as f64 * w, a + (j + 1) as f64 * w))
            .sum()
    }
}

/// First `u ∈ (0, reach]` with `|P(root + dir·u)| = δ`, given that
/// `|P| ≥ δ` at `reach`.
fn band_edge(ev: &PolyEvaluator, rotor: Complex64, dir: f64, reach: f64, delta: f64) -> f64 {
    let far = ev.eval_offset(rotor, dir * reach).0;
    let target = delta.copysign(far);
    let g = |u: f64| {
        let (p, dp) = ev.eval_offset(rotor, dir * u);
        (p - target, dir * dp)
    };
    let g0 = ev.eval_offset(rotor, 0.0).0 - target;
    // Start from the linearization, then bracket outwards.
    let slope = ev.eval_offset(rotor, 0.0).1.abs().max(1e-300);
    let mut hi = (4.0 * delta / slope).min(reach);
    while hi < reach && (g(hi).0 < 0.0) == (g0 < 0.0) {
        hi = (hi * 4.0).min(reach);
    }
    let tol = 1e-15 * reach.max(1e-300) + 1e-4 * delta / slope;
    rtsafe(g, 0.0, hi, g0, tol.min(1e-3 * hi))
}

/// Approximate Kac–Rice count `(1/2δ)∫_window |P′|·1{|P|<δ} dt`.
pub fn count_kacrice(sample: &CoefficientSample, window: WindowSpec, delta: f64) -> Result<KacRiceResult> {
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument(format!("delta must be positive, got {delta}")));
    }
    let n = sample.n;
    let ev = PolyEvaluator::new(&sample.y);
    let rc = count_roots_with(&sample.y, &ev, window, default_grid_points(n), default_tol(n))?;
    let grid = polyeval::grid_from_coefficients(&sample.y, window, default_grid_points(n), DEFAULT_OVERSAMPLE)?;
    let gl = GaussLegendre::new();
    let mut flags = Vec::new();
    if rc.uncertain {
        flags.push(KacRiceFlag::UncertainRoots);
    }
    for k in 0..grid.m {
        if grid.p[k].abs() + grid.pprime[k].abs() < delta {
            flags.push(KacRiceFlag::GridPointBelowDelta { t: grid.t(k) });
        }
    }
    let (w_start, w_end) = (window.start(n), window.end(n));
    let period = window.length(n);
    let periodic = window == WindowSpec::Full;
    if !periodic {
        for t in [w_start, w_end] {
            if ev.eval(t).0.abs() < delta {
                flags.push(KacRiceFlag::EndpointBelowDelta { t });
            }
        }
    }

    let roots = &rc.roots;
    let r = roots.len();
    // Peak of |P| strictly between consecutive roots, located on the grid.
    let grid_index = |t: f64| ((t - grid.start) / grid.spacing).floor() as i64;
    let peak_between = |left: f64, right: f64| -> Option<f64> {
        let (mut best_t, mut best) = (None, 0.0);
        let mut k = grid_index(left) + 1;
        let end = grid_index(right);
        while k <= end {
            let idx = k.rem_euclid(grid.m as i64) as usize;
            let t = grid.start + k as f64 * grid.spacing;
            if t > left && t < right && grid.p[idx].abs() > best {
                best = grid.p[idx].abs();
                best_t = Some(t);
            }
            k += 1;
        }
        if best < delta {
            let mid = 0.5 * (left + right);
            let pm = ev.eval(mid).0.abs();
            if pm >= delta && pm > best {
                return Some(mid);
            }
            return if best >= delta { best_t } else { None };
        }
        best_t
    };

    let mut total = 0.0;
    let mut merged_with_next = vec![false; r];
    for j in 0..r {
        let root = roots[j];
        let rotor = ev.rotor(root);
        // Right side.
        let right_reach = if j + 1 < r {
            Some(roots[j + 1])
        } else if periodic && r > 0 {
            Some(roots[0] + period)
        } else {
            None
        };
        let right = match right_reach {
            Some(next) => match peak_between(root, next) {
                Some(peak) => Some(band_edge(&ev, rotor, 1.0, peak - root, delta)),
                None => {
                    if !merged_with_next[j] {
                        flags.push(KacRiceFlag::GapBelowDelta { left: root, right: next });
                        total += gl.abs_deriv_split(&ev, rotor, 0.0, next - root, 16) / (2.0 * delta);
                        if j + 1 < r {
                            merged_with_next[j + 1] = true;
                        } else if r > 0 {
                            merged_with_next[0] = true;
                        }
                    }
                    None
                }
            },
            None => {
                let reach = w_end - root;
                if reach <= 0.0 {
                    Some(0.0)
                } else if ev.eval(w_end).0.abs() >= delta {
                    Some(band_edge(&ev, rotor, 1.0, reach, delta))
                } else {
                    Some(reach)
                }
            }
        };
        // Left side.
        let left_reach = if j > 0 {
            Some(roots[j - 1])
        } else if periodic && r > 0 {
            Some(roots[r - 1] - period)
        } else {
            None
        };
        let left = match left_reach {
            Some(prev) => peak_between(prev, root).map(|peak| band_edge(&ev, rotor, -1.0, root - peak, delta)),
            None => {
                let reach = root - w_start;
                if reach <= 0.0 {
                    Some(0.0)
                } else if ev.eval(w_start).0.abs() >= delta {
                    Some(band_edge(&ev, rotor, -1.0, reach, delta))
                } else {
                    Some(reach)
                }
            }
        };
        if let Some(u) = right {
            total += gl.abs_deriv(&ev, rotor, 0.0, u) / (2.0 * delta);
        }
        if let Some(u) = left {
            total += gl.abs_deriv(&ev, rotor, -u, 0.0) / (2.0 * delta);
        }
    }

    // Root-free dips below δ.
    for cell in rc.tangency_flags.iter().filter(|c| c.resolution == TangencyResolution::NoRoot) {
        if cell.min_abs_p >= delta {
            continue;
        }
        flags.push(KacRiceFlag::TangencyBelowDelta {
            t_left: cell.t_left,
            min_abs_p: cell.min_abs_p,
        });
        total += dip_integral(&ev, &gl, cell, delta);
    }

    Ok(KacRiceResult {
        value: total,
        delta,
        flags,
    })
}

/// `(1/2δ)∫|P′|` over the part of a root-free cell where `|P| < δ`.
fn dip_integral(ev: &PolyEvaluator, gl: &GaussLegendre, cell: &TangencyCell, delta: f64) -> f64 {
    let h = cell.t_right - cell.t_left;
    let rotor = ev.rotor(cell.t_left);
    let tol = default_tol(ev.n()).min(1e-3 * h);
    // Re-locate the extremum by sampling and Illinois on P′.
    let steps = 32;
    let mut ext = 0.0;
    let mut best = f64::INFINITY;
    for j in 0..=steps {
        let u = h * j as f64 / steps as f64;
        let p = ev.eval_offset(rotor, u).0.abs();
        if p < best {
            best = p;
            ext = u;
        }
    }
    let lo = (ext - h / steps as f64).max(0.0);
    let hi = (ext + h / steps as f64).min(h);
    let (dlo, dhi) = (ev.eval_offset(rotor, lo).1, ev.eval_offset(rotor, hi).1);
    if (dlo < 0.0) != (dhi < 0.0) {
        ext = illinois(|u| ev.eval_offset(rotor, u).1, lo, hi, dlo, dhi, tol);
    }
    let p_ext = ev.eval_offset(rotor, ext).0;
    if p_ext.abs() >= delta {
        return 0.0;
    }
    let edge = |dir: f64, reach: f64| -> f64 {
        let far = ev.eval_offset(rotor, ext + dir * reach).0;
        if far.abs() < delta {
            return reach;
        }
        let target = delta.copysign(p_ext);
        let g = |u: f64| {
            let (p, dp) = ev.eval_offset(rotor, ext + dir * u);
            (p - target, dir * dp)
        };
        rtsafe(g, 0.0, reach, p_ext - target, tol)
    };
    let right = edge(1.0, h - ext);
    let left = edge(-1.0, ext);
    gl.abs_deriv_split(ev, rotor, ext - left, ext + right, 4) / (2.0 * delta)
}

/// Writes `trial_index,root,residual` rows.
pub fn write_roots_csv<W: Write>(out: &mut W, trial_index: u64, result: &RootCountResult, header: bool) -> std::io::Result<()> {
    if header {
        writeln!(out, "trial_index,root,residual")?;
    }
    for (t, r) in result.roots.iter().zip(&result.residuals) {
        writeln!(out, "{trial_index},{t:.17e},{r:.6e}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::DistributionSpec;
    use std::f64::consts::PI;

    fn single(a: f64, b: f64) -> CoefficientSample {
        CoefficientSample::from_coefficients(vec![[a, b]])
    }

    #[test]
    fn single_harmonic_has_two_roots() {
        for (a, b) in [(1.0, 0.0), (0.0, 1.0), (-0.3, 2.0), (1e-3, -1e-3)] {
            let r = count_roots_default(&single(a, b), WindowSpec::Full).unwrap();
            assert_eq!(r.count, 2, "({a}, {b})");
            let phi = b.atan2(a);
            for root in &r.roots {
                assert!(((root - phi) / PI - 0.5).rem_euclid(1.0).min(1.0 - ((root - phi) / PI - 0.5).rem_euclid(1.0)) < 1e-12);
            }
        }
    }

    #[test]
    fn cosine_roots_in_half_window() {
        let r = count_roots_default(&single(1.0, 0.0), WindowSpec::Half).unwrap();
        assert_eq!(r.count, 1);
        assert!((r.roots[0] - PI / 2.0).abs() < 1e-12);
        // sin t vanishes at both ends of [0, π].
        let r = count_roots_default(&single(0.0, 1.0), WindowSpec::Half).unwrap();
        assert_eq!(r.count, 2);
        assert_eq!(r.roots[0], 0.0);
        assert!((r.roots[1] - PI).abs() < 1e-12);
    }

    #[test]
    fn zero_sample_is_degenerate() {
        let s = CoefficientSample::from_coefficients(vec![[0.0, 0.0]; 3]);
        assert_eq!(count_roots_default(&s, WindowSpec::Full), Err(Error::DegeneratePolynomial));
    }

    #[test]
    fn tolerance_outside_cell_is_rejected() {
        let s = single(1.0, 0.0);
        assert!(count_roots(&s, WindowSpec::Full, 64, 1.0).is_err());
        assert!(count_roots(&s, WindowSpec::Full, 64, 0.0).is_err());
    }

    #[test]
    fn hermite_dip_detects_interior_minimum() {
        // a = b = 1 with slopes ∓5: H(s) = 1 − 5s + 5s², H(1/2) = −1/4.
        let (m, changes) = hermite_dip(1.0, 1.0, -5.0, 5.0, 1.0);
        assert!(changes);
        assert!((m - 0.25).abs() < 1e-15);
        // Slopes ∓4 give (1 − 2s)²: touches zero without a sign change.
        let (m, changes) = hermite_dip(1.0, 1.0, -4.0, 4.0, 1.0);
        assert!(!changes);
        assert!(m.abs() < 1e-15);
        // Monotone cell: no interior critical point.
        let (m, changes) = hermite_dip(1.0, 2.0, 1.0, 1.0, 1.0);
        assert!(!changes);
        assert_eq!(m, f64::INFINITY);
    }

    /// `Q(t) = a·cos(t/2) + cos t` shifted by `t0`, as an n = 2 sample.
    fn shifted_dip(a: f64, t0: f64) -> CoefficientSample {
        let h = 0.5 * t0;
        CoefficientSample::from_coefficients(vec![
            [a * h.cos(), a * h.sin()],
            [t0.cos(), t0.sin()],
        ])
    }

    #[test]
    fn near_double_root_inside_one_cell() {
        // With a = −1 + ε, Q ≈ ε − 3t²/8 near 0: two roots ±√(8ε/3) apart
        // from t0, both inside one grid cell, plus two more at ±4π/3.
        let eps = 1e-6;
        let r = count_roots(&shifted_dip(-1.0 + eps, 0.1), WindowSpec::Full, 64, 1e-13).unwrap();
        assert_eq!(r.count, 4);
        assert!(!r.uncertain);
        assert!(r.tangency_flags.iter().any(|c| c.resolution == TangencyResolution::TwoRoots));
        let half = (8.0 * eps / 3.0).sqrt();
        for expected in [0.1 - half, 0.1 + half] {
            assert!(r.roots.iter().any(|t| (t - expected).abs() < 1e-9), "{:?}", r.roots);
        }
        // a = −1 − ε: the dip stays above zero.
        let r = count_roots(&shifted_dip(-1.0 - eps, 0.1), WindowSpec::Full, 64, 1e-13).unwrap();
        assert_eq!(r.count, 2);
        assert!(r.tangency_flags.iter().any(|c| c.resolution == TangencyResolution::NoRoot));
    }

    #[test]
    fn exact_tangency_is_uncertain() {
        let r = count_roots(&shifted_dip(-1.0, 0.1), WindowSpec::Full, 64, 1e-13).unwrap();
        assert!(r.uncertain);
    }

    #[test]
    fn gaussian_expectation_values() {
        assert_eq!(gaussian_expectation_exact(1, WindowSpec::Full), 2.0);
        assert!((gaussian_expectation_exact(2, WindowSpec::Full) - 2.0 * 2.5f64.sqrt()).abs() < 1e-14);
        assert!((gaussian_expectation_exact(2, WindowSpec::Full) - 3.16228).abs() < 1e-5);
        assert_eq!(gaussian_expectation_exact(7, WindowSpec::Half) * 2.0, gaussian_expectation_exact(7, WindowSpec::Full));
        let n = 1_000_000;
        let ratio = gaussian_expectation_exact(n, WindowSpec::Full) / (2.0 * n as f64 / 3f64.sqrt());
        assert!((ratio - 1.0).abs() < 1e-5);
    }

    #[test]
    fn kacrice_single_harmonic() {
        let r = count_kacrice(&single(1.0, 0.0), WindowSpec::Full, 1e-6).unwrap();
        assert!((r.value - 2.0).abs() < 2e-6, "{}", r.value);
        assert!(!r.flagged());
    }

    #[test]
    fn kacrice_large_delta_is_flagged() {
        let s = DistributionSpec::Gaussian.sample(16, 3, 0).unwrap();
        let r = count_kacrice(&s, WindowSpec::Half, 10.0).unwrap();
        assert!(r.flagged());
    }

    #[test]
    fn kacrice_agrees_with_sign_scan() {
        for trial in 0..20 {
            let s = DistributionSpec::Gaussian.sample(32, 17, trial).unwrap();
            let c = count_roots_default(&s, WindowSpec::Full).unwrap();
            let k = count_kacrice(&s, WindowSpec::Full, 1e-6).unwrap();
            assert!((k.value - c.count as f64).abs() < 1e-3, "trial {trial}: {} vs {}", k.value, c.count);
        }
    }

    #[test]
    fn root_csv_layout() {
        let r = count_roots_default(&single(1.0, 0.0), WindowSpec::Full).unwrap();
        let mut buf = Vec::new();
        write_roots_csv(&mut buf, 7, &r, true).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "trial_index,root,residual");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("7,"));
    }
}
