//! Direct simulation of the degenerate comparison equation
//! `v_t = g(v)(v_xx + f)` and checks of its front speed `K√C`.
//!
//! The equation is integrated through `w = √v`, which satisfies
//! `w_t = G(w)(w·w_xx + w_x² + f/2)` with `G(w) = g(w²)/w`. Unlike `v`, the
//! variable `w` has a finite slope at the edge of its support, so the front is
//! resolved by an upwind difference for `w_x²`. The support is tracked as an
//! interval and the zero state outside it is never ignited, which selects the
//! minimal solution.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fit::linear_fit;
use crate::model::FluxSpec;
use crate::solver::{Grid1D, RunStats, SimError, SimFailure, SimState, Trajectory};
use crate::transform::{build_g, GFunction, Side, TransformError, SIGMA_MIN};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LemmaError {
    #[error("K must be positive, got {0}")]
    NonPositiveK(f64),
    #[error("C must be positive, got {0}")]
    NonPositiveC(f64),
    #[error("need x1 ≤ x2 < x3 ≤ x4, got {0:?}")]
    BadInterval([f64; 4]),
    #[error("initial datum vanishes identically on (x2, x3)")]
    ZeroInitial,
    #[error("initial datum reaches {max}, outside the domain of g (sup {sup})")]
    InitialTooLarge { max: f64, sup: f64 },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Grid(#[from] SimError),
    #[error("no front at t={t}")]
    AbsentFront { t: f64 },
    #[error("empty front track")]
    EmptyTrack,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GKind {
    /// `g(σ) = K√σ`.
    SqrtExact,
    /// `g` built from the flux at β; `K` is taken from the flux.
    FromFluxUpper,
    /// `g` built from the flux at α.
    FromFluxLower,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ForcingKind {
    /// `f ≡ C`.
    Constant,
    /// `f = C + p·sin(x)·v + q·v_x`.
    Perturbed { p: f64, q: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LemmaInitial {
    /// `height·(x−x2)(x3−x)/((x3−x2)/2)²` on `(x2, x3)`.
    Parabola { height: f64 },
    /// Piecewise linear with peak `height` at the midpoint.
    Tent { height: f64 },
}

impl LemmaInitial {
    fn height(&self) -> f64 {
        match *self {
            LemmaInitial::Parabola { height } | LemmaInitial::Tent { height } => height,
        }
    }

    pub fn value(&self, x: f64, x2: f64, x3: f64) -> f64 {
        if !(x > x2 && x < x3) {
            return 0.0;
        }
        let half = 0.5 * (x3 - x2);
        match *self {
            LemmaInitial::Parabola { height } => height * (x - x2) * (x3 - x) / (half * half),
            LemmaInitial::Tent { height } => height * (1.0 - (x - 0.5 * (x2 + x3)).abs() / half),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LemmaConfig {
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub g_kind: GKind,
    #[serde(default = "default_forcing")]
    pub f_kind: ForcingKind,
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
    pub x4: f64,
    pub initial: LemmaInitial,
    pub n: usize,
    pub t_end: f64,
    pub sample_interval: f64,
    #[serde(default = "default_safety")]
    pub safety: f64,
}

fn default_forcing() -> ForcingKind {
    ForcingKind::Constant
}

fn default_safety() -> f64 {
    0.9
}

impl LemmaConfig {
    /// Canonical sqrt-exact run: `v₀ = max(0, 1 − x²)` on `[−6, 6]`.
    pub fn canonical(n: usize, t_end: f64) -> Self {
        Self {
            k: 1.0,
            c: 1.0,
            g_kind: GKind::SqrtExact,
            f_kind: ForcingKind::Constant,
            x1: -6.0,
            x2: -1.0,
            x3: 1.0,
            x4: 6.0,
            initial: LemmaInitial::Parabola { height: 1.0 },
            n,
            t_end,
            sample_interval: 0.02,
            safety: 0.9,
        }
    }

    pub fn k0(&self) -> f64 {
        self.k * self.c.sqrt()
    }

    pub fn grid(&self) -> Result<Grid1D, LemmaError> {
        Ok(Grid1D::new(self.x1, self.x4, self.n)?)
    }

    pub fn validate(&self) -> Result<(), LemmaError> {
        if !(self.k > 0.0) {
            return Err(LemmaError::NonPositiveK(self.k));
        }
        if !(self.c > 0.0) {
            return Err(LemmaError::NonPositiveC(self.c));
        }
        let xs = [self.x1, self.x2, self.x3, self.x4];
        if !(xs.iter().all(|x| x.is_finite()) && self.x1 <= self.x2 && self.x2 < self.x3 && self.x3 <= self.x4) {
            return Err(LemmaError::BadInterval(xs));
        }
        if !(self.initial.height() > 0.0) {
            return Err(LemmaError::ZeroInitial);
        }
        if !(self.t_end >= 0.0) || !(self.sample_interval > 0.0) {
            return Err(LemmaError::Invalid(format!(
                "need t_end ≥ 0 and sample_interval > 0, got {} and {}",
                self.t_end, self.sample_interval
            )));
        }
        if !(self.safety > 0.0 && self.safety <= 1.0) {
            return Err(LemmaError::Invalid(format!("safety must lie in (0, 1], got {}", self.safety)));
        }
        self.grid()?;
        Ok(())
    }
}

/// `G(w) = g(w²)/w`, continuous at `w = 0`.
enum Growth {
    Constant(f64),
    Flux(GFunction),
}

impl Growth {
    fn eval(&self, w: f64) -> f64 {
        match self {
            Growth::Constant(k) => *k,
            Growth::Flux(g) => {
                let w = w.max(SIGMA_MIN.sqrt());
                g.eval_clamped(w * w) / w
            }
        }
    }
}

fn growth(cfg: &LemmaConfig, flux: Option<&FluxSpec>) -> Result<Growth, LemmaError> {
    let side = match cfg.g_kind {
        GKind::SqrtExact => return Ok(Growth::Constant(cfg.k)),
        GKind::FromFluxUpper => Side::Upper,
        GKind::FromFluxLower => Side::Lower,
    };
    let flux = flux.ok_or_else(|| LemmaError::Invalid("g_kind from_flux_* needs a flux".into()))?;
    let g = build_g(flux, side)?;
    if cfg.initial.height() >= g.domain_sup() {
        return Err(LemmaError::InitialTooLarge { max: cfg.initial.height(), sup: g.domain_sup() });
    }
    Ok(Growth::Flux(g))
}

/// `K` of a from-flux `g`, i.e. `√(2|Φ″|)` at the matching critical slope.
pub fn flux_k(flux: &FluxSpec, g_kind: GKind) -> Option<f64> {
    match g_kind {
        GKind::SqrtExact => None,
        GKind::FromFluxUpper => Some((2.0 * flux.d2phi(flux.beta()).abs()).sqrt()),
        GKind::FromFluxLower => Some((2.0 * flux.d2phi(flux.alpha()).abs()).sqrt()),
    }
}

/// Nodes closer than this fraction of `h` to a front follow it by interpolation.
const SLAVE_FRACTION: f64 = 0.5;

#[derive(Clone, Copy, PartialEq, Eq)]
enum NodeRole {
    Outside,
    Slaved,
    Evolved,
}

struct Stepper<'a> {
    cfg: &'a LemmaConfig,
    grid: Grid1D,
    growth: Growth,
    /// `G(0)`, the front coefficient.
    g0: f64,
    w: Vec<f64>,
    xl: f64,
    xr: f64,
    role: Vec<NodeRole>,
    rate: Vec<f64>,
}

// Derivative at `x1` of the parabola through three points.
fn parabola_slope(p0: (f64, f64), p1: (f64, f64), p2: (f64, f64), at: f64) -> f64 {
    let (x0, y0) = p0;
    let (x1, y1) = p1;
    let (x2, y2) = p2;
    y0 * (2.0 * at - x1 - x2) / ((x0 - x1) * (x0 - x2))
        + y1 * (2.0 * at - x0 - x2) / ((x1 - x0) * (x1 - x2))
        + y2 * (2.0 * at - x0 - x1) / ((x2 - x0) * (x2 - x1))
}

impl Stepper<'_> {
    fn assign_roles(&mut self) {
        let band = SLAVE_FRACTION * self.grid.h();
        for i in 0..self.w.len() {
            let x = self.grid.x(i);
            self.role[i] = if !(x > self.xl && x < self.xr) {
                NodeRole::Outside
            } else if x - self.xl < band || self.xr - x < band {
                NodeRole::Slaved
            } else {
                NodeRole::Evolved
            };
        }
    }

    fn evolved_range(&self) -> Option<(usize, usize)> {
        let lo = self.role.iter().position(|&r| r == NodeRole::Evolved)?;
        let hi = self.role.iter().rposition(|&r| r == NodeRole::Evolved)?;
        Some((lo, hi))
    }

    /// Zero outside the support; slaved nodes on the segment from the front to
    /// the nearest evolved node.
    fn fill_slaved(&mut self) {
        let range = self.evolved_range();
        for i in 0..self.w.len() {
            match self.role[i] {
                NodeRole::Outside => self.w[i] = 0.0,
                NodeRole::Evolved => {}
                NodeRole::Slaved => {
                    let x = self.grid.x(i);
                    self.w[i] = match range {
                        Some((lo, _)) if i < lo => {
                            let xe = self.grid.x(lo);
                            self.w[lo] * (x - self.xl) / (xe - self.xl)
                        }
                        Some((_, hi)) if i > hi => {
                            let xe = self.grid.x(hi);
                            self.w[hi] * (self.xr - x) / (self.xr - xe)
                        }
                        _ => self.w[i],
                    };
                }
            }
        }
    }

    fn neighbours(&self, i: usize) -> ((f64, f64), (f64, f64)) {
        let left = if self.role[i - 1] == NodeRole::Evolved { (self.grid.x(i - 1), self.w[i - 1]) } else { (self.xl, 0.0) };
        let right = if self.role[i + 1] == NodeRole::Evolved { (self.grid.x(i + 1), self.w[i + 1]) } else { (self.xr, 0.0) };
        (left, right)
    }

    /// Outward slope `|w_x|` at the right (`right = true`) or left front.
    fn front_slope(&self, right: bool) -> f64 {
        let Some((lo, hi)) = self.evolved_range() else {
            return 0.0;
        };
        let (j, k, xf) = if right { (hi, hi.wrapping_sub(1), self.xr) } else { (lo, lo + 1, self.xl) };
        let pj = (self.grid.x(j), self.w[j]);
        let linear = pj.1 / (xf - pj.0).abs();
        let quad = if lo < hi && self.role[k] == NodeRole::Evolved {
            let s = parabola_slope((self.grid.x(k), self.w[k]), pj, (xf, 0.0), xf).abs();
            // the parabola can bend the wrong way on a kinked profile
            let sign_ok = if right {
                parabola_slope((self.grid.x(k), self.w[k]), pj, (xf, 0.0), xf) < 0.0
            } else {
                parabola_slope((self.grid.x(k), self.w[k]), pj, (xf, 0.0), xf) > 0.0
            };
            sign_ok.then_some(s)
        } else {
            None
        };
        quad.unwrap_or(linear)
    }

    fn front_speed(&self, slope: f64) -> f64 {
        if !(slope > 0.0) {
            return 0.0;
        }
        self.g0 * (slope * slope + 0.5 * self.cfg.c) / slope
    }

    /// Fills `rate` for evolved nodes; returns the front speeds and the stable step.
    fn rates(&mut self) -> (f64, f64, f64) {
        let n = self.w.len();
        let half_c = 0.5 * self.cfg.c;
        let mut dt = f64::INFINITY;
        for i in 1..n - 1 {
            self.rate[i] = 0.0;
            if self.role[i] != NodeRole::Evolved {
                continue;
            }
            let x = self.grid.x(i);
            let wc = self.w[i];
            let ((xa, wa), (xb, wb)) = self.neighbours(i);
            let (hl, hr) = (x - xa, xb - x);
            let back = (wc - wa) / hl;
            let fwd = (wb - wc) / hr;
            let wxx = 2.0 * (fwd - back) / (hl + hr);
            let (up, up_h) = if -back >= fwd { ((-back).max(0.0), hl) } else { (fwd.max(0.0), hr) };
            let mut half_f = half_c;
            if let ForcingKind::Perturbed { p, q } = self.cfg.f_kind {
                let wx = (hl * hl * (wb - wc) + hr * hr * (wc - wa)) / (hl * hr * (hl + hr));
                half_f += 0.5 * p * x.sin() * wc * wc + q * wc * wx;
            }
            let gw = self.growth.eval(wc);
            self.rate[i] = gw * (wc * wxx + up * up + half_f);
            let diag = gw * (2.0 * wc / (hl * hr) + 2.0 * up / up_h);
            if diag > 0.0 {
                dt = dt.min(1.0 / diag);
            }
        }
        let sr = self.front_speed(self.front_slope(true));
        let sl = self.front_speed(self.front_slope(false));
        let smax = sr.max(sl);
        if smax > 0.0 {
            dt = dt.min(0.5 * self.grid.h() / smax);
        }
        (sl, sr, self.cfg.safety * dt)
    }

    fn advance(&mut self, dt: f64, sl: f64, sr: f64) {
        for (w, r) in self.w.iter_mut().zip(&self.rate) {
            *w = (*w + dt * r).max(0.0);
        }
        self.xl = (self.xl - dt * sl).max(self.grid.a());
        self.xr = (self.xr + dt * sr).min(self.grid.b());
        self.assign_roles();
        self.fill_slaved();
    }
}

/// Explicit integration of the comparison equation with zero Dirichlet data at
/// `x1` and `x4`. Samples hold `v = w²`.
///
/// The support `(xl, xr)` is tracked explicitly. A front moves with the speed
/// `G(0)(a² + f/2)/a` that the equation imposes where `w` vanishes linearly
/// with outward slope `a`; nodes within half a cell of a front are
/// interpolated from it.
///
/// `flux` is needed only for the from-flux kinds of `g`.
pub fn simulate_lemma(cfg: &LemmaConfig, flux: Option<&FluxSpec>) -> Result<Trajectory, LemmaFailure> {
    cfg.validate().map_err(LemmaFailure::Config)?;
    let grid = cfg.grid().map_err(LemmaFailure::Config)?;
    let growth = growth(cfg, flux).map_err(LemmaFailure::Config)?;
    let n = grid.n();
    let w0: Vec<f64> = grid.nodes().map(|x| cfg.initial.value(x, cfg.x2, cfg.x3).sqrt()).collect();
    let g0 = growth.eval(0.0);
    let mut st = Stepper {
        cfg,
        grid,
        growth,
        g0,
        w: w0,
        xl: cfg.x2,
        xr: cfg.x3,
        role: vec![NodeRole::Outside; n],
        rate: vec![0.0; n],
    };
    st.assign_roles();
    if st.evolved_range().is_none() {
        return Err(LemmaFailure::Config(LemmaError::Invalid(format!(
            "support ({}, {}) holds no grid node away from its ends",
            cfg.x2, cfg.x3
        ))));
    }
    st.fill_slaved();

    let to_state = |t: f64, w: &[f64]| SimState { t, u: w.iter().map(|x| x * x).collect() };
    let mut traj = Trajectory { grid, samples: vec![to_state(0.0, &st.w)], dt_history: Vec::new(), stats: RunStats::default() };
    let mut t = 0.0;
    let mut k: u64 = 1;
    while t < cfg.t_end {
        let target = (k as f64 * cfg.sample_interval).min(cfg.t_end);
        let (sl, sr, mut dt) = st.rates();
        let landing = t + dt >= target * (1.0 - 1e-14);
        if landing {
            dt = target - t;
        }
        st.advance(dt, sl, sr);
        t += dt;
        if let Some(node) = st.w.iter().position(|v| !v.is_finite()) {
            let last_good = traj.samples.last().cloned().unwrap_or_else(|| to_state(0.0, &st.w));
            return Err(LemmaFailure::Sim(Box::new(SimFailure {
                error: SimError::BlowUp { node, t, last_good: Box::new(last_good) },
                partial: traj,
            })));
        }
        traj.dt_history.push(dt);
        traj.stats.steps += 1;
        traj.stats.min_dt = Some(traj.stats.min_dt.map_or(dt, |m| m.min(dt)));
        traj.stats.max_dt = Some(traj.stats.max_dt.map_or(dt, |m| m.max(dt)));
        if landing {
            t = target;
            traj.samples.push(to_state(t, &st.w));
            k += 1;
        }
    }
    Ok(traj)
}

#[derive(Debug, Error)]
pub enum LemmaFailure {
    #[error(transparent)]
    Config(LemmaError),
    #[error(transparent)]
    Sim(Box<SimFailure>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontTrack {
    pub times: Vec<f64>,
    pub left_front: Vec<Option<f64>>,
    pub right_front: Vec<Option<f64>>,
}

/// Default detection threshold `1e−10·max v₀`.
pub fn default_threshold(traj: &Trajectory) -> f64 {
    let max0 = traj.samples.first().map_or(0.0, |s| s.u.iter().copied().fold(0.0, f64::max));
    1e-10 * max0
}

/// Outermost ends of `{v > thresh}` per sample.
///
/// Near a front `√v` is close to linear, so the end is placed where the line
/// through the last two values of `√v` reaches `√thresh`, kept within the
/// bracketing cell.
pub fn front_track(traj: &Trajectory, thresh: f64) -> FrontTrack {
    let grid = traj.grid;
    let level = thresh.max(0.0).sqrt();
    let mut out = FrontTrack { times: Vec::new(), left_front: Vec::new(), right_front: Vec::new() };
    for s in &traj.samples {
        let v = &s.u;
        out.times.push(s.t);
        let first = v.iter().position(|&x| x > thresh);
        let last = v.iter().rposition(|&x| x > thresh);
        let (Some(i), Some(j)) = (first, last) else {
            out.left_front.push(None);
            out.right_front.push(None);
            continue;
        };
        // `inside` is the last node above threshold, `outside` the next one out
        let end = |inside: usize, outside: usize, behind: Option<usize>| {
            let (xi, xo) = (grid.x(inside), grid.x(outside));
            let wi = v[inside].sqrt();
            let frac = match behind {
                Some(b) if v[b].sqrt() > wi => (wi - level) / (v[b].sqrt() - wi),
                _ => {
                    let wo = v[outside].max(0.0).sqrt();
                    (wi - level) / (wi - wo)
                }
            };
            xi + frac.clamp(0.0, 1.0) * (xo - xi)
        };
        let n = v.len();
        let left = if i > 0 { end(i, i - 1, (i + 1 < n).then_some(i + 1)) } else { grid.a() };
        let right = if j + 1 < n { end(j, j + 1, j.checked_sub(1)) } else { grid.b() };
        out.left_front.push(Some(left));
        out.right_front.push(Some(right));
    }
    out
}

/// Tolerance `abs + per_time·t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontTolerance {
    pub abs: f64,
    pub per_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaVerdict {
    pub holds: bool,
    /// Smallest slack of either front against its bound (negative: violated).
    pub margin: f64,
    pub left_margin: f64,
    pub right_margin: f64,
    pub k0: f64,
}

/// Checks `left ≤ x2 − K√C·t + tol` and `right ≥ x3 + K√C·t − tol` at every sample.
pub fn lemma_verdict(
    track: &FrontTrack,
    x2: f64,
    x3: f64,
    k: f64,
    c: f64,
    tol: FrontTolerance,
) -> Result<LemmaVerdict, LemmaError> {
    if track.times.is_empty() {
        return Err(LemmaError::EmptyTrack);
    }
    let k0 = k * c.sqrt();
    let (mut lm, mut rm) = (f64::INFINITY, f64::INFINITY);
    for (i, &t) in track.times.iter().enumerate() {
        let (Some(l), Some(r)) = (track.left_front[i], track.right_front[i]) else {
            return Err(LemmaError::AbsentFront { t });
        };
        let tl = tol.abs + tol.per_time * t;
        lm = lm.min(x2 - k0 * t + tl - l);
        rm = rm.min(r - (x3 + k0 * t - tl));
    }
    let margin = lm.min(rm);
    Ok(LemmaVerdict { holds: margin >= 0.0, margin, left_margin: lm, right_margin: rm, k0 })
}

/// Least-squares speed of the right front over samples with `t ≥ t_from`.
pub fn right_front_speed(track: &FrontTrack, t_from: f64) -> Option<f64> {
    let (ts, xs): (Vec<f64>, Vec<f64>) = track
        .times
        .iter()
        .zip(&track.right_front)
        .filter(|(t, _)| **t >= t_from)
        .filter_map(|(&t, x)| x.map(|x| (t, x)))
        .unzip();
    linear_fit(&ts, &xs).map(|f| f.slope)
}

/// Same for the left front, reported as a leftward speed.
pub fn left_front_speed(track: &FrontTrack, t_from: f64) -> Option<f64> {
    let (ts, xs): (Vec<f64>, Vec<f64>) = track
        .times
        .iter()
        .zip(&track.left_front)
        .filter(|(t, _)| **t >= t_from)
        .filter_map(|(&t, x)| x.map(|x| (t, x)))
        .unzip();
    linear_fit(&ts, &xs).map(|f| -f.slope)
}
