//! Change of variables near a critical slope.
//!
//! Near β the gradient is mapped through a clamped copy η of the flux,
//! `v = Φ(β) − η(u_x)`, which vanishes exactly where `u_x ≥ β`. In that
//! variable the evolution becomes degenerate parabolic with diffusivity
//! `g(σ) = Φ′(η⁻¹(Φ(β) − σ))`, and `g(σ)²/σ → 2|Φ″(β)|` as `σ → 0⁺`.
//! The lower side mirrors this around α with `v¹ = η₁(u_x) − Φ(α)`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interp::HermiteSegment;
use crate::model::FluxSpec;

/// Smallest admissible distance from the ends of the open domain of `g`.
pub const SIGMA_MIN: f64 = 1e-14;

const BISECTION_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransformError {
    #[error("flux critical slopes must be finite with alpha < beta")]
    BadFlux,
    #[error("blend between flat level and flux is not monotone for this flux")]
    NonMonotoneBlend,
    #[error("{value} outside the open interval ({lo}, {hi})")]
    Domain { value: f64, lo: f64, hi: f64 },
    #[error("need at least 4 strictly decreasing positive sigmas inside the domain")]
    BadSigmas,
    #[error("g(σ)²/σ does not converge monotonically: {sequence:?}")]
    EstimationFailure { sequence: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// Near β: `v = Φ(β) − η(u_x)`.
    Upper,
    /// Near α: `v¹ = η₁(u_x) − Φ(α)`.
    Lower,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Breakpoints {
    /// Where η becomes constant on the far side of the midpoint.
    pub flat: f64,
    /// η = Φ on `[match_lo, match_hi]`.
    pub match_lo: f64,
    pub match_hi: f64,
}

/// Nondecreasing C¹ clamp of the flux around one critical slope.
#[derive(Debug, Clone)]
pub struct EtaFunction {
    side: Side,
    flux: FluxSpec,
    breakpoints: Breakpoints,
    blend: HermiteSegment,
    low_value: f64,
    high_value: f64,
}

pub fn build_eta(flux: &FluxSpec, side: Side) -> Result<EtaFunction, TransformError> {
    let (alpha, beta) = (flux.alpha(), flux.beta());
    if !(alpha.is_finite() && beta.is_finite() && alpha < beta) {
        return Err(TransformError::BadFlux);
    }
    let mid = 0.5 * (alpha + beta);
    let (breakpoints, blend, low_value, high_value) = match side {
        Side::Upper => {
            let flat = (3.0 * alpha + beta) / 4.0;
            let blend = HermiteSegment::new(flat, mid, flux.phi(flat), flux.phi(mid), 0.0, flux.dphi(mid));
            (Breakpoints { flat, match_lo: mid, match_hi: beta }, blend, flux.phi(flat), flux.phi(beta))
        }
        Side::Lower => {
            let flat = (alpha + 3.0 * beta) / 4.0;
            let blend = HermiteSegment::new(mid, flat, flux.phi(mid), flux.phi(flat), flux.dphi(mid), 0.0);
            (Breakpoints { flat, match_lo: alpha, match_hi: mid }, blend, flux.phi(alpha), flux.phi(flat))
        }
    };
    if !(blend.p1 > blend.p0) || !blend.is_monotone() {
        return Err(TransformError::NonMonotoneBlend);
    }
    Ok(EtaFunction { side, flux: flux.clone(), breakpoints, blend, low_value, high_value })
}

impl EtaFunction {
    pub fn side(&self) -> Side {
        self.side
    }

    pub fn breakpoints(&self) -> Breakpoints {
        self.breakpoints
    }

    pub fn flux(&self) -> &FluxSpec {
        &self.flux
    }

    pub fn eval(&self, s: f64) -> f64 {
        let bp = self.breakpoints;
        match self.side {
            Side::Upper => {
                if s <= bp.flat {
                    self.low_value
                } else if s < bp.match_lo {
                    self.blend.value(s)
                } else if s <= bp.match_hi {
                    self.flux.phi(s)
                } else {
                    self.high_value
                }
            }
            Side::Lower => {
                if s <= bp.match_lo {
                    self.low_value
                } else if s <= bp.match_hi {
                    self.flux.phi(s)
                } else if s < bp.flat {
                    self.blend.value(s)
                } else {
                    self.high_value
                }
            }
        }
    }

    /// Slope interval on which η is strictly increasing.
    pub fn increasing_branch(&self) -> (f64, f64) {
        let bp = self.breakpoints;
        match self.side {
            Side::Upper => (bp.flat, bp.match_hi),
            Side::Lower => (bp.match_lo, bp.flat),
        }
    }

    /// Open image `(η(lo), η(hi))` of the increasing branch.
    pub fn image(&self) -> (f64, f64) {
        (self.low_value, self.high_value)
    }
}

/// Unique slope on the increasing branch with `η(σ) = y`, by bisection.
pub fn eta_inverse(eta: &EtaFunction, y: f64) -> Result<f64, TransformError> {
    let (ylo, yhi) = eta.image();
    if !(y > ylo && y < yhi) {
        return Err(TransformError::Domain { value: y, lo: ylo, hi: yhi });
    }
    let (mut lo, mut hi) = eta.increasing_branch();
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if eta.eval(mid) < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Clone)]
enum GKind {
    FromFlux(EtaFunction),
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for GKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GKind::FromFlux(eta) => write!(f, "FromFlux({:?})", eta.side()),
            GKind::Custom(_) => write!(f, "Custom"),
        }
    }
}

/// Degenerate diffusivity in the transformed variable.
#[derive(Debug, Clone)]
pub struct GFunction {
    side: Side,
    kind: GKind,
    domain_sup: f64,
    k: f64,
}

pub fn build_g(flux: &FluxSpec, side: Side) -> Result<GFunction, TransformError> {
    let eta = build_eta(flux, side)?;
    let mid = 0.5 * (flux.alpha() + flux.beta());
    let (domain_sup, k) = match side {
        Side::Upper => (flux.phi(flux.beta()) - flux.phi(mid), (2.0 * flux.d2phi(flux.beta()).abs()).sqrt()),
        Side::Lower => (flux.phi(mid) - flux.phi(flux.alpha()), (2.0 * flux.d2phi(flux.alpha())).sqrt()),
    };
    Ok(GFunction { side, kind: GKind::FromFlux(eta), domain_sup, k })
}

impl GFunction {
    /// Arbitrary `g` on `(0, domain_sup)` with declared limit constant `k`.
    pub fn from_fn(
        side: Side,
        domain_sup: f64,
        k: f64,
        g: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { side, kind: GKind::Custom(Arc::new(g)), domain_sup, k }
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn domain_sup(&self) -> f64 {
        self.domain_sup
    }

    /// `lim g(σ)/√σ` predicted from Φ″ at the critical slope.
    pub fn k(&self) -> f64 {
        self.k
    }

    fn eval_unchecked(&self, sigma: f64) -> f64 {
        match &self.kind {
            GKind::Custom(g) => g(sigma),
            GKind::FromFlux(eta) => {
                let flux = eta.flux();
                let y = match self.side {
                    Side::Upper => flux.phi(flux.beta()) - sigma,
                    Side::Lower => flux.phi(flux.alpha()) + sigma,
                };
                let bp = eta.breakpoints();
                // the preimage lies on the matching branch where η = Φ
                let (mut lo, mut hi) = (bp.match_lo, bp.match_hi);
                while hi - lo > BISECTION_TOL {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if flux.phi(mid) < y {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                flux.dphi(0.5 * (lo + hi))
            }
        }
    }

    pub fn eval(&self, sigma: f64) -> Result<f64, TransformError> {
        if !(sigma > 0.0 && sigma < self.domain_sup) {
            return Err(TransformError::Domain { value: sigma, lo: 0.0, hi: self.domain_sup });
        }
        Ok(self.eval_unchecked(sigma))
    }

    /// `g` with σ clamped to `[SIGMA_MIN, domain_sup − SIGMA_MIN]`.
    pub fn eval_clamped(&self, sigma: f64) -> f64 {
        let s = sigma.clamp(SIGMA_MIN, self.domain_sup - SIGMA_MIN);
        self.eval_unchecked(s)
    }
}

/// Neville extrapolation of `(xs, ys)` to `x = 0`.
fn extrapolate_to_zero(xs: &[f64], ys: &[f64]) -> f64 {
    let mut p = ys.to_vec();
    let n = xs.len();
    for level in 1..n {
        for i in 0..n - level {
            let (xi, xj) = (xs[i], xs[i + level]);
            p[i] = (xj * p[i] - xi * p[i + 1]) / (xj - xi);
        }
    }
    p[0]
}

/// Extrapolated `lim_{σ→0⁺} g(σ)²/σ` from a decreasing sequence of sigmas.
///
/// The ratio has an expansion in powers of `√σ`, so the last four terms are
/// extrapolated polynomially in `√σ`. The tail of the raw ratios must be
/// monotone, otherwise the raw sequence is returned in the error.
pub fn g_limit_estimate(g: &GFunction, sigmas: &[f64]) -> Result<f64, TransformError> {
    if sigmas.len() < 4
        || sigmas.windows(2).any(|w| !(w[1] < w[0]))
        || sigmas.iter().any(|&s| !(s > 0.0 && s < g.domain_sup()))
    {
        return Err(TransformError::BadSigmas);
    }
    let ratios: Vec<f64> = sigmas
        .iter()
        .map(|&s| {
            let v = g.eval_unchecked(s);
            v * v / s
        })
        .collect();

    let tail = &ratios[ratios.len() - 4..];
    let noise = 1e-12 * tail.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    let diffs: Vec<f64> = tail
        .windows(2)
        .map(|w| w[1] - w[0])
        .map(|d| if d.abs() <= noise { 0.0 } else { d })
        .collect();
    let rising = diffs.iter().any(|&d| d > 0.0);
    let falling = diffs.iter().any(|&d| d < 0.0);
    let finite = ratios.iter().all(|r| r.is_finite());
    if !finite || (rising && falling) {
        return Err(TransformError::EstimationFailure { sequence: ratios });
    }
    if !rising && !falling {
        return Ok(tail[tail.len() - 1]);
    }
    let xs: Vec<f64> = sigmas[sigmas.len() - 4..].iter().map(|s| s.sqrt()).collect();
    Ok(extrapolate_to_zero(&xs, tail))
}

/// Transformed field: `Φ(β) − η(u_x)` (upper) or `η₁(u_x) − Φ(α)` (lower).
pub fn v_field(eta: &EtaFunction, ux: &[f64]) -> Vec<f64> {
    let flux = eta.flux();
    match eta.side() {
        Side::Upper => {
            let top = flux.phi(flux.beta());
            ux.iter().map(|&s| (top - eta.eval(s)).max(0.0)).collect()
        }
        Side::Lower => {
            let bottom = flux.phi(flux.alpha());
            ux.iter().map(|&s| (eta.eval(s) - bottom).max(0.0)).collect()
        }
    }
}

/// `n` log-spaced sigmas from `hi` down to `lo`.
pub fn log_spaced_sigmas(hi: f64, lo: f64, n: usize) -> Vec<f64> {
    let (lh, ll) = (hi.ln(), lo.ln());
    (0..n)
        .map(|i| (lh + (ll - lh) * i as f64 / (n - 1) as f64).exp())
        .collect()
}
