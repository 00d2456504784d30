//! Problem data: the flux Φ, the convection term Ψ, and checks of their
//! structural hypotheses.

mod convection;
mod flux;

pub use convection::{builtin_convection, ConvectionKind, ConvectionSpec, SlopeBlend, ZeroTails};
pub use flux::{builtin_flux, FluxKind, FluxSpec};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interp::InterpError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("unknown flux `{0}` (expected perona_malik, gaussian, linear or user_table)")]
    UnknownFlux(String),
    #[error("unknown convection `{0}` (expected none, separable_linear or zero_extension)")]
    UnknownConvection(String),
    #[error("unknown model parameter `{0}`")]
    UnknownParameter(String),
    #[error("missing model parameter `{0}`")]
    MissingParameter(String),
    #[error("invalid value {value} for parameter `{name}`")]
    InvalidParameter { name: String, value: f64 },
    #[error("critical slopes must satisfy alpha < beta (got alpha={alpha}, beta={beta})")]
    CriticalSlopeOrder { alpha: f64, beta: f64 },
    #[error("user_table flux needs a `table`")]
    MissingTable,
    #[error("flux table has {got} points, at least {need} required")]
    TableTooSmall { got: usize, need: usize },
    #[error("flux table inconsistent with declared critical slopes: {0}")]
    TableSignPattern(String),
    #[error("flux table: {0}")]
    Table(#[from] InterpError),
    #[error("convection constant {which} must be negative (got {value})")]
    ConvectionSign { which: &'static str, value: f64 },
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
}

/// One failed structural check together with the sample that witnessed it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub condition: String,
    pub point: Vec<f64>,
    pub observed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelValidationReport {
    pub flux_ok: bool,
    pub convection_ok: bool,
    pub violations: Vec<Violation>,
    pub k0: Option<f64>,
    pub k1: Option<f64>,
}

impl ModelValidationReport {
    pub fn ok(&self) -> bool {
        self.flux_ok && self.convection_ok
    }
}

/// Front-speed lower bounds `k0 = √(2|A·Φ″(α)|)`, `k1 = √(2|B·Φ″(β)|)`.
pub fn rates(flux: &FluxSpec, conv: &ConvectionSpec) -> Result<(f64, f64), ModelError> {
    let (alpha, beta) = (flux.alpha(), flux.beta());
    if !(alpha.is_finite() && beta.is_finite()) {
        return Err(ModelError::Hypothesis("critical slopes must be finite".into()));
    }
    let c_alpha = flux.d2phi(alpha);
    let c_beta = flux.d2phi(beta);
    if !(c_alpha > 0.0) {
        return Err(ModelError::Hypothesis(format!("Φ″(α) > 0 required, got {c_alpha}")));
    }
    if !(c_beta < 0.0) {
        return Err(ModelError::Hypothesis(format!("Φ″(β) < 0 required, got {c_beta}")));
    }
    let k0 = (2.0 * (conv.a() * c_alpha).abs()).sqrt();
    let k1 = (2.0 * (conv.b() * c_beta).abs()).sqrt();
    Ok((k0, k1))
}

/// Tolerances for the pointwise identity checks.
#[derive(Debug, Clone, Copy)]
struct Tolerances {
    critical: f64,
    consistency: f64,
}

impl Tolerances {
    fn for_flux(flux: &FluxSpec) -> Self {
        if flux.is_tabulated() {
            Self { critical: 1e-4, consistency: 1e-4 }
        } else {
            Self { critical: 1e-8, consistency: 1e-6 }
        }
    }
}

/// `count` jittered points strictly inside `(lo, hi)`.
fn sample_open(lo: f64, hi: f64, count: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let cell = (hi - lo) / count as f64;
    (0..count)
        .map(|i| lo + cell * (i as f64 + 0.5 + rng.random_range(-0.4..0.4)))
        .collect()
}

struct Collector {
    violations: Vec<Violation>,
}

impl Collector {
    fn record(&mut self, condition: &str, point: Vec<f64>, observed: f64) {
        if !self.violations.iter().any(|v| v.condition == condition) {
            self.violations.push(Violation { condition: condition.to_string(), point, observed });
        }
    }
}

fn validate_flux(flux: &FluxSpec, samples: usize, rng: &mut ChaCha8Rng, out: &mut Collector) {
    let (alpha, beta) = (flux.alpha(), flux.beta());
    if !(alpha.is_finite() && beta.is_finite()) {
        out.record("finite_critical_slopes", vec![alpha, beta], f64::NAN);
        return;
    }
    if !(alpha < beta) {
        out.record("alpha_lt_beta", vec![alpha, beta], beta - alpha);
        return;
    }
    let tol = Tolerances::for_flux(flux);
    let radius = 10.0 * alpha.abs().max(beta.abs());

    for s in sample_open(alpha, beta, samples, rng) {
        let d = flux.dphi(s);
        if !(d > 0.0) {
            out.record("forward_interval", vec![s], d);
        }
    }
    for (lo, hi) in [(-radius, alpha), (beta, radius)] {
        if lo < hi {
            for s in sample_open(lo, hi, samples, rng) {
                let d = flux.dphi(s);
                if !(d < 0.0) {
                    out.record("backward_tails", vec![s], d);
                }
            }
        }
    }

    let d_alpha = flux.dphi(alpha);
    if !(d_alpha.abs() <= tol.critical) {
        out.record("dphi_alpha_zero", vec![alpha], d_alpha);
    }
    let d_beta = flux.dphi(beta);
    if !(d_beta.abs() <= tol.critical) {
        out.record("dphi_beta_zero", vec![beta], d_beta);
    }
    let c_alpha = flux.d2phi(alpha);
    if !(c_alpha > 0.0) {
        out.record("d2phi_alpha_positive", vec![alpha], c_alpha);
    }
    let c_beta = flux.d2phi(beta);
    if !(c_beta < 0.0) {
        out.record("d2phi_beta_negative", vec![beta], c_beta);
    }

    let h = 1e-4;
    let kinks = flux.kinks();
    for s in sample_open(-radius, radius, samples, rng) {
        let step = h * s.abs().max(1.0);
        let fd1 = (flux.phi(s + step) - flux.phi(s - step)) / (2.0 * step);
        let d1 = flux.dphi(s);
        if !((fd1 - d1).abs() <= tol.consistency * (1.0 + d1.abs())) {
            out.record("dphi_consistency", vec![s], fd1 - d1);
        }
        if kinks.iter().any(|&k| (k - s).abs() <= 2.0 * step) {
            continue;
        }
        let fd2 = (flux.dphi(s + step) - flux.dphi(s - step)) / (2.0 * step);
        let d2 = flux.d2phi(s);
        if !((fd2 - d2).abs() <= tol.consistency * (1.0 + d2.abs())) {
            out.record("d2phi_consistency", vec![s], fd2 - d2);
        }
    }
}

fn validate_convection(
    flux: &FluxSpec,
    conv: &ConvectionSpec,
    domain: (f64, f64),
    samples: usize,
    rng: &mut ChaCha8Rng,
    out: &mut Collector,
) {
    if !(conv.a() < 0.0) {
        out.record("A_negative", vec![], conv.a());
    }
    if !(conv.b() < 0.0) {
        out.record("B_negative", vec![], conv.b());
    }
    let (alpha, beta) = (flux.alpha(), flux.beta());
    let tol = 1e-8;
    let xs = sample_open(domain.0, domain.1, samples, rng);
    if alpha.is_finite() && beta.is_finite() {
        for &x in &xs {
            let va = conv.dpsi_dx(x, alpha);
            if !((va - conv.a()).abs() <= tol) {
                out.record("psi_x_alpha", vec![x, alpha], va);
            }
            let vb = conv.dpsi_dx(x, beta);
            if !((vb - conv.b()).abs() <= tol) {
                out.record("psi_x_beta", vec![x, beta], vb);
            }
        }
    }
    let radius = if alpha.is_finite() && beta.is_finite() {
        10.0 * alpha.abs().max(beta.abs())
    } else {
        10.0
    };
    let ys = sample_open(-radius, radius, samples, rng);
    for (&x, &y) in xs.iter().zip(&ys) {
        let step = 1e-4 * x.abs().max(1.0);
        let fd = (conv.psi(x + step, y) - conv.psi(x - step, y)) / (2.0 * step);
        let d = conv.dpsi_dx(x, y);
        if !((fd - d).abs() <= 1e-6 * (1.0 + d.abs())) {
            out.record("psi_x_consistency", vec![x, y], fd - d);
        }
    }
}

/// Checks every structural hypothesis on jittered sample grids.
///
/// Violations are returned as data. `samples` is clamped to at least 100 per
/// sampled interval.
pub fn validate(
    flux: &FluxSpec,
    conv: &ConvectionSpec,
    domain: (f64, f64),
    samples: usize,
    seed: u64,
) -> ModelValidationReport {
    let samples = samples.max(100);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut flux_out = Collector { violations: Vec::new() };
    validate_flux(flux, samples, &mut rng, &mut flux_out);
    let mut conv_out = Collector { violations: Vec::new() };
    validate_convection(flux, conv, domain, samples, &mut rng, &mut conv_out);

    let flux_ok = flux_out.violations.is_empty();
    let convection_ok = conv_out.violations.is_empty();
    let (k0, k1) = match rates(flux, conv) {
        Ok((k0, k1)) => (Some(k0), Some(k1)),
        Err(_) => (None, None),
    };
    let mut violations = flux_out.violations;
    violations.extend(conv_out.violations);
    ModelValidationReport { flux_ok, convection_ok, violations, k0, k1 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn pm() -> FluxSpec {
        FluxSpec::perona_malik(1.0).unwrap()
    }

    #[test]
    fn perona_malik_with_unit_constants_is_valid() {
        let flux = pm();
        let conv = ConvectionSpec::separable_linear(&flux, -1.0, -1.0).unwrap();
        let r = validate(&flux, &conv, (-4.0, 4.0), 200, 7);
        assert!(r.ok(), "{:?}", r.violations);
        assert!(r.violations.is_empty());
        assert_eq!(r.k0, Some(1.0));
        assert_eq!(r.k1, Some(1.0));
    }

    #[test]
    fn monotone_flux_fails_backward_condition() {
        let flux = FluxSpec::linear(-1.0, 1.0).unwrap();
        let conv = ConvectionSpec::separable_linear(&flux, -1.0, -1.0).unwrap();
        let r = validate(&flux, &conv, (0.0, 1.0), 100, 1);
        assert!(!r.flux_ok);
        assert!(r.convection_ok);
        assert!(r.violations.iter().any(|v| v.condition == "backward_tails"));
    }

    #[test]
    fn linear_flux_without_critical_slopes_fails() {
        let flux = builtin_flux("linear", &BTreeMap::new(), None).unwrap();
        let r = validate(&flux, &ConvectionSpec::none(), (0.0, 1.0), 100, 1);
        assert!(!r.flux_ok && !r.convection_ok);
        assert_eq!(r.k0, None);
    }

    #[test]
    fn x_dependent_convection_flagged() {
        let flux = pm();
        let conv = ConvectionSpec::custom("bad", -1.0, -1.0, |x, _| -x - 0.5 * x * x, |x, _| -1.0 - x);
        let r = validate(&flux, &conv, (-1.0, 1.0), 100, 3);
        assert!(r.flux_ok && !r.convection_ok);
        assert!(r.violations.iter().any(|v| v.condition == "psi_x_alpha"));
    }

    #[test]
    fn inconsistent_derivative_flagged() {
        let flux = FluxSpec::custom("wrong", -1.0, 1.0, |s| s / (1.0 + s * s), |s| (1.0 - s * s) / (1.0 + s * s), |_| 0.0).unwrap();
        let conv = ConvectionSpec::separable_linear(&flux, -1.0, -1.0).unwrap();
        let r = validate(&flux, &conv, (-1.0, 1.0), 100, 3);
        assert!(r.violations.iter().any(|v| v.condition == "dphi_consistency"));
        assert!(r.violations.iter().any(|v| v.condition == "d2phi_alpha_positive"));
    }

    #[test]
    fn rates_from_products() {
        let flux = pm();
        let unit = ConvectionSpec::separable_linear(&flux, -1.0, -1.0).unwrap();
        assert_eq!(rates(&flux, &unit).unwrap(), (1.0, 1.0));
        let uneven = ConvectionSpec::separable_linear(&flux, -2.0, -1.0).unwrap();
        let (k0, k1) = rates(&flux, &uneven).unwrap();
        assert!((k0 - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(k1, 1.0);
        // |A·Φ″(α)| = 2 -> k0 = 2
        let four = ConvectionSpec::separable_linear(&flux, -4.0, -1.0).unwrap();
        assert_eq!(rates(&flux, &four).unwrap().0, 2.0);
    }

    #[test]
    fn rates_reject_wrong_curvature() {
        let flux = FluxSpec::custom("flat", -1.0, 1.0, |s| s, |_| 1.0, |_| 0.0).unwrap();
        let conv = ConvectionSpec::separable_linear(&flux, -1.0, -1.0).unwrap();
        assert!(matches!(rates(&flux, &conv), Err(ModelError::Hypothesis(_))));
    }
}
