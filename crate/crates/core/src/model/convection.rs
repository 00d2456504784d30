use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::interp::HermiteSegment;
use crate::model::{FluxSpec, ModelError};

type PlaneFn = dyn Fn(f64, f64) -> f64 + Send + Sync;

pub struct CustomConvection {
    pub psi: Box<PlaneFn>,
    pub dpsi_dx: Box<PlaneFn>,
}

/// C¹ blend `h(y)` equal to `A` below α, `B` above β, cubic Hermite in between.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeBlend {
    alpha: f64,
    beta: f64,
    a: f64,
    b: f64,
    seg: HermiteSegment,
}

impl SlopeBlend {
    pub fn new(alpha: f64, beta: f64, a: f64, b: f64) -> Self {
        Self { alpha, beta, a, b, seg: HermiteSegment::new(alpha, beta, a, b, 0.0, 0.0) }
    }

    #[inline]
    pub fn eval(&self, y: f64) -> f64 {
        if y <= self.alpha {
            self.a
        } else if y >= self.beta {
            self.b
        } else {
            self.seg.value(y)
        }
    }
}

/// Flattens the blend to zero outside `[low, high]` over ramps of width `ramp`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeroTails {
    low_ramp: HermiteSegment,
    high_ramp: HermiteSegment,
}

impl ZeroTails {
    fn apply(&self, blend: &SlopeBlend, y: f64) -> f64 {
        if y >= self.high_ramp.x1 || y <= self.low_ramp.x0 {
            0.0
        } else if y > self.high_ramp.x0 {
            self.high_ramp.value(y)
        } else if y < self.low_ramp.x1 {
            self.low_ramp.value(y)
        } else {
            blend.eval(y)
        }
    }

    /// Slope beyond which Ψ is identically zero.
    pub fn y_cap_high(&self) -> f64 {
        self.high_ramp.x1
    }

    pub fn y_cap_low(&self) -> f64 {
        self.low_ramp.x0
    }
}

#[derive(Clone)]
pub enum ConvectionKind {
    None,
    SeparableLinear(SlopeBlend),
    ZeroExtension(SlopeBlend, ZeroTails),
    Custom(Arc<CustomConvection>),
}

impl fmt::Debug for ConvectionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConvectionKind::None => write!(f, "None"),
            ConvectionKind::SeparableLinear(b) => write!(f, "SeparableLinear({b:?})"),
            ConvectionKind::ZeroExtension(b, t) => write!(f, "ZeroExtension({b:?}, {t:?})"),
            ConvectionKind::Custom(_) => write!(f, "Custom"),
        }
    }
}

/// Lower-order term Ψ(x, y) together with the constants `A = Ψ_x(·, α)` and `B = Ψ_x(·, β)`.
#[derive(Debug, Clone)]
pub struct ConvectionSpec {
    name: String,
    a: f64,
    b: f64,
    kind: ConvectionKind,
}

impl ConvectionSpec {
    /// Ψ ≡ 0. Has `A = B = 0`, so it never passes model validation.
    pub fn none() -> Self {
        Self { name: "none".into(), a: 0.0, b: 0.0, kind: ConvectionKind::None }
    }

    pub fn separable_linear(flux: &FluxSpec, a: f64, b: f64) -> Result<Self, ModelError> {
        check_signs(a, b)?;
        let blend = SlopeBlend::new(flux.alpha(), flux.beta(), a, b);
        Ok(Self { name: "separable_linear".into(), a, b, kind: ConvectionKind::SeparableLinear(blend) })
    }

    pub fn zero_extension(
        flux: &FluxSpec,
        a: f64,
        b: f64,
        window: (f64, f64),
        ramp: f64,
    ) -> Result<Self, ModelError> {
        check_signs(a, b)?;
        let (alpha, beta) = (flux.alpha(), flux.beta());
        if !(window.0 <= alpha && window.1 >= beta) {
            return Err(ModelError::InvalidParameter { name: "window".into(), value: window.0 });
        }
        if !(ramp > 0.0 && ramp.is_finite()) {
            return Err(ModelError::InvalidParameter { name: "ramp".into(), value: ramp });
        }
        let blend = SlopeBlend::new(alpha, beta, a, b);
        let tails = ZeroTails {
            low_ramp: HermiteSegment::new(window.0 - ramp, window.0, 0.0, a, 0.0, 0.0),
            high_ramp: HermiteSegment::new(window.1, window.1 + ramp, b, 0.0, 0.0, 0.0),
        };
        Ok(Self { name: "zero_extension".into(), a, b, kind: ConvectionKind::ZeroExtension(blend, tails) })
    }

    pub fn custom(
        name: impl Into<String>,
        a: f64,
        b: f64,
        psi: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        dpsi_dx: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            a,
            b,
            kind: ConvectionKind::Custom(Arc::new(CustomConvection { psi: Box::new(psi), dpsi_dx: Box::new(dpsi_dx) })),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn kind(&self) -> &ConvectionKind {
        &self.kind
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, ConvectionKind::None)
    }

    #[inline]
    pub fn psi(&self, x: f64, y: f64) -> f64 {
        match &self.kind {
            ConvectionKind::None => 0.0,
            ConvectionKind::SeparableLinear(h) => x * h.eval(y),
            ConvectionKind::ZeroExtension(h, t) => x * t.apply(h, y),
            ConvectionKind::Custom(c) => (c.psi)(x, y),
        }
    }

    #[inline]
    pub fn dpsi_dx(&self, x: f64, y: f64) -> f64 {
        match &self.kind {
            ConvectionKind::None => 0.0,
            ConvectionKind::SeparableLinear(h) => h.eval(y),
            ConvectionKind::ZeroExtension(h, t) => t.apply(h, y),
            ConvectionKind::Custom(c) => (c.dpsi_dx)(x, y),
        }
    }
}

fn check_signs(a: f64, b: f64) -> Result<(), ModelError> {
    if !(a < 0.0) {
        return Err(ModelError::ConvectionSign { which: "A", value: a });
    }
    if !(b < 0.0) {
        return Err(ModelError::ConvectionSign { which: "B", value: b });
    }
    Ok(())
}

/// Builds one of the named convection terms.
///
/// `separable_linear` and `zero_extension` take `A` and `B` (both default −1);
/// `zero_extension` also takes `window_low`, `window_high` and `ramp`, which
/// default to one slope-gap `β − α` outside the critical slopes and half a gap.
pub fn builtin_convection(
    name: &str,
    params: &BTreeMap<String, f64>,
    flux: &FluxSpec,
) -> Result<ConvectionSpec, ModelError> {
    let allowed: &[&str] = match name {
        "none" => &[],
        "separable_linear" => &["A", "B"],
        "zero_extension" => &["A", "B", "window_low", "window_high", "ramp"],
        other => return Err(ModelError::UnknownConvection(other.to_string())),
    };
    if let Some(bad) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(ModelError::UnknownParameter(bad.clone()));
    }
    let get = |k: &str, d: f64| params.get(k).copied().unwrap_or(d);
    match name {
        "none" => Ok(ConvectionSpec::none()),
        "separable_linear" => ConvectionSpec::separable_linear(flux, get("A", -1.0), get("B", -1.0)),
        _ => {
            let gap = flux.beta() - flux.alpha();
            if !gap.is_finite() {
                return Err(ModelError::CriticalSlopeOrder { alpha: flux.alpha(), beta: flux.beta() });
            }
            ConvectionSpec::zero_extension(
                flux,
                get("A", -1.0),
                get("B", -1.0),
                (get("window_low", flux.alpha() - gap), get("window_high", flux.beta() + gap)),
                get("ramp", 0.5 * gap),
            )
        }
    }
}
