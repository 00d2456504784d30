use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::interp::MonotoneCubic;
use crate::model::ModelError;

type RealFn = dyn Fn(f64) -> f64 + Send + Sync;

/// Closures for a flux supplied directly from code.
pub struct CustomFlux {
    pub phi: Box<RealFn>,
    pub dphi: Box<RealFn>,
    pub d2phi: Box<RealFn>,
}

#[derive(Clone)]
pub enum FluxKind {
    /// `λ·r/(1+r²)` with `r = s/λ`.
    PeronaMalik { lambda: f64 },
    /// `s·exp(−s²/(2K²))`.
    Gaussian { k: f64 },
    /// `Φ(s) = s`, the forward heat flux used for regression runs.
    Linear,
    Table(MonotoneCubic),
    Custom(Arc<CustomFlux>),
}

impl fmt::Debug for FluxKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FluxKind::PeronaMalik { lambda } => write!(f, "PeronaMalik {{ lambda: {lambda} }}"),
            FluxKind::Gaussian { k } => write!(f, "Gaussian {{ k: {k} }}"),
            FluxKind::Linear => write!(f, "Linear"),
            FluxKind::Table(t) => write!(f, "Table({} knots)", t.knots().len()),
            FluxKind::Custom(_) => write!(f, "Custom"),
        }
    }
}

/// A non-monotone diffusion flux Φ with critical slopes `alpha < beta`.
#[derive(Debug, Clone)]
pub struct FluxSpec {
    name: String,
    alpha: f64,
    beta: f64,
    kind: FluxKind,
}

impl FluxSpec {
    pub fn perona_malik(lambda: f64) -> Result<Self, ModelError> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(ModelError::InvalidParameter { name: "lambda".into(), value: lambda });
        }
        Ok(Self { name: "perona_malik".into(), alpha: -lambda, beta: lambda, kind: FluxKind::PeronaMalik { lambda } })
    }

    pub fn gaussian(k: f64) -> Result<Self, ModelError> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(ModelError::InvalidParameter { name: "K".into(), value: k });
        }
        Ok(Self { name: "gaussian".into(), alpha: -k, beta: k, kind: FluxKind::Gaussian { k } })
    }

    /// `Φ(s) = s`. Without declared critical slopes every gradient counts as forward.
    pub fn linear(alpha: f64, beta: f64) -> Result<Self, ModelError> {
        if !(alpha < beta) {
            return Err(ModelError::CriticalSlopeOrder { alpha, beta });
        }
        Ok(Self { name: "linear".into(), alpha, beta, kind: FluxKind::Linear })
    }

    pub fn custom(
        name: impl Into<String>,
        alpha: f64,
        beta: f64,
        phi: impl Fn(f64) -> f64 + Send + Sync + 'static,
        dphi: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d2phi: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self, ModelError> {
        if !(alpha < beta) {
            return Err(ModelError::CriticalSlopeOrder { alpha, beta });
        }
        Ok(Self {
            name: name.into(),
            alpha,
            beta,
            kind: FluxKind::Custom(Arc::new(CustomFlux {
                phi: Box::new(phi),
                dphi: Box::new(dphi),
                d2phi: Box::new(d2phi),
            })),
        })
    }

    /// Tabulated flux through a monotone cubic. `alpha` and `beta` must be
    /// table abscissae at which the data change monotonicity.
    pub fn from_table(points: &[(f64, f64)], alpha: f64, beta: f64) -> Result<Self, ModelError> {
        const MIN_POINTS: usize = 8;
        if points.len() < MIN_POINTS {
            return Err(ModelError::TableTooSmall { got: points.len(), need: MIN_POINTS });
        }
        if !(alpha < beta) {
            return Err(ModelError::CriticalSlopeOrder { alpha, beta });
        }
        let spline = MonotoneCubic::new(points)?;
        let xs = spline.knots();
        let ys = spline.values();
        let knot_tol = 1e-9 * (1.0 + alpha.abs().max(beta.abs()));
        let is_knot = |v: f64| xs.iter().any(|&x| (x - v).abs() <= knot_tol);
        if !is_knot(alpha) || !is_knot(beta) {
            return Err(ModelError::TableSignPattern(format!(
                "critical slopes alpha={alpha}, beta={beta} must be table abscissae"
            )));
        }
        // secant slopes: negative below alpha, positive inside, negative above beta
        for k in 0..xs.len() - 1 {
            let mid = 0.5 * (xs[k] + xs[k + 1]);
            let secant = ys[k + 1] - ys[k];
            let ok = if mid < alpha || mid > beta { secant < 0.0 } else { secant > 0.0 };
            if !ok {
                return Err(ModelError::TableSignPattern(format!(
                    "table secant on [{}, {}] has the wrong sign for alpha={alpha}, beta={beta}",
                    xs[k],
                    xs[k + 1]
                )));
            }
        }
        Ok(Self { name: "user_table".into(), alpha, beta, kind: FluxKind::Table(spline) })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn kind(&self) -> &FluxKind {
        &self.kind
    }

    pub fn is_tabulated(&self) -> bool {
        matches!(self.kind, FluxKind::Table(_))
    }

    /// Points where Φ″ may jump (table knots); empty for analytic fluxes.
    pub fn kinks(&self) -> &[f64] {
        match &self.kind {
            FluxKind::Table(t) => t.knots(),
            _ => &[],
        }
    }

    #[inline]
    pub fn phi(&self, s: f64) -> f64 {
        match &self.kind {
            FluxKind::PeronaMalik { lambda } => {
                let r = s / lambda;
                s / (1.0 + r * r)
            }
            FluxKind::Gaussian { k } => s * (-s * s / (2.0 * k * k)).exp(),
            FluxKind::Linear => s,
            FluxKind::Table(t) => t.value(s),
            FluxKind::Custom(c) => (c.phi)(s),
        }
    }

    #[inline]
    pub fn dphi(&self, s: f64) -> f64 {
        match &self.kind {
            FluxKind::PeronaMalik { lambda } => {
                let r2 = (s / lambda) * (s / lambda);
                let q = 1.0 + r2;
                (1.0 - r2) / (q * q)
            }
            FluxKind::Gaussian { k } => {
                let k2 = k * k;
                (-s * s / (2.0 * k2)).exp() * (1.0 - s * s / k2)
            }
            FluxKind::Linear => 1.0,
            FluxKind::Table(t) => t.derivative(s),
            FluxKind::Custom(c) => (c.dphi)(s),
        }
    }

    #[inline]
    pub fn d2phi(&self, s: f64) -> f64 {
        match &self.kind {
            FluxKind::PeronaMalik { lambda } => {
                let r = s / lambda;
                let q = 1.0 + r * r;
                2.0 * r * (r * r - 3.0) / (lambda * q * q * q)
            }
            FluxKind::Gaussian { k } => {
                let k2 = k * k;
                (-s * s / (2.0 * k2)).exp() * (s * s * s / (k2 * k2) - 3.0 * s / k2)
            }
            FluxKind::Linear => 0.0,
            FluxKind::Table(t) => t.second_derivative(s),
            FluxKind::Custom(c) => (c.d2phi)(s),
        }
    }
}

fn take_param(
    params: &BTreeMap<String, f64>,
    allowed: &[&str],
    key: &str,
    default: f64,
) -> Result<f64, ModelError> {
    if let Some(bad) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(ModelError::UnknownParameter(bad.clone()));
    }
    Ok(params.get(key).copied().unwrap_or(default))
}

/// Builds one of the named fluxes.
///
/// Recognised names: `perona_malik` (param `lambda`, default 1), `gaussian`
/// (param `K`, default 1), `user_table` (params `alpha`, `beta`, plus `table`),
/// and `linear` (optional `alpha`, `beta`; default ±∞).
pub fn builtin_flux(
    name: &str,
    params: &BTreeMap<String, f64>,
    table: Option<&[(f64, f64)]>,
) -> Result<FluxSpec, ModelError> {
    match name {
        "perona_malik" => FluxSpec::perona_malik(take_param(params, &["lambda"], "lambda", 1.0)?),
        "gaussian" => FluxSpec::gaussian(take_param(params, &["K"], "K", 1.0)?),
        "linear" => {
            let alpha = take_param(params, &["alpha", "beta"], "alpha", f64::NEG_INFINITY)?;
            let beta = take_param(params, &["alpha", "beta"], "beta", f64::INFINITY)?;
            FluxSpec::linear(alpha, beta)
        }
        "user_table" => {
            let table = table.ok_or(ModelError::MissingTable)?;
            let alpha = params.get("alpha").copied().ok_or(ModelError::MissingParameter("alpha".into()))?;
            let beta = take_param(params, &["alpha", "beta"], "beta", f64::NAN)?;
            if beta.is_nan() {
                return Err(ModelError::MissingParameter("beta".into()));
            }
            FluxSpec::from_table(table, alpha, beta)
        }
        other => Err(ModelError::UnknownFlux(other.to_string())),
    }
}
