//! Python bindings. Structured results come back as plain dicts and lists.

use std::collections::BTreeMap;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use ::fbdiff::config::{parse_config, parse_lemma_config, FluxConfig};
use ::fbdiff::lemma::{default_threshold, front_track, lemma_verdict, right_front_speed, simulate_lemma};
use ::fbdiff::model::{builtin_convection, builtin_flux, ConvectionSpec, FluxSpec};
use ::fbdiff::regions::{classify as classify_labels, fit_rates, track};
use ::fbdiff::solver::simulate as run_solver;
use ::fbdiff::transform::{build_g, g_limit_estimate as estimate, log_spaced_sigmas, Side};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py>(py: Python<'py>, v: &serde_json::Value) -> PyResult<Bound<'py, PyAny>> {
    let json = py.import("json")?;
    json.call_method1("loads", (v.to_string(),))
}

/// Flux Φ with its critical slopes.
#[pyclass(name = "Flux", frozen)]
struct PyFlux {
    inner: FluxSpec,
}

#[pymethods]
impl PyFlux {
    /// Builtin flux by name: perona_malik, gaussian, linear or user_table.
    #[new]
    #[pyo3(signature = (name, params = None, table = None))]
    fn new(name: &str, params: Option<BTreeMap<String, f64>>, table: Option<Vec<(f64, f64)>>) -> PyResult<Self> {
        let inner = builtin_flux(name, &params.unwrap_or_default(), table.as_deref()).map_err(value_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name().to_string()
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha()
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.inner.beta()
    }

    fn phi(&self, s: f64) -> f64 {
        self.inner.phi(s)
    }

    fn dphi(&self, s: f64) -> f64 {
        self.inner.dphi(s)
    }

    fn d2phi(&self, s: f64) -> f64 {
        self.inner.d2phi(s)
    }

    fn __repr__(&self) -> String {
        format!("Flux({}, alpha={}, beta={})", self.inner.name(), self.inner.alpha(), self.inner.beta())
    }
}

/// Convection Ψ(x, y) built for a given flux.
#[pyclass(name = "Convection", frozen)]
struct PyConvection {
    inner: ConvectionSpec,
}

#[pymethods]
impl PyConvection {
    #[new]
    #[pyo3(signature = (name, flux, params = None))]
    fn new(name: &str, flux: &PyFlux, params: Option<BTreeMap<String, f64>>) -> PyResult<Self> {
        let inner = builtin_convection(name, &params.unwrap_or_default(), &flux.inner).map_err(value_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn a(&self) -> f64 {
        self.inner.a()
    }

    #[getter]
    fn b(&self) -> f64 {
        self.inner.b()
    }

    fn psi(&self, x: f64, y: f64) -> f64 {
        self.inner.psi(x, y)
    }
}

/// `(k0, k1)` rate bounds.
#[pyfunction]
fn rates(flux: &PyFlux, conv: &PyConvection) -> PyResult<(f64, f64)> {
    ::fbdiff::model::rates(&flux.inner, &conv.inner).map_err(value_err)
}

/// Structural checks of the model; returns the validation report as a dict.
#[pyfunction]
#[pyo3(signature = (flux, conv, a, b, samples = 400, seed = 0))]
fn validate<'py>(py: Python<'py>, flux: &PyFlux, conv: &PyConvection, a: f64, b: f64, samples: usize, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    let report = ::fbdiff::model::validate(&flux.inner, &conv.inner, (a, b), samples, seed);
    to_py(py, &serde_json::to_value(report).map_err(value_err)?)
}

/// Labels `sub`, `super` or `degenerate` for each slope.
#[pyfunction]
#[pyo3(signature = (ux, flux, delta = 0.0))]
fn classify(ux: Vec<f64>, flux: &PyFlux, delta: f64) -> Vec<&'static str> {
    classify_labels(&ux, &flux.inner, delta).labels.into_iter().map(|l| l.as_str()).collect()
}

/// Extrapolated `lim g(σ)²/σ` for the flux at `side` ("upper" or "lower").
#[pyfunction]
#[pyo3(signature = (flux, side = "upper", sigma_hi = 1e-2, sigma_lo = 1e-6, count = 9))]
fn g_limit_estimate(flux: &PyFlux, side: &str, sigma_hi: f64, sigma_lo: f64, count: usize) -> PyResult<f64> {
    let side = match side {
        "upper" => Side::Upper,
        "lower" => Side::Lower,
        other => return Err(PyValueError::new_err(format!("side must be upper or lower, got {other}"))),
    };
    let g = build_g(&flux.inner, side).map_err(value_err)?;
    estimate(&g, &log_spaced_sigmas(sigma_hi, sigma_lo, count)).map_err(value_err)
}

/// Runs a configuration document (JSON text) and returns samples, interface
/// track and fitted rates.
#[pyfunction]
fn simulate<'py>(py: Python<'py>, config: &str) -> PyResult<Bound<'py, PyAny>> {
    let cfg = parse_config(config).map_err(value_err)?;
    let setup = cfg.build_setup().map_err(value_err)?;
    let traj = py.detach(|| run_solver(&setup)).map_err(|f| PyRuntimeError::new_err(f.error.to_string()))?;
    let tr = track(&traj, &setup.flux, cfg.anchors(), cfg.delta()).map_err(value_err)?;
    let fitted = ::fbdiff::model::rates(&setup.flux, &setup.conv)
        .ok()
        .and_then(|k| fit_rates(&tr, k, cfg.anchors(), cfg.fit_window(), cfg.pos_tol()).ok());
    let grid = traj.grid;
    let out = serde_json::json!({
        "x": grid.nodes().collect::<Vec<_>>(),
        "t": traj.samples.iter().map(|s| s.t).collect::<Vec<_>>(),
        "u": traj.samples.iter().map(|s| &s.u).collect::<Vec<_>>(),
        "track": tr,
        "rates": fitted,
        "steps": traj.stats.steps,
    });
    to_py(py, &out)
}

/// Runs a lemma document (JSON text) and returns fronts and the verdict.
#[pyfunction]
fn lemma<'py>(py: Python<'py>, config: &str) -> PyResult<Bound<'py, PyAny>> {
    let cfg = parse_lemma_config(config).map_err(value_err)?;
    let flux = cfg.flux.as_ref().map(FluxConfig::build).transpose().map_err(value_err)?;
    let traj = py.detach(|| simulate_lemma(&cfg.lemma, flux.as_ref())).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    let ft = front_track(&traj, cfg.threshold.unwrap_or_else(|| default_threshold(&traj)));
    let l = &cfg.lemma;
    let verdict = lemma_verdict(&ft, l.x2, l.x3, l.k, l.c, cfg.tolerance.expect("resolved")).map_err(value_err)?;
    let out = serde_json::json!({
        "fronts": ft,
        "verdict": verdict,
        "right_speed_fit": right_front_speed(&ft, 5.0 * l.sample_interval),
    });
    to_py(py, &out)
}

#[pymodule]
#[pyo3(name = "fbdiff")]
fn fbdiff_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyFlux>()?;
    m.add_class::<PyConvection>()?;
    m.add_function(wrap_pyfunction!(rates, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(g_limit_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(lemma, m)?)?;
    Ok(())
}
