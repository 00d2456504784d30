//! Run definitions in JSON syntax.
//!
//! Parsing is strict: unknown keys are rejected and every constraint is
//! checked. Optional settings are filled in during parsing, so a parsed
//! configuration serializes back to a document that parses to itself.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interp::MonotoneCubic;
use crate::lemma::{FrontTolerance, LemmaConfig, LemmaError};
use crate::model::{builtin_convection, builtin_flux, ConvectionSpec, FluxSpec, ModelError};
use crate::regions::default_delta;
use crate::solver::{
    BoundaryCondition, BoundaryKind, Grid1D, InitialDatum, SimSetup, SlopeProfile, TimeControl,
};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("{field}: {message}")]
    Constraint { field: String, message: String },
    #[error("model: {0}")]
    Model(#[from] ModelError),
    #[error("lemma: {0}")]
    Lemma(#[from] LemmaError),
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

fn constraint(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Constraint { field: field.to_string(), message: message.into() }
}

fn syntax(e: serde_json::Error) -> ConfigError {
    ConfigError::Syntax { line: e.line(), column: e.column(), message: e.to_string() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluxConfig {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    /// `(s, Φ(s))` pairs for `user_table`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<(f64, f64)>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvectionConfig {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

impl Default for ConvectionConfig {
    fn default() -> Self {
        Self { name: "none".into(), params: BTreeMap::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub flux: FluxConfig,
    #[serde(default)]
    pub convection: ConvectionConfig,
    /// Refuse to simulate when model validation reports violations.
    #[serde(default = "yes")]
    pub strict: bool,
    #[serde(default = "default_validation_samples")]
    pub validation_samples: usize,
}

fn yes() -> bool {
    true
}

fn default_validation_samples() -> usize {
    400
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub a: f64,
    pub b: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialConfig {
    PiecewiseSlope {
        a1: f64,
        b1: f64,
        slope_left: f64,
        slope_mid: f64,
        slope_right: f64,
        #[serde(default)]
        smoothing: Option<f64>,
    },
    SuperInterval {
        a1: f64,
        b1: f64,
        slope_left: f64,
        slope_mid: f64,
        slope_right: f64,
        #[serde(default)]
        smoothing: Option<f64>,
    },
    Sine {
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "one_u32")]
        modes: u32,
    },
    UserTable {
        points: Vec<(f64, f64)>,
    },
}

fn one() -> f64 {
    1.0
}

fn one_u32() -> u32 {
    1
}

impl InitialConfig {
    pub fn anchors(&self) -> Option<(f64, f64)> {
        match self {
            InitialConfig::PiecewiseSlope { a1, b1, .. } | InitialConfig::SuperInterval { a1, b1, .. } => Some((*a1, *b1)),
            _ => None,
        }
    }

    fn end_slopes(&self) -> Option<(f64, f64)> {
        match self {
            InitialConfig::PiecewiseSlope { slope_left, slope_right, .. }
            | InitialConfig::SuperInterval { slope_left, slope_right, .. } => Some((*slope_left, *slope_right)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BcConfig {
    pub kind: BoundaryKind,
    pub left: f64,
    pub right: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub t_end: f64,
    pub sample_interval: f64,
    #[serde(default = "default_safety")]
    pub safety: f64,
    #[serde(default)]
    pub dt_floor: Option<f64>,
}

fn default_safety() -> f64 {
    0.9
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionsConfig {
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub pos_tol: Option<f64>,
    #[serde(default)]
    pub fit_window: Option<(f64, f64)>,
    /// Ends of the tracked interval; taken from the initial datum when absent.
    #[serde(default)]
    pub anchors: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub model: ModelConfig,
    pub grid: GridConfig,
    pub initial: InitialConfig,
    #[serde(default)]
    pub bc: Option<BcConfig>,
    pub time: TimeConfig,
    #[serde(default)]
    pub regions: RegionsConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

/// Settings of a `lemma` run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LemmaRunConfig {
    pub lemma: LemmaConfig,
    /// Flux for the from-flux kinds of `g`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flux: Option<FluxConfig>,
    /// Detection level for `{v > thresh}`; default `1e−10·max v₀`.
    #[serde(default)]
    pub threshold: Option<f64>,
    #[serde(default)]
    pub tolerance: Option<FrontTolerance>,
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

impl FluxConfig {
    pub fn build(&self) -> Result<FluxSpec, ModelError> {
        builtin_flux(&self.name, &self.params, self.table.as_deref())
    }
}

pub fn parse_config(text: &str) -> Result<SimConfig, ConfigError> {
    let mut cfg: SimConfig = serde_json::from_str(text).map_err(syntax)?;
    cfg.resolve()?;
    Ok(cfg)
}

/// Parses `text` after replacing the value at a dotted key path.
///
/// The override is applied before defaults are filled, so settings derived
/// from the grid spacing follow an overridden `grid.n`.
pub fn parse_config_with(text: &str, key: &str, value: serde_json::Value) -> Result<SimConfig, ConfigError> {
    let mut doc: serde_json::Value = serde_json::from_str(text).map_err(syntax)?;
    let mut node = &mut doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = node.as_object_mut().ok_or_else(|| constraint(key, format!("`{part}` is not inside an object")))?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            break;
        }
        node = obj.entry(part.to_string()).or_insert_with(|| serde_json::Value::Object(Default::default()));
    }
    let mut cfg: SimConfig = serde_json::from_value(doc).map_err(|e| constraint(key, e.to_string()))?;
    cfg.resolve()?;
    Ok(cfg)
}

pub fn load_config(path: &std::path::Path) -> Result<SimConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    parse_config(&text)
}

pub fn parse_lemma_config(text: &str) -> Result<LemmaRunConfig, ConfigError> {
    let mut cfg: LemmaRunConfig = serde_json::from_str(text).map_err(syntax)?;
    cfg.lemma.validate()?;
    if let Some(f) = &cfg.flux {
        f.build()?;
    }
    if let Some(th) = cfg.threshold {
        if !(th > 0.0) {
            return Err(constraint("threshold", format!("must be positive, got {th}")));
        }
    }
    let h = (cfg.lemma.x4 - cfg.lemma.x1) / (cfg.lemma.n - 1) as f64;
    cfg.tolerance.get_or_insert(FrontTolerance { abs: 2.0 * h, per_time: 0.1 * cfg.lemma.k0() });
    Ok(cfg)
}

pub fn load_lemma_config(path: &std::path::Path) -> Result<LemmaRunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    parse_lemma_config(&text)
}

impl SimConfig {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serializes")
    }

    pub fn h(&self) -> f64 {
        (self.grid.b - self.grid.a) / (self.grid.n - 1) as f64
    }

    pub fn build_flux(&self) -> Result<FluxSpec, ModelError> {
        self.model.flux.build()
    }

    pub fn build_convection(&self, flux: &FluxSpec) -> Result<ConvectionSpec, ModelError> {
        builtin_convection(&self.model.convection.name, &self.model.convection.params, flux)
    }

    /// Interval whose interfaces are tracked.
    pub fn anchors(&self) -> (f64, f64) {
        self.regions.anchors.expect("resolved configuration")
    }

    pub fn delta(&self) -> f64 {
        self.regions.delta.expect("resolved configuration")
    }

    pub fn pos_tol(&self) -> f64 {
        self.regions.pos_tol.expect("resolved configuration")
    }

    pub fn fit_window(&self) -> (f64, f64) {
        self.regions.fit_window.expect("resolved configuration")
    }

    fn check(&self) -> Result<(), ConfigError> {
        let g = &self.grid;
        if !(g.a.is_finite() && g.b.is_finite() && g.a < g.b) {
            return Err(constraint("grid", format!("need finite a < b, got a={}, b={}", g.a, g.b)));
        }
        if g.n < Grid1D::MIN_NODES {
            return Err(constraint("grid.n", format!("need n ≥ {}, got {}", Grid1D::MIN_NODES, g.n)));
        }
        let t = &self.time;
        if !(t.t_end >= 0.0 && t.t_end.is_finite()) {
            return Err(constraint("time.t_end", format!("need t_end ≥ 0, got {}", t.t_end)));
        }
        if !(t.sample_interval > 0.0) {
            return Err(constraint("time.sample_interval", format!("must be positive, got {}", t.sample_interval)));
        }
        if !(t.safety > 0.0 && t.safety <= 1.0) {
            return Err(constraint("time.safety", format!("must lie in (0, 1], got {}", t.safety)));
        }
        if let Some(f) = t.dt_floor {
            if !(f >= 0.0) {
                return Err(constraint("time.dt_floor", format!("must be ≥ 0, got {f}")));
            }
        }
        if let Some((a1, b1)) = self.initial.anchors() {
            if !(g.a <= a1 && a1 <= b1 && b1 <= g.b) {
                return Err(constraint(
                    "initial",
                    format!("a1={a1}, b1={b1} break a ≤ a₁ ≤ b₁ ≤ b on [{}, {}]", g.a, g.b),
                ));
            }
        }
        if let InitialConfig::PiecewiseSlope { smoothing: Some(w), .. } | InitialConfig::SuperInterval { smoothing: Some(w), .. } =
            self.initial
        {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(constraint("initial.smoothing", format!("must be ≥ 0, got {w}")));
            }
        }
        if let Some(d) = self.regions.delta {
            if !(d >= 0.0) {
                return Err(constraint("regions.delta", format!("must be ≥ 0, got {d}")));
            }
        }
        if let Some(p) = self.regions.pos_tol {
            if !(p >= 0.0) {
                return Err(constraint("regions.pos_tol", format!("must be ≥ 0, got {p}")));
            }
        }
        if let Some((lo, hi)) = self.regions.fit_window {
            if !(lo <= hi) {
                return Err(constraint("regions.fit_window", format!("need t_lo ≤ t_hi, got ({lo}, {hi})")));
            }
        }
        if let Some((l, r)) = self.regions.anchors {
            if !(g.a <= l && l <= r && r <= g.b) {
                return Err(constraint("regions.anchors", format!("({l}, {r}) break a ≤ a₁ ≤ b₁ ≤ b")));
            }
        }
        Ok(())
    }

    /// Checks constraints and fills every optional setting.
    fn resolve(&mut self) -> Result<(), ConfigError> {
        self.check()?;
        let h = self.h();
        let flux = self.build_flux()?;
        self.build_convection(&flux)?;

        if let InitialConfig::PiecewiseSlope { smoothing, .. } | InitialConfig::SuperInterval { smoothing, .. } =
            &mut self.initial
        {
            smoothing.get_or_insert(4.0 * h);
        }
        let datum = self.initial_datum()?;
        datum.check(&flux).map_err(|m| constraint("initial", m))?;

        if self.bc.is_none() {
            self.bc = Some(match self.initial.end_slopes() {
                Some((l, r)) => BcConfig { kind: BoundaryKind::NeumannSlope, left: l, right: r },
                None => {
                    let grid = Grid1D::new(self.grid.a, self.grid.b, self.grid.n).map_err(|e| constraint("grid", e.to_string()))?;
                    let u = datum.sample(&grid).map_err(|e| constraint("initial", e.to_string()))?;
                    BcConfig { kind: BoundaryKind::Dirichlet, left: u[0], right: u[u.len() - 1] }
                }
            });
        }
        let t = &mut self.time;
        t.dt_floor.get_or_insert(1e-10 * t.t_end);
        let r = &mut self.regions;
        r.delta.get_or_insert(default_delta(&flux));
        r.pos_tol.get_or_insert(2.0 * h);
        r.fit_window.get_or_insert((5.0 * t.sample_interval, t.t_end));
        let mid = 0.5 * (self.grid.a + self.grid.b);
        let anchors = self.initial.anchors().unwrap_or((mid, mid));
        r.anchors.get_or_insert(anchors);
        Ok(())
    }

    pub fn initial_datum(&self) -> Result<InitialDatum, ConfigError> {
        let a = self.grid.a;
        let h = self.h();
        Ok(match &self.initial {
            InitialConfig::PiecewiseSlope { a1, b1, slope_left, slope_mid, slope_right, smoothing } => {
                InitialDatum::PiecewiseSlope(SlopeProfile {
                    a,
                    a1: *a1,
                    b1: *b1,
                    left: *slope_left,
                    mid: *slope_mid,
                    right: *slope_right,
                    smoothing: smoothing.unwrap_or(4.0 * h),
                })
            }
            InitialConfig::SuperInterval { a1, b1, slope_left, slope_mid, slope_right, smoothing } => {
                InitialDatum::SuperInterval(SlopeProfile {
                    a,
                    a1: *a1,
                    b1: *b1,
                    left: *slope_left,
                    mid: *slope_mid,
                    right: *slope_right,
                    smoothing: smoothing.unwrap_or(4.0 * h),
                })
            }
            InitialConfig::Sine { amplitude, modes } => InitialDatum::Sine { amplitude: *amplitude, modes: *modes },
            InitialConfig::UserTable { points } => InitialDatum::Table(
                MonotoneCubic::new(points).map_err(|e| constraint("initial.points", e.to_string()))?,
            ),
        })
    }

    pub fn build_setup(&self) -> Result<SimSetup, ConfigError> {
        let flux = self.build_flux()?;
        let conv = self.build_convection(&flux)?;
        let grid = Grid1D::new(self.grid.a, self.grid.b, self.grid.n).map_err(|e| constraint("grid", e.to_string()))?;
        let bc = self.bc.expect("resolved configuration");
        Ok(SimSetup {
            grid,
            flux,
            conv,
            initial: self.initial_datum()?,
            bc: BoundaryCondition { kind: bc.kind, left: bc.left, right: bc.right },
            time: TimeControl {
                t_end: self.time.t_end,
                sample_interval: self.time.sample_interval,
                safety: self.time.safety,
                dt_floor: self.time.dt_floor.unwrap_or(0.0),
            },
        })
    }
}

/// The acceptance configuration with Perona–Malik flux and `Ψ = −x`.
pub fn canonical_config() -> SimConfig {
    parse_config(CANONICAL).expect("canonical configuration is valid")
}

pub const CANONICAL: &str = r#"{
  "model": {
    "flux": { "name": "perona_malik" },
    "convection": { "name": "separable_linear", "params": { "A": -1, "B": -1 } }
  },
  "grid": { "a": -4, "b": 4, "n": 2001 },
  "initial": {
    "kind": "piecewise_slope",
    "a1": -1, "b1": 1,
    "slope_left": -2, "slope_mid": 0, "slope_right": 2
  },
  "time": { "t_end": 0.5, "sample_interval": 0.01, "safety": 0.9 }
}"#;
