//! Explicit finite-volume integration of `u_t = (Φ(u_x))_x + Ψ(x, u_x)` on a
//! uniform 1D grid.

mod initial;

pub use initial::{InitialDatum, SlopeProfile};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ConvectionSpec, FluxSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("grid needs n >= 16 nodes and b > a (got a={a}, b={b}, n={n})")]
    BadGrid { a: f64, b: f64, n: usize },
    #[error("non-finite value at node {node}, t={t}")]
    NonFinite { node: usize, t: f64 },
    #[error("numerical blow-up at node {node}, t={t}")]
    BlowUp { node: usize, t: f64, last_good: Box<SimState> },
    #[error("time step must be positive, got {0}")]
    BadTimeStep(f64),
    #[error("state has {got} nodes, grid has {expected}")]
    SizeMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    a: f64,
    b: f64,
    n: usize,
    h: f64,
}

impl Grid1D {
    pub const MIN_NODES: usize = 16;

    pub fn new(a: f64, b: f64, n: usize) -> Result<Self, SimError> {
        if n < Self::MIN_NODES || !(b > a) || !a.is_finite() || !b.is_finite() {
            return Err(SimError::BadGrid { a, b, n });
        }
        Ok(Self { a, b, n, h: (b - a) / (n - 1) as f64 })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.a + i as f64 * self.h
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(|i| self.x(i))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub t: f64,
    pub u: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    /// Boundary nodes pinned at their values.
    Dirichlet,
    /// Ghost faces carry a prescribed slope.
    NeumannSlope,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCondition {
    pub kind: BoundaryKind,
    pub left: f64,
    pub right: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub steps: usize,
    pub stiff_steps: usize,
    pub min_dt: Option<f64>,
    pub max_dt: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: Grid1D,
    pub samples: Vec<SimState>,
    pub dt_history: Vec<f64>,
    pub stats: RunStats,
}

impl Trajectory {
    pub fn last(&self) -> Option<&SimState> {
        self.samples.last()
    }
}

/// Simulation aborted; carries what was computed up to the failure.
#[derive(Debug, Clone, Error)]
#[error("{error}")]
pub struct SimFailure {
    pub error: SimError,
    pub partial: Trajectory,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeControl {
    pub t_end: f64,
    pub sample_interval: f64,
    pub safety: f64,
    pub dt_floor: f64,
}

/// Everything needed to run one simulation.
#[derive(Debug, Clone)]
pub struct SimSetup {
    pub grid: Grid1D,
    pub flux: FluxSpec,
    pub conv: ConvectionSpec,
    pub initial: InitialDatum,
    pub bc: BoundaryCondition,
    pub time: TimeControl,
}

/// Central differences inside, second-order one-sided at the ends.
pub fn gradient(state: &SimState, grid: &Grid1D) -> Vec<f64> {
    let mut out = vec![0.0; state.u.len()];
    gradient_into(&state.u, grid.h(), &mut out);
    out
}

fn gradient_into(u: &[f64], h: f64, out: &mut [f64]) {
    let n = u.len();
    debug_assert!(n >= 3 && out.len() == n);
    let inv2h = 0.5 / h;
    out[0] = (-3.0 * u[0] + 4.0 * u[1] - u[2]) * inv2h;
    for i in 1..n - 1 {
        out[i] = (u[i + 1] - u[i - 1]) * inv2h;
    }
    out[n - 1] = (3.0 * u[n - 1] - 4.0 * u[n - 2] + u[n - 3]) * inv2h;
}

/// Scratch buffers reused across steps.
#[derive(Debug, Clone)]
struct Workspace {
    face_phi: Vec<f64>,
    ux: Vec<f64>,
    rhs: Vec<f64>,
    max_abs_dphi: f64,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Self { face_phi: vec![0.0; n + 1], ux: vec![0.0; n], rhs: vec![0.0; n], max_abs_dphi: 0.0 }
    }

    /// Fills face fluxes (index `i` is the face left of node `i`, ghost faces at 0 and n)
    /// and records `max |Φ′|` over the interior faces.
    fn faces(&mut self, u: &[f64], grid: &Grid1D, flux: &FluxSpec, bc: &BoundaryCondition) {
        let n = u.len();
        let inv_h = 1.0 / grid.h();
        let mut max_d = 0.0f64;
        for i in 1..n {
            let s = (u[i] - u[i - 1]) * inv_h;
            self.face_phi[i] = flux.phi(s);
            max_d = max_d.max(flux.dphi(s).abs());
        }
        self.max_abs_dphi = max_d;
        if bc.kind == BoundaryKind::NeumannSlope {
            self.face_phi[0] = flux.phi(bc.left);
            self.face_phi[n] = flux.phi(bc.right);
        }
    }

    fn rhs(
        &mut self,
        state: &SimState,
        grid: &Grid1D,
        flux: &FluxSpec,
        conv: &ConvectionSpec,
        bc: &BoundaryCondition,
    ) -> Result<(), SimError> {
        let u = &state.u;
        let n = u.len();
        self.faces(u, grid, flux, bc);
        let inv_h = 1.0 / grid.h();
        let with_conv = !conv.is_zero();
        if with_conv {
            gradient_into(u, grid.h(), &mut self.ux);
        }
        for i in 0..n {
            let mut r = (self.face_phi[i + 1] - self.face_phi[i]) * inv_h;
            if with_conv {
                r += conv.psi(grid.x(i), self.ux[i]);
            }
            self.rhs[i] = r;
        }
        if bc.kind == BoundaryKind::Dirichlet {
            self.rhs[0] = 0.0;
            self.rhs[n - 1] = 0.0;
        }
        if let Some(node) = self.rhs.iter().position(|r| !r.is_finite()) {
            return Err(SimError::NonFinite { node, t: state.t });
        }
        Ok(())
    }
}

fn check_size(state: &SimState, grid: &Grid1D) -> Result<(), SimError> {
    if state.u.len() != grid.n() {
        return Err(SimError::SizeMismatch { expected: grid.n(), got: state.u.len() });
    }
    Ok(())
}

/// Semi-discrete right-hand side in conservative form.
///
/// Interior faces use `s = (u_{i+1} − u_i)/h`; with `NeumannSlope` the ghost
/// faces carry the prescribed slopes, with `Dirichlet` the end rows are zero.
pub fn rhs(
    state: &SimState,
    grid: &Grid1D,
    flux: &FluxSpec,
    conv: &ConvectionSpec,
    bc: &BoundaryCondition,
) -> Result<Vec<f64>, SimError> {
    check_size(state, grid)?;
    let mut ws = Workspace::new(grid.n());
    ws.rhs(state, grid, flux, conv, bc)?;
    Ok(ws.rhs)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StableDt {
    pub dt: f64,
    /// The formula fell below `dt_floor` or every face is degenerate.
    pub stiff: bool,
    /// `|Φ′|` vanishes on every face.
    pub degenerate: bool,
}

/// Below this `max |Φ′|` every face counts as degenerate.
const DEGENERATE_DPHI: f64 = 1e-12;

fn dt_from_max_dphi(max_abs_dphi: f64, h: f64, safety: f64, dt_floor: f64) -> StableDt {
    if !(max_abs_dphi > DEGENERATE_DPHI) {
        return StableDt { dt: dt_floor, stiff: true, degenerate: true };
    }
    let dt = safety * h * h / (2.0 * max_abs_dphi);
    if dt < dt_floor {
        StableDt { dt: dt_floor, stiff: true, degenerate: false }
    } else {
        StableDt { dt, stiff: false, degenerate: false }
    }
}

/// `safety · h² / (2 · max |Φ′(s_face)|)`, floored at `dt_floor`.
pub fn stable_dt(state: &SimState, grid: &Grid1D, flux: &FluxSpec, safety: f64, dt_floor: f64) -> StableDt {
    let h = grid.h();
    let max_d = state
        .u
        .windows(2)
        .map(|w| flux.dphi((w[1] - w[0]) / h).abs())
        .fold(0.0f64, f64::max);
    dt_from_max_dphi(max_d, h, safety, dt_floor)
}

/// One forward-Euler step.
pub fn step(
    state: &SimState,
    dt: f64,
    grid: &Grid1D,
    flux: &FluxSpec,
    conv: &ConvectionSpec,
    bc: &BoundaryCondition,
) -> Result<SimState, SimError> {
    check_size(state, grid)?;
    let mut ws = Workspace::new(grid.n());
    let mut next = state.clone();
    advance(&mut ws, state, &mut next, dt, grid, flux, conv, bc, false)?;
    Ok(next)
}

// `next` must already hold a copy of `state` sized like it. When `rhs_ready`
// is set the workspace already carries the right-hand side of `state`.
#[allow(clippy::too_many_arguments)]
fn advance(
    ws: &mut Workspace,
    state: &SimState,
    next: &mut SimState,
    dt: f64,
    grid: &Grid1D,
    flux: &FluxSpec,
    conv: &ConvectionSpec,
    bc: &BoundaryCondition,
    rhs_ready: bool,
) -> Result<(), SimError> {
    if !(dt > 0.0) {
        return Err(SimError::BadTimeStep(dt));
    }
    let blow_up = |node: usize, t: f64| SimError::BlowUp { node, t, last_good: Box::new(state.clone()) };
    if !rhs_ready {
        ws.rhs(state, grid, flux, conv, bc).map_err(|e| match e {
            SimError::NonFinite { node, t } => blow_up(node, t),
            other => other,
        })?;
    }
    for ((out, &u), &r) in next.u.iter_mut().zip(&state.u).zip(&ws.rhs) {
        *out = u + dt * r;
    }
    next.t = state.t + dt;
    if let Some(node) = next.u.iter().position(|v| !v.is_finite()) {
        return Err(blow_up(node, next.t));
    }
    Ok(())
}

/// Integrates from the initial datum to `t_end`, sampling every
/// `sample_interval` of simulated time (and at `t_end`).
pub fn simulate(setup: &SimSetup) -> Result<Trajectory, SimFailure> {
    let grid = setup.grid;
    let time = setup.time;
    let mut traj = Trajectory { grid, samples: Vec::new(), dt_history: Vec::new(), stats: RunStats::default() };

    let mut u0 = match setup.initial.sample(&grid) {
        Ok(u) => u,
        Err(error) => return Err(SimFailure { error, partial: traj }),
    };
    if setup.bc.kind == BoundaryKind::Dirichlet {
        u0[0] = setup.bc.left;
        let last = grid.n() - 1;
        u0[last] = setup.bc.right;
    }
    let mut state = SimState { t: 0.0, u: u0 };
    traj.samples.push(state.clone());
    if !(time.t_end > 0.0) {
        return Ok(traj);
    }

    let mut ws = Workspace::new(grid.n());
    let mut next = state.clone();
    let mut k: u64 = 1;
    let h = grid.h();
    while state.t < time.t_end {
        let target = (k as f64 * time.sample_interval).min(time.t_end);
        if let Err(error) = ws.rhs(&state, &grid, &setup.flux, &setup.conv, &setup.bc) {
            let error = match error {
                SimError::NonFinite { node, t } => SimError::BlowUp { node, t, last_good: Box::new(state.clone()) },
                e => e,
            };
            return Err(SimFailure { error, partial: traj });
        }
        let sdt = dt_from_max_dphi(ws.max_abs_dphi, h, time.safety, time.dt_floor);
        let mut dt = if sdt.degenerate {
            // no diffusive restriction left; fall back to the unit-diffusivity step
            time.safety * h * h / 2.0
        } else {
            sdt.dt
        };
        let landing = state.t + dt >= target * (1.0 - 1e-14);
        if landing {
            dt = target - state.t;
        }
        if let Err(error) = advance(&mut ws, &state, &mut next, dt, &grid, &setup.flux, &setup.conv, &setup.bc, true) {
            return Err(SimFailure { error, partial: traj });
        }
        std::mem::swap(&mut state, &mut next);
        traj.dt_history.push(dt);
        traj.stats.steps += 1;
        if sdt.stiff {
            traj.stats.stiff_steps += 1;
        }
        traj.stats.min_dt = Some(traj.stats.min_dt.map_or(dt, |m| m.min(dt)));
        traj.stats.max_dt = Some(traj.stats.max_dt.map_or(dt, |m| m.max(dt)));
        if landing {
            state.t = target;
            traj.samples.push(state.clone());
            k += 1;
        }
    }
    Ok(traj)
}
