//! Forward, backward and degenerate regions of a computed solution, the
//! interfaces between them, and the checks of the expansion rates.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fit::linear_fit;
use crate::model::FluxSpec;
use crate::solver::{gradient, simulate, Grid1D, SimFailure, SimSetup, Trajectory};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegionError {
    #[error("fit window [{t_lo}, {t_hi}] holds {got} samples, need at least {need}")]
    TooFewSamples { t_lo: f64, t_hi: f64, got: usize, need: usize },
    #[error("interface absent at t={t} inside the fit window")]
    AbsentInterface { t: f64 },
    #[error("no {what} node at t={t}: region collapsed")]
    Collapsed { what: &'static str, t: f64 },
    #[error("empty trajectory")]
    EmptyTrajectory,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Sub,
    Super,
    Degenerate,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Sub => "sub",
            Label::Super => "super",
            Label::Degenerate => "degenerate",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionLabels {
    pub labels: Vec<Label>,
    pub delta: f64,
}

#[inline]
fn label_of(s: f64, alpha: f64, beta: f64, delta: f64) -> Label {
    if alpha + delta < s && s < beta - delta {
        Label::Sub
    } else if s < alpha - delta || s > beta + delta {
        Label::Super
    } else {
        Label::Degenerate
    }
}

/// Labels each node; `delta = 0` gives the exact sets `u_x ∈ (α,β)`,
/// `u_x ∉ [α,β]` and `u_x ∈ {α,β}`.
pub fn classify(ux: &[f64], flux: &FluxSpec, delta: f64) -> RegionLabels {
    let (alpha, beta) = (flux.alpha(), flux.beta());
    RegionLabels { labels: ux.iter().map(|&s| label_of(s, alpha, beta, delta)).collect(), delta }
}

/// Default classification half-width `1e-6·(β − α)`, zero for unbounded slopes.
pub fn default_delta(flux: &FluxSpec) -> f64 {
    let gap = flux.beta() - flux.alpha();
    if gap.is_finite() {
        1e-6 * gap
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interfaces {
    pub left: Option<f64>,
    pub right: Option<f64>,
    /// No node of the tracked kind exists at all.
    pub collapsed: bool,
}

/// Index range `[lo, hi]` of the run of `want` nodes nearest to `center`.
fn component_near(labels: &[Label], want: Label, center: usize, reach: usize) -> Option<(usize, usize)> {
    let n = labels.len();
    let start = (0..=reach).find_map(|d| {
        if center >= d && labels[center - d] == want {
            Some(center - d)
        } else if center + d < n && labels[center + d] == want {
            Some(center + d)
        } else {
            None
        }
    })?;
    let mut lo = start;
    while lo > 0 && labels[lo - 1] == want {
        lo -= 1;
    }
    let mut hi = start;
    while hi + 1 < n && labels[hi + 1] == want {
        hi += 1;
    }
    Some((lo, hi))
}

// Position where u_x crosses the critical slope between nodes `i` and `j = i ± 1`.
fn crossing(ux: &[f64], grid: &Grid1D, i: usize, j: usize, level: f64) -> f64 {
    let (si, sj) = (ux[i], ux[j]);
    let (xi, xj) = (grid.x(i), grid.x(j));
    if si == sj {
        return 0.5 * (xi + xj);
    }
    let w = ((level - si) / (sj - si)).clamp(0.0, 1.0);
    xi + w * (xj - xi)
}

fn nearest_node(grid: &Grid1D, x: f64) -> usize {
    let i = ((x - grid.a()) / grid.h()).round();
    (i.max(0.0) as usize).min(grid.n() - 1)
}

/// Level crossed between an outside node with slope `s_out` and the component.
fn critical_level(s_out: f64, s_in: f64, alpha: f64, beta: f64) -> f64 {
    if s_out <= alpha || (s_out < beta && s_in <= alpha) {
        alpha
    } else {
        beta
    }
}

/// α/β crossings bounding the forward component seeded at the anchors' midpoint.
///
/// Positions are linear interpolations between the bracketing nodes; a side is
/// absent when the component reaches the domain boundary.
pub fn interface_positions(ux: &[f64], grid: &Grid1D, flux: &FluxSpec, anchors: (f64, f64)) -> Interfaces {
    let labels = classify(ux, flux, 0.0).labels;
    let center = nearest_node(grid, 0.5 * (anchors.0 + anchors.1));
    let Some((lo, hi)) = component_near(&labels, Label::Sub, center, labels.len()) else {
        return Interfaces { left: None, right: None, collapsed: true };
    };
    let (alpha, beta) = (flux.alpha(), flux.beta());
    let left = (lo > 0).then(|| crossing(ux, grid, lo - 1, lo, critical_level(ux[lo - 1], ux[lo], alpha, beta)));
    let n = ux.len();
    let right = (hi + 1 < n).then(|| crossing(ux, grid, hi, hi + 1, critical_level(ux[hi + 1], ux[hi], alpha, beta)));
    Interfaces { left, right, collapsed: false }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterfaceTrack {
    pub domain: (f64, f64),
    pub h: f64,
    pub times: Vec<f64>,
    pub left_pos: Vec<Option<f64>>,
    pub right_pos: Vec<Option<f64>>,
    pub sub_measure: Vec<f64>,
    pub super_measure: Vec<f64>,
    pub degen_measure: Vec<f64>,
    pub collapsed: Vec<bool>,
}

impl InterfaceTrack {
    pub fn empty(domain: (f64, f64), h: f64) -> Self {
        Self {
            domain,
            h,
            times: Vec::new(),
            left_pos: Vec::new(),
            right_pos: Vec::new(),
            sub_measure: Vec::new(),
            super_measure: Vec::new(),
            degen_measure: Vec::new(),
            collapsed: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Gradient, labels, interfaces and region measures per sample. End nodes
/// carry half a cell, so the three measures add up to `b − a`.
pub fn track(traj: &Trajectory, flux: &FluxSpec, anchors: (f64, f64), delta: f64) -> Result<InterfaceTrack, RegionError> {
    if traj.samples.is_empty() {
        return Err(RegionError::EmptyTrajectory);
    }
    let grid = traj.grid;
    let h = grid.h();
    let mut out = InterfaceTrack::empty((grid.a(), grid.b()), h);
    for state in &traj.samples {
        let ux = gradient(state, &grid);
        let labels = classify(&ux, flux, delta);
        let last = labels.labels.len() - 1;
        let count = |l: Label| {
            let inner = labels.labels[1..last].iter().filter(|&&x| x == l).count() as f64;
            let ends = [labels.labels[0], labels.labels[last]].iter().filter(|&&x| x == l).count() as f64;
            (inner + 0.5 * ends) * h
        };
        let ifs = interface_positions(&ux, &grid, flux, anchors);
        out.times.push(state.t);
        out.left_pos.push(ifs.left);
        out.right_pos.push(ifs.right);
        out.sub_measure.push(count(Label::Sub));
        out.super_measure.push(count(Label::Super));
        out.degen_measure.push(count(Label::Degenerate));
        out.collapsed.push(ifs.collapsed);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub k0_theory: f64,
    pub k1_theory: f64,
    /// `−d(left_pos)/dt` over the fit window.
    pub left_speed_fit: f64,
    pub right_speed_fit: f64,
    pub fit_window: (f64, f64),
    /// RMS residual of the two line fits combined.
    pub fit_residual: f64,
    pub g_containment: bool,
    /// Minimum over samples of how far the measured forward interval extends
    /// past the cone `a1 − k0·t < x < b1 + k1·t` (negative: falls short).
    pub g_margin: f64,
    pub left_margin: f64,
    pub right_margin: f64,
    pub pos_tol: f64,
}

/// Least-squares interface speeds and the cone-containment check.
///
/// Containment is checked at every sample of the track; the fits only use
/// samples with `t_lo ≤ t ≤ t_hi`.
pub fn fit_rates(
    track: &InterfaceTrack,
    rates: (f64, f64),
    anchors: (f64, f64),
    window: (f64, f64),
    pos_tol: f64,
) -> Result<RateReport, RegionError> {
    const MIN_SAMPLES: usize = 10;
    let (k0, k1) = rates;
    let (t_lo, t_hi) = window;
    let idx: Vec<usize> = (0..track.len()).filter(|&i| track.times[i] >= t_lo && track.times[i] <= t_hi).collect();
    if idx.len() < MIN_SAMPLES {
        return Err(RegionError::TooFewSamples { t_lo, t_hi, got: idx.len(), need: MIN_SAMPLES });
    }
    let mut ts = Vec::with_capacity(idx.len());
    let mut lefts = Vec::with_capacity(idx.len());
    let mut rights = Vec::with_capacity(idx.len());
    for &i in &idx {
        let t = track.times[i];
        match (track.left_pos[i], track.right_pos[i]) {
            (Some(l), Some(r)) => {
                ts.push(t);
                lefts.push(l);
                rights.push(r);
            }
            _ => return Err(RegionError::AbsentInterface { t }),
        }
    }
    let lf = linear_fit(&ts, &lefts).ok_or(RegionError::TooFewSamples { t_lo, t_hi, got: ts.len(), need: MIN_SAMPLES })?;
    let rf = linear_fit(&ts, &rights).ok_or(RegionError::TooFewSamples { t_lo, t_hi, got: ts.len(), need: MIN_SAMPLES })?;

    let (a, b) = track.domain;
    let (mut left_margin, mut right_margin) = (f64::INFINITY, f64::INFINITY);
    for i in 0..track.len() {
        let t = track.times[i];
        if track.collapsed[i] {
            left_margin = f64::NEG_INFINITY;
            right_margin = f64::NEG_INFINITY;
            break;
        }
        // an absent side means the forward interval reaches the boundary
        let left = track.left_pos[i].unwrap_or(a);
        let right = track.right_pos[i].unwrap_or(b);
        let cone_left = (anchors.0 - k0 * t).max(a);
        let cone_right = (anchors.1 + k1 * t).min(b);
        left_margin = left_margin.min(cone_left - left);
        right_margin = right_margin.min(right - cone_right);
    }
    let g_margin = left_margin.min(right_margin);
    Ok(RateReport {
        k0_theory: k0,
        k1_theory: k1,
        left_speed_fit: -lf.slope,
        right_speed_fit: rf.slope,
        fit_window: window,
        fit_residual: (0.5 * (lf.residual * lf.residual + rf.residual * rf.residual)).sqrt(),
        g_containment: g_margin >= -pos_tol,
        g_margin,
        left_margin,
        right_margin,
        pos_tol,
    })
}

/// Shrinking of an interior backward interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShrinkReport {
    pub k0_theory: f64,
    pub k1_theory: f64,
    pub initial_width: f64,
    pub times: Vec<f64>,
    pub left_pos: Vec<Option<f64>>,
    pub right_pos: Vec<Option<f64>>,
    pub widths: Vec<f64>,
    /// Rightward speed of the left end, fitted while the interval exists.
    pub left_speed_fit: Option<f64>,
    /// Leftward speed of the right end.
    pub right_speed_fit: Option<f64>,
    pub collapse_time: Option<f64>,
    /// The interval had zero width from the start.
    pub degenerate: bool,
    pub width_tol: f64,
    /// Min over samples with positive width of `w0 − (k0+k1)t + tol − w(t)`.
    pub bound_margin: f64,
    pub bound_holds: bool,
}

/// Follows the backward interval seeded between the anchors and checks
/// `w(t) ≤ w0 − (k0 + k1)·t + width_tol` while it exists.
///
/// After the first sample the interval is the hull of the supercritical nodes
/// within two nodes of its previous extent, so a backward region broken into
/// isolated steep faces still counts as one interval.
pub fn shrink_report(
    traj: &Trajectory,
    flux: &FluxSpec,
    anchors: (f64, f64),
    rates: (f64, f64),
    width_tol: f64,
) -> Result<ShrinkReport, RegionError> {
    if traj.samples.is_empty() {
        return Err(RegionError::EmptyTrajectory);
    }
    let grid = traj.grid;
    let (alpha, beta) = (flux.alpha(), flux.beta());
    let (k0, k1) = rates;
    let mut report = ShrinkReport {
        k0_theory: k0,
        k1_theory: k1,
        initial_width: 0.0,
        times: Vec::new(),
        left_pos: Vec::new(),
        right_pos: Vec::new(),
        widths: Vec::new(),
        left_speed_fit: None,
        right_speed_fit: None,
        collapse_time: None,
        degenerate: false,
        width_tol,
        bound_margin: f64::INFINITY,
        bound_holds: true,
    };

    let mut prev: Option<(usize, usize)> = None;
    for (k, state) in traj.samples.iter().enumerate() {
        let ux = gradient(state, &grid);
        let labels = classify(&ux, flux, 0.0).labels;
        let comp = if k == 0 {
            let center = nearest_node(&grid, 0.5 * (anchors.0 + anchors.1));
            let reach = ((anchors.1 - anchors.0).abs() / grid.h()).ceil() as usize + 1;
            component_near(&labels, Label::Super, center, reach)
        } else if let Some((plo, phi)) = prev {
            // backward regions break up into isolated steep faces; keep the hull
            // of supercritical nodes near the previous extent
            let lo = plo.saturating_sub(2);
            let hi = (phi + 2).min(labels.len() - 1);
            let first = (lo..=hi).find(|&i| labels[i] == Label::Super);
            let last = (lo..=hi).rev().find(|&i| labels[i] == Label::Super);
            first.zip(last)
        } else {
            None
        };
        report.times.push(state.t);
        match comp {
            None => {
                if k == 0 {
                    if anchors.1 - anchors.0 == 0.0 {
                        report.degenerate = true;
                        report.collapse_time = Some(state.t);
                        report.left_pos.push(None);
                        report.right_pos.push(None);
                        report.widths.push(0.0);
                        return Ok(report);
                    }
                    return Err(RegionError::Collapsed { what: "supercritical", t: state.t });
                }
                if report.collapse_time.is_none() {
                    report.collapse_time = Some(state.t);
                }
                prev = None;
                report.left_pos.push(None);
                report.right_pos.push(None);
                report.widths.push(0.0);
            }
            Some((lo, hi)) => {
                let n = ux.len();
                let left = if lo > 0 {
                    crossing(&ux, &grid, lo - 1, lo, if ux[lo] > beta { beta } else { alpha })
                } else {
                    grid.a()
                };
                let right = if hi + 1 < n {
                    crossing(&ux, &grid, hi, hi + 1, if ux[hi] > beta { beta } else { alpha })
                } else {
                    grid.b()
                };
                let w = right - left;
                if k == 0 {
                    report.initial_width = w;
                }
                let bound = report.initial_width - (k0 + k1) * state.t + width_tol;
                report.bound_margin = report.bound_margin.min(bound - w);
                prev = Some((lo, hi));
                report.left_pos.push((lo > 0).then_some(left));
                report.right_pos.push((hi + 1 < n).then_some(right));
                report.widths.push(w);
            }
        }
    }
    report.bound_holds = report.bound_margin >= 0.0;

    let alive: Vec<usize> = (1..report.times.len()).filter(|&i| report.widths[i] > 0.0).collect();
    let collect = |pos: &Vec<Option<f64>>| -> (Vec<f64>, Vec<f64>) {
        alive.iter().filter_map(|&i| pos[i].map(|p| (report.times[i], p))).unzip()
    };
    let (tl, pl) = collect(&report.left_pos);
    let (tr, pr) = collect(&report.right_pos);
    report.left_speed_fit = linear_fit(&tl, &pl).map(|f| f.slope);
    report.right_speed_fit = linear_fit(&tr, &pr).map(|f| -f.slope);
    Ok(report)
}

/// Runs the mirrored configuration (backward interval between forward flanks)
/// and reports how fast the backward interval shrinks.
pub fn time_reversed_experiment(
    setup: &SimSetup,
    anchors: (f64, f64),
    rates: (f64, f64),
    width_tol: f64,
) -> Result<ShrinkReport, ExperimentError> {
    let traj = simulate(setup).map_err(|e| ExperimentError::Simulation(Box::new(e)))?;
    Ok(shrink_report(&traj, &setup.flux, anchors, rates, width_tol)?)
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Simulation(Box<SimFailure>),
    #[error(transparent)]
    Region(#[from] RegionError),
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pm() -> FluxSpec {
        FluxSpec::perona_malik(1.0).unwrap()
    }

    #[test]
    fn classify_examples() {
        let f = pm();
        let l = classify(&[0.0, -1.0, 2.0, 1.0, -0.999], &f, 0.0).labels;
        assert_eq!(l, vec![Label::Sub, Label::Degenerate, Label::Super, Label::Degenerate, Label::Sub]);
        let l = classify(&[-0.999], &f, 0.01).labels;
        assert_eq!(l, vec![Label::Degenerate]);
    }

    #[test]
    fn right_crossing_midpoint() {
        let g = Grid1D::new(0.0, 1.5, 16).unwrap();
        let ux: Vec<f64> = (0..16).map(|i| if i == 0 { 0.5 } else { 1.5 }).collect();
        let ifs = interface_positions(&ux, &g, &pm(), (0.0, 0.0));
        assert_eq!(ifs.left, None);
        assert!((ifs.right.unwrap() - 0.05).abs() < 1e-15);
    }

    #[test]
    fn uniform_forward_slopes_touch_boundary() {
        let g = Grid1D::new(-1.0, 1.0, 21).unwrap();
        let ifs = interface_positions(&[0.0; 21], &g, &pm(), (-0.5, 0.5));
        assert_eq!(ifs, Interfaces { left: None, right: None, collapsed: false });
        let ifs = interface_positions(&[3.0; 21], &g, &pm(), (-0.5, 0.5));
        assert!(ifs.collapsed);
    }

    #[test]
    fn crossing_between_bracketing_nodes() {
        let g = Grid1D::new(-2.0, 2.0, 41).unwrap();
        let ux: Vec<f64> = g.nodes().map(|x| 1.3 * x).collect();
        let ifs = interface_positions(&ux, &g, &pm(), (0.0, 0.0));
        let (l, r) = (ifs.left.unwrap(), ifs.right.unwrap());
        assert!((l + 1.0 / 1.3).abs() < 1e-12 && (r - 1.0 / 1.3).abs() < 1e-12);
    }

    fn synthetic(rate_right: f64, rate_left: f64) -> InterfaceTrack {
        let mut tr = InterfaceTrack::empty((-4.0, 4.0), 0.004);
        for i in 0..=40 {
            let t = 0.025 * i as f64;
            tr.times.push(t);
            tr.left_pos.push(Some(-1.0 - rate_left * t));
            tr.right_pos.push(Some(1.0 + rate_right * t));
            tr.sub_measure.push(0.0);
            tr.super_measure.push(0.0);
            tr.degen_measure.push(0.0);
            tr.collapsed.push(false);
        }
        tr
    }

    #[test]
    fn fit_recovers_exact_speeds() {
        let r = fit_rates(&synthetic(1.3, 1.1), (1.0, 1.0), (-1.0, 1.0), (0.0, 1.0), 0.008).unwrap();
        assert!((r.right_speed_fit - 1.3).abs() < 1e-12);
        assert!((r.left_speed_fit - 1.1).abs() < 1e-12);
        assert!(r.fit_residual < 1e-12);
        assert!(r.g_containment);
    }

    #[test]
    fn slow_front_violates_containment() {
        let r = fit_rates(&synthetic(0.5, 1.0), (1.0, 1.0), (-1.0, 1.0), (0.0, 1.0), 0.008).unwrap();
        assert!(!r.g_containment);
        assert!((r.right_margin + 0.5).abs() < 1e-12);
    }

    #[test]
    fn fit_needs_samples_and_positions() {
        let tr = synthetic(1.0, 1.0);
        assert!(matches!(fit_rates(&tr, (1.0, 1.0), (-1.0, 1.0), (0.0, 0.1), 0.0), Err(RegionError::TooFewSamples { .. })));
        let mut tr = synthetic(1.0, 1.0);
        tr.left_pos[20] = None;
        assert!(matches!(fit_rates(&tr, (1.0, 1.0), (-1.0, 1.0), (0.0, 1.0), 0.0), Err(RegionError::AbsentInterface { .. })));
    }
}
