//! Randomized invariant checks shared by the property tests and the
//! acceptance run. Each returns `Err` with the minimal failing input.

#![allow(dead_code)]

use std::collections::BTreeMap;

use proptest::prelude::*;
use proptest::test_runner::{Config, RngSeed, TestCaseError, TestRunner};

use fbdiff::config::{canonical_config, parse_config, InitialConfig, SimConfig};
use fbdiff::io::{read_interfaces_csv, write_interfaces_csv};
use fbdiff::model::{ConvectionSpec, FluxSpec};
use fbdiff::regions::{classify, track, InterfaceTrack, Label};
use fbdiff::solver::{step, BoundaryCondition, BoundaryKind, Grid1D, RunStats, SimState, Trajectory};
use fbdiff::transform::{build_eta, v_field, Side};

pub const SEED: u64 = 0x5eed_f0b0;
pub const CASES: u32 = 1000;

pub fn runner(cases: u32) -> TestRunner {
    TestRunner::new(Config {
        cases,
        rng_seed: RngSeed::Fixed(SEED),
        failure_persistence: None,
        ..Config::default()
    })
}

fn run<S: Strategy>(cases: u32, strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String>
where
    S::Value: std::fmt::Debug,
{
    runner(cases).run(&strategy, test).map_err(|e| e.to_string())
}

/// Perona–Malik with random λ, or Gaussian with random K.
pub fn any_flux() -> impl Strategy<Value = FluxSpec> {
    prop_oneof![
        (0.2f64..5.0).prop_map(|l| FluxSpec::perona_malik(l).unwrap()),
        (0.2f64..5.0).prop_map(|k| FluxSpec::gaussian(k).unwrap()),
    ]
}

/// Slopes in units of β, with exact critical values mixed in.
fn slope_units() -> impl Strategy<Value = f64> {
    prop_oneof![
        6 => -4.0f64..4.0,
        1 => Just(-1.0),
        1 => Just(1.0),
        1 => Just(0.0),
    ]
}

fn flux_and_slopes(max_len: usize) -> impl Strategy<Value = (FluxSpec, Vec<f64>)> {
    (any_flux(), prop::collection::vec(slope_units(), 1..max_len)).prop_map(|(f, units)| {
        let beta = f.beta();
        let ux = units.into_iter().map(|s| s * beta).collect();
        (f, ux)
    })
}

fn single_sample(grid: Grid1D, u: Vec<f64>) -> Trajectory {
    Trajectory { grid, samples: vec![SimState { t: 0.0, u }], dt_history: Vec::new(), stats: RunStats::default() }
}

/// One label per node, and the three measures cover `[a, b]`.
pub fn label_partition() -> Result<(), String> {
    let strategy = (any_flux(), prop::collection::vec(-3.0f64..3.0, 16..120), 0.0f64..0.05, -2.0f64..0.0, 0.5f64..3.0);
    run(CASES, strategy, |(flux, du, delta, a, len)| {
        let n = du.len();
        let grid = Grid1D::new(a, a + len, n).unwrap();
        let h = grid.h();
        // integrate random slopes so that u_x (central) samples all three regions
        let mut u = vec![0.0; n];
        for i in 1..n {
            u[i] = u[i - 1] + du[i] * flux.beta() * h;
        }
        let labels = classify(&fbdiff::solver::gradient(&SimState { t: 0.0, u: u.clone() }, &grid), &flux, delta);
        prop_assert_eq!(labels.labels.len(), n);
        let tr = track(&single_sample(grid, u), &flux, (a + 0.5 * len, a + 0.5 * len), delta).unwrap();
        let total = tr.sub_measure[0] + tr.super_measure[0] + tr.degen_measure[0];
        prop_assert!((total - len).abs() <= 1e-9 * len, "measures sum to {total}, domain {len}");
        prop_assert!(tr.sub_measure[0] >= 0.0 && tr.super_measure[0] >= 0.0 && tr.degen_measure[0] >= 0.0);
        Ok(())
    })
}

/// `classify(·, 0)` against the set definitions evaluated one node at a time.
pub fn classify_oracle() -> Result<(), String> {
    run(CASES, flux_and_slopes(200), |(flux, ux)| {
        let labels = classify(&ux, &flux, 0.0);
        let (alpha, beta) = (flux.alpha(), flux.beta());
        for (&s, &l) in ux.iter().zip(&labels.labels) {
            let in_sub = s > alpha && s < beta;
            let in_super = s < alpha || s > beta;
            let in_degen = s == alpha || s == beta;
            prop_assert_eq!(u8::from(in_sub) + u8::from(in_super) + u8::from(in_degen), 1);
            let expected = if in_sub {
                Label::Sub
            } else if in_super {
                Label::Super
            } else {
                Label::Degenerate
            };
            prop_assert_eq!(l, expected, "slope {}", s);
        }
        Ok(())
    })
}

/// `v ≥ 0`, and `v = 0` exactly on the clamped side of the critical slope.
pub fn v_field_sign() -> Result<(), String> {
    let strategy = (flux_and_slopes(100), prop_oneof![Just(Side::Upper), Just(Side::Lower)]);
    run(CASES, strategy, |((flux, ux), side)| {
        let eta = build_eta(&flux, side).unwrap();
        let v = v_field(&eta, &ux);
        let (alpha, beta) = (flux.alpha(), flux.beta());
        // sub-ulp gaps to the critical slope round Φ(β) − Φ(s) to zero
        let near = 1e-6 * beta;
        for (&s, &vi) in ux.iter().zip(&v) {
            prop_assert!(vi >= 0.0, "v({s}) = {vi}");
            let clamped = match side {
                Side::Upper => s >= beta,
                Side::Lower => s <= alpha,
            };
            if clamped {
                prop_assert_eq!(vi, 0.0, "slope {}", s);
            } else if (s - beta).abs() > near && (s - alpha).abs() > near {
                prop_assert!(vi > 0.0, "v({}) = 0 away from the clamp", s);
            }
        }
        Ok(())
    })
}

/// η is nondecreasing, constant beyond the critical slope and equal to Φ on
/// the matching interval.
pub fn eta_monotone_clamp() -> Result<(), String> {
    let strategy = (any_flux(), prop_oneof![Just(Side::Upper), Just(Side::Lower)], -4.0f64..4.0, 0.0f64..1.0);
    run(CASES, strategy, |(flux, side, s_units, gap)| {
        let eta = build_eta(&flux, side).unwrap();
        let (alpha, beta) = (flux.alpha(), flux.beta());
        let s = s_units * beta;
        let s2 = s + gap * beta;
        prop_assert!(eta.eval(s) <= eta.eval(s2), "η({s}) > η({s2})");
        let bp = eta.breakpoints();
        match side {
            Side::Upper => {
                if s >= beta {
                    prop_assert_eq!(eta.eval(s), flux.phi(beta));
                }
            }
            Side::Lower => {
                if s <= alpha {
                    prop_assert_eq!(eta.eval(s), flux.phi(alpha));
                }
            }
        }
        if s >= bp.match_lo && s <= bp.match_hi {
            prop_assert_eq!(eta.eval(s), flux.phi(s));
        }
        Ok(())
    })
}

/// With Ψ ≡ 0 and equal prescribed end slopes, one step leaves `h·Σu`
/// unchanged up to rounding.
pub fn conservation() -> Result<(), String> {
    let strategy = (any_flux(), prop::collection::vec(-1.0f64..1.0, 16..100), -3.0f64..3.0, 0.05f64..0.9);
    run(CASES, strategy, |(flux, u, slope_units, safety)| {
        let n = u.len();
        let grid = Grid1D::new(-1.0, 1.0, n).unwrap();
        let h = grid.h();
        let s0 = slope_units * flux.beta();
        let bc = BoundaryCondition { kind: BoundaryKind::NeumannSlope, left: s0, right: s0 };
        let state = SimState { t: 0.0, u };
        let dt = fbdiff::solver::stable_dt(&state, &grid, &flux, safety, 1e-12).dt;
        let next = step(&state, dt, &grid, &flux, &ConvectionSpec::none(), &bc).unwrap();
        let before: f64 = state.u.iter().sum::<f64>() * h;
        let after: f64 = next.u.iter().sum::<f64>() * h;
        let scale: f64 = state.u.iter().map(|x| x.abs()).sum::<f64>() * h + dt * n as f64;
        prop_assert!((after - before).abs() <= 8.0 * f64::EPSILON * n as f64 * scale, "mass {before} -> {after}");
        Ok(())
    })
}

fn finite(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    lo..hi
}

/// Random valid configuration covering every datum kind.
pub fn any_config() -> impl Strategy<Value = SimConfig> {
    let initial = prop_oneof![
        (finite(-1.5, 0.0), finite(0.0, 1.5), finite(-4.0, -1.01), finite(-0.99, 0.99), finite(1.01, 4.0), prop::option::of(finite(0.001, 0.1)))
            .prop_map(|(a1, b1, l, m, r, smoothing)| InitialConfig::PiecewiseSlope {
                a1,
                b1,
                slope_left: l,
                slope_mid: m,
                slope_right: r,
                smoothing
            }),
        (finite(-1.5, 0.0), finite(0.0, 1.5), finite(-0.99, 0.99), finite(1.01, 4.0), finite(-0.99, 0.99))
            .prop_map(|(a1, b1, l, m, r)| InitialConfig::SuperInterval {
                a1,
                b1,
                slope_left: l,
                slope_mid: m,
                slope_right: r,
                smoothing: None
            }),
        (finite(-2.0, 2.0), 1u32..5).prop_map(|(amplitude, modes)| InitialConfig::Sine { amplitude, modes }),
    ];
    (initial, 16usize..5000, finite(1e-3, 2.0), finite(0.1, 1.0), any::<u64>(), prop::option::of(finite(-2.0, -0.1)))
        .prop_map(|(initial, n, t_end, safety, seed, b)| {
            let mut cfg = canonical_config();
            cfg.initial = initial;
            cfg.grid.n = n;
            cfg.time.t_end = t_end;
            cfg.time.sample_interval = t_end / 10.0;
            cfg.time.safety = safety;
            cfg.seed = seed;
            if let Some(b) = b {
                cfg.model.convection.params = BTreeMap::from([("A".to_string(), -1.0), ("B".to_string(), b)]);
            }
            cfg.bc = None;
            cfg.time.dt_floor = None;
            cfg.regions = Default::default();
            cfg
        })
}

/// Emit and re-parse; also through the `config` member of a serialized report.
pub fn config_round_trip() -> Result<(), String> {
    run(CASES, any_config(), |raw| {
        let cfg = parse_config(&serde_json::to_string(&raw).unwrap()).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let again = parse_config(&cfg.to_json()).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(&again, &cfg);
        let report = serde_json::json!({ "status": "completed", "config": cfg });
        let text = serde_json::to_string_pretty(&report).unwrap();
        let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
        let back = parse_config(&parsed["config"].to_string()).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(back, cfg);
        Ok(())
    })
}

fn any_position() -> impl Strategy<Value = Option<f64>> {
    prop_oneof![1 => Just(None), 6 => (-4.0f64..4.0).prop_map(Some), 1 => any::<f64>().prop_filter("finite", |x| x.is_finite()).prop_map(Some)]
}

fn any_track() -> impl Strategy<Value = InterfaceTrack> {
    (0usize..20).prop_flat_map(|len| {
        (
            prop::collection::vec(0.0f64..10.0, len),
            prop::collection::vec(any_position(), len),
            prop::collection::vec(any_position(), len),
            prop::collection::vec((0.0f64..8.0, 0.0f64..8.0, 0.0f64..8.0), len),
        )
            .prop_map(|(mut times, left_pos, right_pos, measures)| {
                times.sort_by(f64::total_cmp);
                let mut tr = InterfaceTrack::empty((-4.0, 4.0), 0.004);
                tr.collapsed = left_pos.iter().zip(&right_pos).map(|(l, r)| l.is_none() && r.is_none()).collect();
                tr.times = times;
                tr.left_pos = left_pos;
                tr.right_pos = right_pos;
                tr.sub_measure = measures.iter().map(|m| m.0).collect();
                tr.super_measure = measures.iter().map(|m| m.1).collect();
                tr.degen_measure = measures.iter().map(|m| m.2).collect();
                tr
            })
    })
}

fn same_bits(a: &[Option<f64>], b: &[Option<f64>]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.map(f64::to_bits) == y.map(f64::to_bits))
}

fn same_bits_plain(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

/// Interface CSV re-parses to the same arrays bit for bit.
pub fn csv_round_trip() -> Result<(), String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("interfaces.csv");
    run(CASES, any_track(), |tr| {
        write_interfaces_csv(&tr, &path).unwrap();
        let back = read_interfaces_csv(&path).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert!(same_bits_plain(&back.times, &tr.times));
        prop_assert!(same_bits(&back.left_pos, &tr.left_pos));
        prop_assert!(same_bits(&back.right_pos, &tr.right_pos));
        prop_assert!(same_bits_plain(&back.sub_measure, &tr.sub_measure));
        prop_assert!(same_bits_plain(&back.super_measure, &tr.super_measure));
        prop_assert!(same_bits_plain(&back.degen_measure, &tr.degen_measure));
        Ok(())
    })
}

/// Every A6 suite by name.
pub fn invariant_suites() -> Vec<(&'static str, fn() -> Result<(), String>)> {
    vec![
        ("label partition", label_partition),
        ("classification oracle", classify_oracle),
        ("v-field sign", v_field_sign),
        ("eta monotone clamp", eta_monotone_clamp),
        ("conservation", conservation),
        ("config round trip", config_round_trip),
        ("csv round trip", csv_round_trip),
    ]
}

/// Heat regression run: Φ(s) = s, Ψ ≡ 0, `u₀ = sin(πx)` with zero ends on `[0, 1]`.
pub fn heat_config(n: usize, t_end: f64, safety: f64) -> SimConfig {
    let text = format!(
        r#"{{
  "model": {{ "flux": {{ "name": "linear" }}, "convection": {{ "name": "none" }} }},
  "grid": {{ "a": 0, "b": 1, "n": {n} }},
  "initial": {{ "kind": "sine" }},
  "bc": {{ "kind": "dirichlet", "left": 0, "right": 0 }},
  "time": {{ "t_end": {t_end}, "sample_interval": {t_end}, "safety": {safety} }}
}}"#
    );
    parse_config(&text).unwrap()
}

/// Final state of a configuration run through the solver.
pub fn final_state(cfg: &SimConfig) -> (Grid1D, SimState) {
    let traj = fbdiff::solver::simulate(&cfg.build_setup().unwrap()).unwrap();
    (traj.grid, traj.samples.last().unwrap().clone())
}

/// `max |u − e^{−π²t} sin(πx)|`.
pub fn heat_error(grid: &Grid1D, state: &SimState) -> f64 {
    let pi = std::f64::consts::PI;
    let decay = (-pi * pi * state.t).exp();
    state.u.iter().enumerate().map(|(i, &u)| (u - decay * (pi * grid.x(i)).sin()).abs()).fold(0.0, f64::max)
}
