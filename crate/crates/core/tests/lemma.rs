mod common;

use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

use fbdiff::lemma::{
    default_threshold, front_track, lemma_verdict, right_front_speed, simulate_lemma, ForcingKind, FrontTolerance, GKind,
    LemmaConfig, LemmaInitial,
};
use fbdiff::model::FluxSpec;
use fbdiff::solver::Trajectory;

fn run(cfg: &LemmaConfig) -> Trajectory {
    simulate_lemma(cfg, None).unwrap()
}

#[test]
fn v_stays_nonnegative() {
    let strategy = (
        1.0f64..3.0,
        0.2f64..2.0,
        0.2f64..2.0,
        prop_oneof![
            Just(ForcingKind::Constant),
            (-0.2f64..0.2, -0.2f64..0.2).prop_map(|(p, q)| ForcingKind::Perturbed { p, q })
        ],
        prop_oneof![(0.2f64..2.0).prop_map(|h| LemmaInitial::Parabola { height: h }), (0.2f64..2.0).prop_map(|h| LemmaInitial::Tent { height: h })],
        101usize..241,
    );
    common::runner(24)
        .run(&strategy, |(half, k, c, f_kind, initial, n)| {
            let mut cfg = LemmaConfig::canonical(n, 0.3);
            cfg.x2 = -half;
            cfg.x3 = half;
            cfg.k = k;
            cfg.c = c;
            cfg.f_kind = f_kind;
            cfg.initial = initial;
            let traj = simulate_lemma(&cfg, None).map_err(|e| TestCaseError::fail(e.to_string()))?;
            for s in &traj.samples {
                prop_assert!(s.u.iter().all(|&v| v >= 0.0), "negative v at t={}", s.t);
            }
            Ok(())
        })
        .unwrap();
}

#[test]
fn larger_datum_stays_larger() {
    let mut small = LemmaConfig::canonical(481, 0.6);
    small.initial = LemmaInitial::Tent { height: 0.5 };
    let mut large = small.clone();
    large.x2 = -1.5;
    large.x3 = 1.5;
    large.initial = LemmaInitial::Tent { height: 1.0 };
    for x in [-1.2, -0.5, 0.0, 0.7, 1.4] {
        assert!(large.initial.value(x, large.x2, large.x3) >= small.initial.value(x, small.x2, small.x3));
    }
    let (vs, vl) = (run(&small), run(&large));
    assert_eq!(vs.samples.len(), vl.samples.len());
    for (a, b) in vs.samples.iter().zip(&vl.samples) {
        assert_eq!(a.t, b.t);
        for (i, (&lo, &hi)) in a.u.iter().zip(&b.u).enumerate() {
            assert!(hi >= lo - 1e-12, "t={} x={}: {hi} < {lo}", a.t, vs.grid.x(i));
        }
    }
    let (fs, fl) = (front_track(&vs, default_threshold(&vs)), front_track(&vl, default_threshold(&vs)));
    for i in 0..fs.times.len() {
        assert!(fl.right_front[i].unwrap() >= fs.right_front[i].unwrap());
        assert!(fl.left_front[i].unwrap() <= fs.left_front[i].unwrap());
    }
}

#[test]
fn doubling_k_halves_time() {
    let base = LemmaConfig::canonical(401, 0.8);
    let mut fast = base.clone();
    fast.k = 2.0;
    fast.t_end = 0.4;
    fast.sample_interval = 0.01;
    let (slow, quick) = (run(&base), run(&fast));
    assert_eq!(slow.samples.len(), quick.samples.len());
    for (a, b) in slow.samples.iter().zip(&quick.samples) {
        assert!((a.t - 2.0 * b.t).abs() < 1e-12);
        let diff = a.u.iter().zip(&b.u).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(diff <= 1e-8, "t={}: {diff}", a.t);
    }
}

#[test]
fn canonical_front_outruns_lemma_speed() {
    let cfg = LemmaConfig::canonical(1201, 2.0);
    let traj = run(&cfg);
    let ft = front_track(&traj, default_threshold(&traj));
    let speed = right_front_speed(&ft, 5.0 * cfg.sample_interval).unwrap();
    assert!(speed >= 0.9, "{speed}");
    let h = traj.grid.h();
    let v = lemma_verdict(&ft, cfg.x2, cfg.x3, cfg.k, cfg.c, FrontTolerance { abs: 2.0 * h, per_time: 0.1 }).unwrap();
    assert!(v.holds, "{v:?}");
}

#[test]
fn flux_built_g_keeps_the_rate() {
    let pm = FluxSpec::perona_malik(1.0).unwrap();
    let mut cfg = LemmaConfig::canonical(801, 1.0);
    cfg.g_kind = GKind::FromFluxUpper;
    cfg.initial = LemmaInitial::Parabola { height: 0.4 };
    let traj = simulate_lemma(&cfg, Some(&pm)).unwrap();
    let ft = front_track(&traj, default_threshold(&traj));
    let h = traj.grid.h();
    let v = lemma_verdict(&ft, cfg.x2, cfg.x3, 1.0, cfg.c, FrontTolerance { abs: 2.0 * h, per_time: 0.1 }).unwrap();
    assert!(v.holds, "{v:?}");
}
