use serde::{Deserialize, Serialize};

use crate::interp::MonotoneCubic;
use crate::model::FluxSpec;
use crate::solver::{Grid1D, SimError};

/// Slope profile that is `left` on `[a, a1−w]`, `mid` on `[a1+w, b1−w]` and
/// `right` on `[b1+w, b]`, joined by C¹ smoothsteps of half-width `w`.
///
/// When the two transitions overlap they are superposed, so `a1 = b1` gives a
/// single `left → right` transition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeProfile {
    pub a: f64,
    pub a1: f64,
    pub b1: f64,
    pub left: f64,
    pub mid: f64,
    pub right: f64,
    pub smoothing: f64,
}

#[inline]
fn smoothstep(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        t * t * (3.0 - 2.0 * t)
    }
}

// ∫_0^t smoothstep
#[inline]
fn smoothstep_integral(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        0.5 + (t - 1.0)
    } else {
        t * t * t - 0.5 * t * t * t * t
    }
}

impl SlopeProfile {
    fn step(&self, center: f64, x: f64) -> f64 {
        let w = self.smoothing;
        if w == 0.0 {
            return if x >= center { 1.0 } else { 0.0 };
        }
        smoothstep((x - center + w) / (2.0 * w))
    }

    // ∫_a^x step(center, y) dy
    fn step_integral(&self, center: f64, x: f64) -> f64 {
        let w = self.smoothing;
        if w == 0.0 {
            return (x - center).max(0.0) - (self.a - center).max(0.0);
        }
        let t = |y: f64| (y - center + w) / (2.0 * w);
        2.0 * w * (smoothstep_integral(t(x)) - smoothstep_integral(t(self.a)))
    }

    pub fn slope(&self, x: f64) -> f64 {
        self.left + (self.mid - self.left) * self.step(self.a1, x) + (self.right - self.mid) * self.step(self.b1, x)
    }

    /// Exact antiderivative of [`slope`](Self::slope) with `u(a) = 0`.
    pub fn value(&self, x: f64) -> f64 {
        self.left * (x - self.a)
            + (self.mid - self.left) * self.step_integral(self.a1, x)
            + (self.right - self.mid) * self.step_integral(self.b1, x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialDatum {
    /// Forward interval `(a1, b1)` flanked by backward slopes.
    PiecewiseSlope(SlopeProfile),
    /// Backward interval `(a1, b1)` flanked by forward slopes.
    SuperInterval(SlopeProfile),
    /// `amplitude · sin(modes·π·(x−a)/(b−a))`.
    Sine { amplitude: f64, modes: u32 },
    /// Shape-preserving cubic through `(x, u)` pairs.
    Table(MonotoneCubic),
}

fn strictly_inside(s: f64, alpha: f64, beta: f64) -> bool {
    alpha < s && s < beta
}

impl InitialDatum {
    /// Checks the slope ordering each profile kind promises.
    pub fn check(&self, flux: &FluxSpec) -> Result<(), String> {
        let (alpha, beta) = (flux.alpha(), flux.beta());
        match self {
            InitialDatum::PiecewiseSlope(p) => {
                if !strictly_inside(p.mid, alpha, beta) {
                    return Err(format!("slope_mid must satisfy α < slope_mid < β (strict), got {} with α={alpha}, β={beta}", p.mid));
                }
                if !(p.left < alpha) {
                    return Err(format!("slope_left must satisfy slope_left < α, got {} with α={alpha}", p.left));
                }
                if !(p.right > beta) {
                    return Err(format!("slope_right must satisfy slope_right > β, got {} with β={beta}", p.right));
                }
                Ok(())
            }
            InitialDatum::SuperInterval(p) => {
                if !(p.mid < alpha || p.mid > beta) {
                    return Err(format!("slope_mid must lie outside [α, β], got {} with α={alpha}, β={beta}", p.mid));
                }
                for (name, s) in [("slope_left", p.left), ("slope_right", p.right)] {
                    if !strictly_inside(s, alpha, beta) {
                        return Err(format!("{name} must satisfy α < {name} < β (strict), got {s}"));
                    }
                }
                Ok(())
            }
            InitialDatum::Sine { .. } | InitialDatum::Table(_) => Ok(()),
        }
    }

    pub fn sample(&self, grid: &Grid1D) -> Result<Vec<f64>, SimError> {
        let u: Vec<f64> = grid
            .nodes()
            .map(|x| match self {
                InitialDatum::PiecewiseSlope(p) | InitialDatum::SuperInterval(p) => p.value(x),
                InitialDatum::Sine { amplitude, modes } => {
                    let phase = std::f64::consts::PI * f64::from(*modes) * (x - grid.a()) / (grid.b() - grid.a());
                    amplitude * phase.sin()
                }
                InitialDatum::Table(t) => t.value(x),
            })
            .collect();
        if let Some(i) = u.iter().position(|v| !v.is_finite()) {
            return Err(SimError::NonFinite { node: i, t: 0.0 });
        }
        Ok(u)
    }

    pub fn profile(&self) -> Option<&SlopeProfile> {
        match self {
            InitialDatum::PiecewiseSlope(p) | InitialDatum::SuperInterval(p) => Some(p),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(w: f64) -> SlopeProfile {
        SlopeProfile { a: -4.0, a1: -1.0, b1: 1.0, left: -2.0, mid: 0.0, right: 2.0, smoothing: w }
    }

    #[test]
    fn value_is_antiderivative_of_slope() {
        let p = profile(0.05);
        let h = 1e-5;
        for i in 0..400 {
            let x = -3.99 + 7.98 * i as f64 / 399.0;
            let fd = (p.value(x + h) - p.value(x - h)) / (2.0 * h);
            assert!((fd - p.slope(x)).abs() < 1e-6, "x={x}");
        }
        assert_eq!(p.value(-4.0), 0.0);
    }

    #[test]
    fn plateaus_are_exact() {
        let p = profile(0.1);
        assert_eq!(p.slope(-3.0), -2.0);
        assert_eq!(p.slope(0.0), 0.0);
        assert_eq!(p.slope(2.0), 2.0);
        // crossings of α = −1 and β = 1 sit at the anchors by symmetry
        assert!((p.slope(-1.0) + 1.0).abs() < 1e-15);
        assert!((p.slope(1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sharp_profile_integrates() {
        let p = profile(0.0);
        assert_eq!(p.value(-1.0), -6.0);
        assert_eq!(p.value(1.0), -6.0);
        assert_eq!(p.value(2.0), -4.0);
    }

    #[test]
    fn coincident_anchors_give_single_transition() {
        let p = SlopeProfile { a: -2.0, a1: 0.0, b1: 0.0, left: 0.0, mid: 2.0, right: 0.0, smoothing: 0.1 };
        for i in 0..100 {
            let x = -2.0 + 4.0 * i as f64 / 99.0;
            assert!(p.slope(x).abs() < 1e-15);
        }
    }

    #[test]
    fn slope_ordering_checks() {
        let pm = FluxSpec::perona_malik(1.0).unwrap();
        assert!(InitialDatum::PiecewiseSlope(profile(0.1)).check(&pm).is_ok());
        let mut bad = profile(0.1);
        bad.mid = 1.0;
        let err = InitialDatum::PiecewiseSlope(bad).check(&pm).unwrap_err();
        assert!(err.contains("strict"));
        let mirror = SlopeProfile { a: -2.0, a1: -0.5, b1: 0.5, left: 0.0, mid: 2.0, right: 0.0, smoothing: 0.02 };
        assert!(InitialDatum::SuperInterval(mirror).check(&pm).is_ok());
        assert!(InitialDatum::PiecewiseSlope(mirror).check(&pm).is_err());
    }
}
