/// Ordinary least-squares line `y ≈ intercept + slope·t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual.
    pub residual: f64,
}

/// Fits a line through `(t, y)` pairs; `None` with fewer than two distinct abscissae.
pub fn linear_fit(ts: &[f64], ys: &[f64]) -> Option<LineFit> {
    assert_eq!(ts.len(), ys.len());
    let n = ts.len();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let t_mean = ts.iter().sum::<f64>() / nf;
    let y_mean = ys.iter().sum::<f64>() / nf;
    let (mut stt, mut sty) = (0.0, 0.0);
    for (&t, &y) in ts.iter().zip(ys) {
        let dt = t - t_mean;
        stt += dt * dt;
        sty += dt * (y - y_mean);
    }
    if stt == 0.0 {
        return None;
    }
    let slope = sty / stt;
    let intercept = y_mean - slope * t_mean;
    let ss: f64 = ts
        .iter()
        .zip(ys)
        .map(|(&t, &y)| {
            let r = y - (intercept + slope * t);
            r * r
        })
        .sum();
    Some(LineFit { slope, intercept, residual: (ss / nf).sqrt() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line_is_recovered() {
        let ts: Vec<f64> = (0..20).map(|i| 0.05 * i as f64).collect();
        let ys: Vec<f64> = ts.iter().map(|t| 1.0 + 1.3 * t).collect();
        let f = linear_fit(&ts, &ys).unwrap();
        assert!((f.slope - 1.3).abs() < 1e-12);
        assert!((f.intercept - 1.0).abs() < 1e-12);
        assert!(f.residual < 1e-12);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(linear_fit(&[1.0], &[2.0]).is_none());
        assert!(linear_fit(&[1.0, 1.0], &[2.0, 3.0]).is_none());
    }
}
