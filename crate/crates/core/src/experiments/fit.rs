//! Least-squares fits of power laws.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    /// Slope of `log y` against `log t`.
    pub slope: f64,
    pub intercept: f64,
    pub t0: f64,
    pub t1: f64,
    /// Root-mean-square residual of the fit in `log y`.
    pub residual: f64,
    pub samples: usize,
}

/// Fits `log y = intercept + slope log t` over the samples with `t` in
/// `[t0, t1]` and positive `y`.
pub fn fit_loglog(ts: &[f64], ys: &[f64], t0: f64, t1: f64) -> Result<RateFit> {
    let pts: Vec<(f64, f64)> = ts
        .iter()
        .zip(ys)
        .filter(|(t, y)| **t >= t0 && **t <= t1 && **t > 0.0 && **y > 0.0)
        .map(|(t, y)| (t.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::Config(format!("fit window [{t0}, {t1}] holds {} usable samples", pts.len())));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Config("fit window holds a single abscissa".into()));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum::<f64>() / n).sqrt();
    Ok(RateFit { slope, intercept, t0, t1, residual, samples: pts.len() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let ts: Vec<f64> = (1..50).map(|k| k as f64).collect();
        let ys: Vec<f64> = ts.iter().map(|t| 3.0 * t.powf(-0.25)).collect();
        let f = fit_loglog(&ts, &ys, 10.0, 49.0).unwrap();
        assert!((f.slope + 0.25).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
        assert!(f.residual < 1e-12);
        assert_eq!(f.samples, 40);
        assert!(fit_loglog(&ts, &ys, 100.0, 200.0).is_err());
    }
}
