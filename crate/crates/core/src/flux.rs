//! Strictly convex fluxes of the form `A(u) = a u^2 + g(u)`.
//!
//! The perturbation `g` is either zero, a sine, a tabulated cubic spline,
//! or an arbitrary closed-form callback. The bound `g2_sup` on `|g''|` is
//! supplied by the caller and checked by sampling; it cannot be inferred.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};

/// Default number of samples used to check convexity and the `g''` bound.
pub const DEFAULT_CHECK_SAMPLES: usize = 10_000;

/// A twice-differentiable scalar function returning `(g, g', g'')`.
pub trait ScalarFn: Send + Sync {
    fn eval(&self, u: f64) -> (f64, f64, f64);

    /// `g(w + y) - g(y) - g'(y) w`, overridable where cancellation matters.
    fn remainder(&self, y: f64, w: f64) -> f64 {
        let (gy, dgy, _) = self.eval(y);
        self.eval(y + w).0 - gy - dgy * w
    }
}

/// Natural cubic spline through tabulated `(u, g)` pairs. `g''` is the
/// second derivative of the interpolant (piecewise linear).
#[derive(Debug, Clone)]
pub struct CubicSpline {
    knots: Vec<f64>,
    values: Vec<f64>,
    second: Vec<f64>,
}

impl CubicSpline {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let n = knots.len();
        if n < 3 || values.len() != n {
            return Err(Error::FluxSpec("tabulated g needs at least three (u, g) rows".into()));
        }
        if knots.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::FluxSpec("tabulated knots must be strictly increasing".into()));
        }
        // tridiagonal system for the second derivatives, natural end conditions
        let mut sub = vec![0.0; n];
        let mut diag = vec![1.0; n];
        let mut sup = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        for i in 1..n - 1 {
            let h0 = knots[i] - knots[i - 1];
            let h1 = knots[i + 1] - knots[i];
            sub[i] = h0 / 6.0;
            diag[i] = (h0 + h1) / 3.0;
            sup[i] = h1 / 6.0;
            rhs[i] = (values[i + 1] - values[i]) / h1 - (values[i] - values[i - 1]) / h0;
        }
        let second = crate::solver::thomas(&sub, &diag, &sup, &rhs);
        Ok(Self { knots, values, second })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.knots[0], *self.knots.last().unwrap())
    }

    fn cell(&self, u: f64) -> usize {
        let k = &self.knots;
        match k.binary_search_by(|p| p.partial_cmp(&u).unwrap()) {
            Ok(i) => i.min(k.len() - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(k.len() - 2),
        }
    }
}

impl ScalarFn for CubicSpline {
    fn eval(&self, u: f64) -> (f64, f64, f64) {
        let i = self.cell(u);
        let (x0, x1) = (self.knots[i], self.knots[i + 1]);
        let h = x1 - x0;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.second[i], self.second[i + 1]);
        let a = (x1 - u) / h;
        let b = (u - x0) / h;
        let g = a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let dg = (y1 - y0) / h + ((1.0 - 3.0 * a * a) * m0 + (3.0 * b * b - 1.0) * m1) * h / 6.0;
        let d2g = a * m0 + b * m1;
        (g, dg, d2g)
    }
}

/// The perturbation `g` of the quadratic flux.
#[derive(Clone)]
pub enum Perturbation {
    Zero,
    /// `amplitude * sin(frequency * u)`
    Sine { amplitude: f64, frequency: f64 },
    Tabulated(Arc<CubicSpline>),
    Custom { name: String, func: Arc<dyn ScalarFn> },
}

impl fmt::Debug for Perturbation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Perturbation::Zero => write!(f, "Zero"),
            Perturbation::Sine { amplitude, frequency } => {
                write!(f, "Sine {{ amplitude: {amplitude}, frequency: {frequency} }}")
            }
            Perturbation::Tabulated(s) => write!(f, "Tabulated({} knots)", s.knots.len()),
            Perturbation::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

impl Perturbation {
    #[inline]
    pub fn eval(&self, u: f64) -> (f64, f64, f64) {
        match self {
            Perturbation::Zero => (0.0, 0.0, 0.0),
            Perturbation::Sine { amplitude, frequency } => {
                let (s, c) = (frequency * u).sin_cos();
                (amplitude * s, amplitude * frequency * c, -amplitude * frequency * frequency * s)
            }
            Perturbation::Tabulated(s) => s.eval(u),
            Perturbation::Custom { func, .. } => func.eval(u),
        }
    }

    #[inline]
    fn value(&self, u: f64) -> f64 {
        match self {
            Perturbation::Zero => 0.0,
            Perturbation::Sine { amplitude, frequency } => amplitude * (frequency * u).sin(),
            _ => self.eval(u).0,
        }
    }

    fn remainder(&self, y: f64, w: f64) -> f64 {
        match self {
            Perturbation::Zero => 0.0,
            Perturbation::Custom { func, .. } => func.remainder(y, w),
            _ => {
                let (gy, dgy, _) = self.eval(y);
                self.value(y + w) - gy - dgy * w
            }
        }
    }
}

/// Admissibility of a flux for the contraction theorem: `lambda = 2a - 11 g2_sup`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Admissibility {
    pub lambda: f64,
    pub admissible: bool,
}

/// The flux `A(u) = a u^2 + g(u)` together with its certified data.
#[derive(Debug, Clone)]
pub struct FluxModel {
    pub a: f64,
    pub g: Perturbation,
    pub g2_sup: f64,
    pub validity_interval: (f64, f64),
}

impl FluxModel {
    /// Builds and validates a perturbed quadratic flux, sampling `A''` and
    /// `g''` at [`DEFAULT_CHECK_SAMPLES`] points of the interval.
    pub fn perturbed_quadratic(
        a: f64,
        g: Perturbation,
        g2_sup: f64,
        interval: (f64, f64),
    ) -> Result<Self> {
        Self::perturbed_quadratic_checked(a, g, g2_sup, interval, DEFAULT_CHECK_SAMPLES)
    }

    pub fn perturbed_quadratic_checked(
        a: f64,
        g: Perturbation,
        g2_sup: f64,
        interval: (f64, f64),
        samples: usize,
    ) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::NonPositiveQuadratic(a));
        }
        if !(g2_sup >= 0.0) {
            return Err(Error::FluxSpec(format!("g2_sup must be nonnegative, got {g2_sup}")));
        }
        let (lo, hi) = interval;
        if !(hi > lo) {
            return Err(Error::FluxSpec(format!("empty validity interval [{lo}, {hi}]")));
        }
        let samples = samples.max(2);
        let slack = 1e-12 * g2_sup.max(1.0);
        for k in 0..samples {
            let u = lo + (hi - lo) * k as f64 / (samples - 1) as f64;
            let (_, _, d2g) = g.eval(u);
            let second = 2.0 * a + d2g;
            if !(second > 0.0) {
                return Err(Error::NotConvex { u, value: second });
            }
            if d2g.abs() > g2_sup + slack {
                return Err(Error::BoundViolated { u, value: d2g.abs(), bound: g2_sup });
            }
        }
        Ok(Self { a, g, g2_sup, validity_interval: interval })
    }

    /// Burgers-type flux `a u^2`.
    pub fn quadratic(a: f64, interval: (f64, f64)) -> Result<Self> {
        Self::perturbed_quadratic(a, Perturbation::Zero, 0.0, interval)
    }

    /// `a u^2 + amplitude sin(u)` with the exact bound `g2_sup = |amplitude|`.
    pub fn quadratic_plus_sine(a: f64, amplitude: f64, interval: (f64, f64)) -> Result<Self> {
        Self::perturbed_quadratic(
            a,
            Perturbation::Sine { amplitude, frequency: 1.0 },
            amplitude.abs(),
            interval,
        )
    }

    /// Default validity interval for a shock with endpoints `u_minus > u_plus`.
    pub fn interval_for_shock(u_minus: f64, u_plus: f64) -> (f64, f64) {
        (u_plus - 1.0, u_minus + 1.0)
    }

    pub fn contains(&self, u: f64) -> bool {
        u >= self.validity_interval.0 && u <= self.validity_interval.1
    }

    fn check(&self, u: f64) -> Result<()> {
        if self.contains(u) {
            Ok(())
        } else {
            Err(Error::OutOfInterval { u, lo: self.validity_interval.0, hi: self.validity_interval.1 })
        }
    }

    /// `(A(u), A'(u), A''(u))`.
    pub fn eval(&self, u: f64) -> Result<(f64, f64, f64)> {
        self.check(u)?;
        Ok(self.eval_unchecked(u))
    }

    #[inline]
    pub fn eval_unchecked(&self, u: f64) -> (f64, f64, f64) {
        let (g, dg, d2g) = self.g.eval(u);
        (self.a * u * u + g, 2.0 * self.a * u + dg, 2.0 * self.a + d2g)
    }

    #[inline]
    pub fn value(&self, u: f64) -> f64 {
        self.a * u * u + self.g.value(u)
    }

    #[inline]
    pub fn speed(&self, u: f64) -> f64 {
        match &self.g {
            Perturbation::Zero => 2.0 * self.a * u,
            g => 2.0 * self.a * u + g.eval(u).1,
        }
    }

    /// Relative flux `A(u|v) = A(u) - A(v) - A'(v)(u - v)`.
    pub fn relative_flux(&self, u: f64, v: f64) -> Result<f64> {
        self.check(u)?;
        self.check(v)?;
        Ok(self.relative_flux_unchecked(u, v))
    }

    /// Relative flux evaluated as `a (u - v)^2 + [g(u) - g(v) - g'(v)(u - v)]`
    /// so that the quadratic part carries no cancellation error.
    #[inline]
    pub fn relative_flux_unchecked(&self, u: f64, v: f64) -> f64 {
        let w = u - v;
        self.a * w * w + self.g.remainder(v, w)
    }

    pub fn contraction_admissible(&self) -> Admissibility {
        let lambda = 2.0 * self.a - 11.0 * self.g2_sup;
        Admissibility { lambda, admissible: lambda > 0.0 }
    }

    /// Like [`FluxModel::contraction_admissible`] but an inadmissible flux is an error.
    pub fn require_admissible(&self) -> Result<Admissibility> {
        let adm = self.contraction_admissible();
        if adm.admissible {
            Ok(adm)
        } else {
            Err(Error::Inadmissible { lambda: adm.lambda })
        }
    }

    /// Maximum of `|A'|` over `[lo, hi]`, by sampling (the flux is convex,
    /// so the extremes sit at the ends).
    pub fn max_speed(&self, lo: f64, hi: f64) -> f64 {
        self.speed(lo).abs().max(self.speed(hi).abs())
    }

    /// Coefficient `(2a + g2_sup) / (2 (u_minus - u_plus))` of the shift law.
    pub fn shift_gain(&self, u_minus: f64, u_plus: f64) -> f64 {
        (2.0 * self.a + self.g2_sup) / (2.0 * (u_minus - u_plus))
    }

    pub fn describe(&self) -> String {
        format!("a = {}, g = {:?}, g2_sup = {}", self.a, self.g, self.g2_sup)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn burgers() -> FluxModel {
        FluxModel::quadratic(1.0, (-5.0, 5.0)).unwrap()
    }

    fn sine(amp: f64) -> FluxModel {
        FluxModel::quadratic_plus_sine(1.0, amp, (-5.0, 5.0)).unwrap()
    }

    #[test]
    fn burgers_values() {
        assert_eq!(burgers().eval(2.0).unwrap(), (4.0, 4.0, 2.0));
    }

    #[test]
    fn sine_values_at_zero() {
        let (a0, a1, a2) = sine(0.05).eval(0.0).unwrap();
        assert_eq!(a0, 0.0);
        assert_abs_diff_eq!(a1, 0.05, epsilon = 1e-15);
        assert_abs_diff_eq!(a2, 2.0, epsilon = 1e-15);
    }

    #[test]
    fn out_of_interval_is_rejected() {
        assert!(matches!(burgers().eval(6.0), Err(Error::OutOfInterval { .. })));
        assert!(burgers().relative_flux(0.0, -7.0).is_err());
    }

    #[test]
    fn construction_errors() {
        assert!(matches!(
            FluxModel::quadratic(0.0, (-1.0, 1.0)),
            Err(Error::NonPositiveQuadratic(_))
        ));
        // g = -2.5 sin(u) gives A'' = 2 + 2.5 sin(u) < 0 near u = -pi/2
        let bad = FluxModel::perturbed_quadratic(
            1.0,
            Perturbation::Sine { amplitude: -2.5, frequency: 1.0 },
            2.5,
            (-2.0, 0.0),
        );
        assert!(matches!(bad, Err(Error::NotConvex { .. })));
        let understated = FluxModel::perturbed_quadratic(
            1.0,
            Perturbation::Sine { amplitude: 0.1, frequency: 1.0 },
            0.05,
            (-3.0, 3.0),
        );
        assert!(matches!(understated, Err(Error::BoundViolated { .. })));
    }

    #[test]
    fn relative_flux_examples() {
        assert_eq!(burgers().relative_flux(3.0, 1.0).unwrap(), 4.0);
        assert_eq!(sine(0.05).relative_flux(0.7, 0.7).unwrap(), 0.0);
        let r = sine(0.05).relative_flux(1.5, 1.0).unwrap();
        assert!((r - 0.25).abs() <= 0.05 * 0.25 / 2.0 + 1e-15);
    }

    #[test]
    fn admissibility_examples() {
        assert_eq!(burgers().contraction_admissible(), Admissibility { lambda: 2.0, admissible: true });
        let l = sine(0.1).contraction_admissible();
        assert_abs_diff_eq!(l.lambda, 0.9, epsilon = 1e-14);
        assert!(l.admissible);
        let l = sine(0.2).contraction_admissible();
        assert_abs_diff_eq!(l.lambda, -0.2, epsilon = 1e-14);
        assert!(!l.admissible);
        // 0.05 < 2/11 < 0.2
        assert!(sine(0.05).require_admissible().is_ok());
        assert!(matches!(sine(0.2).require_admissible(), Err(Error::Inadmissible { .. })));
    }

    #[test]
    fn derivative_matches_central_differences_at_second_order() {
        let f = sine(0.05);
        let u = 0.37;
        let exact = f.eval(u).unwrap().1;
        let errs: Vec<f64> = [1e-2, 5e-3, 2.5e-3]
            .iter()
            .map(|h| ((f.value(u + h) - f.value(u - h)) / (2.0 * h) - exact).abs())
            .collect();
        // for the quadratic part central differences are exact; the sine error is h^2/6
        assert!(errs[0] / errs[1] > 3.5 && errs[1] / errs[2] > 3.5);
    }

    #[test]
    fn tabulated_spline_reproduces_sine() {
        let knots: Vec<f64> = (0..=200).map(|k| -3.0 + 6.0 * k as f64 / 200.0).collect();
        let vals: Vec<f64> = knots.iter().map(|u| 0.05 * u.sin()).collect();
        let spline = CubicSpline::new(knots, vals).unwrap();
        let f = FluxModel::perturbed_quadratic(
            1.0,
            Perturbation::Tabulated(Arc::new(spline)),
            0.051,
            (-3.0, 3.0),
        )
        .unwrap();
        let (a0, a1, _) = f.eval(0.4).unwrap();
        assert_abs_diff_eq!(a0, 0.16 + 0.05 * 0.4f64.sin(), epsilon = 1e-7);
        assert_abs_diff_eq!(a1, 0.8 + 0.05 * 0.4f64.cos(), epsilon = 1e-5);
    }

    proptest! {
        #[test]
        fn relative_flux_is_nonnegative_and_close_to_quadratic(
            u in -4.0f64..4.0, v in -4.0f64..4.0, amp in -0.18f64..0.18
        ) {
            let f = sine(amp);
            let r = f.relative_flux(u, v).unwrap();
            prop_assert!(r >= -1e-15);
            let w = u - v;
            prop_assert!((r - w * w).abs() <= f.g2_sup * w * w / 2.0 + 1e-14);
        }
    }
}
