//! Viscous shock profiles `S1` and the inviscid step `S0`.
//!
//! The profile solves the first-order autonomous ODE
//! `S1' = -sigma (S1 - u) + A(S1) - A(u)` (either endpoint `u`) with the
//! translation fixed by `S1(0) = (u_minus + u_plus) / 2`. It is integrated
//! outward from the origin in both directions and tabulated on a symmetric
//! uniform grid; beyond saturation the table is extended by the constants.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::flux::{FluxModel, Perturbation};
use crate::grid::{self, UniformGrid};
use crate::ode::Dopri;

/// Rankine-Hugoniot speed `(A(u+) - A(u-)) / (u+ - u-)`.
pub fn shock_speed(f: &FluxModel, u_minus: f64, u_plus: f64) -> Result<f64> {
    if !(u_minus > u_plus) {
        return Err(Error::NotCompressive { u_minus, u_plus });
    }
    let a_minus = f.eval(u_minus)?.0;
    let a_plus = f.eval(u_plus)?.0;
    // a (u+^2 - u-^2) / (u+ - u-) = a (u+ + u-) exactly, plus the g chord
    let g_chord = match &f.g {
        Perturbation::Zero => 0.0,
        g => (g.eval(u_plus).0 - g.eval(u_minus).0) / (u_plus - u_minus),
    };
    let sigma = f.a * (u_plus + u_minus) + g_chord;
    debug_assert!((sigma - (a_plus - a_minus) / (u_plus - u_minus)).abs() < 1e-9 * (1.0 + sigma.abs()));
    Ok(sigma)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ProfileOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Required `|S1(+-half_width) - u+-| / (u_minus - u_plus)` at the ends.
    pub tail_tol: f64,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        Self { rtol: 1e-12, atol: 1e-15, tail_tol: 1e-8 }
    }
}

/// The tabulated viscous shock.
#[derive(Debug, Clone)]
pub struct ShockProfile {
    pub u_minus: f64,
    pub u_plus: f64,
    pub sigma: f64,
    pub grid: UniformGrid,
    pub values: Vec<f64>,
    /// `S1'` at the nodes, from the ODE right-hand side.
    pub derivs: Vec<f64>,
    pub c_minus: f64,
    pub c_plus: f64,
    rhs: ProfileRhs,
}

/// Right-hand side of the profile ODE expanded about the nearer endpoint.
#[derive(Debug, Clone)]
struct ProfileRhs {
    flux: FluxModel,
    u_minus: f64,
    u_plus: f64,
    sigma: f64,
}

impl ProfileRhs {
    #[inline]
    fn eval(&self, s: f64) -> f64 {
        let end = if s >= 0.5 * (self.u_minus + self.u_plus) { self.u_minus } else { self.u_plus };
        let d = s - end;
        let quad = d * (self.flux.a * (s + end) - self.sigma);
        let pert = match &self.flux.g {
            Perturbation::Zero => 0.0,
            g => g.eval(s).0 - g.eval(end).0,
        };
        quad + pert
    }
}

impl ShockProfile {
    /// Default half width `20 / min(c-, c+)`.
    pub fn default_half_width(f: &FluxModel, u_minus: f64, u_plus: f64) -> Result<f64> {
        let (cm, cp) = tail_rates(f, u_minus, u_plus)?;
        Ok(20.0 / cm.min(cp))
    }

    /// Profile with default half width and resolution; the half width is
    /// enlarged automatically when the tails have not settled.
    pub fn auto(f: &FluxModel, u_minus: f64, u_plus: f64) -> Result<Self> {
        let (cm, cp) = tail_rates(f, u_minus, u_plus)?;
        let h = Self::default_spacing(cm, cp);
        let mut half = 20.0 / cm.min(cp);
        for _ in 0..4 {
            let n = 2 * (half / h).ceil() as usize + 1;
            match compute_profile(f, u_minus, u_plus, half, n) {
                Err(Error::TailsNotSettled { required, .. }) => half = required * 1.05,
                other => return other,
            }
        }
        Err(Error::Profile("could not settle the profile tails".into()))
    }

    /// Node spacing of [`ShockProfile::auto`], fifty nodes per e-fold of
    /// the faster tail.
    pub fn default_spacing(c_minus: f64, c_plus: f64) -> f64 {
        0.02 / c_minus.max(c_plus)
    }

    pub fn flux(&self) -> &FluxModel {
        &self.rhs.flux
    }

    pub fn half_width(&self) -> f64 {
        self.grid.hi
    }

    pub fn strength(&self) -> f64 {
        self.u_minus - self.u_plus
    }

    /// Slope of the profile ODE at state `s`.
    pub fn ode_rhs(&self, s: f64) -> f64 {
        self.rhs.eval(s)
    }

    /// `(S1(x), S1'(x))` by monotone cubic Hermite interpolation, with the
    /// derivative taken from the ODE at the interpolated value.
    pub fn sample(&self, x: f64) -> (f64, f64) {
        let g = &self.grid;
        if x <= g.lo {
            return if x < g.lo { (self.u_minus, 0.0) } else { (self.values[0], self.derivs[0]) };
        }
        if x >= g.hi {
            return if x > g.hi {
                (self.u_plus, 0.0)
            } else {
                (self.values[g.n - 1], self.derivs[g.n - 1])
            };
        }
        let (i, t) = grid::locate(g, x).expect("inside grid");
        if t == 0.0 {
            return (self.values[i], self.derivs[i]);
        }
        let h = g.spacing();
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = grid::limit_slopes(y0, y1, self.derivs[i], self.derivs[i + 1], h);
        let s = grid::hermite(y0, y1, m0, m1, h, t);
        (s, self.ode_rhs(s))
    }

    pub fn value(&self, x: f64) -> f64 {
        self.sample(x).0
    }

    /// `S1((x - shift) / scale)` together with the derivative of the
    /// unscaled profile at that argument.
    pub fn sample_scaled(&self, x: f64, shift: f64, scale: f64) -> (f64, f64) {
        self.sample((x - shift) / scale)
    }

    /// Position `x` with `S1(x) = y` for `u+ < y < u-`. Values at or
    /// beyond the endpoints map to the ends of the table.
    pub fn inverse(&self, y: f64) -> f64 {
        let g = &self.grid;
        let v = &self.values;
        if y >= v[0] {
            return g.lo;
        }
        if y <= v[g.n - 1] {
            return g.hi;
        }
        // values are nonincreasing; find i with v[i] >= y > v[i+1]
        let (mut lo, mut hi) = (0usize, g.n - 1);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if v[mid] >= y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let i = lo;
        let h = g.spacing();
        let (y0, y1) = (v[i], v[i + 1]);
        let (m0, m1) = grid::limit_slopes(y0, y1, self.derivs[i], self.derivs[i + 1], h);
        let (mut a, mut b) = (0.0f64, 1.0f64);
        for _ in 0..60 {
            let mid = 0.5 * (a + b);
            if grid::hermite(y0, y1, m0, m1, h, mid) >= y {
                a = mid;
            } else {
                b = mid;
            }
        }
        g.point(i) + 0.5 * (a + b) * h
    }

    /// `(||S1'||_2, ||S1 - S0||_2)` by composite trapezoid on the table,
    /// splitting the step integral at the origin node.
    pub fn l2_norms(&self) -> (f64, f64) {
        let h = self.grid.spacing();
        let d2 = grid::trapezoid_map(&self.derivs, h, |_, d| d * d);
        let mid = self.grid.n / 2;
        let left = grid::trapezoid_map(&self.values[..=mid], h, |_, s| (s - self.u_minus).powi(2));
        let right = grid::trapezoid_map(&self.values[mid..], h, |_, s| (s - self.u_plus).powi(2));
        // Euler-Maclaurin end correction at the kink x = 0; the far ends are flat
        let (s0, d0) = (self.values[mid], self.derivs[mid]);
        let slope_left = 2.0 * (s0 - self.u_minus) * d0;
        let slope_right = 2.0 * (s0 - self.u_plus) * d0;
        let corr = h * h / 12.0 * (slope_left - slope_right);
        (d2.sqrt(), (left + right - corr).sqrt())
    }

    /// Least-squares slope of `ln|S1 - u+-|` on the outer quarter of the
    /// grid on each side, as `(c-, c+)`; used to cross-check the
    /// linearized rates.
    pub fn fitted_tail_rates(&self) -> (f64, f64) {
        let g = &self.grid;
        let half = g.hi;
        let floor = 1e-11 * self.strength();
        let mut left = Vec::new();
        let mut right = Vec::new();
        for i in 0..g.n {
            let x = g.point(i);
            if x <= -0.5 * half {
                let d = self.u_minus - self.values[i];
                if d > floor {
                    left.push((x, d.ln()));
                }
            } else if x >= 0.5 * half {
                let d = self.values[i] - self.u_plus;
                if d > floor {
                    right.push((x, d.ln()));
                }
            }
        }
        (slope(&left).abs(), slope(&right).abs())
    }
}

fn slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Linearized tail rates `c+- = |A'(u+-) - sigma|`.
pub fn tail_rates(f: &FluxModel, u_minus: f64, u_plus: f64) -> Result<(f64, f64)> {
    let sigma = shock_speed(f, u_minus, u_plus)?;
    let cm = (f.eval(u_minus)?.1 - sigma).abs();
    let cp = (f.eval(u_plus)?.1 - sigma).abs();
    Ok((cm, cp))
}

/// Computes the viscous shock on `[-half_width, half_width]` with `n` nodes
/// (bumped to the next odd count so that the origin is a node).
pub fn compute_profile(
    f: &FluxModel,
    u_minus: f64,
    u_plus: f64,
    half_width: f64,
    n: usize,
) -> Result<ShockProfile> {
    compute_profile_with(f, u_minus, u_plus, half_width, n, ProfileOptions::default())
}

pub fn compute_profile_with(
    f: &FluxModel,
    u_minus: f64,
    u_plus: f64,
    half_width: f64,
    n: usize,
    opts: ProfileOptions,
) -> Result<ShockProfile> {
    let sigma = shock_speed(f, u_minus, u_plus)?;
    let (c_minus, c_plus) = tail_rates(f, u_minus, u_plus)?;
    if !(half_width > 0.0) {
        return Err(Error::Profile(format!("half width must be positive, got {half_width}")));
    }
    let n = if n.is_multiple_of(2) { n + 1 } else { n }.max(5);
    let grid = UniformGrid::symmetric(half_width, n);
    let rhs = ProfileRhs { flux: f.clone(), u_minus, u_plus, sigma };
    let mid = n / 2;
    let strength = u_minus - u_plus;
    let saturation = 10.0 * f64::EPSILON * u_minus.abs().max(u_plus.abs()).max(strength);

    let mut values = vec![0.0; n];
    values[mid] = 0.5 * (u_minus + u_plus);
    let h = grid.spacing();

    // direction = +1: toward u+, -1: toward u-
    let mut sweep = |direction: f64| -> Result<f64> {
        let target = if direction > 0.0 { u_plus } else { u_minus };
        let mut stepper = Dopri::new(1, opts.rtol, opts.atol, h);
        let mut state = [values[mid]];
        let mut xi = 0.0;
        let mut saturated = false;
        let mut ode = |_: f64, s: &[f64], d: &mut [f64]| d[0] = direction * rhs.eval(s[0]);
        for k in 1..=mid {
            let idx = if direction > 0.0 { mid + k } else { mid - k };
            if !saturated {
                stepper.advance(&mut ode, &mut xi, &mut state, k as f64 * h, &mut |_, _| Ok(()))?;
                let dev = (state[0] - target) * direction;
                if dev <= saturation {
                    saturated = true;
                    state[0] = target;
                }
            }
            values[idx] = if saturated { target } else { state[0] };
        }
        if saturated {
            return Ok(half_width);
        }
        // continue past the table to report the needed half width
        let mut x_end = half_width;
        while (state[0] - target).abs() > opts.tail_tol * strength && x_end < 1e3 * half_width {
            let next = x_end + h.max(1e-3 * half_width);
            stepper.advance(&mut ode, &mut xi, &mut state, next, &mut |_, _| Ok(()))?;
            x_end = next;
        }
        Ok(x_end)
    };
    let need_right = sweep(1.0)?;
    let need_left = sweep(-1.0)?;
    let required = need_right.max(need_left);
    if required > half_width {
        return Err(Error::TailsNotSettled { half_width, required });
    }
    let derivs = values.iter().map(|&s| rhs.eval(s)).collect();
    Ok(ShockProfile {
        u_minus,
        u_plus,
        sigma,
        grid,
        values,
        derivs,
        c_minus,
        c_plus,
        rhs,
    })
}

/// The inviscid shock `S0(x) = u-` for `x < 0`, `u+` for `x >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepProfile {
    pub u_minus: f64,
    pub u_plus: f64,
}

impl StepProfile {
    pub fn new(u_minus: f64, u_plus: f64) -> Result<Self> {
        if !(u_minus > u_plus) {
            return Err(Error::NotCompressive { u_minus, u_plus });
        }
        Ok(Self { u_minus, u_plus })
    }

    pub fn value(&self, x: f64) -> f64 {
        if x < 0.0 {
            self.u_minus
        } else {
            self.u_plus
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn burgers() -> FluxModel {
        FluxModel::quadratic(1.0, (-2.0, 2.0)).unwrap()
    }

    fn half_burgers() -> FluxModel {
        FluxModel::quadratic(0.5, (-1.0, 2.0)).unwrap()
    }

    #[test]
    fn speeds() {
        assert_eq!(shock_speed(&burgers(), 1.0, -1.0).unwrap(), 0.0);
        let f = FluxModel::quadratic(1.0, (-1.0, 3.0)).unwrap();
        assert_eq!(shock_speed(&f, 2.0, 0.0).unwrap(), 2.0);
        assert_eq!(shock_speed(&half_burgers(), 1.0, 0.0).unwrap(), 0.5);
        assert!(matches!(shock_speed(&burgers(), -1.0, 1.0), Err(Error::NotCompressive { .. })));
    }

    #[test]
    fn burgers_profile_is_minus_tanh() {
        let p = compute_profile(&burgers(), 1.0, -1.0, 20.0, 4001).unwrap();
        let err = p
            .grid
            .points()
            .iter()
            .zip(&p.values)
            .map(|(x, s)| (s + x.tanh()).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-9, "max error {err}");
        assert_eq!(p.sample(0.0), (0.0, -1.0));
        assert_eq!(p.sample(200.0), (-1.0, 0.0));
        assert_eq!((p.c_minus, p.c_plus), (2.0, 2.0));
    }

    #[test]
    fn half_burgers_profile_is_logistic() {
        let p = compute_profile(&half_burgers(), 1.0, 0.0, 60.0, 6001).unwrap();
        for k in -50..=50 {
            let x = 0.97 * k as f64;
            let exact = 1.0 / (1.0 + (x / 2.0).exp());
            assert_abs_diff_eq!(p.value(x), exact, epsilon = 1e-9);
        }
    }

    #[test]
    fn unsettled_tails_report_required_width() {
        match compute_profile(&burgers(), 1.0, -1.0, 3.0, 601) {
            Err(Error::TailsNotSettled { required, .. }) => {
                // 1 - tanh(x) ~ 2 exp(-2x) <= 2e-8
                assert!(required > 9.0 && required < 10.0, "{required}");
            }
            other => panic!("expected TailsNotSettled, got {other:?}"),
        }
    }

    #[test]
    fn node_samples_are_exact_and_interpolation_is_monotone() {
        let p = compute_profile(&burgers(), 1.0, -1.0, 12.0, 241).unwrap();
        for i in 0..p.grid.n {
            let (s, d) = p.sample(p.grid.point(i));
            assert_eq!(s, p.values[i]);
            assert_eq!(d, p.derivs[i]);
        }
        let mut prev = f64::INFINITY;
        for k in 0..5000 {
            let x = -12.0 + 24.0 * k as f64 / 4999.0;
            let s = p.value(x);
            assert!(s <= prev);
            prev = s;
        }
    }

    #[test]
    fn inverse_round_trips() {
        let p = compute_profile(&burgers(), 1.0, -1.0, 20.0, 2001).unwrap();
        for k in 1..40 {
            let y = -1.0 + 2.0 * k as f64 / 40.0;
            assert_abs_diff_eq!(p.value(p.inverse(y)), y, epsilon = 1e-12);
            assert_abs_diff_eq!(p.inverse(y), -y.atanh(), epsilon = 1e-7);
        }
    }

    #[test]
    fn burgers_norms_match_closed_forms() {
        let p = compute_profile(&burgers(), 1.0, -1.0, 20.0, 4001).unwrap();
        let (d, s) = p.l2_norms();
        assert_abs_diff_eq!(d * d, 4.0 / 3.0, epsilon = 1e-8);
        assert_abs_diff_eq!(s * s, 4.0 * 2f64.ln() - 2.0, epsilon = 1e-8);
    }

    #[test]
    fn weak_shock_norms_scale_with_strength() {
        // S = -d tanh(d x) for u = -+d, so ||S'||^2 = 4 d^3 / 3 and
        // ||S - S0||^2 = d (4 ln 2 - 2)
        let f = FluxModel::quadratic(1.0, (-1.0, 1.0)).unwrap();
        for d in [0.1, 0.01] {
            let p = ShockProfile::auto(&f, d, -d).unwrap();
            let (n1, n2) = p.l2_norms();
            assert!((n1 * n1 / (d * d * d) / (4.0 / 3.0) - 1.0).abs() < 1e-6);
            assert!((n2 * n2 / d / (4.0 * 2f64.ln() - 2.0) - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn tail_rates_match_linearization() {
        let f = FluxModel::quadratic_plus_sine(1.0, 0.05, (-3.0, 3.0)).unwrap();
        let p = ShockProfile::auto(&f, 1.5, -0.5).unwrap();
        let (fm, fp) = p.fitted_tail_rates();
        assert!((fm / p.c_minus - 1.0).abs() < 0.05, "{fm} vs {}", p.c_minus);
        assert!((fp / p.c_plus - 1.0).abs() < 0.05, "{fp} vs {}", p.c_plus);
        // strict monotonicity and bounds
        for w in p.values.windows(2) {
            assert!(w[1] <= w[0]);
        }
        assert!(p.derivs.iter().all(|d| *d <= 0.0));
    }

    #[test]
    fn larger_half_width_reproduces_the_same_function() {
        let f = FluxModel::quadratic_plus_sine(1.0, 0.05, (-3.0, 3.0)).unwrap();
        let p1 = compute_profile(&f, 1.5, -0.5, 12.0, 2401).unwrap();
        let p2 = compute_profile(&f, 1.5, -0.5, 18.0, 3601).unwrap();
        for k in -100..=100 {
            let x = 0.11 * k as f64;
            assert_abs_diff_eq!(p1.value(x), p2.value(x), epsilon = 1e-10);
        }
    }
}
