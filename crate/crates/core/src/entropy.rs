//! Relative-entropy diagnostics: distances to the shock, the dissipation
//! `D(t)` in the physical variable `x` and in the profile variable
//! `y = S1(x)`, the weighted Poincaré inequality and the interpolation
//! ratio used for the decay rate.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::flux::FluxModel;
use crate::grid::{self, UniformGrid};
use crate::profile::{ShockProfile, StepProfile};
use crate::solver::{profile_on_grid, Field, ShiftTrajectory};

/// The perturbation written in the profile variable,
/// `w(y) = V(S1^{-1}(y)) - y` on ascending nodes spanning `[u_plus, u_minus]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbationY {
    pub ys: Vec<f64>,
    pub w: Vec<f64>,
    /// `w_y` at the nodes, when known more accurately than by differencing.
    pub wy: Option<Vec<f64>>,
    pub wbar: f64,
    pub alpha_strength: f64,
    uniform: bool,
}

impl PerturbationY {
    /// Samples on the uniform grid over `[u_plus, u_minus]`.
    pub fn new(u_minus: f64, u_plus: f64, w: Vec<f64>) -> Result<Self> {
        if !(u_minus > u_plus) {
            return Err(Error::NotCompressive { u_minus, u_plus });
        }
        if w.len() < 16 {
            return Err(Error::IncompatibleGrid(format!("need at least 16 y-samples, got {}", w.len())));
        }
        let ys = UniformGrid::new(u_plus, u_minus, w.len()).points();
        Ok(Self::assemble(ys, w, None, true))
    }

    /// Samples on strictly increasing nodes from `u_plus` to `u_minus`.
    pub fn from_nodes(ys: Vec<f64>, w: Vec<f64>, wy: Option<Vec<f64>>) -> Result<Self> {
        if ys.len() < 16 || w.len() != ys.len() || wy.as_ref().is_some_and(|d| d.len() != ys.len()) {
            return Err(Error::IncompatibleGrid(format!("need at least 16 matching y-samples, got {}", ys.len())));
        }
        if ys.windows(2).any(|p| !(p[1] > p[0])) {
            return Err(Error::IncompatibleGrid("y-nodes must be strictly increasing".into()));
        }
        Ok(Self::assemble(ys, w, wy, false))
    }

    fn assemble(ys: Vec<f64>, w: Vec<f64>, wy: Option<Vec<f64>>, uniform: bool) -> Self {
        let alpha = ys[ys.len() - 1] - ys[0];
        let wbar = trapezoid_nodes(&ys, |j| w[j]) / alpha;
        Self { ys, w, wy, wbar, alpha_strength: alpha, uniform }
    }

    pub fn from_fn(u_minus: f64, u_plus: f64, ny: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let g = UniformGrid::new(u_plus, u_minus, ny.max(2));
        Self::new(u_minus, u_plus, g.points().into_iter().map(f).collect())
    }

    pub fn u_minus(&self) -> f64 {
        self.ys[self.ys.len() - 1]
    }

    pub fn u_plus(&self) -> f64 {
        self.ys[0]
    }

    /// `int w dy`.
    pub fn integral(&self) -> f64 {
        self.wbar * self.alpha_strength
    }

    /// `w_y`: stored, fourth-order on uniform nodes, or three-point otherwise.
    pub fn derivative(&self) -> Vec<f64> {
        match &self.wy {
            Some(d) => d.clone(),
            None if self.uniform => grid::derivative4(&self.w, self.ys[1] - self.ys[0]),
            None => derivative_nodes(&self.ys, &self.w),
        }
    }
}

/// Trapezoid rule on arbitrary ascending nodes.
pub fn trapezoid_nodes(ys: &[f64], f: impl Fn(usize) -> f64) -> f64 {
    let mut prev = f(0);
    let mut acc = 0.0;
    for j in 1..ys.len() {
        let cur = f(j);
        acc += 0.5 * (prev + cur) * (ys[j] - ys[j - 1]);
        prev = cur;
    }
    acc
}

/// Second-order three-point differences on nonuniform nodes.
fn derivative_nodes(ys: &[f64], f: &[f64]) -> Vec<f64> {
    let n = ys.len();
    let three = |i0: usize, at: usize| {
        let (x0, x1, x2) = (ys[i0], ys[i0 + 1], ys[i0 + 2]);
        let x = ys[at];
        f[i0] * (2.0 * x - x1 - x2) / ((x0 - x1) * (x0 - x2))
            + f[i0 + 1] * (2.0 * x - x0 - x2) / ((x1 - x0) * (x1 - x2))
            + f[i0 + 2] * (2.0 * x - x0 - x1) / ((x2 - x0) * (x2 - x1))
    };
    (0..n).map(|i| three(i.saturating_sub(1).min(n - 3), i)).collect()
}

/// Interpolates `V - S1` (cubic, on the field grid) at `x = S1^{-1}(y)` on
/// a uniform `y` grid; the endpoints `y = u+-` correspond to the far field.
pub fn change_of_variable(v: &Field, p: &ShockProfile, ny: usize) -> Result<PerturbationY> {
    let ny = ny.max(16);
    let g = UniformGrid::new(p.u_plus, p.u_minus, ny);
    let diff: Vec<f64> = (0..v.grid.n).map(|i| v.u[i] - p.value(v.grid.point(i))).collect();
    let w = (0..ny)
        .map(|j| {
            if j == 0 {
                diff[v.grid.n - 1]
            } else if j == ny - 1 {
                diff[0]
            } else {
                grid::interp_cubic(&v.grid, &diff, p.inverse(g.point(j)))
            }
        })
        .collect();
    PerturbationY::new(p.u_minus, p.u_plus, w)
}

/// The change of variable on the images `y_i = S1(x_i)` of the field
/// nodes, with `w_y = (V - S1)_x / S1'` by the chain rule. Unlike a
/// uniform `y` grid this resolves perturbations in the profile tails,
/// where `y` is exponentially close to `u+-`. Nodes where `S1` has
/// saturated are dropped; the far-field values close both ends.
pub fn change_of_variable_mapped(v: &Field, p: &ShockProfile) -> Result<PerturbationY> {
    let n = v.grid.n;
    let (s1, s1p) = profile_on_grid(p, &v.grid, 1.0);
    let diff: Vec<f64> = v.u.iter().zip(&s1).map(|(a, b)| a - b).collect();
    let ddiff = grid::derivative4(&diff, v.dx());
    let gap = 1e-13 * p.strength();
    let mut ys = vec![p.u_plus];
    let mut w = vec![diff[n - 1]];
    let mut wy = vec![0.0];
    // ascending y means descending x for a decreasing profile
    for i in (0..n).rev() {
        let y = s1[i];
        let last = ys[ys.len() - 1];
        if y - last > gap && p.u_minus - y > gap && s1p[i] < 0.0 {
            ys.push(y);
            w.push(diff[i]);
            wy.push(ddiff[i] / s1p[i]);
        }
    }
    ys.push(p.u_minus);
    w.push(diff[0]);
    wy.push(0.0);
    PerturbationY::from_nodes(ys, w, Some(wy))
}

/// Breakdown of the dissipation at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DissipationReport {
    pub t: f64,
    /// Physical-variable evaluation, when a field was supplied.
    pub d_x: Option<f64>,
    /// `I1 + I2 + I3 + I4`.
    pub d_y: f64,
    /// Same quantity with the unsplit weight `A(y) - A(u-) - sigma (y - u-)`.
    pub d_y_general: f64,
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
    pub i4: f64,
    /// `int (u- - y)(y - u+) |w_y|^2 dy`.
    pub weighted_gradient: f64,
    /// `int (w - wbar)^2 dy`.
    pub mean_deviation: f64,
    pub lambda: f64,
    /// `lambda * weighted_gradient`.
    pub lambda_lower_bound: f64,
    /// `lambda / 6 * weighted_gradient`, what the Poincaré constant 5/6
    /// actually yields when combined with the `I1 + I2` and `I4` bounds.
    pub poincare_lower_bound: f64,
}

/// Feedback shift velocity written in `y`: `sigma + k int w dy`.
pub fn feedback_xdot(wp: &PerturbationY, f: &FluxModel, sigma: f64) -> f64 {
    sigma + f.shift_gain(wp.u_minus(), wp.u_plus()) * wp.integral()
}

pub fn dissipation_y(wp: &PerturbationY, xdot: f64, f: &FluxModel, sigma: f64) -> Result<DissipationReport> {
    let (um, up) = (wp.u_minus(), wp.u_plus());
    let ys = &wp.ys;
    let wy = wp.derivative();

    let mut rel = vec![0.0; ys.len()];
    for j in 0..ys.len() {
        rel[j] = f.relative_flux(wp.w[j] + ys[j], ys[j])?;
    }
    let (g_um, g_up) = (f.g.eval(um).0, f.g.eval(up).0);
    let chord = (g_um - g_up) / (um - up);
    let a_um = f.value(um);
    let weight = |j: usize| (um - ys[j]) * (ys[j] - up);
    let grad2 = |j: usize| wy[j] * wy[j];

    let i1 = 2.0 * (xdot - sigma) * wp.integral();
    let i2 = -2.0 * trapezoid_nodes(ys, |j| rel[j]);
    let big_w = trapezoid_nodes(ys, |j| weight(j) * grad2(j));
    let i3 = 2.0 * f.a * big_w;
    let i4 = -2.0 * trapezoid_nodes(ys, |j| {
        let jv = f.g.eval(ys[j]).0 - g_um - chord * (ys[j] - um);
        jv * grad2(j)
    });
    let general = -2.0 * trapezoid_nodes(ys, |j| (f.value(ys[j]) - a_um - sigma * (ys[j] - um)) * grad2(j));
    let d_y = i1 + i2 + i3 + i4;
    let lambda = f.contraction_admissible().lambda;
    Ok(DissipationReport {
        t: 0.0,
        d_x: None,
        d_y,
        d_y_general: i1 + i2 + general,
        i1,
        i2,
        i3,
        i4,
        weighted_gradient: big_w,
        mean_deviation: trapezoid_nodes(ys, |j| (wp.w[j] - wp.wbar).powi(2)),
        lambda,
        lambda_lower_bound: lambda * big_w,
        poincare_lower_bound: lambda / 6.0 * big_w,
    })
}

/// `D = -[2 (X' - sigma) int (V - S1) S1' - 2 int A(V|S1) S1' - 2 int |(V - S1)_x|^2]`.
pub fn dissipation_x(v: &Field, p: &ShockProfile, xdot: f64, f: &FluxModel) -> Result<f64> {
    let h = v.dx();
    let (s1, s1p) = profile_on_grid(p, &v.grid, 1.0);
    let diff: Vec<f64> = v.u.iter().zip(&s1).map(|(a, b)| a - b).collect();
    let ddiff = grid::derivative4(&diff, h);
    let mut rel = vec![0.0; v.grid.n];
    for i in 0..v.grid.n {
        rel[i] = f.relative_flux(v.u[i], s1[i])? * s1p[i];
    }
    let proj = grid::trapezoid_map(&diff, h, |i, d| d * s1p[i]);
    let grad = grid::trapezoid_map(&ddiff, h, |_, d| d * d);
    Ok(-(2.0 * (xdot - p.sigma) * proj - 2.0 * grid::trapezoid(&rel, h) - 2.0 * grad))
}

/// Both forms at once. With `ny = None` the `y` nodes are the images of
/// the field nodes; otherwise a uniform `y` grid of `ny` points.
pub fn dissipation_report(
    v: &Field,
    p: &ShockProfile,
    xdot: f64,
    f: &FluxModel,
    ny: Option<usize>,
) -> Result<DissipationReport> {
    let wp = match ny {
        Some(ny) => change_of_variable(v, p, ny)?,
        None => change_of_variable_mapped(v, p)?,
    };
    let mut r = dissipation_y(&wp, xdot, f, p.sigma)?;
    r.d_x = Some(dissipation_x(v, p, xdot, f)?);
    r.t = v.t;
    Ok(r)
}

/// A function sampled on a uniform grid, with optional exact derivative.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampledFunction {
    pub grid: UniformGrid,
    pub values: Vec<f64>,
    pub derivs: Option<Vec<f64>>,
}

impl SampledFunction {
    pub fn from_fn(grid: UniformGrid, f: impl Fn(f64) -> f64) -> Self {
        Self { values: grid.points().into_iter().map(f).collect(), grid, derivs: None }
    }

    pub fn with_derivative(grid: UniformGrid, f: impl Fn(f64) -> (f64, f64)) -> Self {
        let (values, derivs) = grid.points().into_iter().map(f).unzip();
        Self { grid, values, derivs: Some(derivs) }
    }

    pub fn derivative(&self) -> Vec<f64> {
        match &self.derivs {
            Some(d) => d.clone(),
            None => grid::derivative4(&self.values, self.grid.spacing()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PoincareCheck {
    pub lhs: f64,
    pub rhs: f64,
}

impl PoincareCheck {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs
    }

    /// `lhs / rhs`, defined as 0 when both vanish.
    pub fn ratio(&self) -> f64 {
        if self.rhs == 0.0 {
            if self.lhs == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            self.lhs / self.rhs
        }
    }
}

/// `int (v - vbar)^2` against `5/6 int (hi - x)(x - lo) |v'|^2` on the
/// sampled interval `[lo, hi]`.
pub fn poincare_check(v: &SampledFunction) -> PoincareCheck {
    let g = &v.grid;
    let h = g.spacing();
    let mean = grid::trapezoid(&v.values, h) / (g.hi - g.lo);
    let lhs = grid::trapezoid_map(&v.values, h, |_, x| (x - mean).powi(2));
    let d = v.derivative();
    let rhs = 5.0 / 6.0
        * grid::trapezoid_map(&d, h, |i, dv| {
            let x = g.point(i);
            (g.hi - x) * (x - g.lo) * dv * dv
        });
    PoincareCheck { lhs, rhs }
}

/// `||f||_2 / (||f||_1^{2/3} ||f'||_2^{1/3})`, zero for the zero function.
pub fn gagliardo_nirenberg_ratio(f: &SampledFunction) -> f64 {
    let h = f.grid.spacing();
    let l2 = grid::trapezoid_map(&f.values, h, |_, v| v * v).sqrt();
    let l1 = grid::trapezoid_map(&f.values, h, |_, v| v.abs());
    let d = f.derivative();
    let d2 = grid::trapezoid_map(&d, h, |_, v| v * v).sqrt();
    let den = l1.powf(2.0 / 3.0) * d2.powf(1.0 / 3.0);
    if den == 0.0 {
        0.0
    } else {
        l2 / den
    }
}

/// Reference state for [`norms`].
#[derive(Debug, Clone, Copy)]
pub enum Reference<'a> {
    /// `S1((x - shift) / scale)`.
    Shock { profile: &'a ShockProfile, shift: f64, scale: f64 },
    /// `S0(x - shift)`, integrated exactly across the jump.
    Step { step: StepProfile, shift: f64 },
}

impl<'a> Reference<'a> {
    pub fn shock(profile: &'a ShockProfile) -> Self {
        Reference::Shock { profile, shift: 0.0, scale: 1.0 }
    }

    pub fn step(step: StepProfile) -> Self {
        Reference::Step { step, shift: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Norms {
    pub l1: f64,
    pub l2: f64,
}

/// `||v - ref||_1` and `||v - ref||_2`.
pub fn norms(v: &Field, reference: Reference<'_>) -> Norms {
    let h = v.dx();
    match reference {
        Reference::Shock { profile, shift, scale } => {
            let diff: Vec<f64> = (0..v.grid.n)
                .map(|i| v.u[i] - profile.value((v.grid.point(i) - shift) / scale))
                .collect();
            Norms {
                l1: grid::trapezoid_map(&diff, h, |_, d| d.abs()),
                l2: grid::trapezoid_map(&diff, h, |_, d| d * d).sqrt(),
            }
        }
        Reference::Step { step, shift } => {
            let s = grid::integrate_against_step(&v.grid, &v.u, shift, step.u_minus, step.u_plus);
            Norms { l1: s.l1, l2: s.l2_sq.sqrt() }
        }
    }
}

/// Largest excursion of the shift from the shock path, with the envelope
/// `C (1 + ||U0 - S1||_2^2 + ||U0 - S1||_1)` used to compare runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DriftReport {
    pub sup_drift: f64,
    pub envelope: f64,
    pub bound: f64,
    pub within: bool,
}

pub fn drift_envelope(initial: Norms) -> f64 {
    1.0 + initial.l2 * initial.l2 + initial.l1
}

pub fn shift_drift_diagnostic(traj: &ShiftTrajectory, sigma: f64, c0: f64, initial: Norms) -> DriftReport {
    let sup_drift = traj.max_drift(sigma);
    let envelope = drift_envelope(initial);
    let bound = c0 * envelope;
    DriftReport { sup_drift, envelope, bound, within: sup_drift <= bound }
}

/// Smallest `C` with `sup_drift <= C * envelope` for every sample.
pub fn fit_drift_constant(samples: &[(f64, Norms)]) -> f64 {
    samples.iter().map(|(d, n)| d / drift_envelope(*n)).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::compute_profile;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn burgers() -> FluxModel {
        FluxModel::quadratic(1.0, (-3.0, 3.0)).unwrap()
    }

    fn tanh_profile() -> ShockProfile {
        compute_profile(&burgers(), 1.0, -1.0, 20.0, 4001).unwrap()
    }

    fn field(p: &ShockProfile, n: usize, f: impl Fn(f64, f64, f64) -> f64) -> Field {
        Field::from_fn(UniformGrid::symmetric(16.0, n), |x| {
            let (s, d) = p.sample(x);
            f(x, s, d)
        })
    }

    #[test]
    fn change_of_variable_examples() {
        let p = tanh_profile();
        let wp = change_of_variable(&field(&p, 2049, |_, s, _| s), &p, 257).unwrap();
        assert!(wp.w.iter().all(|w| *w == 0.0));
        let wp = change_of_variable(&field(&p, 2049, |_, s, _| s + 0.1), &p, 257).unwrap();
        assert!(wp.w.iter().all(|w| (w - 0.1).abs() < 1e-14));
        let wp = change_of_variable(&field(&p, 4097, |_, s, d| s + d), &p, 257).unwrap();
        for (y, w) in wp.ys.iter().zip(&wp.w) {
            assert_abs_diff_eq!(*w, -(1.0 - y * y), epsilon = 1e-8);
        }
    }

    #[test]
    fn zero_and_constant_perturbations() {
        let f = burgers();
        let zero = PerturbationY::from_fn(1.0, -1.0, 201, |_| 0.0).unwrap();
        let r = dissipation_y(&zero, 0.0, &f, 0.0).unwrap();
        assert_eq!((r.i1, r.i2, r.i3, r.i4, r.d_y), (0.0, 0.0, 0.0, 0.0, 0.0));

        let c = 0.3;
        let wp = PerturbationY::from_fn(1.0, -1.0, 201, |_| c).unwrap();
        let xdot = feedback_xdot(&wp, &f, 0.0);
        assert_abs_diff_eq!(xdot, c, epsilon = 1e-14);
        let r = dissipation_y(&wp, xdot, &f, 0.0).unwrap();
        assert_abs_diff_eq!(r.i1, 4.0 * c * c, epsilon = 1e-12);
        assert_abs_diff_eq!(r.i2, -4.0 * c * c, epsilon = 1e-12);
        assert_abs_diff_eq!(r.i3, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.i4, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.d_y, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn parabolic_perturbation_has_positive_dissipation() {
        let f = burgers();
        let wp = PerturbationY::from_fn(1.0, -1.0, 2001, |y| -(1.0 - y * y)).unwrap();
        let xdot = feedback_xdot(&wp, &f, 0.0);
        assert_abs_diff_eq!(xdot, -2.0 / 3.0, epsilon = 1e-6);
        let r = dissipation_y(&wp, xdot, &f, 0.0).unwrap();
        assert_abs_diff_eq!(r.i1, 16.0 / 9.0, epsilon = 1e-5);
        // I2 = -2 int (1 - y^2)^2 = -32/15, I3 = 2 int (1 - y^2) 4 y^2 = 32/15
        assert_abs_diff_eq!(r.i2, -32.0 / 15.0, epsilon = 1e-5);
        assert_abs_diff_eq!(r.i3, 32.0 / 15.0, epsilon = 1e-5);
        assert!(r.d_y > 0.0);
        assert_abs_diff_eq!(r.d_y, r.d_y_general, epsilon = 1e-12);
        // the split lower bound with factor lambda fails here, the lambda / 6 one holds
        assert!(r.d_y < r.lambda_lower_bound);
        assert!(r.d_y >= r.poincare_lower_bound);
    }

    #[test]
    fn x_and_y_forms_agree() {
        let p = tanh_profile();
        let f = burgers();
        let v = field(&p, 2049, |x, s, _| s + 0.2 * (-(x - 0.5) * (x - 0.5)).exp());
        let xdot = crate::solver::shift_rhs(&v, &p, &f).unwrap();
        let r = dissipation_report(&v, &p, xdot, &f, None).unwrap();
        let dx = r.d_x.unwrap();
        assert!((dx - r.d_y).abs() < 1e-4 * (1.0 + dx.abs()), "{dx} vs {}", r.d_y);

        let v = field(&p, 2049, |_, s, _| s);
        assert_abs_diff_eq!(dissipation_x(&v, &p, 0.0, &f).unwrap(), 0.0, epsilon = 1e-20);
    }

    #[test]
    fn split_and_general_weights_agree_with_perturbed_flux() {
        let f = FluxModel::quadratic_plus_sine(1.0, 0.05, (-3.0, 3.0)).unwrap();
        let wp = PerturbationY::from_fn(1.5, -0.5, 801, |y| 0.1 * (3.0 * y).sin() + 0.05).unwrap();
        let sigma = crate::profile::shock_speed(&f, 1.5, -0.5).unwrap();
        let r = dissipation_y(&wp, feedback_xdot(&wp, &f, sigma), &f, sigma).unwrap();
        assert_abs_diff_eq!(r.d_y, r.d_y_general, epsilon = 1e-12 * (1.0 + r.d_y.abs()));
        assert!(r.i4.abs() <= f.g2_sup * r.weighted_gradient + 1e-12);
    }

    #[test]
    fn poincare_examples() {
        let g = UniformGrid::new(-1.0, 1.0, 100_001);
        let c = poincare_check(&SampledFunction::with_derivative(g, |_| (2.5, 0.0)));
        assert_eq!((c.lhs, c.rhs), (0.0, 0.0));
        assert_eq!(c.ratio(), 0.0);
        let c = poincare_check(&SampledFunction::with_derivative(g, |x| (x, 1.0)));
        assert_abs_diff_eq!(c.lhs, 2.0 / 3.0, epsilon = 1e-8);
        assert_abs_diff_eq!(c.rhs, 10.0 / 9.0, epsilon = 1e-8);
        let g = UniformGrid::new(0.0, 1.0, 20_001);
        let c = poincare_check(&SampledFunction::with_derivative(g, |x| ((PI * x).cos(), -PI * (PI * x).sin())));
        assert_abs_diff_eq!(c.lhs, 0.5, epsilon = 1e-8);
        assert_abs_diff_eq!(c.rhs, 5.0 * PI * PI / 72.0 + 5.0 / 24.0, epsilon = 1e-8);
        assert!(c.holds());
    }

    #[test]
    fn gagliardo_nirenberg_gaussian_and_invariances() {
        let g = UniformGrid::symmetric(12.0, 24_001);
        let gauss = |s: f64, c: f64| SampledFunction::from_fn(g, move |x| c * (-(s * x).powi(2)).exp());
        let exact = (PI / 2.0).powf(1.0 / 6.0) / PI.powf(1.0 / 3.0);
        let r = gagliardo_nirenberg_ratio(&gauss(1.0, 1.0));
        assert_abs_diff_eq!(r, exact, epsilon = 1e-8);
        assert_abs_diff_eq!(r, 0.7362, epsilon = 1e-4);
        assert_abs_diff_eq!(gagliardo_nirenberg_ratio(&gauss(2.0, 1.0)), exact, epsilon = 1e-7);
        assert_abs_diff_eq!(gagliardo_nirenberg_ratio(&gauss(1.0, 7.0)), exact, epsilon = 1e-8);
        assert_eq!(gagliardo_nirenberg_ratio(&gauss(1.0, 0.0)), 0.0);
    }

    #[test]
    fn norms_against_shock_and_step() {
        let p = tanh_profile();
        let v = field(&p, 8001, |_, s, _| s);
        let n = norms(&v, Reference::shock(&p));
        assert_eq!((n.l1, n.l2), (0.0, 0.0));
        let v = field(&p, 8001, |x, s, _| s + (-x * x).exp());
        let n = norms(&v, Reference::shock(&p));
        assert_abs_diff_eq!(n.l1, PI.sqrt(), epsilon = 1e-10);
        assert_abs_diff_eq!(n.l2, (PI / 2.0).powf(0.25), epsilon = 1e-10);
        let step = StepProfile::new(1.0, -1.0).unwrap();
        let v = field(&p, 8001, |_, s, _| s);
        let n = norms(&v, Reference::step(step));
        assert_abs_diff_eq!(n.l2 * n.l2, 4.0 * 2f64.ln() - 2.0, epsilon = 1e-5);
    }

    #[test]
    fn drift_constant_fit() {
        let n = Norms { l1: 1.0, l2: 1.0 };
        let c = fit_drift_constant(&[(0.3, n), (0.9, Norms { l1: 2.0, l2: 2.0 })]);
        assert_abs_diff_eq!(c, 0.9 / 7.0, epsilon = 1e-15);
        let mut traj = ShiftTrajectory::default();
        assert_eq!(shift_drift_diagnostic(&traj, 0.0, c, n).sup_drift, 0.0);
        traj.ts.push(1.0);
        traj.x.push(0.5);
        traj.xdot.push(0.0);
        let r = shift_drift_diagnostic(&traj, 0.0, c, n);
        assert!(!r.within && r.sup_drift == 0.5);
    }
}
