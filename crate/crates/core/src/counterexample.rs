//! A strictly convex flux and initial data for which the dissipation is
//! negative at `t = 0`, so that no Lipschitz shift keeps the distance to
//! the shock from growing for a short time.
//!
//! The endpoints are `u- = a`, `u+ = -a`. The flux is a Gaussian-smoothed
//! version of the piecewise-linear corner function `Abar`, and the
//! perturbation direction is a smoothed version of the odd square-root
//! profile `psi`.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use statrs::function::erf::erfc;

use crate::entropy::{change_of_variable, dissipation_y, DissipationReport, PerturbationY, SampledFunction};
use crate::error::{Error, Result};
use crate::flux::{FluxModel, Perturbation, ScalarFn, DEFAULT_CHECK_SAMPLES};
use crate::grid::{self, UniformGrid};
use crate::profile::{compute_profile, tail_rates, ShockProfile};
use crate::solver::{evolve_with_shift, EvolveOptions, Field};
use crate::sweep;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CounterexampleSpec {
    pub a: f64,
    /// Corner parameter, required to lie in `(0, a/5)`.
    pub alpha: f64,
    /// Standard deviation of the Gaussian mollifier.
    pub mollifier_width: f64,
    /// Perturbation amplitude.
    pub eps0: f64,
}

impl CounterexampleSpec {
    pub fn new(a: f64, alpha: f64, mollifier_width: f64, eps0: f64) -> Result<Self> {
        let bad = |m: &str| Err(Error::Counterexample(m.into()));
        if !(a > 0.0) {
            return bad("a must be positive");
        }
        if !(alpha > 0.0 && alpha < a) {
            return bad("alpha must lie in (0, a)");
        }
        if !(mollifier_width > 0.0) {
            return bad("mollifier width must be positive");
        }
        if !(eps0 > 0.0) {
            return bad("eps0 must be positive");
        }
        Ok(Self { a, alpha, mollifier_width, eps0 })
    }
}

fn check_open(a: f64, x: f64) -> Result<()> {
    if x > -a && x < a {
        Ok(())
    } else {
        Err(Error::Counterexample(format!("x = {x} outside (-{a}, {a})")))
    }
}

/// The corner function: `-a - x`, then `-alpha`, then `x - a`.
pub fn piecewise_a(a: f64, alpha: f64, x: f64) -> Result<f64> {
    check_open(a, x)?;
    Ok(if x < -a + alpha {
        -a - x
    } else if x < a - alpha {
        -alpha
    } else {
        x - a
    })
}

/// `-sqrt(x + a)`, then the chord `sqrt(alpha) x / (a - alpha)`, then `sqrt(a - x)`.
pub fn piecewise_psi(a: f64, alpha: f64, x: f64) -> Result<f64> {
    check_open(a, x)?;
    Ok(psi_closed(a, alpha, x))
}

/// `piecewise_psi` extended continuously to the closed interval.
fn psi_closed(a: f64, alpha: f64, x: f64) -> f64 {
    if x < -a + alpha {
        -(x + a).max(0.0).sqrt()
    } else if x < a - alpha {
        alpha.sqrt() / (a - alpha) * x
    } else {
        (a - x).max(0.0).sqrt()
    }
}

/// `psi'` on the open pieces.
fn psi_prime(a: f64, alpha: f64, x: f64) -> f64 {
    if x < -a + alpha {
        -0.5 / (x + a).sqrt()
    } else if x < a - alpha {
        alpha.sqrt() / (a - alpha)
    } else {
        -0.5 / (a - x).sqrt()
    }
}

/// The corner integrals recomputed from the piecewise definitions: the
/// jumps of `Abar'` weighted by `psi^2` at the corners, and five-point
/// Gauss-Legendre on each piece for `int Abar |psi'|^2`.
pub fn quadrature_integrals(a: f64, alpha: f64) -> Result<CornerIntegrals> {
    exact_integrals(a, alpha)?;
    let (c1, c2) = (-a + alpha, a - alpha);
    let jump = |c: f64| {
        let d = 0.25 * alpha;
        let slope = |x0: f64, x1: f64| Ok::<f64, Error>((piecewise_a(a, alpha, x1)? - piecewise_a(a, alpha, x0)?) / (x1 - x0));
        Ok::<f64, Error>(slope(c + d, c + 2.0 * d)? - slope(c - 2.0 * d, c - d)?)
    };
    let i_second = jump(c1)? * psi_closed(a, alpha, c1).powi(2) + jump(c2)? * psi_closed(a, alpha, c2).powi(2);
    const NODES: [f64; 5] = [0.0, -0.538_469_310_105_683, 0.538_469_310_105_683, -0.906_179_845_938_664, 0.906_179_845_938_664];
    const WEIGHTS: [f64; 5] = [0.568_888_888_888_889, 0.478_628_670_499_366, 0.478_628_670_499_366, 0.236_926_885_056_189, 0.236_926_885_056_189];
    let mut i_weight = 0.0;
    for (lo, hi) in [(-a, c1), (c1, c2), (c2, a)] {
        let (m, r) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        for (z, w) in NODES.iter().zip(WEIGHTS) {
            let x = m + r * z;
            i_weight += w * r * piecewise_a(a, alpha, x)? * psi_prime(a, alpha, x).powi(2);
        }
    }
    Ok(CornerIntegrals { i_second, i_weight, margin: i_second + 2.0 * i_weight })
}

/// `int Abar'' psi^2`, `int Abar |psi'|^2` and the margin
/// `i_second + 2 i_weight = alpha - 4 alpha^2 / (a - alpha)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CornerIntegrals {
    pub i_second: f64,
    pub i_weight: f64,
    pub margin: f64,
}

pub fn exact_integrals(a: f64, alpha: f64) -> Result<CornerIntegrals> {
    if !(a > 0.0 && alpha > 0.0 && alpha < a) {
        return Err(Error::Counterexample(format!("need 0 < alpha < a, got a = {a}, alpha = {alpha}")));
    }
    let i_second = 2.0 * alpha;
    let i_weight = -2.0 * alpha * alpha / (a - alpha) - alpha / 2.0;
    Ok(CornerIntegrals { i_second, i_weight, margin: i_second + 2.0 * i_weight })
}

#[inline]
fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

#[inline]
fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Gaussian-smoothed ramp `max(z, 0)` with its two derivatives.
#[inline]
fn smooth_ramp(z: f64, s: f64) -> (f64, f64, f64) {
    let q = z / s;
    let cdf = normal_cdf(q);
    let pdf = normal_pdf(q);
    (z * cdf + s * pdf, cdf, pdf / s)
}

/// The perturbation part `g = A - delta x^2` of the constructed flux
/// `A = (Abar * gaussian) - c + delta (x^2 - a^2)`, normalized so that
/// `A(-a) = A(a) = 0`.
#[derive(Debug, Clone, Copy)]
pub struct SmoothedCorner {
    corner: f64,
    alpha: f64,
    width: f64,
    offset: f64,
}

impl SmoothedCorner {
    fn new(a: f64, alpha: f64, width: f64, delta: f64) -> Self {
        let mut s = Self { corner: a - alpha, alpha, width, offset: 0.0 };
        // Abar * gaussian is even, so a constant restores A(+-a) = 0
        s.offset = s.smoothed(a).0 + delta * a * a;
        s
    }

    /// `Abar * gaussian` and its derivatives; `Abar = -alpha + ramp(-c - x) + ramp(x - c)`.
    fn smoothed(&self, x: f64) -> (f64, f64, f64) {
        let (l, dl, ddl) = smooth_ramp(-self.corner - x, self.width);
        let (r, dr, ddr) = smooth_ramp(x - self.corner, self.width);
        (-self.alpha + l + r, dr - dl, ddl + ddr)
    }

    /// `sup |g''|`, attained at the corners.
    fn second_derivative_bound(&self) -> f64 {
        (normal_pdf(0.0) + normal_pdf(2.0 * self.corner / self.width)) / self.width
    }
}

impl ScalarFn for SmoothedCorner {
    fn eval(&self, x: f64) -> (f64, f64, f64) {
        let (v, d, dd) = self.smoothed(x);
        (v - self.offset, d, dd)
    }
}

/// Relative size of the convexifying quadratic `delta (x^2 - a^2)`.
pub const CONVEXIFY: f64 = 1e-6;

/// The smooth strictly convex flux with `A(+-a) = 0` (so the shock speed
/// vanishes), valid on `[-a - 1, a + 1]`.
pub fn counterexample_flux(a: f64, alpha: f64, width: f64) -> Result<FluxModel> {
    let delta = CONVEXIFY * a;
    let g = SmoothedCorner::new(a, alpha, width, delta);
    let bound = g.second_derivative_bound();
    FluxModel::perturbed_quadratic_checked(
        delta,
        Perturbation::Custom { name: format!("smoothed_corner(a={a}, alpha={alpha}, width={width})"), func: Arc::new(g) },
        bound * (1.0 + 1e-12),
        (-a - 1.0, a + 1.0),
        DEFAULT_CHECK_SAMPLES,
    )
}

/// How samples are continued beyond the grid during convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extension {
    Constant,
    /// Point reflection `f(e + s) = 2 f(e) - f(e - s)` about each end `e`,
    /// which keeps the end values fixed under a symmetric kernel.
    OddReflection,
}

/// Discrete convolution with a unit-mass Gaussian of standard deviation
/// `width`, returning values and derivatives on the same grid.
pub fn mollify(f: &SampledFunction, width: f64, ext: Extension) -> Result<SampledFunction> {
    let g = f.grid;
    let h = g.spacing();
    if width < 4.0 * h {
        return Err(Error::Counterexample(format!("mollifier width {width} under-resolved by spacing {h}")));
    }
    let m = (8.0 * width / h).ceil() as usize;
    let n = g.n;
    if m >= n {
        return Err(Error::Counterexample("mollifier wider than the sampled interval".into()));
    }
    let zs: Vec<f64> = (0..=2 * m).map(|k| (k as f64 - m as f64) * h).collect();
    let mut kernel: Vec<f64> = zs.iter().map(|z| normal_pdf(z / width) / width).collect();
    let mass: f64 = kernel.iter().sum::<f64>() * h;
    kernel.iter_mut().for_each(|k| *k /= mass);
    // d/dx of the kernel, scaled so that linear functions differentiate exactly
    let mut dkernel: Vec<f64> = zs.iter().zip(&kernel).map(|(z, k)| -z / (width * width) * k).collect();
    let moment: f64 = zs.iter().zip(&dkernel).map(|(z, d)| z * d).sum::<f64>() * h;
    dkernel.iter_mut().for_each(|d| *d /= -moment);

    let v = &f.values;
    let last = n as isize - 1;
    let at = |j: isize| -> f64 {
        if (0..=last).contains(&j) {
            return v[j as usize];
        }
        match ext {
            Extension::Constant => v[j.clamp(0, last) as usize],
            Extension::OddReflection if j < 0 => 2.0 * v[0] - v[(-j) as usize],
            Extension::OddReflection => 2.0 * v[n - 1] - v[(2 * last - j) as usize],
        }
    };
    let mut values = vec![0.0; n];
    let mut derivs = vec![0.0; n];
    for i in 0..n {
        let (mut acc, mut dacc) = (0.0, 0.0);
        for k in 0..=2 * m {
            // z_k = (k - m) h, sample f(x_i - z_k)
            let fv = at(i as isize + m as isize - k as isize);
            acc += fv * kernel[k];
            dacc += fv * dkernel[k];
        }
        values[i] = acc * h;
        derivs[i] = dacc * h;
    }
    Ok(SampledFunction { grid: g, values, derivs: Some(derivs) })
}

/// Smoothed `psi` on a symmetric grid over `[-a, a]` with spacing
/// `width / 64`, made exactly odd so that its integral vanishes.
pub fn mollified_psi(a: f64, alpha: f64, width: f64) -> Result<SampledFunction> {
    if width >= alpha / 2.0 {
        return Err(Error::Counterexample(format!(
            "mollifier width {width} must stay below alpha / 2 = {}",
            alpha / 2.0
        )));
    }
    let half_cells = (64.0 * a / width).ceil() as usize;
    let g = UniformGrid::symmetric(a, 2 * half_cells + 1);
    let raw = SampledFunction::from_fn(g, |x| psi_closed(a, alpha, x));
    let mut phi = mollify(&raw, width, Extension::OddReflection)?;
    let n = g.n;
    let d = phi.derivs.as_mut().expect("mollify returns derivatives");
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let odd = 0.5 * (phi.values[i] - phi.values[j]);
        phi.values[i] = odd;
        phi.values[j] = -odd;
        let even = 0.5 * (d[i] + d[j]);
        d[i] = even;
        d[j] = even;
    }
    phi.values[n / 2] = 0.0;
    Ok(phi)
}

/// `int A'' phi^2`, `int A |phi'|^2` and their margin, by trapezoid on the
/// grid of `phi`.
pub fn mollified_integrals(f: &FluxModel, phi: &SampledFunction) -> CornerIntegrals {
    let h = phi.grid.spacing();
    let d = phi.derivative();
    let i_second = grid::trapezoid_map(&phi.values, h, |i, v| f.eval_unchecked(phi.grid.point(i)).2 * v * v);
    let i_weight = grid::trapezoid_map(&d, h, |i, dv| f.value(phi.grid.point(i)) * dv * dv);
    CornerIntegrals { i_second, i_weight, margin: i_second + 2.0 * i_weight }
}

/// `phi(y)` by cubic Hermite interpolation with the stored derivatives.
pub fn eval_sampled(phi: &SampledFunction, y: f64) -> f64 {
    let g = &phi.grid;
    let d = phi.derivs.as_ref();
    match grid::locate(g, y) {
        None if y < g.lo => phi.values[0],
        None => phi.values[g.n - 1],
        Some((i, t)) => match d {
            Some(d) => grid::hermite(phi.values[i], phi.values[i + 1], d[i], d[i + 1], g.spacing(), t),
            None => phi.values[i] + t * (phi.values[i + 1] - phi.values[i]),
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CounterexampleOptions {
    /// Field node spacing in `x`.
    pub dx: f64,
    /// Extra e-folds of the slower tail added to the automatic profile
    /// width, so the perturbation is negligible at the boundary.
    pub tail_pad: f64,
}

impl Default for CounterexampleOptions {
    fn default() -> Self {
        Self { dx: 0.01, tail_pad: 12.0 }
    }
}

#[derive(Debug, Clone)]
pub struct Counterexample {
    pub spec: CounterexampleSpec,
    pub flux: FluxModel,
    pub profile: ShockProfile,
    pub phi: SampledFunction,
    /// `U0 = S1 + eps0 phi(S1)`.
    pub u0: Field,
    pub exact: CornerIntegrals,
    pub mollified: CornerIntegrals,
    /// Nonlinear `D(0)` for `w = eps0 phi` on the grid of `phi`.
    pub d0: f64,
    /// `D(0)` must fall below `-eps0^2 margin / 2` for acceptance.
    pub threshold: f64,
}

impl Counterexample {
    /// `w = eps0 phi` exactly, in the profile variable.
    pub fn perturbation(&self) -> Result<PerturbationY> {
        let w = self.phi.values.iter().map(|p| self.spec.eps0 * p).collect();
        PerturbationY::new(self.spec.a, -self.spec.a, w)
    }

    /// `D(0)` from the exact perturbation with shift velocity `xdot0`.
    pub fn dissipation_with(&self, xdot0: f64) -> Result<DissipationReport> {
        dissipation_y(&self.perturbation()?, xdot0, &self.flux, self.profile.sigma)
    }
}

pub fn build_counterexample(spec: CounterexampleSpec, opts: CounterexampleOptions) -> Result<Counterexample> {
    let (a, alpha) = (spec.a, spec.alpha);
    let exact = exact_integrals(a, alpha)?;
    if !(exact.margin > 0.0) || alpha >= a / 5.0 {
        return Err(Error::Counterexample(format!(
            "alpha = {alpha} violates alpha < a/5 (exact margin {})",
            exact.margin
        )));
    }
    let flux = counterexample_flux(a, alpha, spec.mollifier_width)?;
    let phi = mollified_psi(a, alpha, spec.mollifier_width)?;
    let mollified = mollified_integrals(&flux, &phi);
    let (cm, cp) = tail_rates(&flux, a, -a)?;
    let settled = ShockProfile::auto(&flux, a, -a)?;
    let half = settled.half_width() + opts.tail_pad / cm.min(cp);
    let h = ShockProfile::default_spacing(cm, cp);
    let profile = compute_profile(&flux, a, -a, half, 2 * (half / h).ceil() as usize + 1)?;

    let n = 2 * (half / opts.dx).ceil() as usize + 1;
    let u0 = Field::from_fn(UniformGrid::symmetric(half, n), |x| {
        let s = profile.value(x);
        s + spec.eps0 * eval_sampled(&phi, s)
    });

    let mut ce = Counterexample {
        spec,
        flux,
        profile,
        phi,
        u0,
        exact,
        mollified,
        d0: f64::NAN,
        threshold: -0.5 * spec.eps0 * spec.eps0 * exact.margin,
    };
    ce.d0 = ce.dissipation_with(0.0)?.d_y;
    if !(ce.d0 < ce.threshold) {
        return Err(Error::Counterexample(format!(
            "D(0) = {:.6e} is not below {:.6e} (smoothed margin {:.6e}); try a smaller width or eps0",
            ce.d0, ce.threshold, ce.mollified.margin
        )));
    }
    Ok(ce)
}

/// `D(0)` recovered from the field `u0` through the change of variable.
pub fn initial_dissipation(
    f: &FluxModel,
    u0: &Field,
    p: &ShockProfile,
    xdot0: f64,
    ny: usize,
) -> Result<DissipationReport> {
    let wp = change_of_variable(u0, p, ny)?;
    dissipation_y(&wp, xdot0, f, p.sigma)
}

/// A shift velocity law: constant, or piecewise constant on equal pieces
/// of `[0, t_max]` (a piecewise-linear shift).
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShiftLaw {
    Constant { velocity: f64 },
    PiecewiseLinear { t_max: f64, slopes: Vec<f64> },
}

impl ShiftLaw {
    pub fn velocity(&self, t: f64) -> f64 {
        match self {
            ShiftLaw::Constant { velocity } => *velocity,
            ShiftLaw::PiecewiseLinear { t_max, slopes } => {
                let k = ((t / t_max) * slopes.len() as f64).floor().max(0.0) as usize;
                slopes[k.min(slopes.len() - 1)]
            }
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match self {
            ShiftLaw::Constant { velocity } => velocity.abs(),
            ShiftLaw::PiecewiseLinear { slopes, .. } => slopes.iter().map(|s| s.abs()).fold(0.0, f64::max),
        }
    }
}

/// `n_constant` evenly spaced velocities in `[-M, M]` and `n_random`
/// piecewise-linear shifts with slopes drawn uniformly from `[-M, M]`.
pub fn shift_family(m: f64, n_constant: usize, n_random: usize, pieces: usize, t_max: f64, seed: u64) -> Vec<ShiftLaw> {
    let mut family: Vec<ShiftLaw> = (0..n_constant)
        .map(|k| {
            let v = if n_constant == 1 { 0.0 } else { -m + 2.0 * m * k as f64 / (n_constant - 1) as f64 };
            ShiftLaw::Constant { velocity: v }
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..n_random {
        let slopes = (0..pieces.max(1)).map(|_| rng.gen_range(-m..=m)).collect();
        family.push(ShiftLaw::PiecewiseLinear { t_max, slopes });
    }
    family
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShiftOutcome {
    pub law: ShiftLaw,
    pub lipschitz: f64,
    /// Earliest accepted step with `||V - S1|| > ||U0 - S1||`.
    pub first_exceedance: Option<f64>,
    /// `max_t ||V - S1|| / ||U0 - S1||` over `[0, t_max]`.
    pub max_norm_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdversarialReport {
    pub initial_norm: f64,
    pub t_max: f64,
    pub outcomes: Vec<ShiftOutcome>,
    /// Smallest over the family of the largest distance ratio.
    pub family_min_max_ratio: f64,
    pub all_exceed: bool,
    /// `(lipschitz, latest first exceedance among members with that constant)`.
    pub t_star_by_lipschitz: Vec<(f64, f64)>,
}

/// Evolves the shifted equation with each prescribed shift and records
/// when the distance to the shock first exceeds its initial value.
pub fn adversarial_shift_test(
    f: &FluxModel,
    u0: &Field,
    p: &ShockProfile,
    family: &[ShiftLaw],
    t_max: f64,
    opts: &EvolveOptions,
) -> Result<AdversarialReport> {
    let opts = EvolveOptions { record_steps: true, ..opts.clone() };
    let s1: Vec<f64> = u0.grid.points().iter().map(|&x| p.value(x)).collect();
    if u0.u == s1 {
        return Err(Error::Counterexample("zero perturbation: there is no distance to exceed".into()));
    }
    let runs = sweep::map(family, |law| {
        let rate = |t: f64| law.velocity(t);
        evolve_with_shift(f, p, u0, &rate, t_max, &opts).map(|ev| (law.clone(), ev))
    });
    let mut outcomes = Vec::with_capacity(family.len());
    let mut initial_norm = f64::NAN;
    for run in runs {
        let (law, ev) = run?;
        let d: Vec<(f64, f64)> = ev.steps.iter().map(|s| (s.t, s.dist2.unwrap_or(f64::NAN))).collect();
        let d0 = d[0].1;
        initial_norm = d0.sqrt();
        let first_exceedance = d.iter().skip(1).find(|(_, v)| *v > d0).map(|(t, _)| *t);
        let max_norm_ratio = d.iter().map(|(_, v)| (v / d0).sqrt()).fold(0.0, f64::max);
        outcomes.push(ShiftOutcome { lipschitz: law.lipschitz(), law, first_exceedance, max_norm_ratio });
    }
    let family_min_max_ratio = outcomes.iter().map(|o| o.max_norm_ratio).fold(f64::INFINITY, f64::min);
    let all_exceed = outcomes.iter().all(|o| o.first_exceedance.is_some());
    let mut t_star: Vec<(f64, f64)> = Vec::new();
    for o in &outcomes {
        let t = o.first_exceedance.unwrap_or(f64::INFINITY);
        match t_star.iter_mut().find(|(l, _)| (*l - o.lipschitz).abs() < 1e-12) {
            Some(entry) => entry.1 = entry.1.max(t),
            None => t_star.push((o.lipschitz, t)),
        }
    }
    t_star.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    Ok(AdversarialReport { initial_norm, t_max, outcomes, family_min_max_ratio, all_exceed, t_star_by_lipschitz: t_star })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn corner_function_examples() {
        assert_eq!(piecewise_a(1.0, 0.1, 0.0).unwrap(), -0.1);
        assert_abs_diff_eq!(piecewise_a(1.0, 0.1, -0.95).unwrap(), -0.05, epsilon = 1e-15);
        let c = -1.0 + 0.1;
        assert_abs_diff_eq!(piecewise_a(1.0, 0.1, c).unwrap(), -0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(piecewise_a(1.0, 0.1, c - 1e-12).unwrap(), -0.1, epsilon = 1e-11);
        assert!(piecewise_a(1.0, 0.1, 1.0).is_err());
    }

    #[test]
    fn psi_examples() {
        assert_eq!(piecewise_psi(1.0, 0.1, 0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(piecewise_psi(1.0, 0.1, -0.9).unwrap(), -(0.1f64).sqrt(), epsilon = 1e-15);
        let c = 0.9;
        assert_abs_diff_eq!(piecewise_psi(1.0, 0.1, c - 1e-13).unwrap(), 0.1f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(piecewise_psi(1.0, 0.1, c).unwrap(), 0.1f64.sqrt(), epsilon = 1e-15);
        assert!(piecewise_psi(1.0, 0.1, -1.0).is_err());
    }

    #[test]
    fn exact_integral_examples() {
        let e = exact_integrals(1.0, 0.1).unwrap();
        assert_abs_diff_eq!(e.i_second, 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(e.i_weight, -13.0 / 180.0, epsilon = 1e-15);
        assert_abs_diff_eq!(e.margin, 1.0 / 18.0, epsilon = 1e-15);
        assert_abs_diff_eq!(exact_integrals(1.0, 0.2).unwrap().margin, 0.0, epsilon = 1e-15);
        let tiny = exact_integrals(1.0, 1e-12).unwrap();
        assert!(tiny.i_second.abs() < 1e-11 && tiny.i_weight.abs() < 1e-11 && tiny.margin.abs() < 1e-11);
        for a in [0.5, 1.0, 3.0] {
            for k in 1..20 {
                let alpha = a * k as f64 / 20.0;
                let e = exact_integrals(a, alpha).unwrap();
                assert_abs_diff_eq!(e.margin, alpha - 4.0 * alpha * alpha / (a - alpha), epsilon = 1e-12);
                assert_eq!(e.margin > 1e-14, alpha < a / 5.0 - 1e-12);
            }
        }
        assert!(exact_integrals(1.0, 1.0).is_err());
    }

    #[test]
    fn quadrature_reproduces_the_closed_forms() {
        for (a, alpha) in [(1.0, 0.1), (1.0, 0.19), (2.5, 0.3)] {
            let e = exact_integrals(a, alpha).unwrap();
            let q = quadrature_integrals(a, alpha).unwrap();
            assert_abs_diff_eq!(q.i_second, e.i_second, epsilon = 1e-12);
            assert_abs_diff_eq!(q.i_weight, e.i_weight, epsilon = 1e-12);
            assert_abs_diff_eq!(q.margin, e.margin, epsilon = 1e-12);
        }
    }

    #[test]
    fn constructed_flux_is_convex_with_zero_speed() {
        let f = counterexample_flux(1.0, 0.1, 0.1 / 8.0).unwrap();
        assert_abs_diff_eq!(f.value(1.0), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(f.value(-1.0), 0.0, epsilon = 1e-15);
        for k in 0..=4000 {
            let x = -2.0 + 4.0 * k as f64 / 4000.0;
            assert!(f.eval(x).unwrap().2 > 0.0);
        }
        // close to the corner function away from the corners
        assert_abs_diff_eq!(f.value(0.0), piecewise_a(1.0, 0.1, 0.0).unwrap(), epsilon = 1e-5);
        assert_abs_diff_eq!(f.value(0.95), piecewise_a(1.0, 0.1, 0.95).unwrap(), epsilon = 1e-5);
    }

    #[test]
    fn mollify_preserves_constants_and_linears() {
        let g = UniformGrid::new(0.0, 1.0, 1001);
        let c = mollify(&SampledFunction::from_fn(g, |_| 3.0), 0.01, Extension::Constant).unwrap();
        assert!(c.values.iter().all(|v| (v - 3.0).abs() < 1e-13));
        let l = mollify(&SampledFunction::from_fn(g, |x| 2.0 * x - 1.0), 0.01, Extension::OddReflection).unwrap();
        for (i, (v, d)) in l.values.iter().zip(l.derivs.as_ref().unwrap()).enumerate() {
            assert_abs_diff_eq!(*v, 2.0 * g.point(i) - 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(*d, 2.0, epsilon = 1e-10);
        }
        assert!(mollify(&SampledFunction::from_fn(g, |x| x), 1e-4, Extension::Constant).is_err());
    }

    #[test]
    fn mollified_psi_is_mean_zero_and_refuses_wide_kernels() {
        let phi = mollified_psi(1.0, 0.1, 0.1 / 8.0).unwrap();
        let mean = grid::trapezoid(&phi.values, phi.grid.spacing());
        assert!(mean.abs() < 1e-10, "{mean}");
        assert!(phi.values[0].abs() < 1e-14);
        assert!(mollified_psi(1.0, 0.1, 0.05).is_err());
    }

    #[test]
    fn alpha_above_a_fifth_is_refused() {
        let spec = CounterexampleSpec::new(1.0, 0.25, 0.25 / 8.0, 1e-2).unwrap();
        assert!(matches!(build_counterexample(spec, CounterexampleOptions::default()), Err(Error::Counterexample(_))));
    }

    #[test]
    fn shift_laws() {
        let fam = shift_family(5.0, 21, 3, 4, 1.0, 7);
        assert_eq!(fam.len(), 24);
        assert_eq!(fam[0], ShiftLaw::Constant { velocity: -5.0 });
        assert_eq!(fam[10], ShiftLaw::Constant { velocity: 0.0 });
        assert!(fam.iter().all(|l| l.lipschitz() <= 5.0));
        assert_eq!(fam, shift_family(5.0, 21, 3, 4, 1.0, 7));
        let pl = ShiftLaw::PiecewiseLinear { t_max: 1.0, slopes: vec![1.0, -2.0] };
        assert_eq!(pl.velocity(0.25), 1.0);
        assert_eq!(pl.velocity(0.75), -2.0);
        assert_eq!(pl.velocity(1.0), -2.0);
    }

    #[test]
    fn smoothed_margin_converges_at_first_order() {
        let (a, alpha) = (1.0, 0.1);
        let exact = exact_integrals(a, alpha).unwrap();
        let errs: Vec<f64> = [alpha / 4.0 * 0.99, alpha / 8.0, alpha / 16.0]
            .iter()
            .map(|&w| {
                let m = mollified_integrals(&counterexample_flux(a, alpha, w).unwrap(), &mollified_psi(a, alpha, w).unwrap());
                (m.i_second - exact.i_second).abs() + 2.0 * (m.i_weight - exact.i_weight).abs()
            })
            .collect();
        for pair in errs.windows(2) {
            let ratio = pair[0] / pair[1];
            assert!(ratio > 1.6 && ratio < 2.6, "{errs:?}");
        }
    }

    fn small_case() -> Counterexample {
        let spec = CounterexampleSpec::new(1.0, 0.1, 0.1 / 8.0, 1e-2).unwrap();
        build_counterexample(spec, CounterexampleOptions::default()).unwrap()
    }

    #[test]
    fn initial_dissipation_is_negative_and_shift_invariant() {
        let ce = small_case();
        assert!(ce.d0 < ce.threshold && ce.threshold < 0.0);
        for xdot in [-10.0, 10.0] {
            let d = ce.dissipation_with(xdot).unwrap().d_y;
            assert!((d - ce.d0).abs() <= 1e-8 * ce.d0.abs(), "{d} vs {}", ce.d0);
        }
        let from_field = initial_dissipation(&ce.flux, &ce.u0, &ce.profile, 0.0, 4097).unwrap().d_y;
        assert!((from_field - ce.d0).abs() < 1e-3 * ce.d0.abs(), "{from_field} vs {}", ce.d0);
    }

    #[test]
    fn every_shift_in_a_small_family_exceeds() {
        let ce = small_case();
        let fam = shift_family(5.0, 3, 1, 3, 2e-3, 11);
        let rep = adversarial_shift_test(&ce.flux, &ce.u0, &ce.profile, &fam, 2e-3, &EvolveOptions::default()).unwrap();
        assert!(rep.all_exceed);
        assert!(rep.family_min_max_ratio > 1.0);
        assert_eq!(rep.t_star_by_lipschitz.len(), 3);
    }
}
