//! Initial data built from named perturbation families.

use rand::Rng;

use crate::counterexample::eval_sampled;
use crate::entropy::SampledFunction;
use crate::error::{Error, Result};
use crate::experiments::config::{KeyValueSpec, PerturbationSpec};
use crate::grid::UniformGrid;
use crate::profile::{ShockProfile, StepProfile};
use crate::solver::Field;

/// The state being perturbed.
#[derive(Debug, Clone, Copy)]
pub enum Base<'a> {
    /// `S1(x / scale)`.
    Profile { profile: &'a ShockProfile, scale: f64 },
    /// The inviscid shock, with the node on the jump set to the mean state;
    /// `scale` only enters the `x / scale` families.
    Step { step: StepProfile, scale: f64 },
}

impl Base<'_> {
    pub fn value(&self, x: f64) -> f64 {
        match self {
            Base::Profile { profile, scale } => profile.value(x / scale),
            Base::Step { step, .. } if x == 0.0 => 0.5 * (step.u_minus + step.u_plus),
            Base::Step { step, .. } => step.value(x),
        }
    }

    fn scale(&self) -> f64 {
        match self {
            Base::Profile { scale, .. } | Base::Step { scale, .. } => *scale,
        }
    }
}

/// `d^k/dxi^k exp(-xi^2) = (-1)^k H_k(xi) exp(-xi^2)` with physicists' Hermite `H_k`.
pub fn gaussian_derivative(order: usize, xi: f64) -> f64 {
    let (mut h0, mut h1) = (1.0, 2.0 * xi);
    let hk = match order {
        0 => h0,
        _ => {
            for k in 1..order {
                let h2 = 2.0 * xi * h1 - 2.0 * k as f64 * h0;
                h0 = h1;
                h1 = h2;
            }
            h1
        }
    };
    let sign = if order.is_multiple_of(2) { 1.0 } else { -1.0 };
    sign * hk * (-xi * xi).exp()
}

/// Value of a single term, given the base state and an optional
/// counterexample direction `phi` on the state axis.
fn term_value(t: &KeyValueSpec, base: &Base<'_>, phi: Option<&SampledFunction>, x: f64) -> Result<f64> {
    Ok(match t.kind.as_str() {
        "none" => 0.0,
        "gaussian_bump" => {
            let xi = (x - t.num("center", Some(0.0))?) / t.num("width", Some(1.0))?;
            t.num("amp", None)? * (-xi * xi).exp()
        }
        "derivative_mode" => {
            let xi = (x - t.num("center", Some(0.0))?) / t.num("width", Some(1.0))?;
            let order = t.num("order", Some(1.0))?;
            if order < 0.0 || order.fract() != 0.0 {
                return Err(Error::Config(format!("derivative_mode: order must be a nonnegative integer, got {order}")));
            }
            t.num("amp", None)? * gaussian_derivative(order as usize, xi)
        }
        "translate" => base.value(x - t.num("shift", None)?) - base.value(x),
        "scaled_bump" => {
            let xi = (x / base.scale() - t.num("center", Some(0.0))?) / t.num("width", Some(1.0))?;
            t.num("amp", None)? * (-xi * xi).exp()
        }
        "counterexample_phi" => {
            let phi = phi.ok_or_else(|| Error::Config("counterexample_phi needs the counterexample flux".into()))?;
            t.num("eps0", None)? * eval_sampled(phi, base.value(x))
        }
        other => return Err(Error::Config(format!("unknown perturbation family {other:?}"))),
    })
}

/// `U0 = base + sum of terms` sampled on `grid`.
pub fn initial_field(
    terms: &PerturbationSpec,
    base: Base<'_>,
    phi: Option<&SampledFunction>,
    grid: UniformGrid,
) -> Result<Field> {
    let mut u = Vec::with_capacity(grid.n);
    for x in grid.points() {
        let mut v = base.value(x);
        for t in terms {
            v += term_value(t, &base, phi, x)?;
        }
        u.push(v);
    }
    Field::new(grid, u)
}

/// One to three random bumps and derivative modes with amplitudes up to
/// `max_amp`, centres in `[-3, 3]` and widths in `[0.6, 2]`.
pub fn random_perturbation(rng: &mut impl Rng, max_amp: f64) -> PerturbationSpec {
    let n = rng.gen_range(1..=3);
    (0..n)
        .map(|_| {
            let amp = rng.gen_range(-max_amp..=max_amp);
            let center = rng.gen_range(-3.0..=3.0);
            let width = rng.gen_range(0.6..=2.0);
            let text = if rng.gen_bool(0.5) {
                format!("gaussian_bump:amp={amp},center={center},width={width}")
            } else {
                let order = rng.gen_range(1..=3);
                // the Hermite modes grow with order; keep the peak near amp
                let amp = amp / (1.0 + order as f64);
                format!("derivative_mode:amp={amp},order={order},center={center},width={width}")
            };
            KeyValueSpec::parse(&text).expect("generated spec parses")
        })
        .collect()
}
