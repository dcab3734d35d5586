//! Vanishing-viscosity experiments: the rescaling between the viscosity-eps
//! problem and the unit-viscosity one, the sqrt(eps) excess error, and the
//! bound for eps-small data.

use serde::Serialize;
use serde_json::json;

use crate::entropy::{norms, Reference};
use crate::error::Result;
use crate::experiments::config::{parse_perturbation, ExperimentConfig, PerturbationSpec};
use crate::experiments::fit::fit_loglog;
use crate::experiments::output::{Check, RunArtifacts, Table};
use crate::experiments::perturb::{initial_field, Base};
use crate::experiments::setup_profile;
use crate::flux::FluxModel;
use crate::grid::{self, UniformGrid};
use crate::profile::{ShockProfile, StepProfile};
use crate::solver::{evolve_shifted, evolve_shifted_scaled, EvolveOptions, Field};
use crate::sweep;

/// Which initial data an inviscid run starts from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum InitialData {
    /// The inviscid shock itself, `U0 = S0`.
    Step,
    /// `S0 + amp exp(-(x / eps)^2)`: perturbations of size `eps` in `L1` and `L2^2`.
    Scaled,
}

fn initial_spec(cfg: &ExperimentConfig, data: InitialData) -> Result<PerturbationSpec> {
    match data {
        InitialData::Step => parse_perturbation("none"),
        InitialData::Scaled => parse_perturbation(&format!("scaled_bump:amp={},width=1", cfg.scaled_amplitude)),
    }
}

/// Odd node count with spacing at most `dx` on `[-half, half]`.
fn nodes_for(half: f64, dx: f64) -> usize {
    let cells = (2.0 * half / dx).ceil() as usize;
    cells + 1 + cells % 2
}

/// The co-moving field of the viscosity-`eps` problem, on `[-L, L]` with
/// spacing about `eps / cells_per_eps * refine`.
fn direct_path(
    f: &FluxModel,
    p: &ShockProfile,
    cfg: &ExperimentConfig,
    spec: &PerturbationSpec,
    eps: f64,
    refine: f64,
    times: &[f64],
) -> Result<Vec<Field>> {
    let grid = UniformGrid::symmetric(cfg.half_width, nodes_for(cfg.half_width, eps / cfg.cells_per_eps * refine));
    let step = StepProfile::new(p.u_minus, p.u_plus)?;
    let u0 = initial_field(spec, Base::Step { step, scale: eps }, None, grid)?;
    let opts = options(cfg, times);
    let ev = evolve_shifted_scaled(f, p, &u0, eps, times[times.len() - 1], &opts)?;
    Ok(ev.snapshots.into_iter().map(|s| s.field).collect())
}

/// The same problem through the unit-viscosity equation on
/// `[-L / eps, L / eps]` at times `t / eps`, mapped back by `x -> x / eps`
/// onto the nodes of `target`.
fn rescaled_path(
    f: &FluxModel,
    p: &ShockProfile,
    cfg: &ExperimentConfig,
    spec: &PerturbationSpec,
    eps: f64,
    refine: f64,
    times: &[f64],
    target: &UniformGrid,
) -> Result<Vec<Field>> {
    let half = cfg.half_width / eps;
    // a different spacing from the direct path, so the two discretisations differ
    let grid = UniformGrid::symmetric(half, nodes_for(half, 1.5 / cfg.cells_per_eps * refine));
    let step = StepProfile::new(p.u_minus, p.u_plus)?;
    let u0 = initial_field(spec, Base::Step { step, scale: 1.0 }, None, grid)?;
    let slow: Vec<f64> = times.iter().map(|t| t / eps).collect();
    let opts = options(cfg, &slow);
    let ev = evolve_shifted(f, p, &u0, slow[slow.len() - 1], &opts)?;
    Ok(ev
        .snapshots
        .iter()
        .zip(times)
        .map(|(s, &t)| {
            let u = target.points().iter().map(|x| grid::interp_cubic(&s.field.grid, &s.field.u, x / eps)).collect();
            Field { grid: *target, u, t }
        })
        .collect())
}

fn options(cfg: &ExperimentConfig, times: &[f64]) -> EvolveOptions {
    let mut opts = cfg.evolve_options().with_snapshots(times.to_vec());
    opts.record_steps = false;
    opts
}

fn l2_diff(a: &Field, b: &Field) -> f64 {
    let d: Vec<f64> = a.u.iter().zip(&b.u).map(|(x, y)| (x - y).powi(2)).collect();
    grid::trapezoid(&d, a.dx()).sqrt()
}

/// `||u_h - u_2h|| / 3`: the second-order Richardson estimate of the error in `u_h`.
fn richardson(fine: &Field, coarse: &Field) -> f64 {
    let on_coarse = Field {
        grid: coarse.grid,
        u: coarse.grid.points().iter().map(|&x| grid::interp_cubic(&fine.grid, &fine.u, x)).collect(),
        t: fine.t,
    };
    l2_diff(&on_coarse, coarse) / 3.0
}

/// Per-`eps` results at each snapshot time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsilonRun {
    pub eps: f64,
    pub data: InitialData,
    pub times: Vec<f64>,
    /// `||direct - rescaled||_2` at each time.
    pub discrepancy: Vec<f64>,
    /// Sum of the Richardson error estimates of the two paths.
    pub tolerance: Vec<f64>,
    /// `||U_eps - S0(. - Y)||_2`.
    pub to_step: Vec<f64>,
    /// `||U_eps - S1((. - Y) / eps)||_2^2`.
    pub to_profile_sq: Vec<f64>,
    pub initial_to_step: f64,
}

pub fn epsilon_run(f: &FluxModel, p: &ShockProfile, cfg: &ExperimentConfig, eps: f64, data: InitialData) -> Result<EpsilonRun> {
    let spec = initial_spec(cfg, data)?;
    let times = cfg.inviscid_times.clone();
    let step = StepProfile::new(p.u_minus, p.u_plus)?;
    let jobs = [(false, 1.0), (false, 2.0), (true, 1.0), (true, 2.0)];
    let direct_grid = UniformGrid::symmetric(cfg.half_width, nodes_for(cfg.half_width, eps / cfg.cells_per_eps));
    let mut paths = sweep::map(&jobs, |&(rescaled, refine)| {
        let target = UniformGrid::symmetric(cfg.half_width, nodes_for(cfg.half_width, eps / cfg.cells_per_eps * refine));
        if rescaled {
            rescaled_path(f, p, cfg, &spec, eps, refine, &times, &target)
        } else {
            direct_path(f, p, cfg, &spec, eps, refine, &times)
        }
    })
    .into_iter();
    let mut next = || paths.next().expect("four paths");
    let (direct, direct_coarse, rescaled, rescaled_coarse) = (next()?, next()?, next()?, next()?);

    let u0 = initial_field(&spec, Base::Step { step, scale: eps }, None, direct_grid)?;
    let mut out = EpsilonRun {
        eps,
        data,
        times: times.clone(),
        discrepancy: Vec::new(),
        tolerance: Vec::new(),
        to_step: Vec::new(),
        to_profile_sq: Vec::new(),
        initial_to_step: norms(&u0, Reference::step(step)).l2,
    };
    for k in 0..times.len() {
        out.discrepancy.push(l2_diff(&direct[k], &rescaled[k]));
        out.tolerance.push(richardson(&direct[k], &direct_coarse[k]) + richardson(&rescaled[k], &rescaled_coarse[k]));
        out.to_step.push(norms(&direct[k], Reference::step(step)).l2);
        let shock = Reference::Shock { profile: p, shift: 0.0, scale: eps };
        out.to_profile_sq.push(norms(&direct[k], shock).l2.powi(2));
    }
    Ok(out)
}

/// `eps^(3/2) / (eps^(1/2) + t^(1/2))`.
pub fn small_data_rate(eps: f64, t: f64) -> f64 {
    eps.powf(1.5) / (eps.sqrt() + t.sqrt())
}

/// `||S1(. / eps) - S0||_2` by quadrature, against `sqrt(eps) ||S1 - S0||_2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingIdentity {
    pub eps: f64,
    pub scaled: f64,
    pub predicted: f64,
}

pub fn scaling_identity(p: &ShockProfile, eps: f64, half: f64) -> Result<ScalingIdentity> {
    let step = StepProfile::new(p.u_minus, p.u_plus)?;
    // one grid for both, so the scaled profile is not sampled at rescaled
    // nodes; Richardson extrapolation removes the h^2 term of each square
    let sq = |scale: f64, n: usize| {
        let g = UniformGrid::symmetric(half, n);
        norms(&Field::from_fn(g, |x| p.value(x / scale)), Reference::step(step)).l2.powi(2)
    };
    let extrapolated = |scale: f64| {
        let (coarse, fine) = (sq(scale, 160_001), sq(scale, 320_001));
        ((4.0 * fine - coarse) / 3.0).sqrt()
    };
    Ok(ScalingIdentity { eps, scaled: extrapolated(eps), predicted: eps.sqrt() * extrapolated(1.0) })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InviscidReport {
    pub fixed: Vec<EpsilonRun>,
    pub scaled: Vec<EpsilonRun>,
    /// Log-log slope of the excess error against `eps`, per snapshot time.
    pub excess_slopes: Vec<f64>,
    /// `C` fitted on the largest `eps` for the small-data bound.
    pub small_data_constant: f64,
    /// Largest `measured / (C rate)` over the smaller `eps`.
    pub small_data_worst: f64,
    pub identities: Vec<ScalingIdentity>,
}

pub fn inviscid_study(cfg: &ExperimentConfig) -> Result<InviscidReport> {
    let f = cfg.flux_model()?;
    let p = setup_profile(&f, cfg)?;
    let fixed = cfg.eps.iter().map(|&e| epsilon_run(&f, &p, cfg, e, InitialData::Step)).collect::<Result<Vec<_>>>()?;
    let scaled = cfg.eps.iter().map(|&e| epsilon_run(&f, &p, cfg, e, InitialData::Scaled)).collect::<Result<Vec<_>>>()?;
    let eps: Vec<f64> = cfg.eps.clone();
    let mut excess_slopes = Vec::new();
    for k in 0..cfg.inviscid_times.len() {
        let excess: Vec<f64> = fixed.iter().map(|r| r.to_step[k] - r.initial_to_step).collect();
        excess_slopes.push(fit_loglog(&eps, &excess, eps[eps.len() - 1], eps[0])?.slope);
    }
    let ratio = |r: &EpsilonRun, k: usize| r.to_profile_sq[k] / small_data_rate(r.eps, r.times[k]);
    let small_data_constant = (0..cfg.inviscid_times.len()).map(|k| ratio(&scaled[0], k)).fold(0.0, f64::max);
    let small_data_worst = scaled[1..]
        .iter()
        .flat_map(|r| (0..r.times.len()).map(move |k| (r, k)))
        .map(|(r, k)| ratio(r, k) / small_data_constant)
        .fold(0.0, f64::max);
    let identities = eps.iter().map(|&e| scaling_identity(&p, e, p.half_width())).collect::<Result<_>>()?;
    Ok(InviscidReport { fixed, scaled, excess_slopes, small_data_constant, small_data_worst, identities })
}

pub fn run_inviscid(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    let r = inviscid_study(cfg)?;
    let mut run = RunArtifacts::new("inviscid");
    for (label, runs) in [("fixed", &r.fixed), ("scaled", &r.scaled)] {
        for e in runs.iter() {
            let worst = e.discrepancy.iter().zip(&e.tolerance).map(|(d, t)| d / t).fold(0.0, f64::max);
            run.checks.push(Check::at_most(
                format!("two-path agreement, {label} data, eps = {}", e.eps),
                worst,
                1.0,
                format!("discrepancy {:?}, tolerance {:?}", e.discrepancy, e.tolerance),
            ));
        }
    }
    let (lo, hi) = (cfg.inviscid_slope - cfg.inviscid_slope_tol, cfg.inviscid_slope + cfg.inviscid_slope_tol);
    for (t, s) in cfg.inviscid_times.iter().zip(&r.excess_slopes) {
        run.checks.push(Check::new(format!("excess error slope at t = {t}"), *s >= lo && *s <= hi, *s, hi, format!("accepted [{lo}, {hi}]")));
    }
    run.checks.push(Check::at_most(
        "small-data distance below the fitted multiple",
        r.small_data_worst,
        1.0,
        format!("C = {:.6e} fitted on eps = {}", r.small_data_constant, cfg.eps[0]),
    ));
    let ident = r.identities.iter().map(|i| (i.scaled - i.predicted).abs() / i.predicted).fold(0.0, f64::max);
    run.checks.push(Check::at_most("||S1(./eps) - S0|| = sqrt(eps) ||S1 - S0||", ident, cfg.identity_tol, "relative"));

    let mut table = Table::new("inviscid", &["eps", "t", "fixed_to_step", "fixed_excess", "scaled_to_profile_sq", "rate", "discrepancy", "tolerance"]);
    for (a, b) in r.fixed.iter().zip(&r.scaled) {
        for k in 0..a.times.len() {
            table.push(vec![
                a.eps,
                a.times[k],
                a.to_step[k],
                a.to_step[k] - a.initial_to_step,
                b.to_profile_sq[k],
                small_data_rate(a.eps, a.times[k]),
                a.discrepancy[k].max(b.discrepancy[k]),
                a.tolerance[k].min(b.tolerance[k]),
            ]);
        }
    }
    run.tables.push(table);
    run.summary = serde_json::to_value(&r).unwrap_or_default();
    run.scheme = json!({ "options": cfg.evolve_options(), "cells_per_eps": cfg.cells_per_eps, "L": cfg.half_width });
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flux::FluxModel;

    #[test]
    fn profile_distance_scales_with_sqrt_eps() {
        let f = FluxModel::quadratic(1.0, (-2.0, 2.0)).unwrap();
        let p = ShockProfile::auto(&f, 1.0, -1.0).unwrap();
        for eps in [0.1, 0.025] {
            let s = scaling_identity(&p, eps, p.half_width()).unwrap();
            assert!((s.scaled - s.predicted).abs() < 1e-8 * s.predicted, "{s:?}");
        }
    }

    #[test]
    fn node_counts_are_odd_and_fine_enough() {
        let n = nodes_for(4.0, 0.01);
        assert_eq!(n % 2, 1);
        assert!(8.0 / (n - 1) as f64 <= 0.01);
    }
}
