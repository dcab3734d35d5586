//! Single runs: the shock profile table and a plain evolution.

use serde_json::json;

use crate::entropy::{norms, Reference};
use crate::error::Result;
use crate::experiments::config::{parse_perturbation, ExperimentConfig, FluxSpec};
use crate::experiments::output::{Check, RunArtifacts, Table};
use crate::experiments::perturb::{initial_field, Base};
use crate::experiments::setup_profile;
use crate::grid::UniformGrid;
use crate::profile::ShockProfile;
use crate::solver::{evolve, evolve_shifted_scaled};

/// `m - (alpha / 2) tanh(a alpha x / 2)`, the profile of `A = a u^2`.
pub fn quadratic_profile(a: f64, u_minus: f64, u_plus: f64, x: f64) -> f64 {
    let alpha = u_minus - u_plus;
    0.5 * (u_minus + u_plus) - 0.5 * alpha * (0.5 * a * alpha * x).tanh()
}

pub fn run_profile(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    let f = cfg.flux_model()?;
    let p = setup_profile(&f, cfg)?;
    let mut run = RunArtifacts::new("profile");
    let mut table = Table::new("profile", &["x", "S1", "S1_prime"]);
    for (i, x) in p.grid.points().into_iter().enumerate() {
        table.push(vec![x, p.values[i], p.derivs[i]]);
    }
    let monotone = p.values.windows(2).all(|w| w[1] < w[0]) || p.derivs.iter().all(|d| *d <= 0.0);
    run.checks.push(Check::new("profile is decreasing", monotone, 0.0, 0.0, ""));
    let (fm, fp) = p.fitted_tail_rates();
    let rate_err = ((fm - p.c_minus) / p.c_minus).abs().max(((fp - p.c_plus) / p.c_plus).abs());
    run.checks.push(Check::at_most("fitted tail rates match c-+", rate_err, cfg.tail_rate_tol, format!("fitted ({fm}, {fp})")));
    let spec = FluxSpec::parse(&cfg.flux)?;
    let mut oracle = None;
    if spec.kind == "quadratic" {
        let a = spec.num("a", Some(1.0))?;
        let err = p
            .grid
            .points()
            .iter()
            .zip(&p.values)
            .map(|(x, s)| (s - quadratic_profile(a, p.u_minus, p.u_plus, *x)).abs())
            .fold(0.0, f64::max);
        run.checks.push(Check::at_most("closed-form profile", err, cfg.profile_tol, "max over the table"));
        oracle = Some(err);
    }
    let (d_norm, step_norm) = p.l2_norms();
    run.summary = json!({
        "sigma": p.sigma,
        "c_minus": p.c_minus,
        "c_plus": p.c_plus,
        "fitted_tail_rates": [fm, fp],
        "S1_prime_l2": d_norm,
        "S1_minus_S0_l2": step_norm,
        "half_width": p.half_width(),
        "nodes": p.grid.n,
        "closed_form_error": oracle,
    });
    run.scheme = json!({ "grid": p.grid, "flux": f.describe() });
    run.tables.push(table);
    Ok(run)
}

/// Evolves `S1(x / viscosity) + perturbation`, in the lab frame or coupled to
/// the feedback shift, and writes the snapshots in long form `(t, x, u)`.
pub fn run_evolve(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    let f = cfg.flux_model()?;
    let p = setup_profile(&f, cfg)?;
    let spec = parse_perturbation(&cfg.perturbation)?;
    let grid = UniformGrid::symmetric(cfg.half_width, cfg.nx);
    let base = Base::Profile { profile: &p, scale: cfg.viscosity };
    let u0 = initial_field(&spec, base, None, grid)?;
    let mut opts = cfg.evolve_options().with_snapshots(cfg.snapshot_times());
    opts.record_steps = false;
    let ev = if cfg.shifted {
        evolve_shifted_scaled(&f, &p, &u0, cfg.viscosity, cfg.t_end, &opts)?
    } else {
        // the shock travels in the lab frame, so the boundary strips are not quiet
        opts.leak = None;
        evolve(&f, &u0, cfg.viscosity, cfg.t_end, &opts)?
    };
    let mut snaps = Table::new("snapshots", &["t", "x", "u"]);
    for (t, field) in std::iter::once((0.0, &u0)).chain(ev.snapshots.iter().map(|s| (s.field.t, &s.field))) {
        for (x, u) in field.xs().into_iter().zip(&field.u) {
            snaps.push(vec![t, x, *u]);
        }
    }
    let mut traj = Table::new("trajectory", &["t", "X", "Xdot"]);
    for k in 0..ev.trajectory.len() {
        traj.push(vec![ev.trajectory.ts[k], ev.trajectory.x[k], ev.trajectory.xdot[k]]);
    }
    let reference = if cfg.shifted { Reference::Shock { profile: &p, shift: 0.0, scale: cfg.viscosity } } else { Reference::shock(&p) };
    let mut run = RunArtifacts::new("evolve");
    run.summary = json!({
        "shifted": cfg.shifted,
        "initial": norms(&u0, reference),
        "final": cfg.shifted.then(|| norms(&ev.final_field, reference)),
        "final_shift": ev.trajectory.x.last(),
        "max_leak": ev.max_leak,
        "sigma": p.sigma,
    });
    run.scheme = json!({
        "scheme": ev.scheme,
        "options": opts,
        "viscosity": ev.viscosity,
        "grid": grid,
        "stats": ev.stats,
        "profile_half_width": ShockProfile::half_width(&p),
    });
    run.tables.extend([snaps, traj]);
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms_of_the_two_oracles() {
        for x in [-3.0, -0.5, 0.0, 1.2] {
            assert!((quadratic_profile(1.0, 1.0, -1.0, x) + f64::tanh(x)).abs() < 1e-15);
            assert!((quadratic_profile(0.5, 1.0, 0.0, x) - 1.0 / (1.0 + (x / 2.0).exp())).abs() < 1e-15);
        }
    }

    #[test]
    fn profile_run_passes_for_burgers() {
        let run = run_profile(&ExperimentConfig::default()).unwrap();
        assert!(run.passed(), "{:?}", run.checks);
        assert_eq!(run.tables[0].columns, ["x", "S1", "S1_prime"]);
    }

    #[test]
    fn evolve_writes_snapshots_and_trajectory() {
        let cfg = ExperimentConfig { t_end: 0.2, snap_every: 0.1, nx: 129, half_width: 10.0, ..Default::default() };
        let run = run_evolve(&cfg).unwrap();
        assert_eq!(run.tables[0].rows.len(), 3 * 129);
        assert!(!run.tables[1].rows.is_empty());
    }
}
