//! Long-time decay of the shifted distance and its power-law exponent.

use serde::Serialize;
use serde_json::json;

use crate::entropy::{norms, Reference};
use crate::error::{Error, Result};
use crate::experiments::config::{parse_perturbation, ExperimentConfig};
use crate::experiments::fit::{fit_loglog, RateFit};
use crate::experiments::output::{Check, RunArtifacts, Table};
use crate::experiments::perturb::{initial_field, Base};
use crate::experiments::setup_profile;
use crate::grid::UniformGrid;
use crate::solver::evolve_shifted;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayReport {
    pub initial_l2: f64,
    /// First snapshot with `||V - S1|| <= 0.9 ||U0 - S1||`.
    pub plateau_end: f64,
    pub fit: RateFit,
    /// Smallest `C0` with `N(t) <= C0 N0 / (C0 + t^(1/4) N0)` on the fit window.
    pub envelope_c0: f64,
    pub times: Vec<f64>,
    pub l2: Vec<f64>,
}

/// Pointwise envelope constant: `N = C0 N0 / (C0 + t^(1/4) N0)` solved for `C0`.
fn envelope_constant(t: f64, n: f64, n0: f64) -> f64 {
    if n >= n0 {
        f64::INFINITY
    } else {
        t.powf(0.25) * n0 * n / (n0 - n)
    }
}

/// The series `||V(t) - S1||_2` and its fits. `None` for a zero perturbation.
pub fn decay_series(cfg: &ExperimentConfig) -> Result<Option<DecayReport>> {
    let f = cfg.flux_model()?;
    f.require_admissible()?;
    let p = setup_profile(&f, cfg)?;
    let spec = parse_perturbation(&cfg.perturbation)?;
    let grid = UniformGrid::symmetric(cfg.half_width, cfg.nx);
    let u0 = initial_field(&spec, Base::Profile { profile: &p, scale: 1.0 }, None, grid)?;
    let n0 = norms(&u0, Reference::shock(&p)).l2;
    if n0 == 0.0 {
        return Ok(None);
    }
    let mut opts = cfg.evolve_options().with_snapshots(cfg.snapshot_times());
    opts.record_steps = false;
    let ev = evolve_shifted(&f, &p, &u0, cfg.t_end, &opts)?;
    let times: Vec<f64> = ev.snapshots.iter().map(|s| s.field.t).collect();
    let l2: Vec<f64> = ev.snapshots.iter().map(|s| norms(&s.field, Reference::shock(&p)).l2).collect();

    let plateau_end = times.iter().zip(&l2).find(|(_, n)| **n <= 0.9 * n0).map(|(t, _)| *t);
    let limit = cfg.plateau_fraction * cfg.t_end;
    let plateau_end = match plateau_end {
        Some(t) if t <= limit => t,
        other => {
            return Err(Error::Config(format!(
                "horizon too short: the plateau lasts until {} (> {limit})",
                other.map_or("the end of the run".to_string(), |t| t.to_string())
            )))
        }
    };
    let t0 = cfg.decay_window * cfg.t_end;
    let fit = fit_loglog(&times, &l2, t0, cfg.t_end)?;
    let envelope_c0 = times
        .iter()
        .zip(&l2)
        .filter(|(t, _)| **t >= t0)
        .map(|(t, n)| envelope_constant(*t, *n, n0))
        .fold(0.0, f64::max);
    Ok(Some(DecayReport { initial_l2: n0, plateau_end, fit, envelope_c0, times, l2 }))
}

pub fn run_decay(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    let mut run = RunArtifacts::new("decay");
    run.scheme = json!({ "options": cfg.evolve_options(), "grid": UniformGrid::symmetric(cfg.half_width, cfg.nx) });
    let Some(r) = decay_series(cfg)? else {
        run.checks.push(Check::at_most("zero perturbation gives a zero series", 0.0, 0.0, "fit skipped"));
        run.summary = json!({ "initial_l2": 0.0, "fit": null });
        return Ok(run);
    };
    let s = r.fit.slope;
    run.checks.push(Check::new(
        "fitted decay exponent",
        s >= cfg.decay_slope_min && s <= cfg.decay_slope_max,
        s,
        cfg.decay_slope_max,
        format!("window [{}, {}], accepted [{}, {}]", r.fit.t0, r.fit.t1, cfg.decay_slope_min, cfg.decay_slope_max),
    ));
    let mut table = Table::new("decay", &["t", "L2"]);
    table.push(vec![0.0, r.initial_l2]);
    for (t, n) in r.times.iter().zip(&r.l2) {
        table.push(vec![*t, *n]);
    }
    run.tables.push(table);
    run.summary = json!({
        "initial_l2": r.initial_l2,
        "plateau_end": r.plateau_end,
        "fit": r.fit,
        "envelope_c0": r.envelope_c0,
        "final_l2": r.l2.last(),
    });
    Ok(run)
}
