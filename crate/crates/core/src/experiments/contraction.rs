//! Shifted runs: monotonicity of the distance to the shock, the shift
//! velocity bound, and the discrete energy identity.

use serde::Serialize;
use serde_json::json;

use crate::entropy::{dissipation_report, norms, Norms, Reference};
use crate::error::Result;
use crate::experiments::config::{parse_perturbation, ExperimentConfig, PerturbationSpec};
use crate::experiments::output::{Check, RunArtifacts, Table};
use crate::experiments::perturb::{initial_field, Base};
use crate::experiments::setup_profile;
use crate::flux::FluxModel;
use crate::grid::UniformGrid;
use crate::profile::ShockProfile;
use crate::solver::{evolve_shifted, Evolution, Field};
use crate::sweep;

/// Per-run numbers for the monotonicity and shift-bound checks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShiftedRun {
    pub label: String,
    pub nx: usize,
    pub dx: f64,
    pub initial: Norms,
    /// Largest `||V - S1||^2` increase over one accepted step.
    pub max_increment: f64,
    /// Steps whose increase exceeds `rho = rho_c (dx^2 + dt) ||U0 - S1||^2`.
    pub violations: usize,
    pub steps: usize,
    pub sup_shift_deviation: f64,
    /// `k ||S1'|| ||U0 - S1||`.
    pub shift_bound: f64,
    pub final_distance: f64,
}

/// Runs the shifted equation from `S1 + perturbation` on `[-L, L]` with `nx` nodes.
pub fn shifted_run(
    f: &FluxModel,
    p: &ShockProfile,
    cfg: &ExperimentConfig,
    perturbation: &PerturbationSpec,
    label: &str,
    nx: usize,
) -> Result<(ShiftedRun, Evolution, Field)> {
    let grid = UniformGrid::symmetric(cfg.half_width, nx);
    let u0 = initial_field(perturbation, Base::Profile { profile: p, scale: 1.0 }, None, grid)?;
    let opts = cfg.evolve_options().with_snapshots(cfg.snapshot_times());
    let ev = evolve_shifted(f, p, &u0, cfg.t_end, &opts)?;
    let initial = norms(&u0, Reference::shock(p));
    let n0_sq = initial.l2 * initial.l2;
    let dx = grid.spacing();
    let mut max_increment = f64::NEG_INFINITY;
    let mut violations = 0;
    for w in ev.steps.windows(2) {
        let (a, b) = (w[0].dist2.unwrap_or(0.0), w[1].dist2.unwrap_or(0.0));
        let inc = b - a;
        max_increment = max_increment.max(inc);
        let rho = cfg.rho_c * (dx * dx + (w[1].t - w[0].t)) * n0_sq;
        if inc > rho {
            violations += 1;
        }
    }
    let (s1_prime, _) = p.l2_norms();
    let run = ShiftedRun {
        label: label.into(),
        nx,
        dx,
        initial,
        max_increment: max_increment.max(0.0),
        violations,
        steps: ev.steps.len(),
        sup_shift_deviation: ev.trajectory.max_velocity_deviation(p.sigma),
        shift_bound: f.shift_gain(p.u_minus, p.u_plus) * s1_prime * initial.l2,
        final_distance: ev.steps.last().and_then(|s| s.dist2).unwrap_or(0.0).sqrt(),
    };
    Ok((run, ev, u0))
}

/// Every step increase within `rho`, and the largest increase reduced by
/// at least the configured factor on the refined grid (or at round-off).
pub fn refinement_passes(coarse: &ShiftedRun, fine: &ShiftedRun, cfg: &ExperimentConfig) -> bool {
    let floor = cfg.roundoff_floor * coarse.initial.l2.powi(2);
    coarse.violations == 0
        && fine.violations == 0
        && fine.max_increment <= (coarse.max_increment / cfg.refinement_factor).max(floor)
}

pub fn shift_bound_passes(run: &ShiftedRun, cfg: &ExperimentConfig) -> bool {
    run.sup_shift_deviation <= run.shift_bound + cfg.shift_bound_slack
}

/// The twenty standard cases: translates, bumps and derivative modes.
pub fn standard_cases() -> Vec<String> {
    let mut v = Vec::new();
    for s in [-1.0, -0.5, 0.25, 0.5, 1.0] {
        v.push(format!("translate:shift={s}"));
    }
    for (amp, c, w) in [
        (0.3, 0.0, 1.0),
        (-0.3, 0.0, 1.0),
        (0.1, -2.0, 0.5),
        (-0.1, 2.0, 0.5),
        (0.2, 1.0, 2.0),
        (-0.2, -1.0, 2.0),
        (0.5, 0.0, 0.7),
        (0.05, 3.0, 1.0),
    ] {
        v.push(format!("gaussian_bump:amp={amp},center={c},width={w}"));
    }
    for (amp, k, c, w) in [
        (0.2, 1, 0.0, 1.0),
        (-0.2, 1, 1.0, 1.0),
        (0.1, 2, 0.0, 1.0),
        (-0.1, 2, -1.0, 1.5),
        (0.05, 3, 0.0, 1.0),
        (0.1, 1, -2.0, 0.6),
        (0.08, 3, 2.0, 1.2),
    ] {
        v.push(format!("derivative_mode:amp={amp},order={k},center={c},width={w}"));
    }
    v
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseOutcome {
    pub perturbation: String,
    pub coarse: ShiftedRun,
    pub fine: ShiftedRun,
    pub refinement_ok: bool,
    pub shift_bound_ok: bool,
}

/// Coarse and fine runs of each case, in parallel.
pub fn contraction_suite(f: &FluxModel, p: &ShockProfile, cfg: &ExperimentConfig, cases: &[String]) -> Result<Vec<CaseOutcome>> {
    let jobs: Vec<(usize, bool)> = (0..cases.len()).flat_map(|i| [(i, false), (i, true)]).collect();
    let runs = sweep::map(&jobs, |&(i, fine)| {
        let spec = parse_perturbation(&cases[i])?;
        let nx = if fine { cfg.fine_nx() } else { cfg.nx };
        shifted_run(f, p, cfg, &spec, &cases[i], nx).map(|r| r.0)
    });
    let mut it = runs.into_iter();
    let mut out = Vec::new();
    for case in cases {
        let coarse = it.next().expect("coarse run")?;
        let fine = it.next().expect("fine run")?;
        out.push(CaseOutcome {
            perturbation: case.clone(),
            refinement_ok: refinement_passes(&coarse, &fine, cfg),
            shift_bound_ok: shift_bound_passes(&coarse, cfg) && shift_bound_passes(&fine, cfg),
            coarse,
            fine,
        });
    }
    Ok(out)
}

/// The twenty standard cases on the configured and refined grids.
pub fn run_contraction_cases(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    let f = cfg.flux_model()?;
    let adm = f.require_admissible()?;
    let p = setup_profile(&f, cfg)?;
    let cases = standard_cases();
    let out = contraction_suite(&f, &p, cfg, &cases)?;
    let mut run = RunArtifacts::new("contraction_cases");
    let mut table = Table::new(
        "contraction_cases",
        &["case", "coarse_max_increment", "fine_max_increment", "coarse_violations", "fine_violations", "sup_shift_deviation", "shift_bound"],
    );
    for (i, o) in out.iter().enumerate() {
        table.push(vec![
            i as f64,
            o.coarse.max_increment,
            o.fine.max_increment,
            o.coarse.violations as f64,
            o.fine.violations as f64,
            o.coarse.sup_shift_deviation.max(o.fine.sup_shift_deviation),
            o.coarse.shift_bound,
        ]);
    }
    let bad_refinement = out.iter().filter(|o| !o.refinement_ok).count();
    let bad_shift = out.iter().filter(|o| !o.shift_bound_ok).count();
    run.checks.push(Check::at_most(
        "non-increase within rho and refinement gain",
        bad_refinement as f64,
        0.0,
        format!("{} cases, factor {}", out.len(), cfg.refinement_factor),
    ));
    run.checks.push(Check::at_most("shift velocity bound", bad_shift as f64, 0.0, format!("slack {}", cfg.shift_bound_slack)));
    run.summary = json!({ "lambda": adm.lambda, "cases": out });
    run.tables.push(table);
    Ok(run)
}

/// Time series row `(t, L2, L1, D_x, D_y, I1, I2, I3, I4, X, Xdot)`.
fn series_row(f: &FluxModel, p: &ShockProfile, field: &Field, shift: f64, xdot: f64) -> Result<Vec<f64>> {
    let n = norms(field, Reference::shock(p));
    let d = dissipation_report(field, p, xdot, f, None)?;
    Ok(vec![field.t, n.l2, n.l1, d.d_x.unwrap_or(f64::NAN), d.d_y, d.i1, d.i2, d.i3, d.i4, shift, xdot])
}

pub const SERIES_COLUMNS: [&str; 11] = ["t", "L2", "L1", "D_x", "D_y", "I1", "I2", "I3", "I4", "X", "Xdot"];

/// The configured perturbation on the configured and refined grids.
pub fn run_contraction(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    let f = cfg.flux_model()?;
    let adm = f.require_admissible()?;
    let p = setup_profile(&f, cfg)?;
    let spec = parse_perturbation(&cfg.perturbation)?;
    let (coarse, ev, u0) = shifted_run(&f, &p, cfg, &spec, &cfg.perturbation, cfg.nx)?;
    let (fine, _, _) = shifted_run(&f, &p, cfg, &spec, &cfg.perturbation, cfg.fine_nx())?;

    let mut series = Table::new("contraction", &SERIES_COLUMNS);
    let xdot0 = crate::solver::shift_rhs(&u0, &p, &f)?;
    series.push(series_row(&f, &p, &u0, 0.0, xdot0)?);
    for s in &ev.snapshots {
        series.push(series_row(&f, &p, &s.field, s.shift, s.xdot)?);
    }

    let mut run = RunArtifacts::new("contraction");
    let zero = coarse.initial.l2 == 0.0;
    run.checks.push(Check::new(
        "distance non-increasing within rho",
        coarse.violations == 0 && fine.violations == 0,
        (coarse.violations + fine.violations) as f64,
        0.0,
        format!("rho = {} (dx^2 + dt) ||U0 - S1||^2", cfg.rho_c),
    ));
    if !zero {
        run.checks.push(Check::new(
            "largest increment shrinks under refinement",
            refinement_passes(&coarse, &fine, cfg),
            fine.max_increment,
            (coarse.max_increment / cfg.refinement_factor).max(cfg.roundoff_floor * coarse.initial.l2.powi(2)),
            format!("coarse {:.3e}, fine {:.3e}", coarse.max_increment, fine.max_increment),
        ));
    } else {
        run.checks.push(Check::at_most("zero perturbation stays zero", coarse.final_distance, 0.0, ""));
    }
    run.checks.push(Check::at_most(
        "sup |X' - sigma| within the profile bound",
        coarse.sup_shift_deviation.max(fine.sup_shift_deviation),
        coarse.shift_bound + cfg.shift_bound_slack,
        "k ||S1'|| ||U0 - S1|| + slack",
    ));
    let energy = if zero { None } else { Some(energy_identity(&f, &p, cfg, &spec, cfg.nx)?) };
    if let Some(e) = &energy {
        let ok = e.errors.windows(2).all(|w| w[1] < w[0])
            && e.orders.iter().all(|o| *o >= cfg.energy_order_min && *o <= cfg.energy_order_max);
        run.checks.push(Check::new(
            "energy identity error shrinks at first order",
            ok,
            e.orders.iter().copied().fold(f64::NAN, f64::min),
            cfg.energy_order_min,
            format!("errors {:?} for spacings {:?}", e.errors, e.dts),
        ));
    }
    run.summary = json!({ "lambda": adm.lambda, "sigma": p.sigma, "coarse": coarse, "fine": fine, "energy_identity": energy });
    run.scheme = json!({
        "scheme": ev.scheme,
        "options": cfg.evolve_options(),
        "viscosity": ev.viscosity,
        "grid": u0.grid,
        "stats": ev.stats,
    });
    run.tables.push(series);
    Ok(run)
}

/// Forward-difference energy identity errors for each snapshot spacing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyIdentity {
    pub dts: Vec<f64>,
    /// `max_k |(N(t_k + dt) - N(t_k)) / dt + D(t_k)|` over common base times.
    pub errors: Vec<f64>,
    pub orders: Vec<f64>,
}

/// Runs once with snapshots at the finest spacing and evaluates the
/// identity `d/dt ||V - S1||^2 = -D` by forward differences.
pub fn energy_identity(f: &FluxModel, p: &ShockProfile, cfg: &ExperimentConfig, perturbation: &PerturbationSpec, nx: usize) -> Result<EnergyIdentity> {
    let mut dts = cfg.energy_dts.clone();
    dts.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let finest = *dts.last().expect("at least one spacing");
    let coarsest = dts[0];
    let n = (cfg.t_end / finest).round() as usize;
    let times: Vec<f64> = (1..=n).map(|k| k as f64 * finest).collect();
    let grid = UniformGrid::symmetric(cfg.half_width, nx);
    let u0 = initial_field(perturbation, Base::Profile { profile: p, scale: 1.0 }, None, grid)?;
    let opts = cfg.evolve_options().with_snapshots(times);
    let ev = evolve_shifted(f, p, &u0, cfg.t_end, &opts)?;

    let mut fields = vec![(u0.clone(), crate::solver::shift_rhs(&u0, p, f)?)];
    fields.extend(ev.snapshots.iter().map(|s| (s.field.clone(), s.xdot)));
    let dist2: Vec<f64> = fields.iter().map(|(v, _)| norms(v, Reference::shock(p)).l2.powi(2)).collect();
    let stride0 = (coarsest / finest).round() as usize;
    let bases: Vec<usize> = (0..fields.len()).step_by(stride0).filter(|&k| k + stride0 < fields.len()).collect();
    let ds: Vec<f64> = bases
        .iter()
        .map(|&k| dissipation_report(&fields[k].0, p, fields[k].1, f, None).map(|r| r.d_x.unwrap_or(r.d_y)))
        .collect::<Result<_>>()?;
    let errors: Vec<f64> = dts
        .iter()
        .map(|dt| {
            let s = (dt / finest).round() as usize;
            bases
                .iter()
                .zip(&ds)
                .map(|(&k, d)| ((dist2[k + s] - dist2[k]) / dt + d).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    let orders = errors
        .windows(2)
        .zip(dts.windows(2))
        .map(|(e, d)| (e[0] / e[1]).ln() / (d[0] / d[1]).ln())
        .collect();
    Ok(EnergyIdentity { dts, errors, orders })
}
