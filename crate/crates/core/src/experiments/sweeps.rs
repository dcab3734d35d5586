//! Randomized property sweeps: x- against y-form dissipation, the
//! `lambda W` lower bound, the weighted Poincare inequality and L1
//! contraction between solution pairs.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::entropy::{change_of_variable_mapped, dissipation_x, dissipation_y, feedback_xdot, poincare_check, SampledFunction};
use crate::error::Result;
use crate::experiments::config::{ExperimentConfig, PerturbationSpec};
use crate::experiments::output::{Check, RunArtifacts, Table};
use crate::experiments::perturb::{initial_field, random_perturbation, Base};
use crate::flux::FluxModel;
use crate::grid::{self, UniformGrid};
use crate::profile::ShockProfile;
use crate::solver::{evolve, Field};
use crate::sweep;

/// Largest random perturbation amplitude in the dissipation sweeps.
pub const SWEEP_AMPLITUDE: f64 = 0.3;

/// Reproducible per-case generators: case `i` of seed `s` never depends
/// on how many other cases run.
pub fn case_rng(seed: u64, case: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(case as u64);
    rng
}

pub fn random_cases(seed: u64, count: usize) -> Vec<PerturbationSpec> {
    (0..count).map(|i| random_perturbation(&mut case_rng(seed, i), SWEEP_AMPLITUDE)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DissipationCase {
    pub d_x: f64,
    pub d_y: f64,
    pub lambda_bound: f64,
    pub poincare_bound: f64,
    pub i4: f64,
    pub i4_bound: f64,
    pub i12: f64,
    pub i12_bound: f64,
}

/// Both forms of `D` for `V = S1 + perturbation` with the feedback shift.
pub fn dissipation_case(f: &FluxModel, p: &ShockProfile, grid: UniformGrid, spec: &PerturbationSpec) -> Result<DissipationCase> {
    let v = initial_field(spec, Base::Profile { profile: p, scale: 1.0 }, None, grid)?;
    let wp = change_of_variable_mapped(&v, p)?;
    let xdot = feedback_xdot(&wp, f, p.sigma);
    let r = dissipation_y(&wp, xdot, f, p.sigma)?;
    let d_x = dissipation_x(&v, p, xdot, f)?;
    Ok(DissipationCase {
        d_x,
        d_y: r.d_y,
        lambda_bound: r.lambda_lower_bound,
        poincare_bound: r.poincare_lower_bound,
        i4: r.i4,
        i4_bound: f.g2_sup * r.weighted_gradient,
        i12: r.i1 + r.i2,
        i12_bound: -(2.0 * f.a + f.g2_sup) * r.mean_deviation,
    })
}

pub fn dissipation_sweep(f: &FluxModel, p: &ShockProfile, cfg: &ExperimentConfig, nx: usize) -> Result<Vec<DissipationCase>> {
    let grid = UniformGrid::symmetric(cfg.half_width, nx);
    let cases = random_cases(cfg.seed, cfg.cases);
    sweep::map(&cases, |c| dissipation_case(f, p, grid, c)).into_iter().collect()
}

/// `int (v - vbar)^2 <= 5/6 int (hi - x)(x - lo) |v'|^2` for random
/// trigonometric polynomials on random intervals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoincareSuite {
    pub cases: usize,
    pub violations: usize,
    pub max_ratio: f64,
    pub fixed_lhs: f64,
    pub fixed_rhs: f64,
    pub constant_ratio: f64,
}

fn random_trig(rng: &mut impl Rng, n: usize) -> SampledFunction {
    let lo = rng.gen_range(-2.0..1.0);
    let len = rng.gen_range(0.1..3.0);
    let g = UniformGrid::new(lo, lo + len, n);
    let terms = rng.gen_range(1..=6);
    let coeffs: Vec<(f64, f64, f64)> = (1..=terms)
        .map(|k| (k as f64, rng.gen_range(-1.0..1.0) / k as f64, rng.gen_range(-1.0..1.0) / k as f64))
        .collect();
    let c0 = rng.gen_range(-1.0..1.0);
    SampledFunction::with_derivative(g, |x| {
        let s = PI * (x - lo) / len;
        let mut v = c0;
        let mut d = 0.0;
        for (k, a, b) in &coeffs {
            let (sn, cs) = (k * s).sin_cos();
            v += a * cs + b * sn;
            d += (-a * sn + b * cs) * k * PI / len;
        }
        (v, d)
    })
}

pub fn poincare_suite(seed: u64, count: usize) -> PoincareSuite {
    let ids: Vec<usize> = (0..count).collect();
    let checks = sweep::map(&ids, |&i| poincare_check(&random_trig(&mut case_rng(seed, i), 2001)));
    let violations = checks.iter().filter(|c| !c.holds()).count();
    let max_ratio = checks.iter().map(|c| c.ratio()).fold(0.0, f64::max);
    let fixed = poincare_check(&SampledFunction::with_derivative(UniformGrid::new(-1.0, 1.0, 20001), |x| (x, 1.0)));
    let constant = poincare_check(&SampledFunction::with_derivative(UniformGrid::new(-1.0, 1.0, 101), |_| (2.0, 0.0)));
    PoincareSuite {
        cases: count,
        violations,
        max_ratio,
        fixed_lhs: fixed.lhs,
        fixed_rhs: fixed.rhs,
        constant_ratio: constant.ratio(),
    }
}

pub fn run_poincare_suite(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    let s = poincare_suite(cfg.seed, cfg.cases);
    let mut run = RunArtifacts::new("poincare");
    run.checks.push(Check::at_most("no violations", s.violations as f64, 0.0, format!("{} cases", s.cases)));
    let fixed_err = (s.fixed_lhs - 2.0 / 3.0).abs().max((s.fixed_rhs - 10.0 / 9.0).abs());
    run.checks.push(Check::at_most("v = x on [-1, 1] gives (2/3, 10/9)", fixed_err, cfg.poincare_fixed_tol, ""));
    run.checks.push(Check::at_most("constant function ratio", s.constant_ratio, 0.0, ""));
    run.summary = serde_json::to_value(&s).unwrap_or_default();
    Ok(run)
}

/// `||u - v||_1` along a pair of lab-frame runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct L1Pair {
    pub initial: f64,
    /// Largest increase between consecutive snapshots, relative to `initial`.
    pub max_increase: f64,
}

fn l1_distance(a: &Field, b: &Field) -> f64 {
    let d: Vec<f64> = a.u.iter().zip(&b.u).map(|(x, y)| (x - y).abs()).collect();
    grid::trapezoid(&d, a.dx())
}

pub fn l1_pair(f: &FluxModel, p: &ShockProfile, cfg: &ExperimentConfig, pair: usize, nx: usize) -> Result<L1Pair> {
    let grid = UniformGrid::symmetric(cfg.half_width, nx);
    let base = Base::Profile { profile: p, scale: 1.0 };
    let mut rng = case_rng(cfg.seed ^ 0x5eed, pair);
    let u0 = initial_field(&random_perturbation(&mut rng, SWEEP_AMPLITUDE), base, None, grid)?;
    let v0 = initial_field(&random_perturbation(&mut rng, SWEEP_AMPLITUDE), base, None, grid)?;
    let mut opts = cfg.evolve_options().with_snapshots(cfg.snapshot_times());
    // the unshifted shock drifts with its speed, so leak is measured elsewhere
    opts.leak = None;
    let eu = evolve(f, &u0, 1.0, cfg.t_end, &opts)?;
    let ev = evolve(f, &v0, 1.0, cfg.t_end, &opts)?;
    let initial = l1_distance(&u0, &v0);
    let mut series = vec![initial];
    series.extend(eu.snapshots.iter().zip(&ev.snapshots).map(|(a, b)| l1_distance(&a.field, &b.field)));
    let max_increase = series.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max) / initial;
    Ok(L1Pair { initial, max_increase })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct L1Study {
    pub coarse: Vec<L1Pair>,
    pub fine: Vec<L1Pair>,
    pub coarse_slack: f64,
    pub fine_slack: f64,
}

pub fn l1_study(f: &FluxModel, p: &ShockProfile, cfg: &ExperimentConfig) -> Result<L1Study> {
    let jobs: Vec<(usize, usize)> = (0..cfg.pairs).flat_map(|i| [(i, cfg.nx), (i, cfg.fine_nx())]).collect();
    let runs: Vec<L1Pair> = sweep::map(&jobs, |&(i, nx)| l1_pair(f, p, cfg, i, nx)).into_iter().collect::<Result<_>>()?;
    let (coarse, fine): (Vec<_>, Vec<_>) = runs.into_iter().enumerate().partition(|(k, _)| k % 2 == 0);
    let coarse: Vec<L1Pair> = coarse.into_iter().map(|x| x.1).collect();
    let fine: Vec<L1Pair> = fine.into_iter().map(|x| x.1).collect();
    let slack = |v: &[L1Pair]| v.iter().map(|p| p.max_increase).fold(0.0, f64::max);
    Ok(L1Study { coarse_slack: slack(&coarse), fine_slack: slack(&fine), coarse, fine })
}

/// Non-increase up to `rho_c (dx^2 + dt)` relative slack, shrinking
/// under refinement (or already at round-off).
pub fn l1_passes(s: &L1Study, cfg: &ExperimentConfig) -> bool {
    let dx = 2.0 * cfg.half_width / (cfg.nx - 1) as f64;
    let slack = cfg.rho_c * (dx * dx + cfg.snap_every);
    s.coarse_slack <= slack && s.fine_slack <= (s.coarse_slack / 2.0).max(cfg.roundoff_floor)
}

/// The dissipation sweeps and L1 study as one report.
pub fn run_dissipation_sweeps(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    let f = cfg.flux_model()?;
    let p = crate::experiments::setup_profile(&f, cfg)?;
    let cases = dissipation_sweep(&f, &p, cfg, cfg.nx)?;
    let mut table = Table::new("dissipation_cases", &["D_x", "D_y", "lambda_W", "lambda_W_over_6", "I4", "I4_bound", "I1_plus_I2", "I12_bound"]);
    for c in &cases {
        table.push(vec![c.d_x, c.d_y, c.lambda_bound, c.poincare_bound, c.i4, c.i4_bound, c.i12, c.i12_bound]);
    }
    let form_err = cases.iter().map(|c| (c.d_x - c.d_y).abs() / (1.0 + c.d_x.abs())).fold(0.0, f64::max);
    let below = cases.iter().filter(|c| c.d_y < c.lambda_bound - cfg.lower_bound_slack).count();
    let below6 = cases.iter().filter(|c| c.d_y < c.poincare_bound - cfg.lower_bound_slack).count();
    let mut run = RunArtifacts::new("dissipation");
    run.checks.push(Check::at_most("|D_x - D_y| / (1 + |D|)", form_err, cfg.form_tol, format!("{} cases", cases.len())));
    let adm = f.contraction_admissible();
    if adm.admissible {
        run.checks.push(Check::at_most("D_y >= lambda W - slack", below as f64, 0.0, format!("lambda = {}", adm.lambda)));
    }
    run.summary = json!({
        "cases": cases.len(),
        "lambda": adm.lambda,
        "max_form_error": form_err,
        "below_lambda_w": below,
        "below_lambda_w_over_6": below6,
    });
    run.tables.push(table);
    Ok(run)
}

pub fn run_l1(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    let f = cfg.flux_model()?;
    let p = crate::experiments::setup_profile(&f, cfg)?;
    let s = l1_study(&f, &p, cfg)?;
    let dx = 2.0 * cfg.half_width / (cfg.nx - 1) as f64;
    let mut run = RunArtifacts::new("l1");
    run.checks.push(Check::new(
        "L1 distance non-increasing up to a slack that shrinks",
        l1_passes(&s, cfg),
        s.fine_slack,
        (s.coarse_slack / 2.0).max(cfg.roundoff_floor),
        format!("fine slack against half the coarse one or the round-off floor; coarse slack {:.3e} within {:.3e}", s.coarse_slack, cfg.rho_c * (dx * dx + cfg.snap_every)),
    ));
    let mut table = Table::new("l1_pairs", &["pair", "initial", "coarse_max_increase", "fine_max_increase"]);
    for (i, (c, f)) in s.coarse.iter().zip(&s.fine).enumerate() {
        table.push(vec![i as f64, c.initial, c.max_increase, f.max_increase]);
    }
    run.tables.push(table);
    run.summary = serde_json::to_value(&s).unwrap_or_default();
    Ok(run)
}
