//! The non-contraction counterexample as an experiment.

use serde_json::json;

use crate::counterexample::{
    adversarial_shift_test, build_counterexample, counterexample_flux, exact_integrals, initial_dissipation, mollified_integrals,
    mollified_psi, quadrature_integrals, shift_family, CornerIntegrals, Counterexample, CounterexampleOptions, CounterexampleSpec,
};
use crate::entropy::{dissipation_y, feedback_xdot, PerturbationY};
use crate::error::Result;
use crate::experiments::config::ExperimentConfig;
use crate::experiments::output::{Check, RunArtifacts, Table};

/// Margin error of the mollified integrals for each width, widest first.
pub fn width_study(a: f64, alpha: f64, widths: &[f64]) -> Result<Vec<(f64, CornerIntegrals)>> {
    widths
        .iter()
        .map(|&w| {
            let f = counterexample_flux(a, alpha, w)?;
            Ok((w, mollified_integrals(&f, &mollified_psi(a, alpha, w)?)))
        })
        .collect()
}

fn max_abs_diff(x: &CornerIntegrals, y: &CornerIntegrals) -> f64 {
    (x.i_second - y.i_second).abs().max((x.i_weight - y.i_weight).abs()).max((x.margin - y.margin).abs())
}

/// `D(0)` for the even direction `|phi|`, with the feedback shift and with `X' = sigma`.
fn even_control(ce: &Counterexample) -> Result<(f64, f64)> {
    let w = ce.phi.values.iter().map(|p| ce.spec.eps0 * p.abs()).collect();
    let wp = PerturbationY::new(ce.spec.a, -ce.spec.a, w)?;
    let xdot = feedback_xdot(&wp, &ce.flux, ce.profile.sigma);
    let fb = dissipation_y(&wp, xdot, &ce.flux, ce.profile.sigma)?.d_y;
    let still = dissipation_y(&wp, ce.profile.sigma, &ce.flux, ce.profile.sigma)?.d_y;
    Ok((fb, still))
}

pub fn run_counterexample(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    let (a, alpha) = (cfg.a, cfg.alpha);
    let spec = CounterexampleSpec::new(a, alpha, cfg.width, cfg.eps0)?;
    let exact = exact_integrals(a, alpha)?;
    let quad = quadrature_integrals(a, alpha)?;
    let ce = build_counterexample(spec, CounterexampleOptions::default())?;
    let mut run = RunArtifacts::new("counterexample");

    run.checks.push(Check::at_most("closed-form integrals", max_abs_diff(&exact, &quad), 1e-12, "against piecewise quadrature"));

    let widths = [0.99 * alpha / 4.0, alpha / 8.0, alpha / 16.0];
    let study = width_study(a, alpha, &widths)?;
    let errors: Vec<f64> = study.iter().map(|(_, m)| max_abs_diff(m, &exact)).collect();
    let shrinking = errors.windows(2).all(|e| e[1] < e[0]);
    run.checks.push(Check::new(
        "mollified integrals converge as the width shrinks",
        shrinking,
        errors[errors.len() - 1],
        errors[0],
        format!("errors {errors:?} at widths {widths:?}"),
    ));

    let d: Vec<f64> = [-10.0, 0.0, 10.0].iter().map(|&v| ce.dissipation_with(v).map(|r| r.d_y)).collect::<Result<_>>()?;
    let spread = d.iter().map(|x| (x - ce.d0).abs()).fold(0.0, f64::max) / ce.d0.abs();
    run.checks.push(Check::new("D(0) < -eps0^2 margin / 2", ce.d0 < ce.threshold, ce.d0, ce.threshold, ""));
    run.checks.push(Check::at_most("D(0) invariant under X'(0) in {-10, 0, 10}", spread, cfg.invariance_tol, "relative"));
    let from_field = initial_dissipation(&ce.flux, &ce.u0, &ce.profile, 0.0, ce.phi.grid.n)?.d_y;

    let family = shift_family(cfg.lipschitz_bound, cfg.n_shifts, cfg.n_random_shifts, 4, cfg.tmax, cfg.seed);
    let adv = adversarial_shift_test(&ce.flux, &ce.u0, &ce.profile, &family, cfg.tmax, &cfg.evolve_options())?;
    let exceeding = adv.outcomes.iter().filter(|o| o.first_exceedance.is_some()).count();
    run.checks.push(Check::new(
        "every shift in the family lets the distance grow",
        adv.all_exceed,
        exceeding as f64,
        adv.outcomes.len() as f64,
        format!("|X'| <= {}, t_max = {}", cfg.lipschitz_bound, cfg.tmax),
    ));
    let (even_feedback, even_still) = even_control(&ce)?;

    let mut flux_table = Table::new("counterexample_flux", &["y", "A", "A2", "phi", "phi_prime"]);
    let g = ce.phi.grid;
    let dphi = ce.phi.derivative();
    let stride = (g.n / 4000).max(1);
    for i in (0..g.n).step_by(stride) {
        let y = g.point(i);
        let (av, _, a2) = ce.flux.eval_unchecked(y);
        flux_table.push(vec![y, av, a2, ce.phi.values[i], dphi[i]]);
    }
    let mut data_table = Table::new("counterexample_data", &["x", "S1", "U0"]);
    for (i, x) in ce.u0.grid.points().into_iter().enumerate() {
        data_table.push(vec![x, ce.profile.value(x), ce.u0.u[i]]);
    }
    let mut shifts = Table::new("shift_family", &["lipschitz", "first_exceedance", "max_norm_ratio"]);
    for o in &adv.outcomes {
        shifts.push(vec![o.lipschitz, o.first_exceedance.unwrap_or(f64::NAN), o.max_norm_ratio]);
    }
    run.tables.extend([flux_table, data_table, shifts]);
    run.summary = json!({
        "exact": exact,
        "quadrature": quad,
        "mollified": ce.mollified,
        "width_study": study.iter().map(|(w, m)| json!({ "width": w, "integrals": m })).collect::<Vec<_>>(),
        "d0": ce.d0,
        "d0_from_field": from_field,
        "threshold": ce.threshold,
        "d0_by_xdot": { "-10": d[0], "0": d[1], "10": d[2] },
        "even_control": { "feedback_shift": even_feedback, "xdot_sigma": even_still },
        "adversarial": {
            "initial_norm": adv.initial_norm,
            "family_min_max_ratio": adv.family_min_max_ratio,
            "t_star_by_lipschitz": adv.t_star_by_lipschitz,
        },
    });
    run.scheme = json!({ "options": cfg.evolve_options(), "grid": ce.u0.grid, "profile_half_width": ce.profile.half_width() });
    Ok(run)
}
