//! Experiment drivers behind the command-line subcommands.

pub mod config;
pub mod contraction;
pub mod counter;
pub mod decay;
pub mod fit;
pub mod inviscid;
pub mod output;
pub mod perturb;
pub mod single;
pub mod sweeps;

use crate::error::Result;
use crate::flux::FluxModel;
use crate::profile::{compute_profile, ShockProfile};

pub use config::ExperimentConfig;
pub use output::{emit_results, Check, RunArtifacts, Table};

/// Runs the experiment named by a command-line subcommand.
pub fn run(kind: &str, cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    match kind {
        "profile" => single::run_profile(cfg),
        "evolve" => single::run_evolve(cfg),
        "contraction" => match cfg.mode.as_str() {
            "cases" => contraction::run_contraction_cases(cfg),
            "dissipation" => sweeps::run_dissipation_sweeps(cfg),
            "l1" => sweeps::run_l1(cfg),
            _ => contraction::run_contraction(cfg),
        },
        "decay" => decay::run_decay(cfg),
        "inviscid" => inviscid::run_inviscid(cfg),
        "counterexample" => counter::run_counterexample(cfg),
        "poincare" => sweeps::run_poincare_suite(cfg),
        other => Err(crate::error::Error::Config(format!("unknown experiment {other:?}"))),
    }
}

/// The profile for the configured endpoints: automatic unless both the
/// half width and node count are given.
pub fn setup_profile(f: &FluxModel, cfg: &ExperimentConfig) -> Result<ShockProfile> {
    match (cfg.profile_half_width, cfg.profile_n) {
        (Some(h), Some(n)) => compute_profile(f, cfg.u_minus, cfg.u_plus, h, n),
        (Some(h), None) => {
            let (cm, cp) = crate::profile::tail_rates(f, cfg.u_minus, cfg.u_plus)?;
            let dx = ShockProfile::default_spacing(cm, cp);
            compute_profile(f, cfg.u_minus, cfg.u_plus, h, 2 * (h / dx).ceil() as usize + 1)
        }
        _ => ShockProfile::auto(f, cfg.u_minus, cfg.u_plus),
    }
}
