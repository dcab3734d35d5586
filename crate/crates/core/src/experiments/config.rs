//! Experiment configuration: a flat key-value TOML file plus command-line
//! overrides. Every threshold used by a check lives here so that it is
//! echoed in the run manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::counterexample::counterexample_flux;
use crate::error::{Error, Result};
use crate::flux::{CubicSpline, FluxModel, Perturbation};
use crate::solver::{EvolveOptions, LeakMonitor, Scheme, Stepping};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Option<String>,
    /// For contraction runs: `single`, `cases`, `dissipation` or `l1`.
    pub mode: String,
    pub flux: String,
    pub u_minus: f64,
    pub u_plus: f64,
    #[serde(rename = "L")]
    pub half_width: f64,
    pub nx: usize,
    pub t_end: f64,
    pub viscosity: f64,
    pub shifted: bool,
    pub snap_every: f64,
    pub perturbation: String,
    pub eps: Vec<f64>,
    pub out_dir: PathBuf,
    pub seed: u64,

    pub scheme: Scheme,
    /// `explicit` or `imex`.
    pub stepping: String,
    pub rtol: f64,
    pub atol: f64,
    /// Fixed step for `imex`; the advective cap when absent.
    pub imex_dt: Option<f64>,
    /// Boundary-strip norm allowed, relative to the initial perturbation.
    pub leak_rel_tol: f64,

    /// Profile half width and node count; automatic when absent.
    pub profile_half_width: Option<f64>,
    pub profile_n: Option<usize>,
    /// Max error against the closed-form profile of a pure quadratic flux.
    pub profile_tol: f64,
    /// Relative tolerance between fitted and linearized tail rates.
    pub tail_rate_tol: f64,

    /// Random cases for property sweeps.
    pub cases: usize,
    /// Refined grid for two-level studies, `2 nx - 1` when absent.
    pub nx_fine: Option<usize>,

    // contraction
    /// `rho = rho_c (dx^2 + dt) ||U0 - S1||^2` per step.
    pub rho_c: f64,
    /// Required reduction of the largest increment under refinement.
    pub refinement_factor: f64,
    /// Increments below this multiple of `||U0 - S1||^2` count as round-off.
    pub roundoff_floor: f64,
    pub shift_bound_slack: f64,

    // dissipation
    pub energy_dts: Vec<f64>,
    pub energy_order_min: f64,
    pub energy_order_max: f64,
    pub form_tol: f64,
    pub lower_bound_slack: f64,

    // decay
    pub decay_window: f64,
    pub decay_slope_min: f64,
    pub decay_slope_max: f64,
    pub plateau_fraction: f64,

    // inviscid
    pub inviscid_times: Vec<f64>,
    pub inviscid_slope: f64,
    pub inviscid_slope_tol: f64,
    /// Grid nodes per unit of `eps` in the direct runs.
    pub cells_per_eps: f64,
    /// Amplitude of the scaled perturbation `delta psi(x / eps)`.
    pub scaled_amplitude: f64,
    /// Relative tolerance of the profile scaling identity.
    pub identity_tol: f64,

    // poincare
    pub poincare_fixed_tol: f64,

    // l1 contraction
    pub pairs: usize,

    // counterexample
    pub a: f64,
    pub alpha: f64,
    pub width: f64,
    pub eps0: f64,
    pub lipschitz_bound: f64,
    pub tmax: f64,
    pub n_shifts: usize,
    pub n_random_shifts: usize,
    pub invariance_tol: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: None,
            mode: "single".into(),
            flux: "quadratic:a=1".into(),
            u_minus: 1.0,
            u_plus: -1.0,
            half_width: 16.0,
            nx: 641,
            t_end: 4.0,
            viscosity: 1.0,
            shifted: true,
            snap_every: 0.1,
            perturbation: "gaussian_bump:amp=0.3,center=0,width=1".into(),
            eps: vec![0.1, 0.05, 0.025],
            out_dir: PathBuf::from("out"),
            seed: 42,
            scheme: Scheme::Central,
            stepping: "explicit".into(),
            rtol: 1e-8,
            atol: 1e-10,
            imex_dt: None,
            leak_rel_tol: 1e-8,
            profile_half_width: None,
            profile_n: None,
            profile_tol: 1e-6,
            tail_rate_tol: 0.05,
            cases: 1000,
            nx_fine: None,
            rho_c: 1.0,
            refinement_factor: 3.0,
            roundoff_floor: 1e-13,
            shift_bound_slack: 1e-6,
            energy_dts: vec![0.02, 0.01, 0.005],
            energy_order_min: 0.8,
            energy_order_max: 1.2,
            form_tol: 1e-4,
            lower_bound_slack: 1e-6,
            decay_window: 0.2,
            decay_slope_min: -0.35,
            decay_slope_max: -0.15,
            plateau_fraction: 0.8,
            inviscid_times: vec![0.5, 1.0],
            inviscid_slope: 0.5,
            inviscid_slope_tol: 0.15,
            cells_per_eps: 10.0,
            scaled_amplitude: 0.2,
            identity_tol: 1e-8,
            poincare_fixed_tol: 1e-8,
            pairs: 10,
            a: 1.0,
            alpha: 0.1,
            width: 0.0125,
            eps0: 1e-2,
            lipschitz_bound: 5.0,
            tmax: 5e-3,
            n_shifts: 21,
            n_random_shifts: 4,
            invariance_tol: 1e-8,
        }
    }
}

impl ExperimentConfig {
    /// Parses a config document, applies `overrides` (already TOML values),
    /// and validates the result.
    pub fn from_toml_str(text: &str, overrides: &BTreeMap<String, toml::Value>) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for (k, v) in overrides {
            table.insert(k.clone(), v.clone());
        }
        let cfg: Self = toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &BTreeMap<String, toml::Value>) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text, overrides)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.nx < 64 {
            return bad(format!("nx must be at least 64, got {}", self.nx));
        }
        if !(self.u_minus > self.u_plus) {
            return bad(format!("need u_minus > u_plus, got {} and {}", self.u_minus, self.u_plus));
        }
        if !(self.half_width > 0.0 && self.t_end > 0.0 && self.viscosity > 0.0 && self.snap_every > 0.0) {
            return bad("L, t_end, viscosity and snap_every must be positive".into());
        }
        if self.eps.iter().any(|e| !(*e > 0.0)) || self.eps.windows(2).any(|w| w[1] >= w[0]) {
            return bad(format!("eps values must be positive and decreasing, got {:?}", self.eps));
        }
        if !matches!(self.mode.as_str(), "single" | "cases" | "dissipation" | "l1") {
            return bad(format!("mode must be single, cases, dissipation or l1, got {}", self.mode));
        }
        if !matches!(self.stepping.as_str(), "explicit" | "imex") {
            return bad(format!("stepping must be explicit or imex, got {}", self.stepping));
        }
        let spec = FluxSpec::parse(&self.flux)?;
        if let Some(file) = spec.params.get("file") {
            if !Path::new(file).exists() {
                return bad(format!("tabulated flux file {file} does not exist"));
            }
        }
        parse_perturbation(&self.perturbation)?;
        Ok(())
    }

    pub fn flux_model(&self) -> Result<FluxModel> {
        FluxSpec::parse(&self.flux)?.build(self.u_minus, self.u_plus)
    }

    pub fn evolve_options(&self) -> EvolveOptions {
        let stepping = match self.stepping.as_str() {
            "imex" => Stepping::Imex { dt: self.imex_dt },
            _ => Stepping::Explicit { rtol: self.rtol, atol: self.atol },
        };
        let leak = LeakMonitor { rel_tol: self.leak_rel_tol, ..LeakMonitor::default() };
        EvolveOptions { scheme: self.scheme, stepping, leak: Some(leak), ..EvolveOptions::default() }
    }

    pub fn fine_nx(&self) -> usize {
        self.nx_fine.unwrap_or(2 * self.nx - 1)
    }

    /// Snapshot times `snap_every, 2 snap_every, ...` up to `t_end`.
    pub fn snapshot_times(&self) -> Vec<f64> {
        let n = (self.t_end / self.snap_every + 1e-9).floor() as usize;
        // round-off can push n * snap_every just past t_end, where the solver never arrives
        (1..=n).map(|k| (k as f64 * self.snap_every).min(self.t_end)).collect()
    }
}

/// `kind:key=value,key=value`.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyValueSpec {
    pub kind: String,
    pub params: BTreeMap<String, String>,
}

impl KeyValueSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        let (kind, rest) = text.split_once(':').unwrap_or((text, ""));
        let mut params = BTreeMap::new();
        for item in rest.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("expected key=value in {text:?}, got {item:?}")))?;
            params.insert(k.trim().to_string(), v.trim().to_string());
        }
        if kind.is_empty() {
            return Err(Error::Config(format!("missing kind in {text:?}")));
        }
        Ok(Self { kind: kind.to_string(), params })
    }

    pub fn num(&self, key: &str, default: Option<f64>) -> Result<f64> {
        match self.params.get(key) {
            Some(v) => v.parse().map_err(|_| Error::Config(format!("{}: {key}={v} is not a number", self.kind))),
            None => default.ok_or_else(|| Error::Config(format!("{}: missing parameter {key}", self.kind))),
        }
    }

    fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        match self.params.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(Error::Config(format!("{}: unknown parameter {k}", self.kind))),
            None => Ok(()),
        }
    }
}

pub type FluxSpec = KeyValueSpec;

impl FluxSpec {
    /// Builds the flux; the validity interval defaults to `[u+ - 1, u- + 1]`.
    pub fn build(&self, u_minus: f64, u_plus: f64) -> Result<FluxModel> {
        let interval = FluxModel::interval_for_shock(u_minus, u_plus);
        match self.kind.as_str() {
            "quadratic" => {
                self.check_keys(&["a"])?;
                FluxModel::quadratic(self.num("a", Some(1.0))?, interval)
            }
            "quadratic_plus_sine" => {
                self.check_keys(&["a", "amp", "freq"])?;
                let (a, amp, freq) = (self.num("a", Some(1.0))?, self.num("amp", None)?, self.num("freq", Some(1.0))?);
                FluxModel::perturbed_quadratic(
                    a,
                    Perturbation::Sine { amplitude: amp, frequency: freq },
                    amp.abs() * freq * freq,
                    interval,
                )
            }
            "tabulated" => {
                self.check_keys(&["a", "file", "g2_sup"])?;
                let file = self.params.get("file").ok_or_else(|| Error::Config("tabulated: missing file".into()))?;
                let (u, g) = read_table(Path::new(file))?;
                let spline = CubicSpline::new(u, g)?;
                let (lo, hi) = spline.domain();
                let interval = (interval.0.max(lo), interval.1.min(hi));
                FluxModel::perturbed_quadratic(
                    self.num("a", Some(1.0))?,
                    Perturbation::Tabulated(Arc::new(spline)),
                    self.num("g2_sup", None)?,
                    interval,
                )
            }
            "counterexample" => {
                self.check_keys(&["a", "alpha", "width"])?;
                counterexample_flux(self.num("a", Some(1.0))?, self.num("alpha", Some(0.1))?, self.num("width", Some(0.0125))?)
            }
            other => Err(Error::Config(format!("unknown flux kind {other:?}"))),
        }
    }
}

/// Two numeric columns `u, g` with a header row.
fn read_table(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let (mut u, mut g) = (Vec::new(), Vec::new());
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Config(e.to_string()))?;
        let num = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::Config(format!("{}: bad row {:?}", path.display(), rec)))
        };
        u.push(num(0)?);
        g.push(num(1)?);
    }
    Ok((u, g))
}

pub type PerturbationSpec = Vec<KeyValueSpec>;

/// Named initial-perturbation families; `+` joins several terms.
pub fn parse_perturbation(text: &str) -> Result<PerturbationSpec> {
    let terms: Vec<KeyValueSpec> = text.split('+').map(KeyValueSpec::parse).collect::<Result<_>>()?;
    for t in &terms {
        let allowed: &[&str] = match t.kind.as_str() {
            "none" => &[],
            "gaussian_bump" | "derivative_mode" => &["amp", "center", "width", "order"],
            "translate" => &["shift"],
            "counterexample_phi" => &["eps0"],
            "scaled_bump" => &["amp", "center", "width"],
            other => return Err(Error::Config(format!("unknown perturbation family {other:?}"))),
        };
        t.check_keys(allowed)?;
    }
    Ok(terms)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> Result<ExperimentConfig> {
        ExperimentConfig::from_toml_str(text, &BTreeMap::new())
    }

    #[test]
    fn last_snapshot_lands_on_t_end() {
        let c = cfg("t_end = 0.3\nsnap_every = 0.1").unwrap();
        assert_eq!(c.snapshot_times().len(), 3);
        assert_eq!(*c.snapshot_times().last().unwrap(), 0.3);
    }

    #[test]
    fn defaults_and_overrides() {
        let c = cfg("nx = 128\nL = 8.0").unwrap();
        assert_eq!(c.nx, 128);
        assert_eq!(c.half_width, 8.0);
        let mut o = BTreeMap::new();
        o.insert("nx".to_string(), toml::Value::Integer(256));
        assert_eq!(ExperimentConfig::from_toml_str("nx = 128", &o).unwrap().nx, 256);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        assert!(cfg("nx = 10").is_err());
        assert!(cfg("eps = [0.1, 0.2]").is_err());
        assert!(cfg("bogus = 1").is_err());
        assert!(cfg("flux = \"tabulated:a=1,g2_sup=0.1,file=/nonexistent.csv\"").is_err());
        assert!(cfg("perturbation = \"wiggle:amp=1\"").is_err());
        assert!(cfg("flux = \"quadratic:b=1\"").is_ok(), "keys are checked when building");
        assert!(cfg("flux = \"quadratic:b=1\"").unwrap().flux_model().is_err());
    }

    #[test]
    fn flux_specs() {
        let f = FluxSpec::parse("quadratic_plus_sine:a=1,amp=0.05").unwrap().build(1.0, -1.0).unwrap();
        let (a, da, dda) = f.eval(0.0).unwrap();
        assert_eq!((a, da, dda), (0.0, 0.05, 2.0));
        assert_eq!(f.g2_sup, 0.05);
        let f = FluxSpec::parse("quadratic:a=0.5").unwrap().build(1.0, 0.0).unwrap();
        assert_eq!(f.value(2.0), 2.0);
        assert!(FluxSpec::parse("counterexample:a=1,alpha=0.1,width=0.0125").unwrap().build(1.0, -1.0).is_ok());
    }

    #[test]
    fn tabulated_flux_from_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.csv");
        let mut text = String::from("u,g\n");
        for k in 0..=40 {
            let u = -2.5 + 5.0 * k as f64 / 40.0;
            text.push_str(&format!("{u},{}\n", 0.01 * u * u));
        }
        std::fs::write(&path, text).unwrap();
        let spec = format!("tabulated:a=1,g2_sup=0.03,file={}", path.display());
        let f = FluxSpec::parse(&spec).unwrap().build(1.0, -1.0).unwrap();
        assert!((f.value(0.5) - 1.01 * 0.25).abs() < 1e-4);
    }
}
