use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use shocklab::experiments::{self, emit_results, ExperimentConfig};

#[derive(Parser)]
#[command(name = "shocklab", version, about = "Stability experiments for viscous shocks of scalar conservation laws")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML file of `key = value` settings; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides `out_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Any config key, as `key=value` with a TOML value. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct Flow {
    #[arg(long)]
    flux: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    ul: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    ur: Option<f64>,
    /// Half width of the domain.
    #[arg(long = "L")]
    half_width: Option<f64>,
    #[arg(long)]
    nx: Option<i64>,
    #[arg(long)]
    tend: Option<f64>,
    #[arg(long)]
    perturbation: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate the viscous shock profile.
    Profile {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        flux: Option<String>,
        #[arg(long, allow_negative_numbers = true)]
        ul: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        ur: Option<f64>,
        #[arg(long)]
        half_width: Option<f64>,
        /// Number of profile nodes.
        #[arg(long)]
        n: Option<i64>,
    },
    /// Evolve the viscous equation, optionally coupled to the shift.
    Evolve {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        flow: Flow,
        #[arg(long)]
        viscosity: Option<f64>,
        #[arg(long)]
        shifted: Option<bool>,
        #[arg(long)]
        snap_every: Option<f64>,
    },
    /// Monotonicity of the shifted distance (modes: single, cases, dissipation, l1).
    Contraction {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        flow: Flow,
        #[arg(long)]
        mode: Option<String>,
    },
    /// Long-time decay exponent of the shifted distance.
    Decay {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        flow: Flow,
    },
    /// Vanishing-viscosity rates.
    Inviscid {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        flux: Option<String>,
        /// Comma-separated decreasing viscosities.
        #[arg(long, value_delimiter = ',')]
        eps: Option<Vec<f64>>,
        #[arg(long = "L")]
        half_width: Option<f64>,
    },
    /// The non-contraction counterexample.
    Counterexample {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        a: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        width: Option<f64>,
        #[arg(long)]
        eps0: Option<f64>,
        #[arg(long)]
        lipschitz_bound: Option<f64>,
        #[arg(long)]
        tmax: Option<f64>,
    },
    /// Randomized checks of the weighted Poincare inequality.
    Poincare {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        cases: Option<i64>,
    },
}

struct Overrides(BTreeMap<String, toml::Value>);

impl Overrides {
    fn put<T: Into<toml::Value>>(&mut self, key: &str, value: Option<T>) {
        if let Some(v) = value {
            self.0.insert(key.into(), v.into());
        }
    }

    fn flow(&mut self, f: Flow) {
        self.put("flux", f.flux);
        self.put("u_minus", f.ul);
        self.put("u_plus", f.ur);
        self.put("L", f.half_width);
        self.put("nx", f.nx);
        self.put("t_end", f.tend);
        self.put("perturbation", f.perturbation);
    }

    fn common(&mut self, c: &Common) -> Result<(), String> {
        self.put("out_dir", c.out.as_ref().map(|p| p.display().to_string()));
        self.put("seed", c.seed.map(|s| s as i64));
        for kv in &c.set {
            let (k, v) = kv.split_once('=').ok_or_else(|| format!("--set expects key=value, got {kv:?}"))?;
            let value = parse_value(v.trim());
            self.0.insert(k.trim().into(), value);
        }
        Ok(())
    }
}

/// A TOML literal when it parses as one, otherwise a bare string.
fn parse_value(text: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {text}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(text.into()))
}

fn split(cmd: Command) -> (&'static str, Common, Overrides) {
    let mut o = Overrides(BTreeMap::new());
    let (kind, common) = match cmd {
        Command::Profile { common, flux, ul, ur, half_width, n } => {
            o.put("flux", flux);
            o.put("u_minus", ul);
            o.put("u_plus", ur);
            o.put("profile_half_width", half_width);
            o.put("profile_n", n);
            ("profile", common)
        }
        Command::Evolve { common, flow, viscosity, shifted, snap_every } => {
            o.flow(flow);
            o.put("viscosity", viscosity);
            o.put("shifted", shifted);
            o.put("snap_every", snap_every);
            ("evolve", common)
        }
        Command::Contraction { common, flow, mode } => {
            o.flow(flow);
            o.put("mode", mode);
            ("contraction", common)
        }
        Command::Decay { common, flow } => {
            o.flow(flow);
            ("decay", common)
        }
        Command::Inviscid { common, flux, eps, half_width } => {
            o.put("flux", flux);
            o.put("eps", eps);
            o.put("L", half_width);
            ("inviscid", common)
        }
        Command::Counterexample { common, a, alpha, width, eps0, lipschitz_bound, tmax } => {
            o.put("a", a);
            o.put("alpha", alpha);
            o.put("width", width);
            o.put("eps0", eps0);
            o.put("lipschitz_bound", lipschitz_bound);
            o.put("tmax", tmax);
            ("counterexample", common)
        }
        Command::Poincare { common, cases } => {
            o.put("cases", cases);
            ("poincare", common)
        }
    };
    (kind, common, o)
}

fn main() -> ExitCode {
    let (kind, common, mut overrides) = split(Cli::parse().command);
    if let Err(e) = overrides.common(&common) {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    overrides.0.insert("experiment".into(), kind.into());
    let loaded = match &common.config {
        Some(path) => ExperimentConfig::load(path, &overrides.0),
        None => ExperimentConfig::from_toml_str("", &overrides.0),
    };
    let cfg = match loaded {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let run = match experiments::run(kind, &cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    for c in &run.checks {
        let tag = if c.passed { "PASS" } else { "FAIL" };
        println!("{tag} {}: {:.6e} (threshold {:.6e}) {}", c.name, c.value, c.threshold, c.detail);
    }
    let out = PathBuf::from(&cfg.out_dir);
    match emit_results(&run, &cfg, &out) {
        Ok(files) => println!("wrote {} files to {}", files.len(), out.display()),
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    if run.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
