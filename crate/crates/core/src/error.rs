use thiserror::Error;

/// Errors raised by the library. Each variant names the module that produced it.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("flux: quadratic coefficient must be positive, got {0}")]
    NonPositiveQuadratic(f64),
    #[error("flux: A''({u}) = {value} is not positive")]
    NotConvex { u: f64, value: f64 },
    #[error("flux: |g''({u})| = {value} exceeds the certified bound {bound}")]
    BoundViolated { u: f64, value: f64, bound: f64 },
    #[error("flux: argument {u} outside validity interval [{lo}, {hi}]")]
    OutOfInterval { u: f64, lo: f64, hi: f64 },
    #[error("flux: {0}")]
    FluxSpec(String),
    #[error("flux: not contraction admissible (lambda = 2a - 11 g2_sup = {lambda})")]
    Inadmissible { lambda: f64 },

    #[error("profile: endpoint states must satisfy u_minus > u_plus (got {u_minus}, {u_plus})")]
    NotCompressive { u_minus: f64, u_plus: f64 },
    #[error("profile: tails not settled at half width {half_width}; need at least {required}")]
    TailsNotSettled { half_width: f64, required: f64 },
    #[error("profile: {0}")]
    Profile(String),

    #[error("ode: step size underflow at t = {t} (h = {h})")]
    StepSizeUnderflow { t: f64, h: f64 },
    #[error("solver: non-finite value detected at t = {t}, node {node}")]
    NonFinite { t: f64, node: usize },
    #[error("solver: discrete maximum principle violated at t = {t}: |u| = {value} > {bound}")]
    MaximumPrinciple { t: f64, value: f64, bound: f64 },
    #[error("solver: boundary leak {leak:.3e} exceeds {limit:.3e} at t = {t}")]
    BoundaryLeak { t: f64, leak: f64, limit: f64 },
    #[error("solver: incompatible grids: {0}")]
    IncompatibleGrid(String),
    #[error("solver: viscosity {eps} is below grid resolvability {limit} for the central scheme")]
    Unresolved { eps: f64, limit: f64 },

    #[error("counterexample: {0}")]
    Counterexample(String),

    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
