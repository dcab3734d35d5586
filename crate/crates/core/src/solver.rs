//! Method-of-lines solver for `U_t + A(U)_x = nu U_xx` on a truncated
//! interval with Dirichlet data, optionally written in a frame that moves
//! with a shift `X(t)`:
//!
//! `V_t + (A(V) - X'(t) V)_x = nu V_xx`.
//!
//! The shift is part of the integrated state, so one time stepper advances
//! both. `X'` is constant, prescribed as a function of time, or given by the
//! feedback law `X' = sigma - k/eps * int (V - S1(x/eps)) S1'(x/eps) dx`
//! with `k = (2a + g2_sup) / (2 (u_minus - u_plus))`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flux::FluxModel;
use crate::grid::{self, UniformGrid};
use crate::ode::{Dopri, StepStats};
use crate::profile::ShockProfile;

/// Solves a tridiagonal system. `sub[0]` and `sup[n - 1]` are ignored.
pub fn thomas(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    assert!(sub.len() == n && sup.len() == n && rhs.len() == n);
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = sup[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - sub[i] * c[i - 1];
        c[i] = if i + 1 < n { sup[i] / m } else { 0.0 };
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / m;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    d
}

/// A grid function `u` at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Field {
    pub grid: UniformGrid,
    pub u: Vec<f64>,
    pub t: f64,
}

impl Field {
    pub fn new(grid: UniformGrid, u: Vec<f64>) -> Result<Self> {
        if u.len() != grid.n {
            return Err(Error::IncompatibleGrid(format!(
                "{} values for a grid of {} nodes",
                u.len(),
                grid.n
            )));
        }
        Ok(Self { grid, u, t: 0.0 })
    }

    pub fn from_fn(grid: UniformGrid, f: impl Fn(f64) -> f64) -> Self {
        let u = (0..grid.n).map(|i| f(grid.point(i))).collect();
        Self { grid, u, t: 0.0 }
    }

    pub fn dx(&self) -> f64 {
        self.grid.spacing()
    }

    pub fn xs(&self) -> Vec<f64> {
        self.grid.points()
    }

    pub fn left(&self) -> f64 {
        self.u[0]
    }

    pub fn right(&self) -> f64 {
        self.u[self.grid.n - 1]
    }
}

/// Piecewise-linear transfer of a field to another grid, constant beyond
/// the old domain. Identical grids return an exact copy.
pub fn resample(field: &Field, new_grid: UniformGrid) -> Field {
    if new_grid == field.grid {
        return field.clone();
    }
    let u = (0..new_grid.n)
        .map(|i| grid::interp_linear(&field.grid, &field.u, new_grid.point(i)))
        .collect();
    Field { grid: new_grid, u, t: field.t }
}

/// `S1(x / scale)` and `S1'(x / scale)` at the nodes of `g`.
pub fn profile_on_grid(p: &ShockProfile, g: &UniformGrid, scale: f64) -> (Vec<f64>, Vec<f64>) {
    (0..g.n).map(|i| p.sample(g.point(i) / scale)).unzip()
}

/// Shift velocity of the feedback law for a field in the moving frame.
pub fn shift_rhs(v: &Field, p: &ShockProfile, f: &FluxModel) -> Result<f64> {
    let g = &v.grid;
    if !(g.lo < 0.0 && g.hi > 0.0) {
        return Err(Error::IncompatibleGrid(format!(
            "field domain [{}, {}] does not contain the shock at 0",
            g.lo, g.hi
        )));
    }
    let tol = 1e-3 * p.strength();
    if (v.left() - p.u_minus).abs() > tol || (v.right() - p.u_plus).abs() > tol {
        return Err(Error::IncompatibleGrid(format!(
            "field far-field values ({}, {}) do not match the profile ends ({}, {})",
            v.left(),
            v.right(),
            p.u_minus,
            p.u_plus
        )));
    }
    let (s1, s1p) = profile_on_grid(p, g, 1.0);
    Ok(p.sigma - f.shift_gain(p.u_minus, p.u_plus) * projection(&v.u, &s1, &s1p, g.spacing()))
}

/// `int (u - s1) s1p dx` by the trapezoid rule.
fn projection(u: &[f64], s1: &[f64], s1p: &[f64], h: f64) -> f64 {
    grid::trapezoid_map(u, h, |i, v| (v - s1[i]) * s1p[i])
}

fn distance_sq(u: &[f64], s1: &[f64], h: f64) -> f64 {
    grid::trapezoid_map(u, h, |i, v| (v - s1[i]).powi(2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Second-order central flux; fine when viscosity dominates the grid.
    Central,
    /// Rusanov flux on minmod-limited MUSCL states, for small viscosity.
    Upwind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Stepping {
    /// Adaptive Dormand-Prince 5(4) under the diffusive and advective step caps.
    Explicit { rtol: f64, atol: f64 },
    /// Fixed-step ARS(2,2,2): implicit diffusion, explicit advection and
    /// shift. `dt = None` takes the advective cap.
    Imex { dt: Option<f64> },
}

/// Aborts a run when the perturbation reaches the outer strips.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LeakMonitor {
    /// Width of each boundary strip as a fraction of the domain.
    pub strip_fraction: f64,
    /// Allowed strip norm relative to the initial perturbation norm.
    pub rel_tol: f64,
    pub abs_tol: f64,
}

impl Default for LeakMonitor {
    fn default() -> Self {
        Self { strip_fraction: 0.05, rel_tol: 1e-8, abs_tol: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvolveOptions {
    pub scheme: Scheme,
    pub stepping: Stepping,
    /// `dt <= cfl_diffusive * dx^2 / (2 nu)` for explicit stepping.
    pub cfl_diffusive: f64,
    /// `dt <= cfl_advective * dx / max|A' - X'|`.
    pub cfl_advective: f64,
    pub snapshot_times: Vec<f64>,
    /// Keep a record of every accepted step.
    pub record_steps: bool,
    pub leak: Option<LeakMonitor>,
    /// `|u|` may exceed `max |u0|` by this fraction before the run aborts.
    pub max_principle_slack: f64,
    /// Switch to the upwind scheme when the central one cannot resolve
    /// the viscous layer (instead of failing).
    pub auto_upwind: bool,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            scheme: Scheme::Central,
            stepping: Stepping::Explicit { rtol: 1e-8, atol: 1e-10 },
            cfl_diffusive: 0.4,
            cfl_advective: 0.4,
            snapshot_times: Vec::new(),
            record_steps: true,
            leak: Some(LeakMonitor::default()),
            max_principle_slack: 0.5,
            auto_upwind: true,
        }
    }
}

impl EvolveOptions {
    pub fn with_snapshots(mut self, times: Vec<f64>) -> Self {
        self.snapshot_times = times;
        self
    }
}

/// Time samples of the shift and its velocity.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ShiftTrajectory {
    pub ts: Vec<f64>,
    pub x: Vec<f64>,
    pub xdot: Vec<f64>,
}

impl ShiftTrajectory {
    fn push(&mut self, t: f64, x: f64, xdot: f64) {
        self.ts.push(t);
        self.x.push(x);
        self.xdot.push(xdot);
    }

    pub fn len(&self) -> usize {
        self.ts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ts.is_empty()
    }

    /// `sup_t |X'(t) - sigma|`.
    pub fn max_velocity_deviation(&self, sigma: f64) -> f64 {
        self.xdot.iter().map(|v| (v - sigma).abs()).fold(0.0, f64::max)
    }

    /// `sup_t |X(t) - sigma t|`.
    pub fn max_drift(&self, sigma: f64) -> f64 {
        self.ts.iter().zip(&self.x).map(|(t, x)| (x - sigma * t).abs()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepRecord {
    pub t: f64,
    pub shift: f64,
    pub xdot: f64,
    /// `||V - S1||^2`, when the run has a profile reference.
    pub dist2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot {
    pub field: Field,
    pub shift: f64,
    pub xdot: f64,
    pub dist2: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Evolution {
    pub snapshots: Vec<Snapshot>,
    pub trajectory: ShiftTrajectory,
    pub steps: Vec<StepRecord>,
    /// `(t, int (u - S0) - same at t = 0)` at each snapshot, with the
    /// step `S0` placed where the lab-frame Riemann shock sits.
    pub conservation_defect: Vec<(f64, f64)>,
    pub scheme: Scheme,
    pub viscosity: f64,
    pub final_field: Field,
    pub max_leak: f64,
    pub stats: StepStats,
}

enum Law<'a> {
    Frame(f64),
    Feedback { s1: Vec<f64>, s1p: Vec<f64>, sigma: f64, gain: f64 },
    Prescribed { s1: Vec<f64>, rate: &'a dyn Fn(f64) -> f64 },
}

impl Law<'_> {
    /// Frame velocity at time `t` for the state `u`.
    fn velocity(&self, t: f64, u: &[f64], h: f64) -> f64 {
        match self {
            Law::Frame(c) => *c,
            Law::Feedback { s1, s1p, sigma, gain } => sigma - gain * projection(u, s1, s1p, h),
            Law::Prescribed { rate, .. } => rate(t),
        }
    }

    fn reference(&self) -> Option<&[f64]> {
        match self {
            Law::Frame(_) => None,
            Law::Feedback { s1, .. } | Law::Prescribed { s1, .. } => Some(s1),
        }
    }
}

struct System<'a> {
    flux: &'a FluxModel,
    nu: f64,
    h: f64,
    n: usize,
    scheme: Scheme,
    law: Law<'a>,
}

/// Scratch space for right-hand-side evaluations.
struct Work {
    a: Vec<f64>,
    face: Vec<f64>,
    slope: Vec<f64>,
}

impl Work {
    fn new(n: usize) -> Self {
        Self { a: vec![0.0; n], face: vec![0.0; n - 1], slope: vec![0.0; n] }
    }
}

#[inline]
fn minmod(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else if a.abs() < b.abs() {
        a
    } else {
        b
    }
}

impl System<'_> {
    /// Writes `d/dt` of `[u, X]`; the viscous term is skipped when
    /// `viscous` is false (it is then handled implicitly).
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64], w: &mut Work, viscous: bool) {
        let n = self.n;
        let u = &y[..n];
        let c = self.law.velocity(t, u, self.h);
        let nu_h = if viscous { self.nu / self.h } else { 0.0 };
        match self.scheme {
            Scheme::Central => {
                for (ai, &ui) in w.a.iter_mut().zip(u) {
                    *ai = self.flux.eval_unchecked(ui).0 - c * ui;
                }
                for i in 0..n - 1 {
                    w.face[i] = 0.5 * (w.a[i] + w.a[i + 1]) - nu_h * (u[i + 1] - u[i]);
                }
            }
            Scheme::Upwind => {
                w.slope[0] = 0.0;
                w.slope[n - 1] = 0.0;
                for i in 1..n - 1 {
                    w.slope[i] = minmod(u[i] - u[i - 1], u[i + 1] - u[i]);
                }
                for i in 0..n - 1 {
                    let ul = u[i] + 0.5 * w.slope[i];
                    let ur = u[i + 1] - 0.5 * w.slope[i + 1];
                    let (al, dl, _) = self.flux.eval_unchecked(ul);
                    let (ar, dr, _) = self.flux.eval_unchecked(ur);
                    let speed = (dl - c).abs().max((dr - c).abs());
                    w.face[i] = 0.5 * (al - c * ul + ar - c * ur) - 0.5 * speed * (ur - ul)
                        - nu_h * (u[i + 1] - u[i]);
                }
            }
        }
        dy[0] = 0.0;
        dy[n - 1] = 0.0;
        let inv_h = 1.0 / self.h;
        for i in 1..n - 1 {
            dy[i] = -(w.face[i] - w.face[i - 1]) * inv_h;
        }
        dy[n] = c;
    }

    /// Largest `|A'(u) - c|` over the state, including the current frame speed.
    fn max_wave_speed(&self, t: f64, y: &[f64]) -> f64 {
        let u = &y[..self.n];
        let c = self.law.velocity(t, u, self.h);
        u.iter().map(|&v| (self.flux.speed(v) - c).abs()).fold(0.0, f64::max)
    }

    fn advective_cap(&self, cfl: f64, t: f64, y: &[f64]) -> f64 {
        cfl * self.h / self.max_wave_speed(t, y).max(1e-12)
    }
}

/// Lab-frame evolution with viscosity `viscosity`.
pub fn evolve(
    f: &FluxModel,
    u0: &Field,
    viscosity: f64,
    t_end: f64,
    opts: &EvolveOptions,
) -> Result<Evolution> {
    run(f, u0, viscosity, t_end, Law::Frame(0.0), opts)
}

/// Evolution in a frame moving with constant speed `c`.
pub fn evolve_in_frame(
    f: &FluxModel,
    u0: &Field,
    viscosity: f64,
    c: f64,
    t_end: f64,
    opts: &EvolveOptions,
) -> Result<Evolution> {
    run(f, u0, viscosity, t_end, Law::Frame(c), opts)
}

/// Unit-viscosity evolution coupled to the feedback shift law.
pub fn evolve_shifted(
    f: &FluxModel,
    p: &ShockProfile,
    u0: &Field,
    t_end: f64,
    opts: &EvolveOptions,
) -> Result<Evolution> {
    evolve_shifted_scaled(f, p, u0, 1.0, t_end, opts)
}

/// Viscosity-`eps` evolution in the frame of the rescaled feedback shift
/// `Y(t) = eps X(t / eps)`: the profile enters as `S1(x / eps)` and the
/// gain as `k / eps`.
pub fn evolve_shifted_scaled(
    f: &FluxModel,
    p: &ShockProfile,
    u0: &Field,
    eps: f64,
    t_end: f64,
    opts: &EvolveOptions,
) -> Result<Evolution> {
    if !(eps > 0.0) {
        return Err(Error::Config(format!("viscosity must be positive, got {eps}")));
    }
    let (s1, s1p) = profile_on_grid(p, &u0.grid, eps);
    let gain = f.shift_gain(p.u_minus, p.u_plus) / eps;
    run(f, u0, eps, t_end, Law::Feedback { s1, s1p, sigma: p.sigma, gain }, opts)
}

/// Unit-viscosity evolution in the frame of a prescribed shift with
/// velocity `rate(t)`; distances are still measured against `S1`.
pub fn evolve_with_shift(
    f: &FluxModel,
    p: &ShockProfile,
    u0: &Field,
    rate: &dyn Fn(f64) -> f64,
    t_end: f64,
    opts: &EvolveOptions,
) -> Result<Evolution> {
    let (s1, _) = profile_on_grid(p, &u0.grid, 1.0);
    run(f, u0, 1.0, t_end, Law::Prescribed { s1, rate }, opts)
}

fn run(
    f: &FluxModel,
    u0: &Field,
    viscosity: f64,
    t_end: f64,
    law: Law<'_>,
    opts: &EvolveOptions,
) -> Result<Evolution> {
    if !(viscosity > 0.0) {
        return Err(Error::Config(format!("viscosity must be positive, got {viscosity}")));
    }
    if !(t_end >= 0.0) {
        return Err(Error::Config(format!("final time must be nonnegative, got {t_end}")));
    }
    let n = u0.grid.n;
    if n < 5 {
        return Err(Error::IncompatibleGrid("need at least five nodes".into()));
    }
    if let Some(i) = u0.u.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { t: 0.0, node: i });
    }
    let h = u0.grid.spacing();
    let (lo, hi) = u0.u.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    for v in [lo, hi] {
        f.eval(v)?;
    }

    let mut scheme = opts.scheme;
    let limit = 4.0 * h * f.max_speed(lo, hi);
    if scheme == Scheme::Central && viscosity < limit {
        if opts.auto_upwind {
            scheme = Scheme::Upwind;
        } else {
            return Err(Error::Unresolved { eps: viscosity, limit });
        }
    }
    let sys = System { flux: f, nu: viscosity, h, n, scheme, law };

    // monitors
    let u_max = lo.abs().max(hi.abs());
    let bound = u_max * (1.0 + opts.max_principle_slack) + f64::MIN_POSITIVE;
    let strip = opts
        .leak
        .map(|m| ((m.strip_fraction * (n - 1) as f64).ceil() as usize).clamp(1, n / 2));
    let initial_ref: Vec<f64> = match sys.law.reference() {
        Some(r) => r.to_vec(),
        None => u0.u.clone(),
    };
    let leak_limit = opts.leak.map(|m| {
        let base = match sys.law.reference() {
            Some(r) => distance_sq(&u0.u, r, h).sqrt(),
            None => {
                let step: Vec<f64> =
                    (0..n).map(|i| if 2 * i < n - 1 { u0.left() } else if 2 * i == n - 1 { 0.5 * (u0.left() + u0.right()) } else { u0.right() }).collect();
                distance_sq(&u0.u, &step, h).sqrt()
            }
        };
        m.rel_tol * base + m.abs_tol
    });
    let strip_norm = |u: &[f64]| -> f64 {
        let Some(k) = strip else { return 0.0 };
        let left = grid::trapezoid_map(&u[..=k], h, |i, v| (v - initial_ref[i]).powi(2));
        let off = n - 1 - k;
        let right = grid::trapezoid_map(&u[off..], h, |i, v| (v - initial_ref[off + i]).powi(2));
        (left + right).sqrt()
    };

    // conservation bookkeeping against the lab-frame Riemann shock
    let (ul, ur) = (u0.left(), u0.right());
    let sigma_data = if ul != ur { (f.value(ur) - f.value(ul)) / (ur - ul) } else { 0.0 };
    let mass = |u: &[f64], t: f64, shift: f64| -> f64 {
        grid::integrate_against_step(&u0.grid, u, sigma_data * t - shift, ul, ur).signed
    };
    let mass0 = mass(&u0.u, 0.0, 0.0);

    let mut y = u0.u.clone();
    y.push(0.0);
    let mut t = 0.0f64;
    let mut out = Evolution {
        snapshots: Vec::new(),
        trajectory: ShiftTrajectory::default(),
        steps: Vec::new(),
        conservation_defect: Vec::new(),
        scheme,
        viscosity,
        final_field: u0.clone(),
        max_leak: 0.0,
        stats: StepStats::default(),
    };
    let record = |t: f64, y: &[f64], out: &mut Evolution| -> Result<()> {
        let u = &y[..n];
        for (i, &v) in u.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite { t, node: i });
            }
            if v.abs() > bound {
                return Err(Error::MaximumPrinciple { t, value: v.abs(), bound });
            }
            if !f.contains(v) {
                let (lo, hi) = f.validity_interval;
                return Err(Error::OutOfInterval { u: v, lo, hi });
            }
        }
        if let Some(limit) = leak_limit {
            let leak = strip_norm(u);
            out.max_leak = out.max_leak.max(leak);
            if leak > limit {
                return Err(Error::BoundaryLeak { t, leak, limit });
            }
        }
        let xdot = sys.law.velocity(t, u, h);
        out.trajectory.push(t, y[n], xdot);
        if opts.record_steps {
            let dist2 = sys.law.reference().map(|r| distance_sq(u, r, h));
            out.steps.push(StepRecord { t, shift: y[n], xdot, dist2 });
        }
        Ok(())
    };
    record(t, &y, &mut out)?;

    let mut targets: Vec<f64> = opts.snapshot_times.iter().copied().filter(|&s| (0.0..=t_end).contains(&s)).collect();
    targets.sort_by(|a, b| a.partial_cmp(b).unwrap());
    targets.dedup();
    let snapshot_count = targets.len();
    if targets.last() != Some(&t_end) {
        targets.push(t_end);
    }
    let take_snapshot = |t: f64, y: &[f64], out: &mut Evolution| {
        let u = y[..n].to_vec();
        let dist2 = sys.law.reference().map(|r| distance_sq(&u, r, h));
        out.conservation_defect.push((t, mass(&u, t, y[n]) - mass0));
        out.snapshots.push(Snapshot {
            field: Field { grid: u0.grid, u, t },
            shift: y[n],
            xdot: sys.law.velocity(t, &y[..n], h),
            dist2,
        });
    };

    let mut work = Work::new(n);
    match opts.stepping {
        Stepping::Explicit { rtol, atol } => {
            let diffusive_cap = opts.cfl_diffusive * h * h / (2.0 * viscosity);
            let mut stepper = Dopri::new(n + 1, rtol, atol, diffusive_cap);
            for (k, &target) in targets.iter().enumerate() {
                while t < target {
                    let cap = diffusive_cap.min(sys.advective_cap(opts.cfl_advective, t, &y));
                    stepper.h_max = cap;
                    // re-evaluate the advective cap at least every 1000 steps
                    let chunk_end = (t + 1000.0 * cap).min(target);
                    let chunk_end = if target - chunk_end < 10.0 * cap { target } else { chunk_end };
                    let mut rhs = |tt: f64, yy: &[f64], dy: &mut [f64]| sys.rhs(tt, yy, dy, &mut work, true);
                    let mut on_step = |tt: f64, yy: &[f64]| record(tt, yy, &mut out);
                    stepper.advance(&mut rhs, &mut t, &mut y, chunk_end, &mut on_step)?;
                }
                if k < snapshot_count {
                    take_snapshot(t, &y, &mut out);
                }
            }
            out.stats = stepper.stats;
        }
        Stepping::Imex { dt } => {
            let gamma = 1.0 - std::f64::consts::FRAC_1_SQRT_2;
            let delta = 1.0 - 1.0 / (2.0 * gamma);
            let mut e1 = vec![0.0; n + 1];
            let mut e2 = vec![0.0; n + 1];
            let mut y2 = vec![0.0; n + 1];
            let mut b = vec![0.0; n + 1];
            let (mut sub, mut diag, mut sup) = (vec![0.0; n], vec![1.0; n], vec![0.0; n]);
            let mut factored_for = f64::NAN;
            let mut stats = StepStats::default();
            let lap = |u: &[f64], i: usize| viscosity * (u[i + 1] - 2.0 * u[i] + u[i - 1]) / (h * h);
            for (k, &target) in targets.iter().enumerate() {
                while t < target {
                    let step = dt.unwrap_or_else(|| sys.advective_cap(opts.cfl_advective, t, &y));
                    let chunk_end = (t + 1000.0 * step).min(target);
                    let chunk_end = if target - chunk_end < 10.0 * step { target } else { chunk_end };
                    let m = ((chunk_end - t) / step).ceil().max(1.0) as usize;
                    let dt_k = (chunk_end - t) / m as f64;
                    if dt_k != factored_for {
                        let r = gamma * dt_k * viscosity / (h * h);
                        for i in 1..n - 1 {
                            sub[i] = -r;
                            diag[i] = 1.0 + 2.0 * r;
                            sup[i] = -r;
                        }
                        factored_for = dt_k;
                    }
                    let t0 = t;
                    for j in 0..m {
                        let tn = if j + 1 == m { chunk_end } else { t0 + (j + 1) as f64 * dt_k };
                        let ts = t0 + j as f64 * dt_k;
                        // stage 2
                        sys.rhs(ts, &y, &mut e1, &mut work, false);
                        for i in 0..=n {
                            b[i] = y[i] + dt_k * gamma * e1[i];
                        }
                        let sol = thomas(&sub, &diag, &sup, &b[..n]);
                        y2[..n].copy_from_slice(&sol);
                        y2[n] = b[n];
                        // stage 3 (stiffly accurate, so it is the new state)
                        sys.rhs(ts + gamma * dt_k, &y2, &mut e2, &mut work, false);
                        for i in 0..=n {
                            b[i] = y[i] + dt_k * (delta * e1[i] + (1.0 - delta) * e2[i]);
                        }
                        for i in 1..n - 1 {
                            b[i] += dt_k * (1.0 - gamma) * lap(&y2, i);
                        }
                        let sol = thomas(&sub, &diag, &sup, &b[..n]);
                        y[..n].copy_from_slice(&sol);
                        y[n] = b[n];
                        t = tn;
                        stats.accepted += 1;
                        stats.evaluations += 2;
                        record(t, &y, &mut out)?;
                    }
                }
                if k < snapshot_count {
                    take_snapshot(t, &y, &mut out);
                }
            }
            out.stats = stats;
        }
    }
    out.final_field = Field { grid: u0.grid, u: y[..n].to_vec(), t };
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::compute_profile;
    use approx::assert_abs_diff_eq;

    fn burgers() -> FluxModel {
        FluxModel::quadratic(1.0, (-2.0, 2.0)).unwrap()
    }

    fn tanh_profile() -> ShockProfile {
        compute_profile(&burgers(), 1.0, -1.0, 20.0, 4001).unwrap()
    }

    #[test]
    fn thomas_solves_a_small_system() {
        // [2 1 0; 1 2 1; 0 1 2] x = [4, 8, 8] has x = [1, 2, 3]
        let x = thomas(&[0.0, 1.0, 1.0], &[2.0, 2.0, 2.0], &[1.0, 1.0, 0.0], &[4.0, 8.0, 8.0]);
        for (a, b) in x.iter().zip([1.0, 2.0, 3.0]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn resample_identity_constant_and_round_trip() {
        let g = UniformGrid::symmetric(4.0, 81);
        let field = Field::from_fn(g, |x| (-x * x).exp());
        assert_eq!(resample(&field, g), field);
        let c = Field::from_fn(g, |_| 0.7);
        let fine = resample(&c, g.refined());
        assert!(fine.u.iter().all(|&v| v == 0.7));
        let back = resample(&resample(&field, g.refined()), g);
        let err = back.u.iter().zip(&field.u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-14, "{err}");
    }

    #[test]
    fn shift_rhs_examples() {
        let p = tanh_profile();
        let f = burgers();
        let g = UniformGrid::symmetric(20.0, 8001);
        let v = Field::from_fn(g, |x| p.value(x));
        assert_abs_diff_eq!(shift_rhs(&v, &p, &f).unwrap(), 0.0, epsilon = 1e-14);
        let v = Field::from_fn(g, |x| {
            let (s, d) = p.sample(x);
            s + d
        });
        assert_abs_diff_eq!(shift_rhs(&v, &p, &f).unwrap(), -2.0 / 3.0, epsilon = 1e-7);
        // S1' is even, so an odd perturbation is orthogonal to it
        let v = Field::from_fn(g, |x| p.value(x) + 0.1 * x * (-x * x).exp());
        assert_abs_diff_eq!(shift_rhs(&v, &p, &f).unwrap(), 0.0, epsilon = 1e-13);
        let off = Field::from_fn(UniformGrid::new(1.0, 5.0, 11), |_| 0.0);
        assert!(matches!(shift_rhs(&off, &p, &f), Err(Error::IncompatibleGrid(_))));
    }

    #[test]
    fn stationary_profile_and_constant_state() {
        let f = burgers();
        let p = tanh_profile();
        // the discrete steady state sits O(dx^2) away from S1
        let g = UniformGrid::symmetric(8.0, 6001);
        let u0 = Field::from_fn(g, |x| p.value(x));
        let opts = EvolveOptions { stepping: Stepping::Imex { dt: None }, ..Default::default() }
            .with_snapshots(vec![0.5, 1.0]);
        let ev = evolve(&f, &u0, 1.0, 1.0, &opts).unwrap();
        let (s1, _) = profile_on_grid(&p, &g, 1.0);
        let d = distance_sq(&ev.final_field.u, &s1, g.spacing()).sqrt();
        assert!(d < 1e-6, "drift from steady state {d}");
        assert_eq!(ev.snapshots.len(), 2);
        assert!(ev.conservation_defect.iter().all(|(_, m)| m.abs() < 1e-8));

        let c = Field::from_fn(UniformGrid::symmetric(12.0, 481), |_| 1.0);
        let ev = evolve(&f, &c, 1.0, 0.5, &EvolveOptions::default()).unwrap();
        assert!(ev.final_field.u.iter().all(|&v| (v - 1.0).abs() < 1e-14));
    }

    #[test]
    fn shifted_fixed_point_moves_with_sigma() {
        let f = FluxModel::quadratic(1.0, (-1.0, 3.0)).unwrap();
        let p = compute_profile(&f, 2.0, 0.0, 20.0, 4001).unwrap();
        let g = UniformGrid::symmetric(12.0, 481);
        let u0 = Field::from_fn(g, |x| p.value(x));
        let ev = evolve_shifted(&f, &p, &u0, 1.0, &EvolveOptions::default()).unwrap();
        let last = ev.trajectory.len() - 1;
        assert_abs_diff_eq!(ev.trajectory.x[last], 2.0, epsilon = 1e-4);
        // O(dx^2) gap between the discrete steady state and S1
        assert!(ev.steps.last().unwrap().dist2.unwrap() < 1e-7);
    }

    #[test]
    fn translate_contracts_under_feedback() {
        let f = burgers();
        let p = tanh_profile();
        let g = UniformGrid::symmetric(12.0, 481);
        let u0 = Field::from_fn(g, |x| p.value(x + 0.3));
        let ev = evolve_shifted(&f, &p, &u0, 2.0, &EvolveOptions::default()).unwrap();
        let d: Vec<f64> = ev.steps.iter().map(|s| s.dist2.unwrap()).collect();
        assert!(d.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9)));
        assert!(d[d.len() - 1] < 0.5 * d[0]);
        // the shift absorbs the translate
        assert!(ev.trajectory.x.last().unwrap() < &-0.1);
    }

    #[test]
    fn imex_matches_explicit() {
        let f = burgers();
        let p = tanh_profile();
        let g = UniformGrid::symmetric(12.0, 241);
        let u0 = Field::from_fn(g, |x| p.value(x) + 0.1 * (-x * x).exp());
        let ex = evolve_shifted(&f, &p, &u0, 1.0, &EvolveOptions::default()).unwrap();
        let opts = EvolveOptions { stepping: Stepping::Imex { dt: Some(2e-3) }, ..Default::default() };
        let im = evolve_shifted(&f, &p, &u0, 1.0, &opts).unwrap();
        let err = ex.final_field.u.iter().zip(&im.final_field.u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-5, "{err}");
        let dx = (ex.trajectory.x.last().unwrap() - im.trajectory.x.last().unwrap()).abs();
        assert!(dx < 1e-5, "{dx}");
    }

    #[test]
    fn under_resolved_viscosity_switches_or_refuses() {
        let f = burgers();
        let g = UniformGrid::symmetric(2.0, 41);
        let u0 = Field::from_fn(g, |x| -(x / 0.01).tanh());
        let ev = evolve(&f, &u0, 0.01, 0.01, &EvolveOptions::default()).unwrap();
        assert_eq!(ev.scheme, Scheme::Upwind);
        let strict = EvolveOptions { auto_upwind: false, ..Default::default() };
        assert!(matches!(evolve(&f, &u0, 0.01, 0.01, &strict), Err(Error::Unresolved { .. })));
    }

    #[test]
    fn boundary_leak_is_detected() {
        let f = burgers();
        let p = tanh_profile();
        let g = UniformGrid::symmetric(6.0, 241);
        let u0 = Field::from_fn(g, |x| p.value(x) + 0.1 * (-(x - 4.5) * (x - 4.5)).exp());
        let r = evolve_shifted(&f, &p, &u0, 1.0, &EvolveOptions::default());
        assert!(matches!(r, Err(Error::BoundaryLeak { .. })), "{r:?}");
    }

    #[test]
    fn second_order_self_convergence() {
        let f = burgers();
        let p = tanh_profile();
        let errs: Vec<f64> = [161usize, 321, 641]
            .iter()
            .map(|&n| {
                let g = UniformGrid::symmetric(8.0, n);
                let u0 = Field::from_fn(g, |x| p.value(x) + 0.1 * (-x * x).exp());
                let ev = evolve(&f, &u0, 1.0, 0.5, &EvolveOptions { leak: None, ..Default::default() }).unwrap();
                ev.final_field
            })
            .collect::<Vec<_>>()
            .windows(2)
            .map(|w| {
                let coarse = &w[0];
                let fine = resample(&w[1], coarse.grid);
                distance_sq(&coarse.u, &fine.u, coarse.dx()).sqrt()
            })
            .collect();
        let ratio = errs[0] / errs[1];
        assert!((ratio - 4.0).abs() < 0.6, "ratio {ratio}");
    }
}
