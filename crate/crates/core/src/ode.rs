//! Embedded Dormand-Prince 5(4) integrator with step-size control.

use serde::Serialize;

use crate::error::{Error, Result};

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// fifth-order weights minus embedded fourth-order weights
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

/// Dormand-Prince stepper holding its stage buffers and the current step
/// size so that repeated calls to [`Dopri::advance`] continue seamlessly.
#[derive(Debug, Clone)]
pub struct Dopri {
    pub rtol: f64,
    pub atol: f64,
    pub h_max: f64,
    pub h_min: f64,
    h: f64,
    k: [Vec<f64>; 7],
    stage: Vec<f64>,
    fresh: Vec<f64>,
    fsal: bool,
    pub stats: StepStats,
}

impl Dopri {
    pub fn new(dim: usize, rtol: f64, atol: f64, h_max: f64) -> Self {
        Self {
            rtol,
            atol,
            h_max,
            h_min: 1e-14,
            h: 0.0,
            k: std::array::from_fn(|_| vec![0.0; dim]),
            stage: vec![0.0; dim],
            fresh: vec![0.0; dim],
            fsal: false,
            stats: StepStats::default(),
        }
    }

    /// Sets the size of the next attempted step.
    pub fn set_step(&mut self, h: f64) {
        self.h = h;
    }

    pub fn step_size(&self) -> f64 {
        self.h
    }

    /// Invalidates the cached first stage (needed when the caller mutates
    /// the state between calls).
    pub fn reset(&mut self) {
        self.fsal = false;
    }

    /// Integrates `y' = f(t, y)` from `*t` to `t_end`, landing exactly on
    /// `t_end`. `on_step` is invoked after every accepted step with the new
    /// time and state; returning an error aborts the integration.
    pub fn advance<F, O>(
        &mut self,
        f: &mut F,
        t: &mut f64,
        y: &mut [f64],
        t_end: f64,
        on_step: &mut O,
    ) -> Result<()>
    where
        F: FnMut(f64, &[f64], &mut [f64]),
        O: FnMut(f64, &[f64]) -> Result<()>,
    {
        let n = y.len();
        if !self.fsal {
            f(*t, y, &mut self.k[0]);
            self.stats.evaluations += 1;
            self.fsal = true;
        }
        if self.h <= 0.0 {
            self.h = self.initial_step(y, t_end - *t);
        }
        while *t < t_end {
            let remaining = t_end - *t;
            let mut h = self.h.min(self.h_max);
            let last = h >= remaining * (1.0 - 1e-12);
            if last {
                h = remaining;
            }
            for s in 1..7 {
                for i in 0..n {
                    let mut acc = 0.0;
                    for (j, a) in A[s].iter().enumerate().take(s) {
                        if *a != 0.0 {
                            acc += a * self.k[j][i];
                        }
                    }
                    self.stage[i] = y[i] + h * acc;
                }
                let (_, tail) = self.k.split_at_mut(s);
                f(*t + C[s] * h, &self.stage, &mut tail[0]);
                self.stats.evaluations += 1;
            }
            // stage 7 evaluated at the fifth-order solution, which is `stage`
            self.fresh.copy_from_slice(&self.stage);
            let mut err = 0.0;
            for i in 0..n {
                let mut e = 0.0;
                for (j, ej) in E.iter().enumerate() {
                    if *ej != 0.0 {
                        e += ej * self.k[j][i];
                    }
                }
                let scale = self.atol + self.rtol * y[i].abs().max(self.fresh[i].abs());
                let r = h * e / scale;
                err += r * r;
            }
            let err = (err / n as f64).sqrt();
            if !err.is_finite() {
                self.stats.rejected += 1;
                self.h = h * 0.2;
                if self.h < self.h_min {
                    return Err(Error::StepSizeUnderflow { t: *t, h: self.h });
                }
                continue;
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if err <= 1.0 {
                y.copy_from_slice(&self.fresh);
                *t = if last { t_end } else { *t + h };
                self.k.swap(0, 6);
                self.stats.accepted += 1;
                // keep the controller's proposal even when the step was shortened
                let proposal = h * factor;
                if !last || proposal > self.h {
                    self.h = proposal;
                }
                on_step(*t, y)?;
            } else {
                self.stats.rejected += 1;
                self.h = h * factor.min(1.0);
                if self.h < self.h_min {
                    return Err(Error::StepSizeUnderflow { t: *t, h: self.h });
                }
            }
        }
        Ok(())
    }

    fn initial_step(&self, y: &[f64], span: f64) -> f64 {
        let n = y.len() as f64;
        let mut d0 = 0.0;
        let mut d1 = 0.0;
        for (yi, fi) in y.iter().zip(&self.k[0]) {
            let sc = self.atol + self.rtol * yi.abs();
            d0 += (yi / sc).powi(2);
            d1 += (fi / sc).powi(2);
        }
        let (d0, d1) = ((d0 / n).sqrt(), (d1 / n).sqrt());
        let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h.min(span.abs()).min(self.h_max).max(self.h_min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_to_tolerance() {
        let mut s = Dopri::new(1, 1e-10, 1e-12, 1.0);
        let mut y = [1.0];
        let mut t = 0.0;
        s.advance(&mut |_, y: &[f64], d: &mut [f64]| d[0] = -y[0], &mut t, &mut y, 3.0, &mut |_, _| Ok(()))
            .unwrap();
        assert_eq!(t, 3.0);
        assert!((y[0] - (-3.0f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn oscillator_over_several_periods() {
        let mut s = Dopri::new(2, 1e-10, 1e-12, 0.5);
        let mut y = [1.0, 0.0];
        let mut t = 0.0;
        let mut rhs = |_: f64, y: &[f64], d: &mut [f64]| {
            d[0] = y[1];
            d[1] = -y[0];
        };
        for k in 1..=4 {
            let target = k as f64 * std::f64::consts::PI;
            s.advance(&mut rhs, &mut t, &mut y, target, &mut |_, _| Ok(())).unwrap();
        }
        assert!((y[0] - 1.0).abs() < 1e-8);
        assert!(y[1].abs() < 1e-8);
    }
}
