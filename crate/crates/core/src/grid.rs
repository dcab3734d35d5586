//! Uniform grids, composite quadrature, finite-difference stencils and
//! interpolation helpers shared by the solver and the diagnostics.

use serde::{Deserialize, Serialize};

/// A uniform grid of `n` nodes covering `[lo, hi]`, endpoints included.
///
/// Nodes are laid out symmetrically about the midpoint, so a grid with
/// `lo = -hi` has `x[n - 1 - i] == -x[i]` bit for bit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformGrid {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl UniformGrid {
    pub fn new(lo: f64, hi: f64, n: usize) -> Self {
        assert!(n >= 2, "a grid needs at least two nodes");
        assert!(hi > lo, "grid bounds must be increasing");
        Self { lo, hi, n }
    }

    /// Symmetric grid on `[-half, half]`.
    pub fn symmetric(half: f64, n: usize) -> Self {
        Self::new(-half, half, n)
    }

    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / (self.n - 1) as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        if i == 0 {
            return self.lo;
        }
        if i == self.n - 1 {
            return self.hi;
        }
        let mid = 0.5 * (self.lo + self.hi);
        let offset = i as f64 - 0.5 * (self.n - 1) as f64;
        mid + offset * self.spacing()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.point(i)).collect()
    }

    /// Grid with every cell split in two; the original nodes are kept.
    pub fn refined(&self) -> Self {
        Self::new(self.lo, self.hi, 2 * self.n - 1)
    }

    /// Inverse of [`UniformGrid::refined`]; requires an odd node count.
    pub fn coarsened(&self) -> Self {
        assert!(self.n % 2 == 1 && self.n >= 3);
        Self::new(self.lo, self.hi, self.n.div_ceil(2))
    }
}

/// Composite trapezoid rule for samples on a uniform grid with spacing `h`.
pub fn trapezoid(values: &[f64], h: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => {
            let inner: f64 = values[1..n - 1].iter().sum();
            h * (inner + 0.5 * (values[0] + values[n - 1]))
        }
    }
}

/// Composite trapezoid of `f(values[i])` without allocating.
pub fn trapezoid_map(values: &[f64], h: f64, f: impl Fn(usize, f64) -> f64) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mut acc = 0.5 * (f(0, values[0]) + f(n - 1, values[n - 1]));
    for (i, &v) in values.iter().enumerate().take(n - 1).skip(1) {
        acc += f(i, v);
    }
    acc * h
}

/// Fourth-order first derivative on a uniform grid: central stencil in the
/// interior, one-sided fourth-order closures on the two outermost nodes.
pub fn derivative4(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    assert!(n >= 5, "fourth-order stencils need at least five nodes");
    let f = values;
    let s = 1.0 / (12.0 * h);
    let mut d = vec![0.0; n];
    d[0] = (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) * s;
    d[1] = (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]) * s;
    for i in 2..n - 2 {
        d[i] = (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) * s;
    }
    d[n - 2] = (3.0 * f[n - 1] + 10.0 * f[n - 2] - 18.0 * f[n - 3] + 6.0 * f[n - 4] - f[n - 5]) * s;
    d[n - 1] = (25.0 * f[n - 1] - 48.0 * f[n - 2] + 36.0 * f[n - 3] - 16.0 * f[n - 4]
        + 3.0 * f[n - 5])
        * s;
    d
}

/// Locates `x` on a uniform grid: returns the cell index `i` (so that
/// `x` lies in `[x_i, x_{i+1}]`) and the local coordinate in `[0, 1]`.
/// `None` when `x` lies outside the grid.
pub fn locate(grid: &UniformGrid, x: f64) -> Option<(usize, f64)> {
    if !(x >= grid.lo && x <= grid.hi) {
        return None;
    }
    let h = grid.spacing();
    let s = (x - grid.lo) / h;
    let i = (s.floor() as usize).min(grid.n - 2);
    let t = ((x - grid.point(i)) / h).clamp(0.0, 1.0);
    Some((i, t))
}

/// Piecewise-linear interpolation; constant extension outside the grid.
pub fn interp_linear(grid: &UniformGrid, values: &[f64], x: f64) -> f64 {
    match locate(grid, x) {
        Some((i, t)) => values[i] + t * (values[i + 1] - values[i]),
        None if x < grid.lo => values[0],
        None => values[grid.n - 1],
    }
}

/// Four-point Lagrange interpolation (third order accurate, O(h^4) error).
/// Outside the grid the boundary value is returned.
pub fn interp_cubic(grid: &UniformGrid, values: &[f64], x: f64) -> f64 {
    let n = grid.n;
    let (i, t) = match locate(grid, x) {
        Some(c) => c,
        None if x < grid.lo => return values[0],
        None => return values[n - 1],
    };
    if n < 4 {
        return values[i] + t * (values[i + 1] - values[i]);
    }
    // stencil i-1..i+2 shifted inward at the edges
    let j0 = i.saturating_sub(1).min(n - 4);
    let s = (x - grid.point(j0)) / grid.spacing();
    let (f0, f1, f2, f3) = (values[j0], values[j0 + 1], values[j0 + 2], values[j0 + 3]);
    let l0 = -(s - 1.0) * (s - 2.0) * (s - 3.0) / 6.0;
    let l1 = s * (s - 2.0) * (s - 3.0) / 2.0;
    let l2 = -s * (s - 1.0) * (s - 3.0) / 2.0;
    let l3 = s * (s - 1.0) * (s - 2.0) / 6.0;
    f0 * l0 + f1 * l1 + f2 * l2 + f3 * l3
}

/// Cubic Hermite interpolation within one cell of width `h`.
pub fn hermite(y0: f64, y1: f64, m0: f64, m1: f64, h: f64, t: f64) -> f64 {
    let t2 = t * t;
    let t3 = t2 * t;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + t;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    h00 * y0 + h10 * h * m0 + h01 * y1 + h11 * h * m1
}

/// Fritsch-Carlson limiting of the endpoint slopes of a cell so that the
/// Hermite interpolant is monotone on it.
pub fn limit_slopes(y0: f64, y1: f64, m0: f64, m1: f64, h: f64) -> (f64, f64) {
    let secant = (y1 - y0) / h;
    if secant == 0.0 {
        return (0.0, 0.0);
    }
    let mut a = m0 / secant;
    let mut b = m1 / secant;
    if a < 0.0 {
        a = 0.0;
    }
    if b < 0.0 {
        b = 0.0;
    }
    let r = a * a + b * b;
    if r > 9.0 {
        let tau = 3.0 / r.sqrt();
        a *= tau;
        b *= tau;
    }
    (a * secant, b * secant)
}

/// Exact integral of `(u - S0)` and of `|u - S0|^p` (p = 1, 2) for the
/// piecewise-linear interpolant of nodal values `u` against a step
/// `S0(x) = left` for `x < jump`, `right` for `x >= jump`.
#[derive(Debug, Clone, Copy, Default)]
pub struct StepIntegrals {
    pub signed: f64,
    pub l1: f64,
    pub l2_sq: f64,
}

pub fn integrate_against_step(
    grid: &UniformGrid,
    u: &[f64],
    jump: f64,
    left: f64,
    right: f64,
) -> StepIntegrals {
    let mut out = StepIntegrals::default();
    let h = grid.spacing();
    for i in 0..grid.n - 1 {
        let (xa, xb) = (grid.point(i), grid.point(i + 1));
        let (ua, ub) = (u[i], u[i + 1]);
        let lerp = |x: f64| ua + (ub - ua) * (x - xa) / h;
        let mut add = |x0: f64, x1: f64, level: f64| {
            if x1 <= x0 {
                return;
            }
            let d0 = lerp(x0) - level;
            let d1 = lerp(x1) - level;
            let w = x1 - x0;
            out.signed += 0.5 * w * (d0 + d1);
            out.l2_sq += w * (d0 * d0 + d0 * d1 + d1 * d1) / 3.0;
            out.l1 += if d0 * d1 >= 0.0 {
                0.5 * w * (d0.abs() + d1.abs())
            } else {
                0.5 * w * (d0 * d0 + d1 * d1) / (d0.abs() + d1.abs())
            };
        };
        if jump <= xa {
            add(xa, xb, right);
        } else if jump >= xb {
            add(xa, xb, left);
        } else {
            add(xa, jump, left);
            add(jump, xb, right);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn symmetric_grid_is_exactly_antisymmetric() {
        let g = UniformGrid::symmetric(7.3, 1001);
        let x = g.points();
        for i in 0..x.len() {
            assert_eq!(x[x.len() - 1 - i], -x[i]);
        }
        assert_eq!(x[500], 0.0);
    }

    #[test]
    fn derivative4_is_exact_on_quartics() {
        let g = UniformGrid::new(-1.0, 2.0, 31);
        let f: Vec<f64> = g.points().iter().map(|x| x.powi(4) - 2.0 * x * x + x).collect();
        let d = derivative4(&f, g.spacing());
        for (x, dv) in g.points().iter().zip(&d) {
            assert_abs_diff_eq!(*dv, 4.0 * x.powi(3) - 4.0 * x + 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn cubic_interp_reproduces_cubics() {
        let g = UniformGrid::new(0.0, 1.0, 11);
        let f: Vec<f64> = g.points().iter().map(|x| x * x * x - x).collect();
        for k in 0..97 {
            let x = k as f64 / 96.0;
            assert_abs_diff_eq!(interp_cubic(&g, &f, x), x * x * x - x, epsilon = 1e-13);
        }
    }

    #[test]
    fn step_integrals_split_the_jump_cell() {
        let g = UniformGrid::new(-1.0, 1.0, 3);
        // u = 0 everywhere against a unit step at 0.25
        let s = integrate_against_step(&g, &[0.0; 3], 0.25, 1.0, 0.0);
        assert_abs_diff_eq!(s.l2_sq, 1.25, epsilon = 1e-14);
        assert_abs_diff_eq!(s.signed, -1.25, epsilon = 1e-14);
        assert_abs_diff_eq!(s.l1, 1.25, epsilon = 1e-14);
    }
}
