//! Periodic bicubic B-spline interpolation of grid fields.

use crate::numerics::linalg::solve_cyclic_constant;

/// Value and coordinate derivatives of an interpolated field at a point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SplineSample {
    pub value: f64,
    pub dx: f64,
    pub dy: f64,
    pub dxx: f64,
    pub dxy: f64,
    pub dyy: f64,
}

/// C² periodic interpolant through the grid values.
#[derive(Debug, Clone)]
pub struct PeriodicSpline2D {
    nx: usize,
    ny: usize,
    hx: f64,
    hy: f64,
    coef: Vec<f64>,
}

impl PeriodicSpline2D {
    pub fn new(values: &[f64], grid_size: [usize; 2], periods: [f64; 2]) -> Self {
        let [nx, ny] = grid_size;
        assert_eq!(values.len(), nx * ny, "spline values do not match the grid");
        let mut coef = values.to_vec();
        for j in 0..ny {
            let row = solve_cyclic_constant(1.0 / 6.0, 4.0 / 6.0, &coef[j * nx..(j + 1) * nx]);
            coef[j * nx..(j + 1) * nx].copy_from_slice(&row);
        }
        let mut column = vec![0.0; ny];
        for i in 0..nx {
            for j in 0..ny {
                column[j] = coef[j * nx + i];
            }
            let solved = solve_cyclic_constant(1.0 / 6.0, 4.0 / 6.0, &column);
            for j in 0..ny {
                coef[j * nx + i] = solved[j];
            }
        }
        Self { nx, ny, hx: periods[0] / nx as f64, hy: periods[1] / ny as f64, coef }
    }

    pub fn eval(&self, x: f64, y: f64) -> SplineSample {
        let (ix, wx) = basis(x / self.hx, self.nx);
        let (iy, wy) = basis(y / self.hy, self.ny);
        let mut s = SplineSample::default();
        for (b, &(vy, dy, ddy)) in wy.iter().enumerate() {
            let j = (iy + b) % self.ny;
            for (a, &(vx, dx, ddx)) in wx.iter().enumerate() {
                let i = (ix + a) % self.nx;
                let c = self.coef[j * self.nx + i];
                s.value += c * vx * vy;
                s.dx += c * dx * vy;
                s.dy += c * vx * dy;
                s.dxx += c * ddx * vy;
                s.dxy += c * dx * dy;
                s.dyy += c * vx * ddy;
            }
        }
        s.dx /= self.hx;
        s.dy /= self.hy;
        s.dxx /= self.hx * self.hx;
        s.dxy /= self.hx * self.hy;
        s.dyy /= self.hy * self.hy;
        s
    }
}

/// Index of the first contributing node and the four (value, d/du, d²/du²)
/// basis weights at fractional grid coordinate `u`.
fn basis(u: f64, n: usize) -> (usize, [(f64, f64, f64); 4]) {
    let cell = u.floor();
    let t = u - cell;
    let first = (cell as i64 - 1).rem_euclid(n as i64) as usize;
    let s = 1.0 - t;
    (
        first,
        [
            (s * s * s / 6.0, -0.5 * s * s, s),
            ((3.0 * t * t * t - 6.0 * t * t + 4.0) / 6.0, 0.5 * (3.0 * t * t - 4.0 * t), 3.0 * t - 2.0),
            ((-3.0 * t * t * t + 3.0 * t * t + 3.0 * t + 1.0) / 6.0, 0.5 * (-3.0 * t * t + 2.0 * t + 1.0), 1.0 - 3.0 * t),
            (t * t * t / 6.0, 0.5 * t * t, t),
        ],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn interpolates_grid_values() {
        let (nx, ny) = (12, 10);
        let vals: Vec<f64> = (0..nx * ny).map(|k| ((k * 7) % 13) as f64 * 0.1).collect();
        let sp = PeriodicSpline2D::new(&vals, [nx, ny], [2.0, 1.0]);
        for k in 0..nx * ny {
            let (x, y) = ((k % nx) as f64 * 2.0 / nx as f64, (k / nx) as f64 / ny as f64);
            assert!((sp.eval(x, y).value - vals[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn smooth_field_and_derivatives() {
        let n = 64;
        let f = |x: f64, y: f64| (2.0 * PI * x).sin() * (2.0 * PI * y).cos();
        let vals: Vec<f64> = (0..n * n).map(|k| f((k % n) as f64 / n as f64, (k / n) as f64 / n as f64)).collect();
        let sp = PeriodicSpline2D::new(&vals, [n, n], [1.0, 1.0]);
        let (x, y) = (0.3712, 0.8123);
        let s = sp.eval(x, y);
        let w = 2.0 * PI;
        assert!((s.value - f(x, y)).abs() < 1e-6);
        assert!((s.dx - w * (w * x).cos() * (w * y).cos()).abs() < 1e-3);
        assert!((s.dxy + w * w * (w * x).cos() * (w * y).sin()).abs() < 5e-2);
    }
}
