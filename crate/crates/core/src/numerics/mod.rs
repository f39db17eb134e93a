//! Deterministic numerical kernels shared by every other module.
//!
//! Everything here is pure: no global state, no interior mutability, and all
//! reductions run left to right so that reports are bitwise reproducible.

mod eigen;
mod fdcheck;
pub mod linalg;
mod ode;
mod optimize;
pub mod quadrature;

pub use eigen::{smallest_eigenpair, smallest_eigenpair_deflated, Eigenpair};
pub use fdcheck::{fd_residual, ConvergenceReport, LevelResidual};
pub use ode::{integrate_ode, integrate_ode_until, OdeRun, OdeSolution};
pub use optimize::{
    maximize_concave_1d, minimize_constrained, ConcaveMax, ConstrainedMin, ConstrainedProblem,
};

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Tolerances shared by the iterative kernels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToleranceConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_iter: usize,
    pub fd_step: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self { abs_tol: 1e-10, rel_tol: 1e-10, max_iter: 10_000, fd_step: 1e-4 }
    }
}

impl ToleranceConfig {
    pub fn new(abs_tol: f64, rel_tol: f64, max_iter: usize, fd_step: f64) -> Result<Self> {
        let tol = Self { abs_tol, rel_tol, max_iter, fd_step };
        tol.validate()?;
        Ok(tol)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.abs_tol) || !positive(self.rel_tol) || !positive(self.fd_step) {
            return Err(LabError::InvalidTolerance(format!(
                "abs_tol, rel_tol and fd_step must be positive and finite: {self:?}"
            )));
        }
        if self.max_iter == 0 {
            return Err(LabError::InvalidTolerance("max_iter must be at least 1".into()));
        }
        Ok(())
    }

    /// Same configuration with both tolerances replaced.
    pub fn with_tol(self, abs_tol: f64, rel_tol: f64) -> Self {
        Self { abs_tol, rel_tol, ..self }
    }
}

/// A scalar quantity sampled at strictly increasing times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(LabError::InvalidSeries(format!(
                "{} times but {} values",
                times.len(),
                values.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(LabError::InvalidSeries("times must be strictly increasing".into()));
        }
        Ok(Self { times, values })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<(f64, f64)> {
        Some((*self.times.last()?, *self.values.last()?))
    }

    /// Largest increase between consecutive samples (0 for a nonincreasing series).
    pub fn max_increase(&self) -> f64 {
        self.values.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    /// Largest decrease between consecutive samples (0 for a nondecreasing series).
    pub fn max_decrease(&self) -> f64 {
        self.values.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max)
    }

    pub fn is_nonincreasing(&self, tol: f64) -> bool {
        self.max_increase() <= tol
    }

    pub fn is_nondecreasing(&self, tol: f64) -> bool {
        self.max_decrease() <= tol
    }

    /// Spread max − min of the values.
    pub fn spread(&self) -> f64 {
        let (lo, hi) = self
            .values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        if self.values.is_empty() {
            0.0
        } else {
            hi - lo
        }
    }
}

/// Fixed-order sum; every reduction in the crate goes through here or an
/// equivalent left-to-right loop.
#[inline]
pub fn ordered_sum<I: IntoIterator<Item = f64>>(items: I) -> f64 {
    let mut acc = 0.0;
    for v in items {
        acc += v;
    }
    acc
}

/// `∫ a·b dv` with a diagonal measure.
#[inline]
pub fn weighted_dot(a: &[f64], b: &[f64], measure: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..a.len() {
        acc += a[i] * b[i] * measure[i];
    }
    acc
}

/// Least-squares fit of `y ≈ Σ c_k b_k(x)` for a small basis; returns the coefficients.
pub fn least_squares(xs: &[f64], ys: &[f64], basis: &[&dyn Fn(f64) -> f64]) -> Result<Vec<f64>> {
    let m = basis.len();
    if xs.len() < m || xs.len() != ys.len() {
        return Err(LabError::InvalidArgument(format!(
            "least squares needs at least {m} matching samples"
        )));
    }
    let mut normal = vec![vec![0.0; m]; m];
    let mut rhs = vec![0.0; m];
    for (&x, &y) in xs.iter().zip(ys) {
        let row: Vec<f64> = basis.iter().map(|b| b(x)).collect();
        for i in 0..m {
            rhs[i] += row[i] * y;
            for j in 0..m {
                normal[i][j] += row[i] * row[j];
            }
        }
    }
    linalg::solve_dense(normal, rhs)
}
