//! Ground state of a Schrödinger-type operator by shifted inverse iteration.
//!
//! The operator is self-adjoint with respect to a diagonal measure `dv`, so
//! `M·(A − s)` is symmetric and the inner solves use conjugate gradients.

use super::linalg::conjugate_gradient;
use super::{weighted_dot, ToleranceConfig};
use crate::error::{LabError, Result};

#[derive(Debug, Clone)]
pub struct Eigenpair {
    pub value: f64,
    /// Normalized so that `∫ w² dv = 1` with a nonnegative mean.
    pub vector: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Smallest eigenpair of `apply_operator`, assumed bounded below by `potential_min`
/// (for `−4Δ + R` that is `min R`). The shift is `potential_min − 1`.
pub fn smallest_eigenpair<A>(apply_operator: A, measure: &[f64], potential_min: f64, tol: &ToleranceConfig) -> Result<Eigenpair>
where
    A: Fn(&[f64]) -> Vec<f64>,
{
    smallest_eigenpair_deflated(apply_operator, measure, potential_min, &[], tol)
}

/// As [`smallest_eigenpair`] but restricted to the `dv`-orthogonal complement
/// of `deflate` (which must be eigenvectors, e.g. constants for `−Δ`).
pub fn smallest_eigenpair_deflated<A>(
    apply_operator: A,
    measure: &[f64],
    potential_min: f64,
    deflate: &[Vec<f64>],
    tol: &ToleranceConfig,
) -> Result<Eigenpair>
where
    A: Fn(&[f64]) -> Vec<f64>,
{
    tol.validate()?;
    let n = measure.len();
    if n == 0 {
        return Err(LabError::InvalidArgument("empty measure".into()));
    }
    if let Some(bad) = deflate.iter().find(|d| d.len() != n) {
        return Err(LabError::DimensionMismatch { expected: n, got: bad.len() });
    }
    let shift = potential_min - 1.0;
    let basis = orthonormalize(deflate, measure);

    // a slightly non-constant start so deflated problems have a component to grow
    let mut w: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * ((i as f64) * 0.618_033_988_7).sin()).collect();
    project_out(&mut w, &basis, measure);
    normalize(&mut w, measure)?;

    let mut residuals = Vec::new();
    let cg_iters = (20 * n).max(200);
    for it in 1..=tol.max_iter {
        let rhs: Vec<f64> = w.iter().zip(measure).map(|(wi, mi)| wi * mi).collect();
        let apply_shifted = |x: &[f64], out: &mut [f64]| {
            let ax = apply_operator(x);
            for i in 0..n {
                out[i] = measure[i] * (ax[i] - shift * x[i]);
            }
        };
        let mut x = conjugate_gradient(apply_shifted, &rhs, Some(&w), 1e-14, 0.0, cg_iters)?;
        project_out(&mut x, &basis, measure);
        normalize(&mut x, measure)?;
        w = x;

        let aw = apply_operator(&w);
        let value = weighted_dot(&w, &aw, measure);
        let r: Vec<f64> = aw.iter().zip(&w).map(|(a, wi)| a - value * wi).collect();
        let residual = weighted_dot(&r, &r, measure).sqrt();
        residuals.push(residual);
        if residual <= tol.abs_tol * (1.0 + value.abs()) {
            let mean = weighted_dot(&w, &vec![1.0; n], measure);
            if mean < 0.0 {
                w.iter_mut().for_each(|v| *v = -*v);
            }
            return Ok(Eigenpair { value, vector: w, iterations: it, residual });
        }
    }
    Err(LabError::EigenNonConvergence { iterations: tol.max_iter, residuals })
}

fn normalize(w: &mut [f64], measure: &[f64]) -> Result<()> {
    let norm = weighted_dot(w, w, measure).sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(LabError::NonFinite { t: f64::NAN, detail: "eigenvector iterate collapsed".into() });
    }
    w.iter_mut().for_each(|v| *v /= norm);
    Ok(())
}

fn orthonormalize(vs: &[Vec<f64>], measure: &[f64]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for v in vs {
        let mut u = v.clone();
        project_out(&mut u, &out, measure);
        let norm = weighted_dot(&u, &u, measure).sqrt();
        if norm > 1e-300 {
            u.iter_mut().for_each(|x| *x /= norm);
            out.push(u);
        }
    }
    out
}

fn project_out(w: &mut [f64], basis: &[Vec<f64>], measure: &[f64]) {
    for b in basis {
        let c = weighted_dot(w, b, measure);
        for i in 0..w.len() {
            w[i] -= c * b[i];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn periodic_minus_4_laplacian(h: f64) -> impl Fn(&[f64]) -> Vec<f64> {
        move |w: &[f64]| {
            let n = w.len();
            (0..n)
                .map(|i| -4.0 * (w[(i + 1) % n] - 2.0 * w[i] + w[(i + n - 1) % n]) / (h * h))
                .collect()
        }
    }

    #[test]
    fn flat_kernel_is_constant() {
        let n = 32;
        let h = 1.0 / n as f64;
        let measure = vec![h; n];
        let tol = ToleranceConfig { abs_tol: 1e-10, ..Default::default() };
        let pair = smallest_eigenpair(periodic_minus_4_laplacian(h), &measure, 0.0, &tol).unwrap();
        assert!(pair.value.abs() < 1e-9);
        for v in &pair.vector {
            assert!((v - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn constant_potential_shifts_spectrum() {
        let n = 16;
        let h = 1.0 / n as f64;
        let measure = vec![h; n];
        let lap = periodic_minus_4_laplacian(h);
        let op = |w: &[f64]| lap(w).iter().zip(w).map(|(a, b)| a - 6.0 * b).collect::<Vec<_>>();
        let pair = smallest_eigenpair(op, &measure, -6.0, &ToleranceConfig::default()).unwrap();
        assert!((pair.value + 6.0).abs() < 1e-9);
    }

    #[test]
    fn singleton_grid() {
        let pair = smallest_eigenpair(|w: &[f64]| vec![-3.0 * w[0]], &[2.0], -3.0, &ToleranceConfig::default()).unwrap();
        assert!((pair.value + 3.0).abs() < 1e-14);
        assert!((pair.vector[0] - 0.5f64.sqrt()).abs() < 1e-14);
    }
}
