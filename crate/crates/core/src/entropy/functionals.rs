use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::geometry::MetricModel;
use crate::numerics::{smallest_eigenpair, weighted_dot, ToleranceConfig};

fn check_density(m: &MetricModel, u: &[f64]) -> Result<()> {
    if u.len() != m.field_len() {
        return Err(LabError::DimensionMismatch { expected: m.field_len(), got: u.len() });
    }
    if let Some(bad) = u.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(LabError::PositivityLoss { t: f64::NAN, min_u: *bad });
    }
    Ok(())
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(LabError::InvalidArgument(format!("sigma must be positive, got {sigma}")));
    }
    Ok(())
}

fn integrate(m: &MetricModel, f: &[f64]) -> f64 {
    weighted_dot(f, &vec![1.0; f.len()], &m.measure())
}

/// Pointwise Fisher density `|∇u|²/u`, discretized as `4|∇√u|²` so that its
/// integral is the Dirichlet form of `w = √u` used by the eigensolver.
pub fn fisher_density(m: &MetricModel, u: &[f64]) -> Result<Vec<f64>> {
    let w: Vec<f64> = u.iter().map(|v| v.sqrt()).collect();
    Ok(m.grad_sq(&w)?.into_iter().map(|g| 4.0 * g).collect())
}

/// `F(g, u) = ∫(|∇u|²/u + Ru) dv`.
pub fn f_functional(m: &MetricModel, u: &[f64]) -> Result<f64> {
    check_density(m, u)?;
    let fisher = fisher_density(m, u)?;
    let r = m.scalar_curvature();
    let integrand: Vec<f64> = (0..u.len()).map(|i| fisher[i] + r[i] * u[i]).collect();
    Ok(integrate(m, &integrand))
}

/// Nash entropy `N = ∫u log u dv` and `N₊ = N + (n/2)log(4πσ) + n/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Nash {
    pub n: f64,
    pub n_plus: f64,
}

pub fn nash_entropy(m: &MetricModel, u: &[f64], sigma: f64) -> Result<Nash> {
    check_density(m, u)?;
    check_sigma(sigma)?;
    let dim = m.dimension() as f64;
    let n = integrate(m, &u.iter().map(|v| v * v.ln()).collect::<Vec<_>>());
    Ok(Nash { n, n_plus: n + 0.5 * dim * (4.0 * PI * sigma).ln() + 0.5 * dim })
}

/// Both forms of the expander entropy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WPlus {
    /// `∫[σ(|∇u|²/u + Ru) + u log u] dv + (n/2)log(4πσ) + n`, equal to
    /// `σF + N₊ + n/2` with the same discrete Fisher term as `F`.
    pub value: f64,
    /// `∫[σ(|∇f₊|² + R) − f₊ + n]u dv` with `|∇f₊|²` differenced directly.
    pub second_form: f64,
}

impl WPlus {
    /// Discrepancy between the two forms; round-off on spatially constant
    /// densities, `O(h²)` on grids.
    pub fn form_gap(&self) -> f64 {
        (self.value - self.second_form).abs()
    }
}

pub fn w_plus(m: &MetricModel, u: &[f64], sigma: f64) -> Result<WPlus> {
    check_density(m, u)?;
    check_sigma(sigma)?;
    let dim = m.dimension() as f64;
    let shift = 0.5 * dim * (4.0 * PI * sigma).ln();
    let value = sigma * f_functional(m, u)? + nash_entropy(m, u, sigma)?.n + shift + dim;

    let f: Vec<f64> = u.iter().map(|v| -v.ln() - shift).collect();
    let g2 = m.grad_sq(&f)?;
    let r = m.scalar_curvature();
    let integrand: Vec<f64> = (0..u.len()).map(|i| (sigma * (g2[i] + r[i]) - f[i] + dim) * u[i]).collect();
    Ok(WPlus { value, second_form: integrate(m, &integrand) })
}

/// `∫2σu|Rc + ∇²f₊ + g/2σ|² dv`, the rate of change of `W₊` along the flow.
pub fn expander_residual_rhs(m: &MetricModel, u: &[f64], sigma: f64) -> Result<f64> {
    check_density(m, u)?;
    check_sigma(sigma)?;
    let shift = 0.5 * m.dimension() as f64 * (4.0 * PI * sigma).ln();
    let f: Vec<f64> = u.iter().map(|v| -v.ln() - shift).collect();
    let norm = m.soliton_norm_sq(&f, 0.5 / sigma)?;
    let integrand: Vec<f64> = (0..u.len()).map(|i| 2.0 * sigma * u[i] * norm[i]).collect();
    Ok(integrate(m, &integrand))
}

/// Ground state of `−4Δ + R` on one slice.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaResult {
    pub lambda: f64,
    /// `V^{2/n}λ`.
    pub lambda_bar: f64,
    /// Positive `w` with `∫w² dv = 1`; the minimizing density is `w²`.
    pub ground_state: Vec<f64>,
}

pub fn lambda(m: &MetricModel, tol: &ToleranceConfig) -> Result<LambdaResult> {
    let r = m.scalar_curvature();
    let r_min = r.iter().copied().fold(f64::INFINITY, f64::min);
    let measure = m.measure();
    let pair = match m {
        MetricModel::ConformalTorus(t) => {
            let apply = |w: &[f64]| -> Vec<f64> {
                let lap = t.flat_laplacian(w);
                (0..w.len()).map(|i| -4.0 * (-2.0 * t.phi[i]).exp() * lap[i] + r[i] * w[i]).collect()
            };
            smallest_eigenpair(apply, &measure, r_min, tol)?
        }
        _ => smallest_eigenpair(|w: &[f64]| vec![r[0] * w[0]], &measure, r_min, tol)?,
    };
    let ground_state = pair.vector;
    let dim = m.dimension() as f64;
    Ok(LambdaResult {
        lambda: pair.value,
        lambda_bar: m.volume().powf(2.0 / dim) * pair.value,
        ground_state,
    })
}

pub fn lambda_bar(m: &MetricModel, tol: &ToleranceConfig) -> Result<f64> {
    Ok(lambda(m, tol)?.lambda_bar)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ConformalTorusMetric, ModelSpaceMetric};

    fn hyperbolic_at(t: f64) -> MetricModel {
        MetricModel::ModelSpace(ModelSpaceMetric::hyperbolic3(1.0 + 4.0 * t, 1.0))
    }

    #[test]
    fn flat_torus_uniform_density() {
        let m = MetricModel::ConformalTorus(ConformalTorusMetric::flat([16, 16], [2.0, 1.0]).unwrap());
        let u = vec![0.5; 256];
        assert!(f_functional(&m, &u).unwrap().abs() < 1e-15);
        let nash = nash_entropy(&m, &u, 1.0).unwrap();
        assert!((nash.n + 2f64.ln()).abs() < 1e-14);
        let t = 0.7;
        let w = w_plus(&m, &u, t).unwrap();
        assert!((w.value - (-(2f64.ln()) + (4.0 * PI * t).ln() + 2.0)).abs() < 1e-13);
        assert!(w.form_gap() < 1e-13);
        assert!((expander_residual_rhs(&m, &u, t).unwrap() - 1.0 / t).abs() < 1e-12);
    }

    #[test]
    fn hyperbolic_expander_w_plus_is_constant() {
        let expect = 1.5 + 1.5 * PI.ln();
        for t in [0.1, 1.0, 10.0, 100.0] {
            let m = hyperbolic_at(t);
            let u = [1.0 / m.volume()];
            let w = w_plus(&m, &u, t + 0.25).unwrap();
            assert!((w.value - expect).abs() < 1e-12, "t = {t}: {}", w.value);
            assert!(w.form_gap() < 1e-12);
            assert!(expander_residual_rhs(&m, &u, t + 0.25).unwrap() < 1e-12);
            assert!((f_functional(&m, &u).unwrap() + 6.0 / (1.0 + 4.0 * t)).abs() < 1e-14);
        }
    }

    #[test]
    fn lambda_on_constant_curvature() {
        let tol = ToleranceConfig::default();
        for t in [0.0, 1.0, 5.0] {
            let l = lambda(&hyperbolic_at(t), &tol).unwrap();
            assert!((l.lambda + 6.0 / (1.0 + 4.0 * t)).abs() < 1e-12);
            assert!((l.lambda_bar + 6.0).abs() < 1e-12);
        }
        let flat = MetricModel::ConformalTorus(ConformalTorusMetric::flat([16, 16], [1.0, 1.0]).unwrap());
        let l = lambda(&flat, &tol).unwrap();
        assert!(l.lambda.abs() < 1e-10);
        assert!(l.ground_state.iter().all(|w| (w - 1.0).abs() < 1e-8));
    }

    #[test]
    fn decomposition_and_scale_invariance() {
        let m = MetricModel::ConformalTorus(
            ConformalTorusMetric::from_fn([16, 16], [1.0, 1.0], |x, y| 0.2 * (2.0 * PI * x).sin() + 0.1 * (2.0 * PI * y).cos())
                .unwrap(),
        );
        let raw: Vec<f64> = (0..256).map(|k| 1.0 + 0.3 * ((k as f64) * 0.37).sin()).collect();
        let mass = integrate(&m, &raw);
        let u: Vec<f64> = raw.iter().map(|v| v / mass).collect();
        let sigma = 0.8;
        let w = w_plus(&m, &u, sigma).unwrap();
        let f = f_functional(&m, &u).unwrap();
        let nash = nash_entropy(&m, &u, sigma).unwrap();
        assert!((w.value - (sigma * (f + 1.0 / sigma) + nash.n_plus)).abs() < 1e-10);

        let alpha = 3.5;
        let ms = m.scaled(alpha);
        let us: Vec<f64> = u.iter().map(|v| v / alpha).collect();
        let ws = w_plus(&ms, &us, alpha * sigma).unwrap();
        assert!((ws.value - w.value).abs() < 1e-10);
    }
}
