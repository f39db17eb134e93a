//! `μ₊(g, σ) = inf_u W₊(g, u, σ)` and `ν₊(g) = sup_σ μ₊(g, σ)`.
//!
//! With `u = w²` the entropy is `∫[σ(4|∇w|² + Rw²) + w² log w²] dv` plus a
//! constant, minimized on the sphere `∫w² dv = 1`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::functionals::lambda;
use crate::error::Result;
use crate::geometry::{ConformalTorusMetric, MetricModel};
use crate::numerics::linalg::conjugate_gradient;
use crate::numerics::{
    maximize_concave_1d, minimize_constrained, weighted_dot, ConcaveMax, ConstrainedProblem, ToleranceConfig,
};

#[derive(Debug, Clone, PartialEq)]
pub struct MuPlus {
    pub sigma: f64,
    pub value: f64,
    /// Minimizing unit-mass density.
    pub minimizer: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub gradient_norm: f64,
}

fn sigma_constant(n: usize, sigma: f64) -> f64 {
    0.5 * n as f64 * (4.0 * PI * sigma).ln() + n as f64
}

pub fn mu_plus(m: &MetricModel, sigma: f64, tol: &ToleranceConfig) -> Result<MuPlus> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(crate::LabError::InvalidArgument(format!("sigma must be positive, got {sigma}")));
    }
    let n = m.dimension();
    match m {
        MetricModel::ConformalTorus(t) => mu_plus_torus(m, t, sigma, tol),
        other => {
            // one feasible density: the constant
            let v = other.volume();
            let r = other.scalar_curvature()[0];
            Ok(MuPlus {
                sigma,
                value: sigma * r - v.ln() + sigma_constant(n, sigma),
                minimizer: vec![1.0 / v],
                converged: true,
                iterations: 0,
                gradient_norm: 0.0,
            })
        }
    }
}

fn mu_plus_torus(m: &MetricModel, t: &ConformalTorusMetric, sigma: f64, tol: &ToleranceConfig) -> Result<MuPlus> {
    let measure = t.measure();
    let cell = t.cell_area();
    let r = t.scalar_curvature();
    let len = t.len();

    let functional = |w: &[f64]| -> f64 {
        if w.iter().any(|x| !(*x > 0.0)) {
            return f64::INFINITY;
        }
        let dirichlet: f64 = crate::numerics::ordered_sum(t.flat_grad_sq(w).into_iter().map(|g| 4.0 * g * cell));
        let rest: Vec<f64> = (0..len).map(|i| sigma * r[i] * w[i] * w[i] + w[i] * w[i] * (w[i] * w[i]).ln()).collect();
        sigma * dirichlet + weighted_dot(&rest, &vec![1.0; len], &measure)
    };
    let gradient = |w: &[f64]| -> Vec<f64> {
        let lap = t.flat_laplacian(w);
        (0..len)
            .map(|i| {
                let lg = (-2.0 * t.phi[i]).exp() * lap[i];
                sigma * (-8.0 * lg + 2.0 * r[i] * w[i]) + 2.0 * w[i] * (w[i] * w[i]).ln() + 2.0 * w[i]
            })
            .collect()
    };
    let normalize = |w: &[f64]| -> Vec<f64> {
        let s = weighted_dot(w, w, &measure).sqrt();
        w.iter().map(|x| x / s).collect()
    };
    // (−8σΔ + c)⁻¹ in the dv inner product
    let r_max = r.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let c = 2.0 + 2.0 * sigma * r_max;
    let weight = t.conformal_factor();
    let precondition = |g: &[f64]| -> Vec<f64> {
        let rhs: Vec<f64> = (0..len).map(|i| weight[i] * g[i]).collect();
        let apply = |x: &[f64], out: &mut [f64]| {
            let lap = t.flat_laplacian(x);
            for i in 0..len {
                out[i] = c * weight[i] * x[i] - 8.0 * sigma * lap[i];
            }
        };
        conjugate_gradient(apply, &rhs, None, 1e-10, 0.0, 10 * len).unwrap_or_else(|_| g.to_vec())
    };
    let problem = ConstrainedProblem {
        functional: &functional,
        gradient: &gradient,
        normalize: &normalize,
        measure: &measure,
        precondition: Some(&precondition),
    };

    let mut starts = vec![vec![1.0; len]];
    if let Ok(l) = lambda(m, tol) {
        if l.ground_state.iter().all(|w| *w > 0.0) {
            starts.push(l.ground_state);
        }
    }
    let mut best = None;
    for w0 in &starts {
        let run = minimize_constrained(&problem, w0, tol)?;
        let better = match &best {
            None => true,
            Some(b) => {
                let b: &crate::numerics::ConstrainedMin = b;
                (run.converged && !b.converged) || (run.converged == b.converged && run.value < b.value)
            }
        };
        if better {
            best = Some(run);
        }
    }
    let best = best.expect("at least one start");
    Ok(MuPlus {
        sigma,
        value: best.value + sigma_constant(2, sigma),
        minimizer: best.minimizer.iter().map(|w| w * w).collect(),
        converged: best.converged,
        iterations: best.iterations,
        gradient_norm: best.projected_gradient_norm,
    })
}

/// Outcome of maximizing `μ₊` over `σ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum NuPlus {
    Attained { sigma: f64, value: f64, lambda: f64, inner_converged: bool },
    /// `μ₊` kept increasing through every bracket expansion (expected when `λ ≥ 0`).
    Unbounded { lambda: f64, last_sigma: f64, last_value: f64 },
}

impl NuPlus {
    pub fn value(&self) -> Option<f64> {
        match self {
            NuPlus::Attained { value, .. } => Some(*value),
            NuPlus::Unbounded { .. } => None,
        }
    }

    pub fn sigma(&self) -> Option<f64> {
        match self {
            NuPlus::Attained { sigma, .. } => Some(*sigma),
            NuPlus::Unbounded { .. } => None,
        }
    }

    pub fn is_unbounded(&self) -> bool {
        matches!(self, NuPlus::Unbounded { .. })
    }
}

pub fn nu_plus(m: &MetricModel, tol: &ToleranceConfig) -> Result<NuPlus> {
    let lam = lambda(m, tol)?.lambda;
    // for constant curvature the peak sits at σ = n/(2|λ|)
    let guess = if lam < 0.0 { 0.5 * m.dimension() as f64 / -lam } else { 1.0 };
    let all_converged = std::cell::Cell::new(true);
    let profile = |s: f64| match mu_plus(m, s, tol) {
        Ok(mu) => {
            if !mu.converged {
                all_converged.set(false);
            }
            mu.value
        }
        Err(_) => f64::NEG_INFINITY,
    };
    Ok(match maximize_concave_1d(profile, (0.25 * guess, guess), tol)? {
        ConcaveMax::Maximum { arg, value, .. } => {
            NuPlus::Attained { sigma: arg, value, lambda: lam, inner_converged: all_converged.get() }
        }
        ConcaveMax::Unbounded { last_arg, last_value } => {
            NuPlus::Unbounded { lambda: lam, last_sigma: last_arg, last_value }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::functionals::w_plus;
    use crate::geometry::ModelSpaceMetric;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tol() -> ToleranceConfig {
        ToleranceConfig { abs_tol: 1e-8, rel_tol: 1e-10, max_iter: 2000, fd_step: 1e-4 }
    }

    #[test]
    fn flat_torus_mu_is_closed_form() {
        let m = MetricModel::ConformalTorus(ConformalTorusMetric::flat([16, 16], [1.5, 1.0]).unwrap());
        let sigma = 0.3;
        let mu = mu_plus(&m, sigma, &tol()).unwrap();
        let expect = -(1.5f64.ln()) + (4.0 * PI * sigma).ln() + 2.0;
        assert!(mu.converged);
        assert!((mu.value - expect).abs() < 1e-10);
        assert!(mu.minimizer.iter().all(|u| (u - 1.0 / 1.5).abs() < 1e-8));
        assert!(nu_plus(&m, &tol()).unwrap().is_unbounded());
    }

    #[test]
    fn hyperbolic_nu_peaks_at_quarter() {
        let m = MetricModel::ModelSpace(ModelSpaceMetric::hyperbolic3(1.0, 1.0));
        let nu = nu_plus(&m, &tol()).unwrap();
        assert!((nu.sigma().unwrap() - 0.25).abs() < 1e-6);
        assert!((nu.value().unwrap() - (1.5 + 1.5 * PI.ln())).abs() < 1e-10);
    }

    #[test]
    fn mu_below_random_densities() {
        let m = MetricModel::ConformalTorus(
            ConformalTorusMetric::from_fn([16, 16], [1.0, 1.0], |x, _| 0.3 * (2.0 * PI * x).sin()).unwrap(),
        );
        let sigma = 0.5;
        let mu = mu_plus(&m, sigma, &ToleranceConfig { abs_tol: 1e-7, ..tol() }).unwrap();
        assert!(mu.converged, "{} after {}", mu.gradient_norm, mu.iterations);
        let measure = m.measure();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let raw: Vec<f64> = (0..256).map(|_| rng.gen_range(0.2..2.0)).collect();
            let mass = weighted_dot(&raw, &vec![1.0; 256], &measure);
            let u: Vec<f64> = raw.iter().map(|v| v / mass).collect();
            assert!(mu.value <= w_plus(&m, &u, sigma).unwrap().value + 1e-12);
        }
        let uniform = vec![1.0 / m.volume(); 256];
        assert!(mu.value <= w_plus(&m, &uniform, sigma).unwrap().value);
    }
}
