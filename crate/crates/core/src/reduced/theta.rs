//! Forward reduced volume `θ₊(t) = ∫ e^{ℓ₊}(4πt)^{-n/2} dv` and the Hessian
//! comparison for nonnegative curvature operator.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::field::{ReducedOptions, ReducedSolver};
use super::geometry::{curvature_operator_nonneg_on, ReducedGeometry};
use crate::error::{LabError, Result};
use crate::flow::{scaled_volume, FlowHistory};
use crate::numerics::least_squares;
use crate::numerics::quadrature::GL5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaOptions {
    /// Regularizations tried; with more than one the result is extrapolated
    /// to `ε = 0` by a polynomial in `√ε` (degree up to two).
    pub epsilons: Vec<f64>,
    /// Gauss panels over the radius of a model ball.
    pub radial_panels: usize,
}

impl ThetaOptions {
    /// Three regularizations for flows with a vertex at `t = 0`, none otherwise.
    pub fn for_history(h: &FlowHistory) -> Self {
        let vertex = h.kind() == "model_space" && h.model_scale_at(0.0).is_err();
        Self { epsilons: if vertex { vec![1e-3, 1e-4, 1e-5] } else { vec![0.0] }, radial_panels: 24 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaSeries {
    pub times: Vec<f64>,
    pub theta: Vec<f64>,
    /// `Ṽ/(4πe)^{n/2}`.
    pub lower_bound: Vec<f64>,
    pub epsilons: Vec<f64>,
    /// `θ₊` at each time for each regularization, before extrapolation.
    pub per_epsilon: Vec<Vec<f64>>,
}

impl ThetaSeries {
    /// Largest step-to-step increase (zero when nonincreasing).
    pub fn max_increase(&self) -> f64 {
        self.theta.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    /// Smallest `θ₊ − Ṽ/(4πe)^{n/2}`.
    pub fn lower_bound_margin(&self) -> f64 {
        self.theta.iter().zip(&self.lower_bound).map(|(a, b)| a - b).fold(f64::INFINITY, f64::min)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,theta_plus,lower_bound\n");
        for i in 0..self.times.len() {
            out.push_str(&format!("{:.12e},{:.12e},{:.12e}\n", self.times[i], self.theta[i], self.lower_bound[i]));
        }
        out
    }
}

fn theta_once(solver: &ReducedSolver<'_>, t: f64, panels: usize) -> Result<f64> {
    let n = solver.geometry.manifold_dimension();
    let kernel = (4.0 * PI * t).powf(-0.5 * n as f64);
    match &solver.geometry {
        ReducedGeometry::Radial(model) => {
            // geodesic ball of the unit model with the flow's volume
            let radius = model.ball_radius();
            let a = model.scale(t)?;
            let h = radius / panels as f64;
            let nodes: Vec<(f64, f64)> = (0..panels)
                .flat_map(|p| GL5.iter().map(move |&(x, w)| ((p as f64 + 0.5 + 0.5 * x) * h, 0.5 * w * h)))
                .collect();
            let terms = nodes
                .par_iter()
                .map(|&(r, w)| Ok(w * model.sphere_area(r) * solver.ell(&[r], t)?.exp()))
                .collect::<Result<Vec<f64>>>()?;
            Ok(kernel * a.powf(0.5 * n as f64) * terms.iter().sum::<f64>())
        }
        ReducedGeometry::Torus(_) => {
            let m = solver.history.metric_at(t)?;
            let tm = m.as_torus().expect("torus history");
            let measure = tm.measure();
            let terms = (0..tm.len())
                .into_par_iter()
                .map(|k| {
                    let (x, y) = tm.coords(k);
                    Ok(measure[k] * solver.ell(&[x, y], t)?.exp())
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(kernel * crate::numerics::ordered_sum(terms))
        }
    }
}

/// `θ₊` based at `(base, 0)` on every time in `times`. Model spaces are
/// integrated over the geodesic ball of the same volume; tori over the
/// flow grid.
pub fn theta_plus(h: &FlowHistory, base: &[f64], times: &[f64], opts: &ThetaOptions) -> Result<ThetaSeries> {
    if opts.epsilons.is_empty() {
        return Err(LabError::InvalidArgument("theta needs at least one regularization".into()));
    }
    let n = h.dimension() as f64;
    let mut per_epsilon = Vec::with_capacity(opts.epsilons.len());
    for &eps in &opts.epsilons {
        let solver = ReducedSolver::new(h, base, ReducedOptions { epsilon: eps, ..ReducedOptions::default() })?;
        let row = times.iter().map(|&t| theta_once(&solver, t, opts.radial_panels.max(1))).collect::<Result<Vec<_>>>()?;
        per_epsilon.push(row);
    }
    let theta = if opts.epsilons.len() == 1 {
        per_epsilon[0].clone()
    } else {
        let xs: Vec<f64> = opts.epsilons.iter().map(|e| e.sqrt()).collect();
        let one = |_: f64| 1.0;
        let lin = |x: f64| x;
        let quad = |x: f64| x * x;
        let basis: Vec<&dyn Fn(f64) -> f64> = if xs.len() >= 3 { vec![&one, &lin, &quad] } else { vec![&one, &lin] };
        (0..times.len())
            .map(|i| {
                let ys: Vec<f64> = per_epsilon.iter().map(|row| row[i]).collect();
                Ok(least_squares(&xs, &ys, &basis)?[0])
            })
            .collect::<Result<Vec<_>>>()?
    };
    let scale = (4.0 * PI * std::f64::consts::E).powf(0.5 * n);
    let lower_bound = times.iter().map(|&t| Ok(scaled_volume(h, t)? / scale)).collect::<Result<Vec<_>>>()?;
    Ok(ThetaSeries { times: times.to_vec(), theta, lower_bound, epsilons: opts.epsilons.clone(), per_epsilon })
}

/// One second-derivative comparison `∇²L₊(Y, Y) ≤ |Y|²/√t + 2√t Rc(Y, Y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HessianSample {
    pub point: Vec<f64>,
    /// Direction label: angle to the radial direction on model spaces,
    /// coordinate direction on the torus.
    pub direction: Vec<f64>,
    pub hessian: f64,
    pub bound: f64,
}

impl HessianSample {
    pub fn margin(&self) -> f64 {
        self.bound - self.hessian
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HessianCheck {
    pub t: f64,
    pub samples: Vec<HessianSample>,
    pub min_margin: f64,
}

/// Finite-difference Hessian of `L₊` along geodesics of `g(t)` through each
/// target, compared with the bound that holds under nonnegative curvature
/// operator. Refuses flows without that property.
pub fn hessian_comparison(h: &FlowHistory, base: &[f64], t: f64, targets: &[Vec<f64>], step: f64) -> Result<HessianCheck> {
    let probe_times: Vec<f64> = (0..=8).map(|k| h.t_start() + (t - h.t_start()) * k as f64 / 8.0).collect();
    if !curvature_operator_nonneg_on(h, &probe_times)? {
        return Err(LabError::Unsupported("the Hessian bound needs nonnegative curvature operator".into()));
    }
    let solver = ReducedSolver::new(h, base, ReducedOptions::default())?;
    let length = |y: &[f64]| -> Result<f64> { Ok(solver.solve(y, t)?.geodesic.l_plus) };
    let second = |f: &dyn Fn(f64) -> Result<f64>| -> Result<f64> {
        let (a, b, c, d, e) = (f(-2.0 * step)?, f(-step)?, f(0.0)?, f(step)?, f(2.0 * step)?);
        Ok((-a + 16.0 * b - 30.0 * c + 16.0 * d - e) / (12.0 * step * step))
    };
    let mut samples = Vec::new();
    match &solver.geometry {
        ReducedGeometry::Radial(model) => {
            let a = model.scale(t)?;
            let rho0 = model.rho0();
            // Y unit in the unit model metric: |Y|²_g = a, Rc(Y, Y) = ρ₀
            let bound = a / t.sqrt() + 2.0 * t.sqrt() * rho0;
            for y in targets {
                let r = y[0];
                for beta in [0.0, 0.25 * PI, 0.5 * PI] {
                    // distance to the centre after moving h along the great
                    // circle leaving the target at angle β to the radius
                    let dist = |s: f64| -> f64 {
                        match model.sectional_sign {
                            1 => (r.cos() * s.cos() - r.sin() * s.sin() * beta.cos()).clamp(-1.0, 1.0).acos(),
                            _ => (r * r + s * s + 2.0 * r * s * beta.cos()).sqrt(),
                        }
                    };
                    let hess = second(&|s| length(&[dist(s)]))?;
                    samples.push(HessianSample { point: y.clone(), direction: vec![beta], hessian: hess, bound });
                }
            }
        }
        ReducedGeometry::Torus(field) => {
            for y in targets {
                let f = field.sample(y[0], y[1], t);
                for dir in [[1.0, 0.0], [0.0, 1.0], [std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2]] {
                    let hess = second(&|s| length(&[y[0] + s * dir[0], y[1] + s * dir[1]]))?;
                    // coordinate Hessian differs from ∇² by Christoffel terms
                    // in ∇L, which vanish only where φ is flat; keep them
                    let sol = solver.solve(y, t)?;
                    let grad = &sol.geodesic.gradient;
                    let dphi = [0.5 * f.dw[0] / f.w, 0.5 * f.dw[1] / f.w];
                    let (yx, yy) = (dir[0], dir[1]);
                    // Γ^k_{ij}Y^iY^j for g = e^{2φ}δ
                    let gamma_x = 2.0 * dphi[0] * yx * yx + 2.0 * dphi[1] * yx * yy - dphi[0] * (yx * yx + yy * yy);
                    let gamma_y = 2.0 * dphi[1] * yy * yy + 2.0 * dphi[0] * yx * yy - dphi[1] * (yx * yx + yy * yy);
                    let covariant = hess - (gamma_x * grad[0] + gamma_y * grad[1]);
                    let norm = f.w;
                    let bound = norm / t.sqrt() + 2.0 * t.sqrt() * f.ric_factor * norm;
                    samples.push(HessianSample { point: y.clone(), direction: dir.to_vec(), hessian: covariant, bound });
                }
            }
        }
    }
    let min_margin = samples.iter().map(|s| s.margin()).fold(f64::INFINITY, f64::min);
    Ok(HessianCheck { t, samples, min_margin })
}
