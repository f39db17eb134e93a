//! `L₊`-geodesics and the length functional.
//!
//! Paths are handled in `s = √η`, where the action becomes
//! `∫(2s²R + w|x_s|²/2) ds` and the geodesic equation is regular at the base:
//! `(w x_s)_s = 2s²∇R + ∇w|x_s|²/2`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::geometry::{FieldSample, ReducedGeometry};
use crate::error::{LabError, Result};
use crate::numerics::linalg::solve_tridiagonal;
use crate::numerics::quadrature::GL5;
use crate::numerics::{integrate_ode, ToleranceConfig};

/// How positions are joined between consecutive nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    /// Constant coordinate velocity in `η` on each segment.
    LinearInEta,
    /// Constant coordinate velocity in `s = √η`; minimizers are close to
    /// this near the base, where `ẋ ~ η^{-1/2}`.
    LinearInSqrtEta,
}

/// A path `η ↦ x(η)` sampled on an increasing grid. `positions[k]` has one
/// coordinate (radial distance) on model spaces and two on the torus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub eta: Vec<f64>,
    pub positions: Vec<Vec<f64>>,
    pub interpolation: Interpolation,
}

impl PathSample {
    fn validate(&self, dim: usize) -> Result<()> {
        if self.eta.len() < 2 || self.eta.len() != self.positions.len() {
            return Err(LabError::InvalidArgument("a path needs at least two nodes and one position per node".into()));
        }
        if self.eta[0] < 0.0 || self.eta.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(LabError::InvalidArgument("path times must start at η ≥ 0 and increase".into()));
        }
        if let Some(p) = self.positions.iter().find(|p| p.len() != dim) {
            return Err(LabError::DimensionMismatch { expected: dim, got: p.len() });
        }
        Ok(())
    }
}

/// Contribution of `[0, ε]` when the path starts at `η = ε > 0`: the lower
/// bound `∫₀^ε √η R dη ≥ −n√ε` from `R ≥ −n/2η`, exact on expanders born at 0.
pub fn vertex_head(n: usize, eps: f64) -> f64 {
    -(n as f64) * eps.sqrt()
}

fn segment_action(g: &ReducedGeometry, path: &PathSample, k: usize) -> Result<f64> {
    let (ea, eb) = (path.eta[k], path.eta[k + 1]);
    let (sa, sb) = (ea.sqrt(), eb.sqrt());
    let (xa, xb) = (&path.positions[k], &path.positions[k + 1]);
    let dim = xa.len();
    let half = 0.5 * (sb - sa);
    let mut acc = 0.0;
    let mut x = vec![0.0; dim];
    for &(node, weight) in &GL5 {
        let s = sa + half * (1.0 + node);
        let eta = s * s;
        // weight of the segment and its s-derivative
        let (frac, dfrac_ds) = match path.interpolation {
            Interpolation::LinearInEta => ((eta - ea) / (eb - ea), 2.0 * s / (eb - ea)),
            Interpolation::LinearInSqrtEta => ((s - sa) / (sb - sa), 1.0 / (sb - sa)),
        };
        let mut speed = 0.0;
        for i in 0..dim {
            x[i] = xa[i] + (xb[i] - xa[i]) * frac;
            let xs = (xb[i] - xa[i]) * dfrac_ds;
            speed += xs * xs;
        }
        let f = g.sample(&x, eta)?;
        acc += weight * half * (2.0 * s * s * f.r + 0.5 * f.w * speed);
    }
    Ok(acc)
}

/// `∫√η(R + |γ'|²) dη` along a sampled path, with the head on `[0, η₀]`
/// from [`vertex_head`] when the path starts after the base time.
pub fn l_plus_of_path(g: &ReducedGeometry, path: &PathSample) -> Result<f64> {
    path.validate(g.dim())?;
    let mut total = if path.eta[0] > 0.0 { vertex_head(g.manifold_dimension(), path.eta[0]) } else { 0.0 };
    for k in 0..path.eta.len() - 1 {
        total += segment_action(g, path, k)?;
    }
    Ok(total)
}

/// An `L₊`-geodesic from the base point, integrated from its initial
/// velocity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeodesicSolution {
    /// Integrator nodes, joined linearly in `√η`.
    pub path: PathSample,
    /// `√η X` at each node; finite at the base, where `X` itself blows up.
    pub scaled_velocity: Vec<Vec<f64>>,
    /// `lim_{η→0} √η X`.
    pub initial_velocity: Vec<f64>,
    pub l_plus: f64,
    /// `∫η^{3/2}H(X) dη`.
    pub k: f64,
    /// `H(X) = R_t + 2⟨∇R, X⟩ + 2Rc(X, X) + R/η` at the nodes after the base.
    pub h_values: Vec<f64>,
    /// Coordinate covector `2√t X^♭`, the gradient of `L₊` at the endpoint.
    pub gradient: Vec<f64>,
    /// `|X|²_g` and `R` at the endpoint.
    pub speed_sq: f64,
    pub r_end: f64,
    pub epsilon: f64,
}

impl GeodesicSolution {
    pub fn endpoint(&self) -> &[f64] {
        self.path.positions.last().expect("nonempty path")
    }

    pub fn t(&self) -> f64 {
        *self.path.eta.last().expect("nonempty path")
    }

    pub fn ell(&self) -> f64 {
        self.l_plus / (2.0 * self.t().sqrt())
    }

    /// Trace with columns `η`, position, `√η X`, `H(X)`.
    pub fn to_csv(&self) -> String {
        let dim = self.initial_velocity.len();
        let mut out: String = (0..dim).map(|i| format!("x{i},")).collect();
        out = format!("eta,{out}");
        out.push_str(&(0..dim).map(|i| format!("scaled_v{i},")).collect::<String>());
        out.push_str("h\n");
        let offset = self.path.eta.len() - self.h_values.len();
        for k in 0..self.path.eta.len() {
            out.push_str(&format!("{:.12e},", self.path.eta[k]));
            for v in self.path.positions[k].iter().chain(&self.scaled_velocity[k]) {
                out.push_str(&format!("{v:.12e},"));
            }
            let h = if k >= offset { format!("{:.12e}", self.h_values[k - offset]) } else { String::new() };
            out.push_str(&h);
            out.push('\n');
        }
        out
    }

    /// `|t^{3/2}(R + |X|²) − K − L₊/2|`, zero along exact geodesics.
    pub fn k_identity_residual(&self) -> f64 {
        let t = self.t();
        (t.powf(1.5) * (self.r_end + self.speed_sq) - self.k - 0.5 * self.l_plus).abs()
    }
}

fn ode_tol() -> ToleranceConfig {
    ToleranceConfig { abs_tol: 1e-13, rel_tol: 1e-12, max_iter: 20_000, fd_step: 1e-4 }
}

fn h_of(f: &FieldSample, xdot: &[f64], eta: f64) -> f64 {
    let mut dot = 0.0;
    let mut sq = 0.0;
    for i in 0..xdot.len() {
        dot += f.dr[i] * xdot[i];
        sq += xdot[i] * xdot[i];
    }
    f.r_t + 2.0 * dot + 2.0 * f.ric_factor * f.w * sq + f.r / eta
}

/// Integrates the geodesic leaving `x0` with `lim √η X = c`. With `eps > 0`
/// the path rests at `x0` on `[0, ε]` and the geodesic starts at `η = ε`.
pub fn geodesic_shoot(g: &ReducedGeometry, x0: &[f64], c: &[f64], t: f64, eps: f64) -> Result<GeodesicSolution> {
    shoot_with(g, x0, c, t, eps, &ode_tol())
}

fn shoot_with(g: &ReducedGeometry, x0: &[f64], c: &[f64], t: f64, eps: f64, tol: &ToleranceConfig) -> Result<GeodesicSolution> {
    let dim = g.dim();
    if x0.len() != dim || c.len() != dim {
        return Err(LabError::DimensionMismatch { expected: dim, got: x0.len().min(c.len()) });
    }
    if !(t > eps) || eps < 0.0 {
        return Err(LabError::InvalidArgument(format!("geodesic needs 0 ≤ ε < t (got ε = {eps}, t = {t})")));
    }
    let (s0, s1) = (eps.sqrt(), t.sqrt());
    let f0 = g.sample(x0, eps)?;
    // state: x, p = w x_s, L, K
    let mut y0 = vec![0.0; 2 * dim + 2];
    for i in 0..dim {
        y0[i] = x0[i];
        y0[dim + i] = f0.w * 2.0 * c[i];
    }
    let failure = std::cell::Cell::new(None);
    let rhs = |s: f64, y: &[f64], dy: &mut [f64]| {
        let f = match g.sample(&y[..dim], s * s) {
            Ok(f) => f,
            Err(e) => {
                failure.set(Some(e.to_string()));
                dy.iter_mut().for_each(|v| *v = f64::NAN);
                return;
            }
        };
        let inv_w = 1.0 / f.w;
        let mut p2 = 0.0;
        let mut grad_r_xs = 0.0;
        for i in 0..dim {
            let xs = inv_w * y[dim + i];
            dy[i] = xs;
            p2 += y[dim + i] * y[dim + i];
            grad_r_xs += f.dr[i] * xs;
        }
        let xs2 = p2 * inv_w * inv_w;
        for i in 0..dim {
            dy[dim + i] = 2.0 * s * s * f.dr[i] + 0.5 * f.dw[i] * xs2;
        }
        dy[2 * dim] = 2.0 * s * s * f.r + 0.5 * f.w * xs2;
        // η^{3/2}H dη with X = x_s/2s
        dy[2 * dim + 1] = 2.0 * s.powi(4) * f.r_t
            + 2.0 * s.powi(3) * grad_r_xs
            + s * s * f.ric_factor * f.w * xs2
            + 2.0 * s * s * f.r;
    };
    let sol = integrate_ode(&rhs, &y0, s0, s1, tol).map_err(|e| match failure.take() {
        Some(detail) => LabError::InvalidArgument(format!("geodesic left the flow: {detail}")),
        None => match e {
            LabError::NonFinite { t, .. } | LabError::StepUnderflow { t_last: t } => LabError::GeodesicBlowUp { eta: t * t },
            other => other,
        },
    })?;

    let mut eta = Vec::with_capacity(sol.times().len());
    let mut positions = Vec::with_capacity(eta.capacity());
    let mut scaled_velocity = Vec::with_capacity(eta.capacity());
    let mut h_values = Vec::new();
    for (s, y) in sol.times().iter().zip(sol.states()) {
        let f = g.sample(&y[..dim], s * s)?;
        let xs: Vec<f64> = (0..dim).map(|i| y[dim + i] / f.w).collect();
        if *s > 0.0 {
            let xdot: Vec<f64> = xs.iter().map(|v| v / (2.0 * s)).collect();
            h_values.push(h_of(&f, &xdot, s * s));
        }
        eta.push(s * s);
        positions.push(y[..dim].to_vec());
        scaled_velocity.push(xs.iter().map(|v| 0.5 * v).collect());
    }
    let last = sol.final_state();
    let f_end = g.sample(&last[..dim], t)?;
    let xs_end: Vec<f64> = (0..dim).map(|i| last[dim + i] / f_end.w).collect();
    let speed_sq = f_end.w * xs_end.iter().map(|v| v * v).sum::<f64>() / (4.0 * t);
    let head = if eps > 0.0 { vertex_head(g.manifold_dimension(), eps) } else { 0.0 };
    Ok(GeodesicSolution {
        path: PathSample { eta, positions, interpolation: Interpolation::LinearInSqrtEta },
        scaled_velocity,
        initial_velocity: c.to_vec(),
        l_plus: last[2 * dim] + head,
        k: last[2 * dim + 1],
        h_values,
        gradient: last[dim..2 * dim].to_vec(),
        speed_sq,
        r_end: f_end.r,
        epsilon: eps,
    })
}

/// Result of solving the two-point problem towards one lift of the target.
#[derive(Debug, Clone)]
pub struct ShotResult {
    pub geodesic: GeodesicSolution,
    pub miss: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn miss_of(g: &ReducedGeometry, x0: &[f64], c: &[f64], y: &[f64], t: f64, eps: f64, tol: &ToleranceConfig) -> Option<(GeodesicSolution, Vec<f64>)> {
    let sol = shoot_with(g, x0, c, t, eps, tol).ok()?;
    let r: Vec<f64> = sol.endpoint().iter().zip(y).map(|(a, b)| a - b).collect();
    Some((sol, r))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn fd_jacobian(
    g: &ReducedGeometry,
    x0: &[f64],
    c: &[f64],
    r: &[f64],
    (y, t, eps): (&[f64], f64, f64),
    tol: &ToleranceConfig,
    rel_step: f64,
) -> Result<Vec<Vec<f64>>> {
    let dim = c.len();
    let mut jac = vec![vec![0.0; dim]; dim];
    for j in 0..dim {
        let step = rel_step * (1.0 + c[j].abs());
        let mut cp = c.to_vec();
        cp[j] += step;
        let (_, rp) = miss_of(g, x0, &cp, y, t, eps, tol).ok_or(LabError::GeodesicBlowUp { eta: t })?;
        for i in 0..dim {
            jac[i][j] = (rp[i] - r[i]) / step;
        }
    }
    Ok(jac)
}

/// Newton shooting for the geodesic from `x0` at `η = ε` that ends at the
/// coordinate point `y` at time `t`. A damped Newton phase with a
/// finite-difference Jacobian runs at a loose integrator tolerance; chord
/// steps with that Jacobian then polish the shot at full accuracy, falling
/// back to Newton at full accuracy if they stall early.
pub fn shoot_to(g: &ReducedGeometry, x0: &[f64], y: &[f64], t: f64, eps: f64) -> Result<ShotResult> {
    let span = 2.0 * (t.sqrt() - eps.sqrt());
    let c0: Vec<f64> = x0.iter().zip(y).map(|(a, b)| (b - a) / span).collect();
    let scale = 1.0 + norm(y);
    let loose = ToleranceConfig { abs_tol: 1e-10, rel_tol: 1e-9, ..ode_tol() };
    let tight = ode_tol();

    let (c, jac, mut iterations) = newton(g, x0, c0, (y, t, eps), &loose, 1e-8 * scale, 1e-6)?;
    let (mut best, mut r) = miss_of(g, x0, &c, y, t, eps, &tight).ok_or(LabError::GeodesicBlowUp { eta: t })?;
    let mut c = c;
    let target = 1e-12 * scale;
    while norm(&r) > target && iterations < 60 {
        iterations += 1;
        let dc = crate::numerics::linalg::solve_dense(jac.clone(), r.iter().map(|v| -v).collect())?;
        let trial: Vec<f64> = c.iter().zip(&dc).map(|(a, b)| a + b).collect();
        match miss_of(g, x0, &trial, y, t, eps, &tight) {
            Some((sol, rt)) if norm(&rt) < 0.5 * norm(&r) => {
                c = trial;
                best = sol;
                r = rt;
            }
            _ => break,
        }
    }
    if norm(&r) > 1e-9 * scale {
        let (c2, _, extra) = newton(g, x0, c, (y, t, eps), &tight, target, 1e-7)?;
        iterations += extra;
        let (sol, r2) = miss_of(g, x0, &c2, y, t, eps, &tight).ok_or(LabError::GeodesicBlowUp { eta: t })?;
        best = sol;
        r = r2;
    }
    let miss = norm(&r);
    Ok(ShotResult { geodesic: best, miss, iterations, converged: miss <= 1e-9 * scale })
}

/// Damped Newton on the endpoint miss; returns the final initial velocity,
/// the last Jacobian and the iteration count.
fn newton(
    g: &ReducedGeometry,
    x0: &[f64],
    mut c: Vec<f64>,
    (y, t, eps): (&[f64], f64, f64),
    tol: &ToleranceConfig,
    target: f64,
    rel_step: f64,
) -> Result<(Vec<f64>, Vec<Vec<f64>>, usize)> {
    let (_, mut r) = miss_of(g, x0, &c, y, t, eps, tol).ok_or(LabError::GeodesicBlowUp { eta: t })?;
    let mut jac = fd_jacobian(g, x0, &c, &r, (y, t, eps), tol, rel_step)?;
    let mut iterations = 0;
    while norm(&r) > target && iterations < 40 {
        iterations += 1;
        if iterations > 1 {
            jac = fd_jacobian(g, x0, &c, &r, (y, t, eps), tol, rel_step)?;
        }
        let dc = crate::numerics::linalg::solve_dense(jac.clone(), r.iter().map(|v| -v).collect())?;
        let mut lambda = 1.0;
        let mut accepted = false;
        while lambda > 1e-4 {
            let trial: Vec<f64> = c.iter().zip(&dc).map(|(a, b)| a + lambda * b).collect();
            if let Some((_, rt)) = miss_of(g, x0, &trial, y, t, eps, tol) {
                if norm(&rt) < norm(&r) {
                    c = trial;
                    r = rt;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok((c, jac, iterations))
}

/// Controls for [`path_minimization_oracle`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleOptions {
    pub segments: usize,
    pub random_starts: usize,
    pub seed: u64,
    /// With descent off the oracle only evaluates its starting paths.
    pub descend: bool,
    pub max_iter: usize,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self { segments: 96, random_starts: 5, seed: 2024, descend: true, max_iter: 400 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub l_plus: f64,
    pub path: PathSample,
    pub iterations: usize,
    pub gradient_norm: f64,
    /// Index into the candidate endpoints of the best path.
    pub endpoint_index: usize,
}

/// Discrete action on nodes equispaced in `s` with interior positions free.
struct DiscreteAction<'a> {
    g: &'a ReducedGeometry,
    dim: usize,
    s: Vec<f64>,
    head: f64,
}

impl DiscreteAction<'_> {
    /// Action, gradient with respect to interior nodes, and per-segment mean weights.
    fn eval(&self, x: &[Vec<f64>], with_grad: bool) -> Result<(f64, Vec<Vec<f64>>, Vec<f64>)> {
        let m = self.s.len() - 1;
        let dim = self.dim;
        let mut total = self.head;
        let mut grad = vec![vec![0.0; dim]; m + 1];
        let mut weights = vec![0.0; m];
        let mut pos = vec![0.0; dim];
        for k in 0..m {
            let ds = self.s[k + 1] - self.s[k];
            let v: Vec<f64> = (0..dim).map(|i| (x[k + 1][i] - x[k][i]) / ds).collect();
            let v2: f64 = v.iter().map(|a| a * a).sum();
            for &(node, weight) in &GL5 {
                let xi = 0.5 * (1.0 + node);
                let s = self.s[k] + xi * ds;
                for i in 0..dim {
                    pos[i] = x[k][i] + xi * (x[k + 1][i] - x[k][i]);
                }
                let f = self.g.sample(&pos, s * s)?;
                let q = 0.5 * weight * ds;
                total += q * (2.0 * s * s * f.r + 0.5 * f.w * v2);
                weights[k] += 0.5 * weight * f.w;
                if with_grad {
                    for i in 0..dim {
                        let potential = 2.0 * s * s * f.dr[i] + 0.5 * f.dw[i] * v2;
                        let kinetic = f.w * v[i] / ds;
                        grad[k][i] += q * ((1.0 - xi) * potential - kinetic);
                        grad[k + 1][i] += q * (xi * potential + kinetic);
                    }
                }
            }
        }
        grad[0].iter_mut().for_each(|v| *v = 0.0);
        grad[m].iter_mut().for_each(|v| *v = 0.0);
        Ok((total, grad, weights))
    }

    /// Inverse of the kinetic Hessian on the interior nodes.
    fn precondition(&self, grad: &[Vec<f64>], weights: &[f64]) -> Vec<Vec<f64>> {
        let m = self.s.len() - 1;
        let mut out = vec![vec![0.0; self.dim]; m + 1];
        if m < 2 {
            return out;
        }
        let c: Vec<f64> = (0..m).map(|k| weights[k] / (self.s[k + 1] - self.s[k])).collect();
        let n = m - 1;
        let diag: Vec<f64> = (1..m).map(|j| c[j - 1] + c[j]).collect();
        let off: Vec<f64> = (1..m).map(|j| -c[j]).collect();
        let lower: Vec<f64> = (1..m).map(|j| -c[j - 1]).collect();
        for i in 0..self.dim {
            let rhs: Vec<f64> = (1..m).map(|j| grad[j][i]).collect();
            let z = solve_tridiagonal(&lower, &diag, &off[..n], &rhs);
            for j in 1..m {
                out[j][i] = z[j - 1];
            }
        }
        out
    }
}

fn inner(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u.iter().zip(v).map(|(p, q)| p * q).sum::<f64>()).sum()
}

/// Preconditioned Polak–Ribière descent from `x`.
fn descend(action: &DiscreteAction<'_>, mut x: Vec<Vec<f64>>, max_iter: usize) -> Result<(f64, Vec<Vec<f64>>, usize, f64)> {
    let (mut val, mut g, mut w) = action.eval(&x, true)?;
    let mut z = action.precondition(&g, &w);
    let mut d: Vec<Vec<f64>> = z.iter().map(|r| r.iter().map(|v| -v).collect()).collect();
    let mut gz = inner(&g, &z);
    let mut iterations = 0;
    let mut stalls = 0;
    while iterations < max_iter && gz.sqrt() > 1e-12 * (1.0 + val.abs()) {
        iterations += 1;
        let mut slope = inner(&g, &d);
        if slope >= 0.0 {
            d = z.iter().map(|r| r.iter().map(|v| -v).collect()).collect();
            slope = -gz;
        }
        let mut alpha = 1.0;
        let mut next = None;
        while alpha > 1e-10 {
            let trial: Vec<Vec<f64>> = x.iter().zip(&d).map(|(a, b)| a.iter().zip(b).map(|(p, q)| p + alpha * q).collect()).collect();
            if let Ok((tv, _, _)) = action.eval(&trial, false) {
                if tv <= val + 1e-4 * alpha * slope {
                    next = Some((trial, tv));
                    break;
                }
            }
            alpha *= 0.5;
        }
        let Some((trial, tv)) = next else { break };
        stalls = if val - tv <= 1e-15 * val.abs().max(1e-300) { stalls + 1 } else { 0 };
        x = trial;
        let (nv, ng, nw) = action.eval(&x, true)?;
        let nz = action.precondition(&ng, &nw);
        let diff: Vec<Vec<f64>> = ng.iter().zip(&g).map(|(a, b)| a.iter().zip(b).map(|(p, q)| p - q).collect()).collect();
        let beta = (inner(&nz, &diff) / gz).max(0.0);
        d = nz.iter().zip(&d).map(|(a, b)| a.iter().zip(b).map(|(p, q)| -p + beta * q).collect()).collect();
        val = nv;
        g = ng;
        w = nw;
        z = nz;
        gz = inner(&g, &z);
        if stalls >= 3 {
            break;
        }
    }
    let _ = w;
    Ok((val, x, iterations, gz.max(0.0).sqrt()))
}

/// Direct minimization of the discretized action over paths from `x0` to
/// any of `endpoints` at time `t`, independent of the geodesic equation.
/// Each endpoint starts from the constant-speed path; the best one is then
/// restarted from `random_starts` seeded smooth perturbations.
pub fn path_minimization_oracle(
    g: &ReducedGeometry,
    x0: &[f64],
    endpoints: &[Vec<f64>],
    t: f64,
    eps: f64,
    opts: &OracleOptions,
) -> Result<OracleResult> {
    let dim = g.dim();
    if endpoints.is_empty() {
        return Err(LabError::InvalidArgument("oracle needs at least one endpoint".into()));
    }
    let m = opts.segments.max(2);
    let (s0, s1) = (eps.sqrt(), t.sqrt());
    let s: Vec<f64> = (0..=m).map(|k| s0 + (s1 - s0) * k as f64 / m as f64).collect();
    let head = if eps > 0.0 { vertex_head(g.manifold_dimension(), eps) } else { 0.0 };
    let action = DiscreteAction { g, dim, s: s.clone(), head };
    let straight = |y: &[f64]| -> Vec<Vec<f64>> {
        s.iter()
            .map(|sk| {
                let frac = (sk * sk - eps) / (t - eps);
                (0..dim).map(|i| x0[i] + (y[i] - x0[i]) * frac).collect()
            })
            .collect()
    };
    let run = |start: Vec<Vec<f64>>| -> Result<(f64, Vec<Vec<f64>>, usize, f64)> {
        if opts.descend {
            descend(&action, start, opts.max_iter)
        } else {
            let (v, _, _) = action.eval(&start, false)?;
            Ok((v, start, 0, f64::NAN))
        }
    };

    let mut best: Option<(f64, Vec<Vec<f64>>, usize, f64, usize)> = None;
    for (idx, y) in endpoints.iter().enumerate() {
        let (v, x, it, gn) = run(straight(y))?;
        if best.as_ref().map_or(true, |b| v < b.0) {
            best = Some((v, x, it, gn, idx));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let idx = best.as_ref().expect("nonempty").4;
    let y = &endpoints[idx];
    let reach = endpoints[idx].iter().zip(x0).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt().max(0.1);
    for _ in 0..opts.random_starts {
        let amps: Vec<Vec<f64>> = (0..3).map(|_| (0..dim).map(|_| rng.gen_range(-0.2..0.2) * reach).collect()).collect();
        let mut start = straight(y);
        for (k, p) in start.iter_mut().enumerate().take(m).skip(1) {
            let u = k as f64 / m as f64;
            for (mode, a) in amps.iter().enumerate() {
                let shape = ((mode + 1) as f64 * std::f64::consts::PI * u).sin();
                for i in 0..dim {
                    p[i] += a[i] * shape;
                }
            }
        }
        let (v, x, it, gn) = run(start)?;
        if v < best.as_ref().expect("nonempty").0 {
            best = Some((v, x, it, gn, idx));
        }
    }
    let (l_plus, x, iterations, gradient_norm, endpoint_index) = best.expect("nonempty");
    Ok(OracleResult {
        l_plus,
        path: PathSample { eta: s.iter().map(|v| v * v).collect(), positions: x, interpolation: Interpolation::LinearInSqrtEta },
        iterations,
        gradient_norm,
        endpoint_index,
    })
}
