//! Pointwise differential Harnack identities, checked by differencing
//! retained states in time and applying grid stencils in space.

use serde::{Deserialize, Serialize};

use super::DensityState;
use crate::error::{LabError, Result};
use crate::flow::FlowHistory;
use crate::geometry::MetricModel;
use crate::numerics::weighted_dot;

/// `v₊` on one slice with its integral.
#[derive(Debug, Clone, PartialEq)]
pub struct VPlus {
    pub field: Vec<f64>,
    pub integral: f64,
}

/// `V = 2Δf − |∇f|² + R` for the given `f`.
fn harnack_v(m: &MetricModel, f: &[f64]) -> Result<Vec<f64>> {
    let lap = m.laplacian(f)?;
    let g2 = m.grad_sq(f)?;
    let r = m.scalar_curvature();
    Ok((0..f.len()).map(|i| 2.0 * lap[i] - g2[i] + r[i]).collect())
}

/// `v₊ = [σ(2Δf₊ − |∇f₊|² + R) − f₊ + n]u` with `σ = t − T`.
pub fn v_plus(s: &DensityState, h: &FlowHistory, birth: f64) -> Result<VPlus> {
    let sigma = s.t - birth;
    if !(sigma > 0.0) {
        return Err(LabError::BeforeBirth { t: s.t, birth });
    }
    let s = s.with_sigma(sigma)?;
    let m = h.metric_at(s.t)?;
    let field = v_plus_field(&m, &s)?;
    let integral = weighted_dot(&field, &vec![1.0; field.len()], &m.measure());
    Ok(VPlus { field, integral })
}

fn v_plus_field(m: &MetricModel, s: &DensityState) -> Result<Vec<f64>> {
    let v = harnack_v(m, &s.f_plus)?;
    let n = s.dimension as f64;
    Ok((0..v.len()).map(|i| (s.sigma * v[i] - s.f_plus[i] + n) * s.u[i]).collect())
}

/// Max-norm residual of an evolution identity `∂q/∂t + S(q) = RHS`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub times: Vec<f64>,
    pub max_residual: f64,
    /// Largest `|LHS|`, for scale.
    pub max_lhs: f64,
    pub max_rhs: f64,
    /// Smallest right-hand side value (a squared norm, hence ≥ 0).
    pub min_rhs: f64,
    pub points: usize,
}

impl IdentityReport {
    pub fn relative_residual(&self) -> f64 {
        self.max_residual / self.max_lhs.max(self.max_rhs).max(1e-300)
    }
}

type Quantity<'a> = dyn Fn(&MetricModel, &DensityState) -> Result<Vec<f64>> + 'a;
type Operator<'a> = dyn Fn(&MetricModel, &DensityState, &[f64]) -> Result<(Vec<f64>, Vec<f64>)> + 'a;

/// Derivative at index `i` from neighbouring samples: a five-point stencil
/// when the four neighbours are equally spaced, otherwise the three-point
/// formula on a nonuniform grid.
fn time_derivative(ts: &[f64], qs: &[Vec<f64>], i: usize, p: usize) -> f64 {
    let uniform5 = i >= 2 && i + 2 < ts.len() && {
        let d = ts[i + 1] - ts[i];
        [ts[i] - ts[i - 1], ts[i - 1] - ts[i - 2], ts[i + 2] - ts[i + 1]]
            .iter()
            .all(|g| (g - d).abs() <= 1e-9 * d)
    };
    if uniform5 {
        let d = ts[i + 1] - ts[i];
        return (qs[i - 2][p] - 8.0 * qs[i - 1][p] + 8.0 * qs[i + 1][p] - qs[i + 2][p]) / (12.0 * d);
    }
    let (a, b) = (ts[i] - ts[i - 1], ts[i + 1] - ts[i]);
    (-b * b * qs[i - 1][p] + (b * b - a * a) * qs[i][p] + a * a * qs[i + 1][p]) / (a * b * (a + b))
}

fn evolution_residual(states: &[DensityState], h: &FlowHistory, quantity: &Quantity<'_>, operator: &Operator<'_>) -> Result<IdentityReport> {
    if states.len() < 3 {
        return Err(LabError::InvalidArgument("identity checks need at least three consecutive states".into()));
    }
    let metrics: Vec<MetricModel> = states.iter().map(|s| h.metric_at(s.t)).collect::<Result<_>>()?;
    let qs: Vec<Vec<f64>> = states.iter().zip(&metrics).map(|(s, m)| quantity(m, s)).collect::<Result<_>>()?;
    let ts: Vec<f64> = states.iter().map(|s| s.t).collect();
    let centre_only = states.len() == 5;
    let interior: Vec<usize> = if centre_only { vec![2] } else { (1..states.len() - 1).collect() };

    let mut report = IdentityReport { times: Vec::new(), max_residual: 0.0, max_lhs: 0.0, max_rhs: 0.0, min_rhs: f64::INFINITY, points: 0 };
    for i in interior {
        let (spatial, rhs) = operator(&metrics[i], &states[i], &qs[i])?;
        for p in 0..qs[i].len() {
            let lhs = time_derivative(&ts, &qs, i, p) + spatial[p];
            report.max_residual = report.max_residual.max((lhs - rhs[p]).abs());
            report.max_lhs = report.max_lhs.max(lhs.abs());
            report.max_rhs = report.max_rhs.max(rhs[p].abs());
            report.min_rhs = report.min_rhs.min(rhs[p]);
            report.points += 1;
        }
        report.times.push(ts[i]);
    }
    Ok(report)
}

fn with_birth(states: &[DensityState], birth: f64) -> Result<Vec<DensityState>> {
    states
        .iter()
        .map(|s| {
            let sigma = s.t - birth;
            if !(sigma > 0.0) {
                return Err(LabError::BeforeBirth { t: s.t, birth });
            }
            s.with_sigma(sigma)
        })
        .collect()
}

/// `(∂/∂t + Δ − R)v₊ = 2σu|Rc + ∇²f₊ + g/2σ|²`.
pub fn check_harnack_identity(states: &[DensityState], h: &FlowHistory, birth: f64) -> Result<IdentityReport> {
    let states = with_birth(states, birth)?;
    let quantity = |m: &MetricModel, s: &DensityState| v_plus_field(m, s);
    let operator = |m: &MetricModel, s: &DensityState, v: &[f64]| {
        let lap = m.laplacian(v)?;
        let r = m.scalar_curvature();
        let norm = m.soliton_norm_sq(&s.f_plus, 0.5 / s.sigma)?;
        let spatial = (0..v.len()).map(|i| lap[i] - r[i] * v[i]).collect();
        let rhs = (0..v.len()).map(|i| 2.0 * s.sigma * s.u[i] * norm[i]).collect();
        Ok((spatial, rhs))
    };
    evolution_residual(&states, h, &quantity, &operator)
}

/// `(∂/∂t + Δ)V = 2|Rc + ∇²f₊|² + 2⟨∇V, ∇f₊⟩` for `V = 2Δf₊ − |∇f₊|² + R`.
pub fn check_v_equation(states: &[DensityState], h: &FlowHistory, birth: f64) -> Result<IdentityReport> {
    let states = with_birth(states, birth)?;
    let quantity = |m: &MetricModel, s: &DensityState| harnack_v(m, &s.f_plus);
    let operator = |m: &MetricModel, s: &DensityState, v: &[f64]| {
        let lap = m.laplacian(v)?;
        let cross = m.grad_dot(v, &s.f_plus)?;
        let norm = m.soliton_norm_sq(&s.f_plus, 0.0)?;
        let spatial = (0..v.len()).map(|i| lap[i] - 2.0 * cross[i]).collect();
        let rhs = norm.iter().map(|x| 2.0 * x).collect();
        Ok((spatial, rhs))
    };
    evolution_residual(&states, h, &quantity, &operator)
}

/// Steady analogue with `e^{−f} = u`, `v₀ = (2Δf − |∇f|² + R)u`:
/// `(∂/∂t + Δ − R)v₀ = 2u|Rc + ∇²f|²`.
pub fn check_steady_harnack(states: &[DensityState], h: &FlowHistory) -> Result<IdentityReport> {
    let steady_f = |s: &DensityState| s.u.iter().map(|v| -v.ln()).collect::<Vec<f64>>();
    let quantity = |m: &MetricModel, s: &DensityState| {
        let f = steady_f(s);
        let v = harnack_v(m, &f)?;
        Ok(v.iter().zip(&s.u).map(|(a, b)| a * b).collect())
    };
    let operator = |m: &MetricModel, s: &DensityState, v0: &[f64]| {
        let f = steady_f(s);
        let lap = m.laplacian(v0)?;
        let r = m.scalar_curvature();
        let norm = m.soliton_norm_sq(&f, 0.0)?;
        let spatial = (0..v0.len()).map(|i| lap[i] - r[i] * v0[i]).collect();
        let rhs = (0..v0.len()).map(|i| 2.0 * s.u[i] * norm[i]).collect();
        Ok((spatial, rhs))
    };
    evolution_residual(states, h, &quantity, &operator)
}

/// `∂f₊/∂t = −Δf₊ + |∇f₊|² − R − n/2σ`.
pub fn check_f_plus_evolution(states: &[DensityState], h: &FlowHistory, birth: f64) -> Result<IdentityReport> {
    let states = with_birth(states, birth)?;
    let quantity = |_: &MetricModel, s: &DensityState| Ok(s.f_plus.clone());
    let operator = |m: &MetricModel, s: &DensityState, f: &[f64]| {
        let lap = m.laplacian(f)?;
        let g2 = m.grad_sq(f)?;
        let r = m.scalar_curvature();
        let n = s.dimension as f64;
        let spatial = (0..f.len()).map(|i| lap[i] - g2[i] + r[i] + 0.5 * n / s.sigma).collect();
        Ok((spatial, vec![0.0; f.len()]))
    };
    evolution_residual(&states, h, &quantity, &operator)
}
