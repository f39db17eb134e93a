//! Backward solves of the conjugate heat equation `∂u/∂t = −Δu + Ru`, the
//! immortal unit-mass density, and pointwise Harnack identity checks.

mod identities;

pub use identities::{
    check_f_plus_evolution, check_harnack_identity, check_steady_harnack, check_v_equation, v_plus, IdentityReport,
    VPlus,
};

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{LabError, Result};
use crate::flow::FlowHistory;
use crate::geometry::MetricModel;
use crate::numerics::linalg::conjugate_gradient;
use crate::numerics::{integrate_ode, weighted_dot, ToleranceConfig};

/// A positive unit-mass density together with `f₊` for the given `σ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityState {
    pub t: f64,
    pub u: Vec<f64>,
    pub sigma: f64,
    pub f_plus: Vec<f64>,
    pub dimension: usize,
}

impl DensityState {
    pub fn new(t: f64, u: Vec<f64>, sigma: f64, dimension: usize) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(LabError::InvalidArgument(format!("sigma must be positive, got {sigma}")));
        }
        if let Some(bad) = u.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(LabError::PositivityLoss { t, min_u: *bad });
        }
        let shift = 0.5 * dimension as f64 * (4.0 * PI * sigma).ln();
        let f_plus = u.iter().map(|v| -v.ln() - shift).collect();
        Ok(Self { t, u, sigma, f_plus, dimension })
    }

    /// Rebuilds `u = e^{−f₊}/(4πσ)^{n/2}` from `f₊`.
    pub fn u_from_f_plus(&self) -> Vec<f64> {
        let norm = (4.0 * PI * self.sigma).powf(0.5 * self.dimension as f64);
        self.f_plus.iter().map(|f| (-f).exp() / norm).collect()
    }

    /// The same density with a different `σ`.
    pub fn with_sigma(&self, sigma: f64) -> Result<Self> {
        Self::new(self.t, self.u.clone(), sigma, self.dimension)
    }

    pub fn mass(&self, metric: &MetricModel) -> f64 {
        weighted_dot(&self.u, &vec![1.0; self.u.len()], &metric.measure())
    }

    pub fn min_u(&self) -> f64 {
        self.u.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Uniform unit-mass density on `m`.
pub fn uniform_density(m: &MetricModel) -> Vec<f64> {
    vec![1.0 / m.volume(); m.field_len()]
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConjugateOptions {
    /// Earliest time of the solve.
    pub t_stop: f64,
    /// Cap on the backward step; defaults to the snapshot spacing.
    #[serde(default)]
    pub dt_max: Option<f64>,
    /// Times that are stepped to exactly and retained.
    #[serde(default)]
    pub record_times: Vec<f64>,
    /// Keep every step instead of only snapshot and record times.
    #[serde(default)]
    pub keep_all: bool,
}

#[derive(Debug, Clone)]
pub struct ConjugateSolution {
    /// Retained states in increasing time.
    pub states: Vec<DensityState>,
    /// Largest `|∫u dv − 1|` seen before renormalization.
    pub max_mass_defect: f64,
    pub min_u: f64,
}

impl ConjugateSolution {
    pub fn state_at(&self, t: f64) -> Option<&DensityState> {
        self.states.iter().find(|s| (s.t - t).abs() <= 1e-12 * t.abs().max(1.0))
    }
}

fn sigma_at(h: &FlowHistory, t: f64) -> Result<f64> {
    let s = t - h.birth_time();
    if !(s > 0.0) {
        return Err(LabError::BeforeBirth { t, birth: h.birth_time() });
    }
    Ok(s)
}

/// Step times of a backward solve from `t_final` down to `t_stop`, in
/// decreasing order, with a flag marking retained ones.
fn backward_grid(h: &FlowHistory, t_final: f64, opts: &ConjugateOptions) -> Vec<(f64, bool)> {
    let mut nodes: Vec<f64> = h.sample_times(33).into_iter().filter(|&t| t > opts.t_stop && t < t_final).collect();
    let records: Vec<f64> = opts.record_times.iter().copied().filter(|&t| t >= opts.t_stop && t <= t_final).collect();
    nodes.extend(records.iter().copied());
    nodes.push(opts.t_stop);
    nodes.push(t_final);
    nodes.sort_by(|a, b| b.total_cmp(a));
    nodes.dedup_by(|a, b| (*a - *b).abs() <= 1e-13 * b.abs().max(1.0));
    let mut out = vec![(nodes[0], true)];
    for w in nodes.windows(2) {
        let gap = w[0] - w[1];
        let pieces = opts.dt_max.map_or(1, |d| (gap / d).ceil().max(1.0) as usize);
        for k in 1..=pieces {
            let t = if k == pieces { w[1] } else { w[0] - gap * k as f64 / pieces as f64 };
            out.push((t, k == pieces || opts.keep_all));
        }
    }
    out
}

/// Solves `∂u/∂t = −Δu + Ru` backward from `t_final` (well posed in that
/// direction) with implicit trapezoidal steps in `τ = t_final − t`.
pub fn solve_conjugate_backward(
    h: &FlowHistory,
    t_final: f64,
    u_final: &[f64],
    opts: &ConjugateOptions,
    tol: &ToleranceConfig,
) -> Result<ConjugateSolution> {
    tol.validate()?;
    if !(opts.t_stop < t_final) {
        return Err(LabError::InvalidArgument("conjugate solve needs t_stop < t_final".into()));
    }
    let n = h.dimension();
    let m_final = h.metric_at(t_final)?;
    if u_final.len() != m_final.field_len() {
        return Err(LabError::DimensionMismatch { expected: m_final.field_len(), got: u_final.len() });
    }
    if let Some(bad) = u_final.iter().find(|v| !(**v > 0.0)) {
        return Err(LabError::PositivityLoss { t: t_final, min_u: *bad });
    }
    let mass0 = weighted_dot(u_final, &vec![1.0; u_final.len()], &m_final.measure());
    if (mass0 - 1.0).abs() > 1e-8 {
        return Err(LabError::InvalidArgument(format!("final data must have unit mass, got {mass0}")));
    }
    h.metric_at(opts.t_stop)?;

    let grid = backward_grid(h, t_final, opts);
    let mut u = u_final.to_vec();
    let mut states = vec![DensityState::new(t_final, u.clone(), sigma_at(h, t_final)?, n)?];
    let mut max_defect = 0.0f64;
    let mut min_u = u.iter().copied().fold(f64::INFINITY, f64::min);

    let mut m_prev = m_final;
    for w in grid.windows(2) {
        let (t_hi, (t_lo, keep)) = (w[0].0, w[1]);
        let m_lo = h.metric_at(t_lo)?;
        let next = match (&m_prev, &m_lo) {
            (MetricModel::ConformalTorus(hi), MetricModel::ConformalTorus(lo)) => {
                torus_backward_step(hi, lo, &u, t_hi - t_lo)?
            }
            _ => homogeneous_backward_step(h, u[0], t_hi, t_lo, tol)?,
        };
        let measure = m_lo.measure();
        let mass = weighted_dot(&next, &vec![1.0; next.len()], &measure);
        max_defect = max_defect.max((mass - 1.0).abs());
        u = next.iter().map(|v| v / mass).collect();
        let lowest = u.iter().copied().fold(f64::INFINITY, f64::min);
        if !(lowest > 0.0) {
            return Err(LabError::PositivityLoss { t: t_lo, min_u: lowest });
        }
        min_u = min_u.min(lowest);
        if keep {
            states.push(DensityState::new(t_lo, u.clone(), sigma_at(h, t_lo)?, n)?);
        }
        m_prev = m_lo;
    }
    states.reverse();
    Ok(ConjugateSolution { states, max_mass_defect: max_defect, min_u })
}

/// Trapezoidal step from the metric at `t_hi` to `t_lo`, in the conservation
/// form `∂q/∂τ = Δ₀(e^{−2φ}q)` of the flat-measure density `q = e^{2φ}u`.
/// The discrete sum of `q` (the mass) is preserved exactly, and in terms of
/// `u` the system `(e^{2φ} − dτ/2·Δ₀)u = e^{2φ_hi}u_hi + dτ/2·Δ₀u_hi` is
/// symmetric positive definite.
fn torus_backward_step(
    hi: &crate::geometry::ConformalTorusMetric,
    lo: &crate::geometry::ConformalTorusMetric,
    u: &[f64],
    dtau: f64,
) -> Result<Vec<f64>> {
    let lap_hi = hi.flat_laplacian(u);
    let rhs: Vec<f64> = (0..u.len()).map(|i| (2.0 * hi.phi[i]).exp() * u[i] + 0.5 * dtau * lap_hi[i]).collect();
    let weight: Vec<f64> = (0..u.len()).map(|i| (2.0 * lo.phi[i]).exp()).collect();
    let apply = |x: &[f64], out: &mut [f64]| {
        let lx = lo.flat_laplacian(x);
        for i in 0..x.len() {
            out[i] = weight[i] * x[i] - 0.5 * dtau * lx[i];
        }
    };
    conjugate_gradient(apply, &rhs, Some(u), 1e-15, 0.0, 20 * u.len())
}

/// Spatially constant density: `du/dt = R(t)u`, integrated in `τ`.
fn homogeneous_backward_step(h: &FlowHistory, u: f64, t_hi: f64, t_lo: f64, tol: &ToleranceConfig) -> Result<Vec<f64>> {
    let rhs = |tau: f64, y: &[f64], dy: &mut [f64]| {
        let r = h.scalar_at(t_hi - tau).map(|r| r[0]).unwrap_or(f64::NAN);
        dy[0] = -r * y[0];
    };
    let sol = integrate_ode(rhs, &[u], 0.0, t_hi - t_lo, tol)?;
    Ok(vec![sol.final_state()[0]])
}

/// The limit of backward solves from uniform data at ever later times.
#[derive(Debug, Clone)]
pub struct ImmortalDensity {
    pub window: (f64, f64),
    pub states: Vec<DensityState>,
    pub construction_tail: f64,
    pub cauchy_gap: f64,
    /// Gap after each doubling of the tail time.
    pub gap_history: Vec<f64>,
    pub converged: bool,
}

impl ImmortalDensity {
    pub fn state_at(&self, t: f64) -> Option<&DensityState> {
        self.states.iter().find(|s| (s.t - t).abs() <= 1e-12 * t.abs().max(1.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImmortalOptions {
    /// First tail time `t⁰`; defaults to twice the window end.
    #[serde(default)]
    pub first_tail: Option<f64>,
    /// Growth factor of the tail time per round.
    #[serde(default = "default_growth")]
    pub growth: f64,
    /// Backward step cap passed to the solver.
    #[serde(default)]
    pub dt_max: Option<f64>,
    /// Times inside the window at which the density is retained and compared.
    #[serde(default)]
    pub window_times: Vec<f64>,
}

fn default_growth() -> f64 {
    2.0
}

impl Default for ImmortalOptions {
    fn default() -> Self {
        Self { first_tail: None, growth: 2.0, dt_max: None, window_times: Vec::new() }
    }
}

/// Solves backward from `u = 1/V(tⁱ)` for `tⁱ` growing geometrically and
/// stops once successive solutions agree on the window to `tol.abs_tol`.
pub fn construct_immortal_density(
    h: &FlowHistory,
    window: (f64, f64),
    tol: &ToleranceConfig,
    opts: &ImmortalOptions,
) -> Result<ImmortalDensity> {
    let (ta, tb) = window;
    if !(tb > ta) || !(opts.growth > 1.0) {
        return Err(LabError::InvalidArgument("immortal density needs t_a < t_b and growth > 1".into()));
    }
    let end = h.extinct_at().map_or(h.t_end(), |e| e.min(h.t_end()));
    let mut tail = opts.first_tail.unwrap_or(2.0 * tb).min(end);
    if !(tail > tb) {
        return Err(LabError::OutOfRange { t: tail, start: h.t_start(), end });
    }
    let mut window_times = opts.window_times.clone();
    if window_times.is_empty() {
        window_times = (0..=16).map(|k| ta + (tb - ta) * k as f64 / 16.0).collect();
    }
    window_times.retain(|&t| t >= ta && t <= tb);
    let solve_opts = ConjugateOptions { t_stop: ta, dt_max: opts.dt_max, record_times: window_times.clone(), keep_all: false };

    let pick = |sol: &ConjugateSolution| -> Vec<DensityState> {
        window_times.iter().filter_map(|&t| sol.state_at(t).cloned()).collect()
    };
    let mut previous: Option<Vec<DensityState>> = None;
    let mut gap_history = Vec::new();
    loop {
        let m_tail = h.metric_at(tail)?;
        let sol = solve_conjugate_backward(h, tail, &uniform_density(&m_tail), &solve_opts, tol)?;
        let current = pick(&sol);
        if let Some(prev) = &previous {
            let gap = prev
                .iter()
                .zip(&current)
                .flat_map(|(a, b)| a.u.iter().zip(&b.u).map(|(x, y)| (x - y).abs()))
                .fold(0.0f64, f64::max);
            gap_history.push(gap);
            if gap <= tol.abs_tol {
                return Ok(ImmortalDensity { window, states: current, construction_tail: tail, cauchy_gap: gap, gap_history, converged: true });
            }
        }
        let next_tail = tail * opts.growth;
        if next_tail > end * (1.0 + 1e-12) {
            let gap = gap_history.last().copied().unwrap_or(f64::INFINITY);
            return Ok(ImmortalDensity { window, states: current, construction_tail: tail, cauchy_gap: gap, gap_history, converged: false });
        }
        previous = Some(current);
        tail = next_tail;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{evolve, evolve_with, EvolveOptions};
    use crate::geometry::{ConformalTorusMetric, HomogeneousMetric};

    fn tol() -> ToleranceConfig {
        ToleranceConfig::default()
    }

    #[test]
    fn f_plus_round_trip() {
        let s = DensityState::new(1.0, vec![0.3, 2.0, 0.01], 0.7, 2).unwrap();
        for (a, b) in s.u_from_f_plus().iter().zip(&s.u) {
            assert!((a - b).abs() <= 1e-15 * b);
        }
        assert!(DensityState::new(1.0, vec![0.0], 0.7, 2).is_err());
        assert!(DensityState::new(1.0, vec![1.0], 0.0, 2).is_err());
    }

    #[test]
    fn homogeneous_uniform_density_stays_uniform() {
        let m0 = MetricModel::Homogeneous(HomogeneousMetric::heisenberg([1.0, 1.0, 1.0], 1.0));
        let h = evolve(&m0, (0.0, 2.0), &tol()).unwrap();
        let u1 = uniform_density(&h.metric_at(2.0).unwrap());
        let opts = ConjugateOptions { t_stop: 0.5, record_times: vec![1.0], ..Default::default() };
        let sol = solve_conjugate_backward(&h, 2.0, &u1, &opts, &tol()).unwrap();
        for s in &sol.states {
            let v = h.volume_at(s.t).unwrap();
            assert!((s.u[0] * v - 1.0).abs() < 1e-9, "t = {} u·V = {}", s.t, s.u[0] * v);
        }
        assert!(sol.max_mass_defect < 1e-8);
        assert!(sol.state_at(1.0).is_some());
    }

    #[test]
    fn torus_solve_conserves_mass_and_positivity() {
        let m0 = MetricModel::ConformalTorus(
            ConformalTorusMetric::from_fn([16, 16], [1.0, 1.0], |x, y| {
                0.2 * (2.0 * PI * x).sin() * (2.0 * PI * y).cos()
            })
            .unwrap(),
        );
        let h = evolve(&m0, (0.0, 0.01), &tol()).unwrap();
        let m1 = h.metric_at(0.01).unwrap();
        let u1: Vec<f64> = {
            let raw: Vec<f64> = (0..m1.field_len()).map(|k| 1.0 + 0.5 * ((k % 16) as f64 * 0.4).cos()).collect();
            let mass = weighted_dot(&raw, &vec![1.0; raw.len()], &m1.measure());
            raw.iter().map(|v| v / mass).collect()
        };
        let opts = ConjugateOptions { t_stop: 0.001, ..Default::default() };
        let sol = solve_conjugate_backward(&h, 0.01, &u1, &opts, &tol()).unwrap();
        // the scheme conserves mass up to the time discretization of the measure
        assert!(sol.max_mass_defect < 1e-12, "defect {}", sol.max_mass_defect);
        assert!(sol.min_u > 0.0);
        for s in &sol.states {
            assert!((s.mass(&h.metric_at(s.t).unwrap()) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn flat_static_torus_v_plus() {
        let m0 = MetricModel::ConformalTorus(ConformalTorusMetric::flat([8, 8], [2.0, 1.5]).unwrap());
        let h = evolve_with(&m0, (0.0, 1.0), &tol(), &EvolveOptions { torus_dt_max: Some(0.25), ..Default::default() })
            .unwrap();
        let vol = 3.0;
        let s = DensityState::new(0.5, vec![1.0 / vol; 64], 0.5, 2).unwrap();
        let vp = v_plus(&s, &h, 0.0).unwrap();
        let expect = (2.0 - f64::ln(vol) + (4.0 * PI * 0.5).ln()) / vol;
        for v in &vp.field {
            assert!((v - expect).abs() < 1e-13);
        }
        assert!((vp.integral - expect * vol).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_unit_mass() {
        let m0 = MetricModel::Homogeneous(HomogeneousMetric::round_sphere());
        let h = evolve(&m0, (0.0, 0.1), &tol()).unwrap();
        let opts = ConjugateOptions { t_stop: 0.01, ..Default::default() };
        assert!(solve_conjugate_backward(&h, 0.1, &[1.0], &opts, &tol()).is_err());
    }

    #[test]
    fn homogeneous_identities_hold_to_stencil_accuracy() {
        let m0 = MetricModel::Homogeneous(HomogeneousMetric::heisenberg([1.0, 1.0, 1.0], 1.0));
        let h = evolve(&m0, (0.0, 3.0), &tol()).unwrap();
        let d = 1e-3;
        let times: Vec<f64> = (-2..=2).map(|k| 1.0 + k as f64 * d).collect();
        let opts = ConjugateOptions { t_stop: 0.5, record_times: times.clone(), ..Default::default() };
        let u3 = uniform_density(&h.metric_at(3.0).unwrap());
        let sol = solve_conjugate_backward(&h, 3.0, &u3, &opts, &tol()).unwrap();
        let states: Vec<DensityState> = times.iter().map(|t| sol.state_at(*t).unwrap().clone()).collect();
        let harnack = check_harnack_identity(&states, &h, 0.0).unwrap();
        assert!(harnack.max_residual < 1e-7, "{harnack:?}");
        assert!(harnack.min_rhs >= 0.0);
        let fplus = check_f_plus_evolution(&states, &h, 0.0).unwrap();
        assert!(fplus.max_residual < 1e-7, "{fplus:?}");
        let v = check_v_equation(&states, &h, 0.0).unwrap();
        assert!(v.max_residual < 1e-7, "{v:?}");
        let steady = check_steady_harnack(&states, &h).unwrap();
        assert!(steady.max_residual < 1e-7, "{steady:?}");
    }
}
