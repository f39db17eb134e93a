//! Ricci flow on the testbeds, stored as an immutable history.
//!
//! Homogeneous metrics evolve by the Milnor-frame ODE, model spaces by their
//! closed form `a(t) = a₀ − 2ρ₀(t − t₀)`, and conformal tori by implicit
//! trapezoidal method of lines. A history can be viewed through a blowdown
//! factor `α`, which presents `g_α(t) = α⁻¹ g(αt)` without copying data.

mod torus_step;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::geometry::{ConformalTorusMetric, HomogeneousMetric, MetricModel, ModelSpaceMetric};
use crate::numerics::{integrate_ode, integrate_ode_until, OdeSolution, ToleranceConfig};

pub(crate) use torus_step::{phi_rate, scalar_rate};

/// Extra controls for [`evolve_with`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvolveOptions {
    /// Torus time-step cap; defaults to `h²/2`.
    #[serde(default)]
    pub torus_dt_max: Option<f64>,
    /// Keep every k-th torus step (record times are always kept).
    #[serde(default)]
    pub snapshot_stride: Option<usize>,
    /// Times the torus stepper must land on exactly.
    #[serde(default)]
    pub record_times: Vec<f64>,
    /// Overrides the default birth time (vertex of an expander).
    #[serde(default)]
    pub birth_time: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowdownSpec {
    pub alpha: f64,
}

#[derive(Debug, Clone)]
enum HistoryData {
    Homogeneous { base: HomogeneousMetric, solution: OdeSolution, tol: ToleranceConfig },
    ModelSpace { base: ModelSpaceMetric, t0: f64, t_end: f64 },
    Torus { grid_size: [usize; 2], periods: [f64; 2], times: Vec<f64>, phis: Vec<Vec<f64>> },
}

/// A sampled Ricci flow. All public times are in the (possibly blown-down)
/// time of the presented flow.
#[derive(Debug, Clone)]
pub struct FlowHistory {
    data: HistoryData,
    alpha: f64,
    birth_time: f64,
    extinct_at: Option<f64>,
}

fn homogeneous_rhs(c: [f64; 3], frame_volume: f64) -> impl Fn(f64, &[f64], &mut [f64]) {
    move |_, y, dy| {
        let m = HomogeneousMetric { structure_constants: c, diag: [y[0], y[1], y[2]], frame_volume };
        let r = m.principal_ricci();
        for i in 0..3 {
            dy[i] = -2.0 * r[i] * y[i];
        }
    }
}

/// Evolves `m0` from `t0` to `t1` with default options.
pub fn evolve(m0: &MetricModel, t_span: (f64, f64), tol: &ToleranceConfig) -> Result<FlowHistory> {
    evolve_with(m0, t_span, tol, &EvolveOptions::default())
}

pub fn evolve_with(m0: &MetricModel, t_span: (f64, f64), tol: &ToleranceConfig, opts: &EvolveOptions) -> Result<FlowHistory> {
    let (t0, t1) = t_span;
    if !(t0 >= 0.0) || !(t1 > t0) || !t1.is_finite() {
        return Err(LabError::InvalidArgument(format!("flow window must satisfy 0 ≤ t0 < t1, got ({t0}, {t1})")));
    }
    m0.validate()?;
    tol.validate()?;
    match m0 {
        MetricModel::Homogeneous(m) => evolve_homogeneous(m, t0, t1, tol, opts),
        MetricModel::ModelSpace(m) => Ok(evolve_model_space(m, t0, t1, opts)),
        MetricModel::ConformalTorus(m) => evolve_torus(m, t0, t1, opts),
    }
}

fn evolve_homogeneous(m: &HomogeneousMetric, t0: f64, t1: f64, tol: &ToleranceConfig, opts: &EvolveOptions) -> Result<FlowHistory> {
    let rhs = homogeneous_rhs(m.structure_constants, m.frame_volume);
    let floor = 1e-8 * m.diag.iter().copied().fold(f64::INFINITY, f64::min);
    let run = integrate_ode_until(&rhs, &m.diag, t0, t1, tol, |_, y| y.iter().any(|v| *v < floor))?;
    Ok(FlowHistory {
        data: HistoryData::Homogeneous { base: m.clone(), solution: run.solution, tol: *tol },
        alpha: 1.0,
        birth_time: opts.birth_time.unwrap_or(0.0),
        extinct_at: run.halted_at,
    })
}

fn evolve_model_space(m: &ModelSpaceMetric, t0: f64, t1: f64, opts: &EvolveOptions) -> FlowHistory {
    let slope = -2.0 * m.rho0();
    let mut t_end = t1;
    let mut extinct_at = None;
    let mut birth = 0.0;
    if slope < 0.0 {
        let ext = t0 + m.scale / -slope;
        if ext <= t1 {
            t_end = ext;
            extinct_at = Some(ext);
        }
    } else if slope > 0.0 {
        birth = t0 - m.scale / slope;
    }
    FlowHistory {
        data: HistoryData::ModelSpace { base: m.clone(), t0, t_end },
        alpha: 1.0,
        birth_time: opts.birth_time.unwrap_or(birth),
        extinct_at,
    }
}

fn evolve_torus(m: &ConformalTorusMetric, t0: f64, t1: f64, opts: &EvolveOptions) -> Result<FlowHistory> {
    let h = m.hx().min(m.hy());
    let dt_max = opts.torus_dt_max.unwrap_or(0.5 * h * h);
    if !(dt_max > 0.0) {
        return Err(LabError::InvalidArgument("torus_dt_max must be positive".into()));
    }
    let stride = opts.snapshot_stride.unwrap_or(1).max(1);
    let mut stops: Vec<f64> = opts.record_times.iter().copied().filter(|&r| r > t0 && r < t1).collect();
    stops.push(t1);
    stops.sort_by(f64::total_cmp);
    stops.dedup();

    let mut times = vec![t0];
    let mut phis = vec![m.phi.clone()];
    let mut phi = m.phi.clone();
    let mut t = t0;
    let mut step = 0usize;
    for &stop in &stops {
        let n = ((stop - t) / dt_max).ceil().max(1.0) as usize;
        let dt = (stop - t) / n as f64;
        for k in 0..n {
            let t_next = if k + 1 == n { stop } else { t + dt };
            phi = torus_step::cn_step(m, &phi, t_next - t, t)?;
            t = t_next;
            step += 1;
            if k + 1 == n || step % stride == 0 {
                times.push(t);
                phis.push(phi.clone());
            }
        }
    }
    Ok(FlowHistory {
        data: HistoryData::Torus { grid_size: m.grid_size, periods: m.periods, times, phis },
        alpha: 1.0,
        birth_time: opts.birth_time.unwrap_or(0.0),
        extinct_at: None,
    })
}

impl FlowHistory {
    pub fn kind(&self) -> &'static str {
        match self.data {
            HistoryData::Homogeneous { .. } => "homogeneous",
            HistoryData::ModelSpace { .. } => "model_space",
            HistoryData::Torus { .. } => "conformal_torus",
        }
    }

    pub fn dimension(&self) -> usize {
        match &self.data {
            HistoryData::Homogeneous { .. } => 3,
            HistoryData::ModelSpace { base, .. } => base.dimension,
            HistoryData::Torus { .. } => 2,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    fn source_start(&self) -> f64 {
        match &self.data {
            HistoryData::Homogeneous { solution, .. } => solution.t_start(),
            HistoryData::ModelSpace { t0, .. } => *t0,
            HistoryData::Torus { times, .. } => times[0],
        }
    }

    fn source_end(&self) -> f64 {
        match &self.data {
            HistoryData::Homogeneous { solution, .. } => solution.t_end(),
            HistoryData::ModelSpace { t_end, .. } => *t_end,
            HistoryData::Torus { times, .. } => *times.last().expect("torus history has snapshots"),
        }
    }

    pub fn t_start(&self) -> f64 {
        self.source_start() / self.alpha
    }

    pub fn t_end(&self) -> f64 {
        self.source_end() / self.alpha
    }

    /// `T` in `σ = t − T`.
    pub fn birth_time(&self) -> f64 {
        self.birth_time / self.alpha
    }

    pub fn extinct_at(&self) -> Option<f64> {
        self.extinct_at.map(|t| t / self.alpha)
    }

    /// Same flow with a different birth time.
    pub fn with_birth_time(mut self, birth_time: f64) -> Self {
        self.birth_time = birth_time * self.alpha;
        self
    }

    pub fn snapshot_times(&self) -> Vec<f64> {
        let raw: Vec<f64> = match &self.data {
            HistoryData::Homogeneous { solution, .. } => solution.times().to_vec(),
            HistoryData::ModelSpace { t0, t_end, .. } => vec![*t0, *t_end],
            HistoryData::Torus { times, .. } => times.clone(),
        };
        raw.into_iter().map(|t| t / self.alpha).collect()
    }

    /// Snapshot times with the closed-form and ODE histories densified to at
    /// least `n` uniformly spaced samples.
    pub fn sample_times(&self, n: usize) -> Vec<f64> {
        let mut ts = self.snapshot_times();
        if !matches!(self.data, HistoryData::Torus { .. }) {
            let (a, b) = (self.t_start(), self.t_end());
            let end = if self.extinct_at.is_some() { a + (b - a) * (1.0 - 1e-3) } else { b };
            ts.retain(|&t| t <= end);
            ts.extend((0..n).map(|k| a + (end - a) * k as f64 / (n.max(2) - 1) as f64));
            ts.sort_by(f64::total_cmp);
            ts.dedup_by(|x, y| (*x - *y).abs() <= 1e-14 * y.abs().max(1.0));
        }
        ts
    }

    fn check_range(&self, t: f64) -> Result<f64> {
        let s = t * self.alpha;
        let (start, end) = (self.source_start(), self.source_end());
        let slack = 1e-12 * (1.0 + end.abs());
        let lower_ok = match &self.data {
            // closed form: valid back to the vertex
            HistoryData::ModelSpace { base, .. } if base.rho0() < 0.0 => true,
            _ => s >= start - slack,
        };
        if !lower_ok || !(s <= end + slack) {
            return Err(LabError::OutOfRange { t, start: self.t_start(), end: self.t_end() });
        }
        Ok(s.clamp(f64::MIN, end))
    }

    /// Model-space scale `a(t)` of the presented flow.
    pub fn model_scale_at(&self, t: f64) -> Result<f64> {
        match &self.data {
            HistoryData::ModelSpace { base, t0, .. } => {
                let s = self.check_range(t)?;
                let a = base.scale - 2.0 * base.rho0() * (s - t0);
                if !(a > 0.0) {
                    return Err(LabError::InvalidModel(format!("model scale vanished at t = {t}")));
                }
                Ok(a / self.alpha)
            }
            _ => Err(LabError::Unsupported("model_scale_at on a non-model history".into())),
        }
    }

    /// The metric `g(t)` of the presented flow.
    pub fn metric_at(&self, t: f64) -> Result<MetricModel> {
        let s = self.check_range(t)?;
        let inv = 1.0 / self.alpha;
        let source = match &self.data {
            HistoryData::Homogeneous { base, solution, tol } => {
                let times = solution.times();
                let k = times.partition_point(|&x| x <= s).saturating_sub(1);
                let diag = if s == times[k] {
                    solution.states()[k].clone()
                } else {
                    // re-integrate from the last accepted node for full accuracy
                    let rhs = homogeneous_rhs(base.structure_constants, base.frame_volume);
                    integrate_ode(rhs, &solution.states()[k], times[k], s, tol)?.final_state().to_vec()
                };
                MetricModel::Homogeneous(HomogeneousMetric { diag: [diag[0], diag[1], diag[2]], ..base.clone() })
            }
            HistoryData::ModelSpace { base, t0, .. } => {
                let a = base.scale - 2.0 * base.rho0() * (s - t0);
                if !(a > 0.0) {
                    return Err(LabError::InvalidModel(format!("model scale vanished at t = {t}")));
                }
                MetricModel::ModelSpace(ModelSpaceMetric { scale: a, ..base.clone() })
            }
            HistoryData::Torus { grid_size, periods, times, phis } => {
                let phi = interpolate_phi(*grid_size, *periods, times, phis, s);
                MetricModel::ConformalTorus(ConformalTorusMetric { grid_size: *grid_size, periods: *periods, phi })
            }
        };
        Ok(if self.alpha == 1.0 { source } else { source.scaled(inv) })
    }

    pub fn volume_at(&self, t: f64) -> Result<f64> {
        Ok(self.metric_at(t)?.volume())
    }

    pub fn scalar_at(&self, t: f64) -> Result<Vec<f64>> {
        Ok(self.metric_at(t)?.scalar_curvature())
    }

    /// `∂R/∂t` from the evolution equation `R_t = ΔR + 2|Rc|²`.
    pub fn scalar_rate_at(&self, t: f64) -> Result<Vec<f64>> {
        let m = self.metric_at(t)?;
        Ok(match &m {
            MetricModel::ConformalTorus(tm) => scalar_rate(tm, &tm.phi, &tm.scalar_curvature()),
            other => vec![2.0 * other.curvature().ricci_norm_sq[0]],
        })
    }

    pub fn snapshots(&self) -> Result<Vec<(f64, MetricModel)>> {
        self.snapshot_times()
            .into_iter()
            .filter(|t| self.extinct_at().map_or(true, |e| *t < e))
            .map(|t| Ok((t, self.metric_at(t)?)))
            .collect()
    }

    /// CSV with columns `t`, reduced parameters, `V`, `R_min`, `R_max`.
    pub fn to_csv(&self, times: &[f64]) -> Result<String> {
        let params = match &self.data {
            HistoryData::Homogeneous { .. } => "A,B,C",
            HistoryData::ModelSpace { .. } => "a",
            HistoryData::Torus { .. } => "phi_min,phi_max",
        };
        let mut out = format!("t,{params},V,R_min,R_max\n");
        for &t in times {
            let m = self.metric_at(t)?;
            let reduced: Vec<f64> = match &m {
                MetricModel::Homogeneous(h) => h.diag.to_vec(),
                MetricModel::ModelSpace(s) => vec![s.scale],
                MetricModel::ConformalTorus(tm) => vec![
                    tm.phi.iter().copied().fold(f64::INFINITY, f64::min),
                    tm.phi.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                ],
            };
            let c = m.curvature();
            let mut row = vec![t];
            row.extend(reduced);
            row.extend([m.volume(), c.min_scalar(), c.max_scalar()]);
            out.push_str(&crate::report::csv_row(&row));
        }
        Ok(out)
    }
}

fn interpolate_phi(grid_size: [usize; 2], periods: [f64; 2], times: &[f64], phis: &[Vec<f64>], s: f64) -> Vec<f64> {
    let k = times.partition_point(|&x| x <= s).clamp(1, times.len().max(2) - 1) - 1;
    if times.len() == 1 || s == times[k] {
        return phis[k].clone();
    }
    if s == times[k + 1] {
        return phis[k + 1].clone();
    }
    let template = ConformalTorusMetric { grid_size, periods, phi: Vec::new() };
    let (ta, tb) = (times[k], times[k + 1]);
    let h = tb - ta;
    let x = (s - ta) / h;
    let h00 = (1.0 + 2.0 * x) * (1.0 - x) * (1.0 - x);
    let h10 = x * (1.0 - x) * (1.0 - x);
    let h01 = x * x * (3.0 - 2.0 * x);
    let h11 = x * x * (x - 1.0);
    let fa = phi_rate(&template, &phis[k]);
    let fb = phi_rate(&template, &phis[k + 1]);
    (0..phis[k].len())
        .map(|i| h00 * phis[k][i] + h10 * h * fa[i] + h01 * phis[k + 1][i] + h11 * h * fb[i])
        .collect()
}

/// `Ṽ(t) = V(t)/t^{n/2}`.
pub fn scaled_volume(h: &FlowHistory, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(LabError::InvalidArgument(format!("scaled volume needs t > 0, got {t}")));
    }
    Ok(h.volume_at(t)? / t.powf(0.5 * h.dimension() as f64))
}

/// Pointwise `R + n/2t` over the sampled times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RLowerBoundReport {
    pub times: Vec<f64>,
    pub min_margin: Vec<f64>,
    pub worst: f64,
    pub starts_at_zero: bool,
}

impl RLowerBoundReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.worst >= -tol
    }
}

pub fn check_r_lower_bound(h: &FlowHistory) -> Result<RLowerBoundReport> {
    let n = h.dimension() as f64;
    let times: Vec<f64> = h.sample_times(101).into_iter().filter(|&t| t > 0.0).collect();
    let mut min_margin = Vec::with_capacity(times.len());
    for &t in &times {
        let r = h.scalar_at(t)?;
        let m = r.iter().fold(f64::INFINITY, |a, v| a.min(v + n / (2.0 * t)));
        min_margin.push(m);
    }
    let worst = min_margin.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(RLowerBoundReport { times, min_margin, worst, starts_at_zero: h.t_start() == 0.0 })
}

/// The history of `g_α(t) = α⁻¹g(αt)`.
pub fn blowdown(h: &FlowHistory, spec: BlowdownSpec) -> Result<FlowHistory> {
    if !(spec.alpha >= 1.0) || !spec.alpha.is_finite() {
        return Err(LabError::InvalidArgument(format!("blowdown factor must be ≥ 1, got {}", spec.alpha)));
    }
    let mut out = h.clone();
    out.alpha = h.alpha * spec.alpha;
    if !(out.t_end() > out.t_start()) {
        return Err(LabError::OutOfRange { t: h.t_end(), start: h.t_start(), end: h.t_end() });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> ToleranceConfig {
        ToleranceConfig { abs_tol: 1e-12, rel_tol: 1e-12, ..Default::default() }
    }

    #[test]
    fn hyperbolic_scale_is_linear() {
        let m = MetricModel::ModelSpace(ModelSpaceMetric::hyperbolic3(1.0, 1.0));
        let h = evolve(&m, (0.0, 10.0), &tol()).unwrap();
        assert_eq!(h.model_scale_at(2.5).unwrap(), 11.0);
        assert_eq!(h.birth_time(), -0.25);
    }

    #[test]
    fn sphere_goes_extinct() {
        let m = MetricModel::ModelSpace(ModelSpaceMetric::new(3, 1, 1.0, 1.0).unwrap());
        let h = evolve(&m, (0.0, 1.0), &tol()).unwrap();
        assert_eq!(h.extinct_at(), Some(0.25));
        assert!((h.model_scale_at(0.2).unwrap() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn constant_phi_is_static() {
        let m = MetricModel::ConformalTorus(ConformalTorusMetric::new([8, 8], [1.0, 1.0], vec![0.3; 64]).unwrap());
        let h = evolve(&m, (0.0, 0.01), &tol()).unwrap();
        let g = h.metric_at(0.0073).unwrap();
        assert!(g.as_torus().unwrap().phi.iter().all(|p| (p - 0.3).abs() < 1e-14));
    }

    #[test]
    fn blowdown_rescales_model_scale() {
        let m = MetricModel::ModelSpace(ModelSpaceMetric::hyperbolic3(1.0, 1.0));
        let h = evolve(&m, (0.0, 1000.0), &tol()).unwrap();
        let b = blowdown(&h, BlowdownSpec { alpha: 100.0 }).unwrap();
        let a = b.model_scale_at(2.0).unwrap();
        assert!((a - (1.0 + 800.0) / 100.0).abs() < 1e-12);
        assert!(blowdown(&h, BlowdownSpec { alpha: 0.5 }).is_err());
    }
}
