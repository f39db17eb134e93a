//! Time series of the entropy functionals along a flow, their monotonicity
//! verdicts, and long-time diagnostics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::functionals::{expander_residual_rhs, f_functional, lambda, nash_entropy, w_plus};
use crate::conjugate_heat::{uniform_density, DensityState};
use crate::error::{LabError, Result};
use crate::flow::{scaled_volume, FlowHistory};
use crate::numerics::{least_squares, quadrature, ToleranceConfig};

/// Where the unit-mass density at each time comes from.
#[derive(Debug, Clone)]
pub enum DensitySource {
    /// `u = 1/V(t)`; the immortal density on homogeneous and flat testbeds.
    Uniform,
    /// Precomputed states, looked up by time.
    Sampled(Vec<DensityState>),
}

impl DensitySource {
    pub fn density_at(&self, h: &FlowHistory, t: f64) -> Result<Vec<f64>> {
        match self {
            DensitySource::Uniform => Ok(uniform_density(&h.metric_at(t)?)),
            DensitySource::Sampled(states) => states
                .iter()
                .find(|s| (s.t - t).abs() <= 1e-12 * t.abs().max(1.0))
                .map(|s| s.u.clone())
                .ok_or_else(|| LabError::InvalidArgument(format!("no density sample at t = {t}"))),
        }
    }

    /// Times available for a sampled source.
    pub fn times(&self) -> Option<Vec<f64>> {
        match self {
            DensitySource::Uniform => None,
            DensitySource::Sampled(states) => Some(states.iter().map(|s| s.t).collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyRow {
    pub t: f64,
    pub sigma: f64,
    pub f: f64,
    pub f_plus: f64,
    pub nash: f64,
    pub nash_plus: f64,
    pub w_plus: f64,
    pub w_plus_second_form: f64,
    /// Finite-difference `dW₊/dt` across neighbouring rows.
    pub dw_dt: f64,
    /// `∫2σu|Rc + ∇²f₊ + g/2σ|² dv`.
    pub rhs: f64,
    pub lambda: f64,
    pub lambda_bar: f64,
    pub scaled_volume: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyVerdicts {
    pub tolerance: f64,
    pub w_plus_nondecreasing: bool,
    pub nash_plus_nondecreasing: bool,
    pub lambda_bar_nondecreasing: bool,
    pub scaled_volume_nonincreasing: bool,
    pub rhs_nonnegative: bool,
    /// `−n/2t − tol ≤ F ≤ tol` (meaningful for flows from `t = 0` with the immortal density).
    pub f_bounds_hold: bool,
    /// `dF/dt ≥ (2/n)F² − tol`, differenced across rows.
    pub f_riccati_holds: bool,
    /// Largest `|W₊ − (σF₊ + N₊)|`.
    pub decomposition_gap: f64,
    /// Largest spread of `W₊` over the rows.
    pub w_plus_spread: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    pub birth_time: f64,
    pub dimension: usize,
    pub rows: Vec<EntropyRow>,
    pub verdicts: EntropyVerdicts,
}

impl EntropyReport {
    pub const CSV_HEADER: [&'static str; 13] = [
        "t", "sigma", "F", "F_plus", "N", "N_plus", "W_plus", "W_plus_second_form", "dW_dt", "rhs", "lambda",
        "lambda_bar", "scaled_volume",
    ];

    pub fn to_csv(&self) -> String {
        let rows: Vec<Vec<f64>> = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.t, r.sigma, r.f, r.f_plus, r.nash, r.nash_plus, r.w_plus, r.w_plus_second_form, r.dw_dt, r.rhs,
                    r.lambda, r.lambda_bar, r.scaled_volume,
                ]
            })
            .collect();
        crate::report::csv_table(&Self::CSV_HEADER, &rows)
    }

    pub fn column(&self, pick: impl Fn(&EntropyRow) -> f64) -> Vec<f64> {
        self.rows.iter().map(pick).collect()
    }
}

/// Derivative of samples `ys` at `ts`: nonuniform three-point in the
/// interior, one-sided two-point at the ends.
fn differentiate(ts: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = ts.len();
    if n < 2 {
        return vec![f64::NAN; n];
    }
    (0..n)
        .map(|i| {
            if i == 0 {
                (ys[1] - ys[0]) / (ts[1] - ts[0])
            } else if i == n - 1 {
                (ys[n - 1] - ys[n - 2]) / (ts[n - 1] - ts[n - 2])
            } else {
                let (a, b) = (ts[i] - ts[i - 1], ts[i + 1] - ts[i]);
                (-b * b * ys[i - 1] + (b * b - a * a) * ys[i] + a * a * ys[i + 1]) / (a * b * (a + b))
            }
        })
        .collect()
}

fn nondecreasing(ys: &[f64], tol: f64) -> bool {
    ys.windows(2).all(|w| w[1] >= w[0] - tol)
}

/// Evaluates all functionals at `times` with `σ = t − birth`.
pub fn entropy_report(
    h: &FlowHistory,
    times: &[f64],
    density: &DensitySource,
    birth: f64,
    tol: &ToleranceConfig,
    verdict_tol: f64,
) -> Result<EntropyReport> {
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(LabError::InvalidSeries("entropy report times must increase strictly".into()));
    }
    let n = h.dimension();
    let nf = n as f64;
    let rows: Vec<EntropyRow> = times
        .par_iter()
        .map(|&t| -> Result<EntropyRow> {
            let sigma = t - birth;
            if !(sigma > 0.0) {
                return Err(LabError::BeforeBirth { t, birth });
            }
            let m = h.metric_at(t)?;
            let u = density.density_at(h, t)?;
            let f = f_functional(&m, &u)?;
            let nash = nash_entropy(&m, &u, sigma)?;
            let w = w_plus(&m, &u, sigma)?;
            let lam = lambda(&m, tol)?;
            Ok(EntropyRow {
                t,
                sigma,
                f,
                f_plus: f + 0.5 * nf / sigma,
                nash: nash.n,
                nash_plus: nash.n_plus,
                w_plus: w.value,
                w_plus_second_form: w.second_form,
                dw_dt: f64::NAN,
                rhs: expander_residual_rhs(&m, &u, sigma)?,
                lambda: lam.lambda,
                lambda_bar: lam.lambda_bar,
                scaled_volume: if t > 0.0 { scaled_volume(h, t)? } else { f64::NAN },
            })
        })
        .collect::<Result<_>>()?;
    let mut rows = rows;
    let ts: Vec<f64> = rows.iter().map(|r| r.t).collect();
    let ws: Vec<f64> = rows.iter().map(|r| r.w_plus).collect();
    for (r, d) in rows.iter_mut().zip(differentiate(&ts, &ws)) {
        r.dw_dt = d;
    }

    let col = |pick: fn(&EntropyRow) -> f64| rows.iter().map(pick).collect::<Vec<f64>>();
    let fs = col(|r| r.f);
    let df = differentiate(&ts, &fs);
    let f_riccati_holds = rows.len() < 3 || (1..rows.len() - 1).all(|i| df[i] >= 2.0 / nf * fs[i] * fs[i] - verdict_tol);
    let vt: Vec<f64> = col(|r| r.scaled_volume).into_iter().filter(|v| v.is_finite()).collect();
    let w_max = ws.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w_min = ws.iter().copied().fold(f64::INFINITY, f64::min);
    let verdicts = EntropyVerdicts {
        tolerance: verdict_tol,
        w_plus_nondecreasing: nondecreasing(&ws, verdict_tol),
        nash_plus_nondecreasing: nondecreasing(&col(|r| r.nash_plus), verdict_tol),
        lambda_bar_nondecreasing: nondecreasing(&col(|r| r.lambda_bar), verdict_tol),
        scaled_volume_nonincreasing: vt.windows(2).all(|w| w[1] <= w[0] + verdict_tol),
        rhs_nonnegative: rows.iter().all(|r| r.rhs >= 0.0),
        f_bounds_hold: rows.iter().all(|r| r.t <= 0.0 || (r.f >= -0.5 * nf / r.t - verdict_tol && r.f <= verdict_tol)),
        f_riccati_holds,
        decomposition_gap: rows
            .iter()
            .map(|r| (r.w_plus - (r.sigma * r.f_plus + r.nash_plus)).abs())
            .fold(0.0, f64::max),
        w_plus_spread: if rows.is_empty() { 0.0 } else { w_max - w_min },
    };
    Ok(EntropyReport { birth_time: birth, dimension: n, rows, verdicts })
}

/// Five-point `dW₊/dt` at `t` against the right-hand side of the monotonicity
/// formula, for densities available at arbitrary times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateCheck {
    pub t: f64,
    pub fd_rate: f64,
    pub rhs: f64,
}

impl RateCheck {
    pub fn gap(&self) -> f64 {
        (self.fd_rate - self.rhs).abs()
    }
}

pub fn check_w_plus_rate(h: &FlowHistory, t: f64, delta: f64, birth: f64) -> Result<RateCheck> {
    let w_at = |s: f64| -> Result<f64> {
        let m = h.metric_at(s)?;
        Ok(w_plus(&m, &uniform_density(&m), s - birth)?.value)
    };
    let w: Vec<f64> = [-2.0, -1.0, 1.0, 2.0].iter().map(|k| w_at(t + k * delta)).collect::<Result<_>>()?;
    let fd_rate = (w[0] - 8.0 * w[1] + 8.0 * w[2] - w[3]) / (12.0 * delta);
    let m = h.metric_at(t)?;
    let rhs = expander_residual_rhs(&m, &uniform_density(&m), t - birth)?;
    Ok(RateCheck { t, fd_rate, rhs })
}

/// Fit `y ≈ a + b/t + c/t²` and return `a`.
fn tail_limit(ts: &[f64], ys: &[f64]) -> Result<f64> {
    let one = |_: f64| 1.0;
    let inv = |t: f64| 1.0 / t;
    let inv2 = |t: f64| 1.0 / (t * t);
    Ok(least_squares(ts, ys, &[&one, &inv, &inv2])?[0])
}

/// Long-time limits of `W₊` (with `σ = t`), `Ṽ` and `λ̄`, compared with the
/// values they are predicted to approach.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticsReport {
    pub tail: (f64, f64),
    pub w_plus_end: f64,
    pub w_plus_limit: f64,
    pub scaled_volume_end: f64,
    pub scaled_volume_limit: f64,
    pub lambda_bar_end: f64,
    pub lambda_bar_limit: f64,
    /// `t·λ` at the last time.
    pub t_lambda_end: f64,
    /// `−log Ṽ∞ + (n/2)(1 + log 4π)`; `None` when `Ṽ∞` is numerically zero.
    pub predicted_w_plus: Option<f64>,
    /// `−(n/2)Ṽ∞^{2/n}`.
    pub predicted_lambda_bar: f64,
    pub collapsing: bool,
}

impl AsymptoticsReport {
    pub fn w_plus_error(&self) -> Option<f64> {
        self.predicted_w_plus.map(|p| (p - self.w_plus_limit).abs())
    }

    pub fn lambda_bar_error(&self) -> f64 {
        (self.predicted_lambda_bar - self.lambda_bar_limit).abs()
    }
}

/// Fits over the last decade `[t_end/10, t_end]` of the history.
pub fn asymptotics_report(h: &FlowHistory, density: &DensitySource, tol: &ToleranceConfig) -> Result<AsymptoticsReport> {
    let end = h.extinct_at().map_or(h.t_end(), |e| e.min(h.t_end()));
    let start = (0.1 * end).max(h.t_start());
    if !(end > start && start > 0.0) {
        return Err(LabError::InvalidArgument("asymptotics need a history reaching past t = 0".into()));
    }
    let times: Vec<f64> = match density.times() {
        Some(ts) => ts.into_iter().filter(|&t| t >= start && t <= end).collect(),
        None => (0..=40).map(|k| start * (end / start).powf(k as f64 / 40.0)).collect(),
    };
    if times.len() < 4 {
        return Err(LabError::InvalidArgument("too few samples in the tail decade".into()));
    }
    let report = entropy_report(h, &times, density, 0.0, tol, 0.0)?;
    let n = h.dimension() as f64;
    let ws = report.column(|r| r.w_plus);
    let vs = report.column(|r| r.scaled_volume);
    let ls = report.column(|r| r.lambda_bar);
    let last = report.rows.last().expect("nonempty tail");
    let v_limit = tail_limit(&times, &vs)?;
    let collapsing = v_limit <= 1e-6 * vs[0].abs().max(1e-300) || v_limit <= 0.0;
    let v_for_prediction = v_limit.max(0.0);
    Ok(AsymptoticsReport {
        tail: (start, end),
        w_plus_end: last.w_plus,
        w_plus_limit: tail_limit(&times, &ws)?,
        scaled_volume_end: last.scaled_volume,
        scaled_volume_limit: v_limit,
        lambda_bar_end: last.lambda_bar,
        lambda_bar_limit: tail_limit(&times, &ls)?,
        t_lambda_end: last.t * last.lambda,
        predicted_w_plus: (!collapsing).then(|| -v_for_prediction.ln() + 0.5 * n * (1.0 + (4.0 * std::f64::consts::PI).ln())),
        predicted_lambda_bar: -0.5 * n * v_for_prediction.powf(2.0 / n),
        collapsing,
    })
}

/// The rescaled soliton defect integral over a window of log-time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolitonDefectReport {
    /// `(t̃_a, t̃_b)` with `t̃ = log t`.
    pub window: (f64, f64),
    pub integral: f64,
    /// `p` in a fit `integrand ≈ C t^p`.
    pub decay_exponent: f64,
    pub samples: Vec<(f64, f64)>,
    pub integrand_nonnegative: bool,
}

/// `∫ũ|R̃c + ∇̃²f̃₊ + g̃/2|² dṽ` at time `t`, which equals `(t/2)` times the
/// monotonicity integrand with `σ = t`.
fn rescaled_defect(h: &FlowHistory, density: &DensitySource, t: f64) -> Result<f64> {
    let m = h.metric_at(t)?;
    let u = density.density_at(h, t)?;
    Ok(0.5 * t * expander_residual_rhs(&m, &u, t)?)
}

pub fn soliton_defect_integral(h: &FlowHistory, density: &DensitySource, log_window: (f64, f64)) -> Result<SolitonDefectReport> {
    let (a, b) = log_window;
    if !(b > a) {
        return Err(LabError::InvalidArgument("log-time window must be increasing".into()));
    }
    let (integral, samples) = match density.times() {
        None => {
            let integral = quadrature::gauss_legendre(
                |s| rescaled_defect(h, density, s.exp()).unwrap_or(f64::NAN),
                a,
                b,
                ((b - a) * 8.0).ceil().max(4.0) as usize,
            );
            let samples: Vec<(f64, f64)> = (0..=32)
                .map(|k| {
                    let s = a + (b - a) * k as f64 / 32.0;
                    rescaled_defect(h, density, s.exp()).map(|v| (s, v))
                })
                .collect::<Result<_>>()?;
            (integral, samples)
        }
        Some(ts) => {
            let samples: Vec<(f64, f64)> = ts
                .into_iter()
                .filter(|&t| t > 0.0 && t.ln() >= a && t.ln() <= b)
                .map(|t| rescaled_defect(h, density, t).map(|v| (t.ln(), v)))
                .collect::<Result<_>>()?;
            let xs: Vec<f64> = samples.iter().map(|s| s.0).collect();
            let ys: Vec<f64> = samples.iter().map(|s| s.1).collect();
            (quadrature::trapezoid(&xs, &ys), samples)
        }
    };
    if !integral.is_finite() {
        return Err(LabError::NonFinite { t: a.exp(), detail: "rescaled defect integral".into() });
    }
    let positive: Vec<(f64, f64)> = samples.iter().copied().filter(|s| s.1 > 0.0).collect();
    let decay_exponent = if positive.len() >= 2 {
        let xs: Vec<f64> = positive.iter().map(|s| s.0).collect();
        let ys: Vec<f64> = positive.iter().map(|s| s.1.ln()).collect();
        let one = |_: f64| 1.0;
        let lin = |x: f64| x;
        least_squares(&xs, &ys, &[&one, &lin])?[1]
    } else {
        f64::NEG_INFINITY
    };
    Ok(SolitonDefectReport {
        window: log_window,
        integral,
        decay_exponent,
        integrand_nonnegative: samples.iter().all(|s| s.1 >= 0.0),
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::evolve;
    use crate::geometry::{HomogeneousMetric, MetricModel, ModelSpaceMetric};
    use std::f64::consts::PI;

    fn tol() -> ToleranceConfig {
        ToleranceConfig::default()
    }

    #[test]
    fn hyperbolic_report_is_constant_with_vertex_sigma() {
        let m = MetricModel::ModelSpace(ModelSpaceMetric::hyperbolic3(1.0, 1.0));
        let h = evolve(&m, (0.0, 100.0), &tol()).unwrap();
        let times: Vec<f64> = (0..30).map(|k| 0.1 * 1000f64.powf(k as f64 / 29.0)).collect();
        let r = entropy_report(&h, &times, &DensitySource::Uniform, h.birth_time(), &tol(), 1e-10).unwrap();
        assert!(r.verdicts.w_plus_spread < 1e-12);
        assert!(r.verdicts.decomposition_gap < 1e-12);
        assert!(r.verdicts.lambda_bar_nondecreasing && r.verdicts.scaled_volume_nonincreasing);
        assert!(r.rows.iter().all(|row| (row.w_plus - 1.5 - 1.5 * PI.ln()).abs() < 1e-12));
    }

    #[test]
    fn heisenberg_rate_matches_rhs() {
        let m = MetricModel::Homogeneous(HomogeneousMetric::heisenberg([1.0, 1.0, 1.0], 1.0));
        let h = evolve(&m, (0.0, 5.0), &ToleranceConfig { abs_tol: 1e-13, rel_tol: 1e-13, ..tol() }).unwrap();
        let c = check_w_plus_rate(&h, 2.0, 1e-3, 0.0).unwrap();
        assert!(c.gap() < 1e-8, "{c:?}");
        assert!(c.rhs > 0.0);
    }

    #[test]
    fn hyperbolic_asymptotics() {
        let m = MetricModel::ModelSpace(ModelSpaceMetric::hyperbolic3(1.0, 1.0));
        let h = evolve(&m, (0.0, 1000.0), &tol()).unwrap();
        let a = asymptotics_report(&h, &DensitySource::Uniform, &tol()).unwrap();
        assert!((a.scaled_volume_limit - 8.0).abs() < 1e-6);
        assert!(a.w_plus_error().unwrap() < 1e-6);
        assert!(a.lambda_bar_error() < 1e-6);
    }

    #[test]
    fn soliton_defect_flat_versus_hyperbolic() {
        let m = MetricModel::ModelSpace(ModelSpaceMetric::hyperbolic3(1.0, 1.0));
        let h = evolve(&m, (0.0, 1e4), &tol()).unwrap();
        let short = soliton_defect_integral(&h, &DensitySource::Uniform, (0.0, 4.0)).unwrap();
        let long = soliton_defect_integral(&h, &DensitySource::Uniform, (0.0, 8.0)).unwrap();
        assert!(long.integral - short.integral < 1e-3);
        assert!(long.decay_exponent < -1.5);

        let flat = MetricModel::ConformalTorus(crate::geometry::ConformalTorusMetric::flat([8, 8], [1.0, 1.0]).unwrap());
        let hf = crate::flow::evolve_with(
            &flat,
            (0.0, 100.0),
            &tol(),
            &crate::flow::EvolveOptions { torus_dt_max: Some(50.0), ..Default::default() },
        )
        .unwrap();
        let p = soliton_defect_integral(&hf, &DensitySource::Uniform, (0.0, 4.0)).unwrap();
        assert!((p.integral - 2.0).abs() < 1e-10, "{}", p.integral);
    }
}
