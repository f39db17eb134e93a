//! The per-scenario pipeline: evolve the testbed, run the selected checks,
//! and collect the report and artifacts in memory.

use std::collections::BTreeMap;

use rflab::conjugate_heat::{check_harnack_identity, solve_conjugate_backward, uniform_density, ConjugateOptions, DensityState};
use rflab::entropy::{asymptotics_report, entropy_report, mu_plus, nu_plus, DensitySource, NuPlus};
use rflab::flow::{blowdown, evolve_with, scaled_volume, BlowdownSpec, EvolveOptions, FlowHistory};
use rflab::geometry::MetricModel;
use rflab::reduced::{check_inequalities, ell_plus_field, theta_plus, ReducedOptions, ThetaOptions};
use rflab::{LabError, Result};
use serde::Serialize;

use crate::config::{CheckId, Scenario, SCHEMA_VERSION};
use crate::svg::line_chart;

/// Verdict of one check. Failures of the numerics are recorded in `error`
/// and count as a failed check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub check: &'static str,
    pub tolerance: f64,
    pub passed: bool,
    pub verdicts: BTreeMap<String, bool>,
    /// Informational properties that do not affect `passed`.
    pub flags: BTreeMap<String, bool>,
    /// Measured quantities; non-finite values serialize as `null`.
    pub values: BTreeMap<String, f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioReport {
    pub schema_version: u32,
    pub scenario: String,
    pub model: &'static str,
    pub t_span: [f64; 2],
    pub birth_time: Option<f64>,
    pub sample_times: Vec<f64>,
    pub passed: bool,
    pub checks: Vec<CheckOutcome>,
    pub error: Option<String>,
}

/// A file to be written under the scenario directory.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub path: String,
    pub contents: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioRun {
    pub report: ScenarioReport,
    pub artifacts: Vec<Artifact>,
}

#[derive(Default)]
struct Outcome {
    verdicts: BTreeMap<String, bool>,
    flags: BTreeMap<String, bool>,
    values: BTreeMap<String, f64>,
    artifacts: Vec<Artifact>,
}

impl Outcome {
    fn verdict(&mut self, name: &str, ok: bool) {
        self.verdicts.insert(name.to_string(), ok);
    }

    fn flag(&mut self, name: &str, on: bool) {
        self.flags.insert(name.to_string(), on);
    }

    fn value(&mut self, name: &str, v: f64) {
        self.values.insert(name.to_string(), v);
    }

    fn csv(&mut self, name: &str, contents: String) {
        self.artifacts.push(Artifact { path: format!("series/{name}.csv"), contents });
    }

    fn plot(&mut self, name: &str, title: &str, ts: &[f64], ys: &[f64]) {
        self.artifacts.push(Artifact { path: format!("plots/{name}.svg"), contents: line_chart(title, title, ts, ys) });
    }
}

struct Context<'a> {
    scenario: &'a Scenario,
    history: FlowHistory,
    times: Vec<f64>,
    birth: f64,
}

fn evolve_scenario(s: &Scenario, m: &MetricModel, times: &[f64]) -> Result<FlowHistory> {
    let opts = EvolveOptions { record_times: times.to_vec(), birth_time: s.birth_time, ..EvolveOptions::default() };
    evolve_with(m, (s.t_span[0], s.t_span[1]), &s.solver_tol(), &opts)
}

pub fn run_scenario(s: &Scenario) -> ScenarioRun {
    let times = s.sample_times();
    let mut report = ScenarioReport {
        schema_version: SCHEMA_VERSION,
        scenario: s.name.clone(),
        model: "",
        t_span: s.t_span,
        birth_time: None,
        sample_times: times.clone(),
        passed: false,
        checks: Vec::new(),
        error: None,
    };
    let setup = s.model.build().and_then(|m| {
        report.model = m.kind();
        evolve_scenario(s, &m, &times)
    });
    let history = match setup {
        Ok(h) => h,
        Err(e) => {
            report.error = Some(e.to_string());
            return ScenarioRun { report, artifacts: Vec::new() };
        }
    };
    let birth = history.birth_time();
    report.birth_time = Some(birth);
    let end = history.extinct_at().map_or(history.t_end(), |e| e.min(history.t_end()));
    let times: Vec<f64> = times.into_iter().filter(|&t| t > birth && t <= end).collect();
    report.sample_times = times.clone();
    let ctx = Context { scenario: s, history, times, birth };

    let mut artifacts = Vec::new();
    for &check in &s.checks {
        let tolerance = s.tolerance(check);
        let result = if ctx.times.len() < 3 {
            Err(LabError::InvalidArgument("fewer than three sample times lie inside the flow's lifetime".into()))
        } else {
            run_check(&ctx, check, tolerance)
        };
        let outcome = match result {
            Ok(o) => {
                artifacts.extend(o.artifacts);
                CheckOutcome {
                    check: check.name(),
                    tolerance,
                    passed: o.verdicts.values().all(|v| *v),
                    verdicts: o.verdicts,
                    flags: o.flags,
                    values: o.values,
                    error: None,
                }
            }
            Err(e) => CheckOutcome {
                check: check.name(),
                tolerance,
                passed: false,
                verdicts: BTreeMap::new(),
                flags: BTreeMap::new(),
                values: BTreeMap::new(),
                error: Some(e.to_string()),
            },
        };
        report.checks.push(outcome);
    }
    report.passed = report.checks.iter().all(|c| c.passed);
    ScenarioRun { report, artifacts }
}

fn run_check(ctx: &Context<'_>, check: CheckId, tol: f64) -> Result<Outcome> {
    match check {
        CheckId::Entropy => entropy(ctx, tol),
        CheckId::Harnack => harnack(ctx, tol),
        CheckId::MuNu => mu_nu(ctx, tol),
        CheckId::Reduced => reduced(ctx, tol),
        CheckId::Theta => theta(ctx, tol),
        CheckId::Asymptotics => asymptotics(ctx, tol),
        CheckId::Blowdown => blowdown_check(ctx, tol),
    }
}

/// Uniform densities on homogeneous testbeds (where they solve the
/// conjugate heat equation), otherwise a backward solve from uniform data
/// at the last sample time.
fn density(ctx: &Context<'_>) -> Result<DensitySource> {
    if ctx.history.kind() != "conformal_torus" {
        return Ok(DensitySource::Uniform);
    }
    let t_final = *ctx.times.last().expect("checked nonempty");
    let u = uniform_density(&ctx.history.metric_at(t_final)?);
    let opts = ConjugateOptions { t_stop: ctx.times[0], dt_max: None, record_times: ctx.times.clone(), keep_all: false };
    let sol = solve_conjugate_backward(&ctx.history, t_final, &u, &opts, &ctx.scenario.solver_tol())?;
    let states = ctx
        .times
        .iter()
        .map(|&t| sol.state_at(t).cloned().ok_or_else(|| LabError::InvalidArgument(format!("no conjugate state at t = {t}"))))
        .collect::<Result<Vec<DensityState>>>()?;
    Ok(DensitySource::Sampled(states))
}

fn entropy(ctx: &Context<'_>, tol: f64) -> Result<Outcome> {
    let report = entropy_report(&ctx.history, &ctx.times, &density(ctx)?, ctx.birth, &ctx.scenario.solver_tol(), tol)?;
    let v = &report.verdicts;
    let mut o = Outcome::default();
    o.verdict("w_plus_nondecreasing", v.w_plus_nondecreasing);
    o.verdict("nash_plus_nondecreasing", v.nash_plus_nondecreasing);
    o.verdict("lambda_bar_nondecreasing", v.lambda_bar_nondecreasing);
    o.verdict("scaled_volume_nonincreasing", v.scaled_volume_nonincreasing);
    o.verdict("rhs_nonnegative", v.rhs_nonnegative);
    o.value("w_plus_spread", v.w_plus_spread);
    o.value("decomposition_gap", v.decomposition_gap);
    // constancy is expected only on expanding solitons
    o.flag("w_plus_constant", v.w_plus_spread <= tol);
    let ts = report.column(|r| r.t);
    o.plot("w_plus", "W+", &ts, &report.column(|r| r.w_plus));
    o.plot("nash_plus", "N+", &ts, &report.column(|r| r.nash_plus));
    o.plot("lambda_bar", "lambda-bar", &ts, &report.column(|r| r.lambda_bar));
    o.plot("scaled_volume", "scaled volume", &ts, &report.column(|r| r.scaled_volume));
    o.csv("entropy", report.to_csv());
    Ok(o)
}

fn harnack(ctx: &Context<'_>, tol: f64) -> Result<Outcome> {
    let s = ctx.scenario;
    let t_c = ctx.times[ctx.times.len() / 2];
    let t_last = *ctx.times.last().expect("checked nonempty");
    // stencil proportional to σ: log σ terms have derivatives growing like σ^{-k}
    let delta = (2e-3 * (t_c - ctx.birth)).min(0.25 * (t_last - t_c).max(1e-12));
    let records: Vec<f64> = (-2..=2).map(|j| t_c + j as f64 * delta).collect();
    let t_final = t_last.max(records[4]);
    let torus = ctx.history.kind() == "conformal_torus";
    let own;
    let h = if torus {
        // flow and conjugate steps must land on the stencil
        let opts = EvolveOptions { torus_dt_max: Some(delta), record_times: records.clone(), birth_time: s.birth_time, ..Default::default() };
        own = evolve_with(&s.model.build()?, (s.t_span[0], t_final), &s.solver_tol(), &opts)?;
        &own
    } else {
        &ctx.history
    };
    let u = uniform_density(&h.metric_at(t_final)?);
    let copts = ConjugateOptions { t_stop: records[0], dt_max: torus.then_some(delta), record_times: records.clone(), keep_all: false };
    let sol = solve_conjugate_backward(h, t_final, &u, &copts, &s.solver_tol())?;
    let states = records
        .iter()
        .map(|&r| sol.state_at(r).cloned().ok_or_else(|| LabError::InvalidArgument(format!("no conjugate state at t = {r}"))))
        .collect::<Result<Vec<_>>>()?;
    let report = check_harnack_identity(&states, h, ctx.birth)?;
    let mut o = Outcome::default();
    o.value("t", t_c);
    o.value("stencil", delta);
    o.value("max_residual", report.max_residual);
    o.value("relative_residual", report.relative_residual());
    o.value("max_mass_defect", sol.max_mass_defect);
    o.verdict("identity_holds", report.max_residual <= tol);
    o.verdict("density_positive", sol.min_u > 0.0);
    Ok(o)
}

/// Up to six sample times spread over the list, ends included.
fn thin(times: &[f64], count: usize) -> Vec<f64> {
    if times.len() <= count {
        return times.to_vec();
    }
    let mut out: Vec<f64> = (0..count).map(|k| times[k * (times.len() - 1) / (count - 1)]).collect();
    out.dedup();
    out
}

fn mu_nu(ctx: &Context<'_>, tol: f64) -> Result<Outcome> {
    let solver = ctx.scenario.solver_tol().with_tol(1e-10, 1e-10);
    let times = thin(&ctx.times, 6);
    let mus = times
        .iter()
        .map(|&t| Ok(mu_plus(&ctx.history.metric_at(t)?, t - ctx.birth, &solver)?.value))
        .collect::<Result<Vec<f64>>>()?;
    let mut o = Outcome::default();
    o.verdict("mu_plus_nondecreasing", mus.windows(2).all(|w| w[1] >= w[0] - tol));
    let nu = |t: f64| nu_plus(&ctx.history.metric_at(t)?, &solver);
    let (first, last) = (nu(times[0])?, nu(*times.last().expect("nonempty"))?);
    let record = |o: &mut Outcome, name: &str, n: &NuPlus| o.value(name, n.value().unwrap_or(f64::INFINITY));
    record(&mut o, "nu_plus_first", &first);
    record(&mut o, "nu_plus_last", &last);
    if let (Some(a), Some(b)) = (first.value(), last.value()) {
        o.verdict("nu_plus_nondecreasing", b >= a - tol);
    }
    let rows: Vec<Vec<f64>> = times.iter().zip(&mus).map(|(t, m)| vec![*t, t - ctx.birth, *m]).collect();
    o.csv("mu_plus", rflab::report::csv_table(&["t", "sigma", "mu_plus"], &rows));
    o.plot("mu_plus", "mu+", &times, &mus);
    Ok(o)
}

fn base_point(ctx: &Context<'_>) -> Result<(Vec<f64>, [f64; 2])> {
    match ctx.history.metric_at(ctx.times[0])? {
        MetricModel::ConformalTorus(m) => Ok((ctx.scenario.base.unwrap_or([0.0, 0.0]).to_vec(), m.periods)),
        MetricModel::ModelSpace(_) => Ok((Vec::new(), [1.0, 1.0])),
        MetricModel::Homogeneous(_) => Err(LabError::Unsupported("reduced geometry on homogeneous testbeds".into())),
    }
}

fn reduced(ctx: &Context<'_>, tol: f64) -> Result<Outcome> {
    let (base, periods) = base_point(ctx)?;
    // interior times leave room for the time stencil
    let t_hi = ctx.times[ctx.times.len() / 2];
    let t_lo = ctx.times[ctx.times.len() / 4];
    let targets: Vec<(Vec<f64>, f64)> = if base.is_empty() {
        [t_lo, t_hi].iter().flat_map(|&t| [0.3, 0.8, 1.5].map(|r| (vec![r], t))).collect()
    } else {
        let side = 4;
        [t_lo, t_hi]
            .iter()
            .flat_map(|&t| {
                (0..side * side).map(move |k| {
                    let (i, j) = (k / side, k % side);
                    (vec![(i as f64 + 0.5) / side as f64 * periods[0], (j as f64 + 0.5) / side as f64 * periods[1]], t)
                })
            })
            .collect()
    };
    let step = 1e-2 * periods[0].min(periods[1]);
    let opts = ReducedOptions { epsilon: ctx.scenario.epsilon, stencil: Some(step), ..ReducedOptions::default() };
    let field = ell_plus_field(&ctx.history, &base, &targets, &opts)?;
    let ineq = check_inequalities(&field)?;
    let mut o = Outcome::default();
    o.verdict("all_converged", field.all_converged());
    o.verdict("inequalities_hold", ineq.holds(tol));
    o.verdict("k_identity_holds", field.max_k_identity_residual() <= tol);
    o.value("conjugate_heat", ineq.conjugate_heat);
    o.value("heat_supersolution", ineq.heat_supersolution);
    o.value("harnack", ineq.harnack);
    o.value("traced_hessian", ineq.traced_hessian);
    o.value("k_identity_residual", field.max_k_identity_residual());
    o.value("points_checked", ineq.checked as f64);
    o.value("points_skipped_nonsmooth", ineq.skipped_nonsmooth as f64);
    o.value("min_ell_plus_half_n", field.lower_bound_margin());
    o.csv("reduced", field.to_csv());
    Ok(o)
}

fn theta(ctx: &Context<'_>, tol: f64) -> Result<Outcome> {
    let (base, _) = base_point(ctx)?;
    let times = thin(&ctx.times, 5);
    let series = theta_plus(&ctx.history, &base, &times, &ThetaOptions::for_history(&ctx.history))?;
    let mut o = Outcome::default();
    o.verdict("theta_nonincreasing", series.max_increase() <= tol);
    o.verdict("above_lower_bound", series.lower_bound_margin() >= -tol);
    o.value("max_increase", series.max_increase());
    o.value("lower_bound_margin", series.lower_bound_margin());
    o.csv("theta_plus", series.to_csv());
    o.plot("theta_plus", "theta+", &series.times, &series.theta);
    Ok(o)
}

fn asymptotics(ctx: &Context<'_>, tol: f64) -> Result<Outcome> {
    let r = asymptotics_report(&ctx.history, &DensitySource::Uniform, &ctx.scenario.solver_tol())?;
    let mut o = Outcome::default();
    o.value("w_plus_limit", r.w_plus_limit);
    o.value("scaled_volume_limit", r.scaled_volume_limit);
    o.value("lambda_bar_limit", r.lambda_bar_limit);
    o.value("predicted_lambda_bar", r.predicted_lambda_bar);
    o.value("t_lambda_end", r.t_lambda_end);
    o.flag("collapsing", r.collapsing);
    o.verdict("lambda_bar_limit_matches", r.lambda_bar_error() <= tol);
    if let (Some(p), Some(e)) = (r.predicted_w_plus, r.w_plus_error()) {
        o.value("predicted_w_plus", p);
        o.verdict("w_plus_limit_matches", e <= tol);
    }
    Ok(o)
}

fn blowdown_check(ctx: &Context<'_>, tol: f64) -> Result<Outcome> {
    let alpha = ctx.scenario.blowdown_alpha;
    let hb = blowdown(&ctx.history, BlowdownSpec { alpha })?;
    let mut gap = 0.0f64;
    let mut rows = Vec::new();
    for &t in &ctx.times {
        let (a, b) = (scaled_volume(&ctx.history, t)?, scaled_volume(&hb, t / alpha)?);
        gap = gap.max((a - b).abs() / a.abs().max(1e-300));
        rows.push(vec![t, a, b]);
    }
    let mut o = Outcome::default();
    o.value("alpha", alpha);
    o.value("max_relative_gap", gap);
    o.verdict("scaled_volume_invariant", gap <= tol);
    o.csv("blowdown", rflab::report::csv_table(&["t", "scaled_volume", "scaled_volume_blowdown"], &rows));
    Ok(o)
}
