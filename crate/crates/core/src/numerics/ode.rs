//! Adaptive Dormand–Prince 5(4) integration with PI step control and cubic
//! Hermite dense output between accepted steps.

use super::{TimeSeries, ToleranceConfig};
use crate::error::{LabError, Result};

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// b5 - b4
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 5.0;
const PI_ALPHA: f64 = 0.7 / 5.0;
const PI_BETA: f64 = 0.4 / 5.0;

/// Accepted steps of an integration together with the right-hand side at
/// every node, which is what the cubic Hermite interpolant needs.
#[derive(Debug, Clone)]
pub struct OdeSolution {
    times: Vec<f64>,
    states: Vec<Vec<f64>>,
    derivs: Vec<Vec<f64>>,
}

impl OdeSolution {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }

    pub fn derivatives(&self) -> &[Vec<f64>] {
        &self.derivs
    }

    pub fn t_start(&self) -> f64 {
        self.times[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("non-empty solution")
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("non-empty solution")
    }

    pub fn dim(&self) -> usize {
        self.states[0].len()
    }

    fn locate(&self, t: f64) -> Result<usize> {
        let (t0, t1) = (self.t_start(), self.t_end());
        let slack = 1e-12 * (1.0 + t0.abs().max(t1.abs()));
        if !(t >= t0 - slack && t <= t1 + slack) {
            return Err(LabError::OutOfRange { t, start: t0, end: t1 });
        }
        if self.times.len() == 1 {
            return Ok(0);
        }
        let idx = self.times.partition_point(|&s| s <= t);
        Ok(idx.clamp(1, self.times.len() - 1) - 1)
    }

    /// Dense output at `t` (cubic Hermite on the enclosing step).
    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        let k = self.locate(t)?;
        if self.times.len() == 1 {
            return Ok(self.states[0].clone());
        }
        let (ta, tb) = (self.times[k], self.times[k + 1]);
        let h = tb - ta;
        let s = (t - ta) / h;
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        let (ya, yb, fa, fb) = (&self.states[k], &self.states[k + 1], &self.derivs[k], &self.derivs[k + 1]);
        Ok((0..ya.len())
            .map(|i| h00 * ya[i] + h10 * h * fa[i] + h01 * yb[i] + h11 * h * fb[i])
            .collect())
    }

    /// Time derivative of the dense output at `t`.
    pub fn eval_derivative(&self, t: f64) -> Result<Vec<f64>> {
        let k = self.locate(t)?;
        if self.times.len() == 1 {
            return Ok(self.derivs[0].clone());
        }
        let (ta, tb) = (self.times[k], self.times[k + 1]);
        let h = tb - ta;
        let s = (t - ta) / h;
        let d00 = 6.0 * s * (s - 1.0) / h;
        let d10 = (1.0 - s) * (1.0 - 3.0 * s);
        let d01 = -d00;
        let d11 = s * (3.0 * s - 2.0);
        let (ya, yb, fa, fb) = (&self.states[k], &self.states[k + 1], &self.derivs[k], &self.derivs[k + 1]);
        Ok((0..ya.len())
            .map(|i| d00 * ya[i] + d10 * fa[i] + d01 * yb[i] + d11 * fb[i])
            .collect())
    }

    /// Component `i` at the accepted steps.
    pub fn component_series(&self, i: usize) -> TimeSeries {
        TimeSeries::new(self.times.clone(), self.states.iter().map(|y| y[i]).collect())
            .expect("accepted steps are strictly increasing")
    }

    /// One series per state component.
    pub fn trajectory(&self) -> Vec<TimeSeries> {
        (0..self.dim()).map(|i| self.component_series(i)).collect()
    }
}

/// Result of [`integrate_ode_until`]: the solution plus the time at which the
/// halting predicate fired, if it did.
#[derive(Debug, Clone)]
pub struct OdeRun {
    pub solution: OdeSolution,
    pub halted_at: Option<f64>,
}

/// Integrate `y' = rhs(t, y)` from `t0` to `t1 > t0`.
pub fn integrate_ode<F>(rhs: F, y0: &[f64], t0: f64, t1: f64, tol: &ToleranceConfig) -> Result<OdeSolution>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    integrate_ode_until(rhs, y0, t0, t1, tol, |_, _| false).map(|run| run.solution)
}

/// Integrate until `t1` or until `halt(t, y)` returns true on an accepted step.
pub fn integrate_ode_until<F, H>(
    rhs: F,
    y0: &[f64],
    t0: f64,
    t1: f64,
    tol: &ToleranceConfig,
    halt: H,
) -> Result<OdeRun>
where
    F: Fn(f64, &[f64], &mut [f64]),
    H: Fn(f64, &[f64]) -> bool,
{
    tol.validate()?;
    if !(t1 > t0) {
        return Err(LabError::InvalidArgument(format!("integration window requires t1 > t0 (got {t0}, {t1})")));
    }
    let n = y0.len();
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut f = vec![0.0; n];
    rhs(t, &y, &mut f);
    check_finite(t, &f)?;

    let mut sol = OdeSolution { times: vec![t], states: vec![y.clone()], derivs: vec![f.clone()] };
    if halt(t, &y) {
        return Ok(OdeRun { solution: sol, halted_at: Some(t) });
    }

    let scale = |a: &[f64], b: &[f64], i: usize| tol.abs_tol + tol.rel_tol * a[i].abs().max(b[i].abs());
    let mut h = initial_step(&rhs, t, &y, &f, t1 - t0, tol);
    let mut err_prev: f64 = 1e-4;
    let mut k = vec![vec![0.0; n]; 7];
    let mut y_stage = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    let max_steps = tol.max_iter.saturating_mul(100);
    let mut steps = 0usize;
    let mut rejected_last = false;

    while t < t1 {
        steps += 1;
        if steps > max_steps {
            return Err(LabError::StepUnderflow { t_last: t });
        }
        let remaining = t1 - t;
        if h >= remaining {
            h = remaining;
        }
        if h <= 1e-14 * t.abs().max(1.0) && h < remaining {
            return Err(LabError::StepUnderflow { t_last: t });
        }
        k[0].copy_from_slice(&f);
        for s in 1..7 {
            for i in 0..n {
                let mut acc = y[i];
                for j in 0..s {
                    acc += h * A[s][j] * k[j][i];
                }
                y_stage[i] = acc;
            }
            rhs(t + C[s] * h, &y_stage, &mut k[s]);
        }
        // 5th-order solution equals the last stage argument (FSAL)
        y_new.copy_from_slice(&y_stage);
        let mut err_sq = 0.0;
        for i in 0..n {
            let mut e = 0.0;
            for s in 0..7 {
                e += E[s] * k[s][i];
            }
            let ratio = h * e / scale(&y, &y_new, i);
            err_sq += ratio * ratio;
        }
        let err = (err_sq / n.max(1) as f64).sqrt();
        if !err.is_finite() || y_new.iter().any(|v| !v.is_finite()) {
            // shrink hard; repeated failure ends in underflow
            h *= FAC_MIN;
            rejected_last = true;
            if h <= 1e-14 * t.abs().max(1.0) {
                return Err(LabError::NonFinite { t, detail: "stage evaluation produced non-finite values".into() });
            }
            continue;
        }
        if err <= 1.0 {
            t = if h == remaining { t1 } else { t + h };
            y.copy_from_slice(&y_new);
            f.copy_from_slice(&k[6]);
            check_finite(t, &f)?;
            sol.times.push(t);
            sol.states.push(y.clone());
            sol.derivs.push(f.clone());
            if halt(t, &y) {
                return Ok(OdeRun { solution: sol, halted_at: Some(t) });
            }
            let err_c = err.max(1e-10);
            let mut fac = SAFETY * err_c.powf(-PI_ALPHA) * err_prev.powf(PI_BETA);
            fac = fac.clamp(FAC_MIN, FAC_MAX);
            if rejected_last {
                fac = fac.min(1.0);
            }
            h *= fac;
            err_prev = err_c;
            rejected_last = false;
        } else {
            let fac = (SAFETY * err.powf(-0.2)).max(FAC_MIN);
            h *= fac;
            rejected_last = true;
        }
    }
    Ok(OdeRun { solution: sol, halted_at: None })
}

fn check_finite(t: f64, v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(LabError::NonFinite { t, detail: format!("right-hand side {v:?}") })
    }
}

fn initial_step<F>(rhs: &F, t: f64, y: &[f64], f: &[f64], span: f64, tol: &ToleranceConfig) -> f64
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let n = y.len().max(1) as f64;
    let sc: Vec<f64> = y.iter().map(|v| tol.abs_tol + tol.rel_tol * v.abs()).collect();
    let d0 = (y.iter().zip(&sc).map(|(v, s)| (v / s).powi(2)).sum::<f64>() / n).sqrt();
    let d1 = (f.iter().zip(&sc).map(|(v, s)| (v / s).powi(2)).sum::<f64>() / n).sqrt();
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(span);
    let y1: Vec<f64> = y.iter().zip(f).map(|(v, d)| v + h0 * d).collect();
    let mut f1 = vec![0.0; y.len()];
    rhs(t + h0, &y1, &mut f1);
    let d2 = (f1.iter().zip(f).zip(&sc).map(|((a, b), s)| ((a - b) / s).powi(2)).sum::<f64>() / n).sqrt() / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    if h1.is_finite() {
        (100.0 * h0).min(h1).min(span)
    } else {
        h0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tight() -> ToleranceConfig {
        ToleranceConfig { abs_tol: 1e-12, rel_tol: 1e-12, max_iter: 10_000, fd_step: 1e-4 }
    }

    #[test]
    fn exponential_growth() {
        let sol = integrate_ode(|_, y, d| d[0] = y[0], &[1.0], 0.0, 1.0, &tight()).unwrap();
        assert!((sol.final_state()[0] - std::f64::consts::E).abs() < 1e-9);
    }

    #[test]
    fn linear_rhs_is_exact() {
        let sol = integrate_ode(|_, _, d| d[0] = 4.0, &[1.0], 0.0, 3.0, &tight()).unwrap();
        for (&t, y) in sol.times().iter().zip(sol.states()) {
            assert!((y[0] - (1.0 + 4.0 * t)).abs() < 1e-13);
        }
        assert!((sol.eval(1.2345).unwrap()[0] - (1.0 + 4.0 * 1.2345)).abs() < 1e-13);
    }

    #[test]
    fn dense_output_tracks_oscillator() {
        let sol = integrate_ode(
            |_, y, d| {
                d[0] = y[1];
                d[1] = -y[0];
            },
            &[0.0, 1.0],
            0.0,
            6.0,
            &tight(),
        )
        .unwrap();
        for k in 0..60 {
            let t = 0.1 * k as f64;
            let y = sol.eval(t).unwrap();
            assert!((y[0] - t.sin()).abs() < 1e-8, "t={t}");
            let dy = sol.eval_derivative(t).unwrap();
            assert!((dy[0] - t.cos()).abs() < 1e-6);
        }
    }

    #[test]
    fn blow_up_reports_last_valid_time() {
        // y' = y^2, y(0) = 1 blows up at t = 1
        let err = integrate_ode(|_, y, d| d[0] = y[0] * y[0], &[1.0], 0.0, 2.0, &tight()).unwrap_err();
        match err {
            LabError::StepUnderflow { t_last } => assert!(t_last > 0.99 && t_last < 1.0),
            LabError::NonFinite { t, .. } => assert!(t > 0.99 && t <= 1.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn halting_predicate_stops_integration() {
        let run = integrate_ode_until(|_, y, d| d[0] = -y[0], &[1.0], 0.0, 5.0, &tight(), |_, y| y[0] < 0.5).unwrap();
        let t = run.halted_at.unwrap();
        assert!(t > std::f64::consts::LN_2 && t < 1.5);
        assert_eq!(run.solution.t_end(), t);
    }
}
