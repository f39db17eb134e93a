//! One-dimensional concave maximization and sphere-constrained descent.

use super::{weighted_dot, ToleranceConfig};
use crate::error::{LabError, Result};

const MAX_EXPANSIONS: usize = 40;
const INV_PHI: f64 = 0.618_033_988_749_894_9;
const CONCAVITY_SAMPLES: usize = 16;

/// Outcome of [`maximize_concave_1d`].
#[derive(Debug, Clone, PartialEq)]
pub enum ConcaveMax {
    Maximum {
        arg: f64,
        value: f64,
        /// Sampled second differences found a convex stretch.
        concavity_warning: bool,
        evaluations: usize,
    },
    /// Still increasing after the bracket grew by `2^40`.
    Unbounded { last_arg: f64, last_value: f64 },
}

impl ConcaveMax {
    pub fn is_unbounded(&self) -> bool {
        matches!(self, ConcaveMax::Unbounded { .. })
    }

    pub fn arg_value(&self) -> Option<(f64, f64)> {
        match *self {
            ConcaveMax::Maximum { arg, value, .. } => Some((arg, value)),
            ConcaveMax::Unbounded { .. } => None,
        }
    }
}

/// Golden-section maximization of a concave function. The bracket is grown
/// by doubling on either side until it encloses the maximum.
pub fn maximize_concave_1d<F>(f: F, bracket: (f64, f64), tol: &ToleranceConfig) -> Result<ConcaveMax>
where
    F: Fn(f64) -> f64,
{
    tol.validate()?;
    let (mut lo, mut hi) = bracket;
    if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(LabError::InvalidArgument(format!("bad bracket ({lo}, {hi})")));
    }
    let mut evals = 0usize;
    let mut eval = |x: f64| {
        evals += 1;
        f(x)
    };

    let mut f_hi = eval(hi);
    let mut expansions = 0;
    loop {
        let next = lo + 2.0 * (hi - lo);
        let f_next = eval(next);
        if !(f_next > f_hi) {
            hi = next;
            break;
        }
        expansions += 1;
        let prev_hi = hi;
        hi = next;
        f_hi = f_next;
        if expansions >= MAX_EXPANSIONS {
            return Ok(ConcaveMax::Unbounded { last_arg: hi, last_value: f_hi });
        }
        // keep the lower end close enough to the rising stretch
        lo = lo.max(prev_hi * 0.5).min(prev_hi);
    }

    let mut f_lo = eval(lo);
    let mut lo_expansions = 0;
    loop {
        let next = if lo > 0.0 { 0.5 * lo } else { lo - (hi - lo) };
        let f_next = eval(next);
        if !(f_next > f_lo) || lo_expansions >= MAX_EXPANSIONS {
            lo = next;
            break;
        }
        lo = next;
        f_lo = f_next;
        lo_expansions += 1;
    }

    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = eval(c);
    let mut fd = eval(d);
    let mut iterations = 0;
    while (b - a) > tol.abs_tol && iterations < tol.max_iter {
        iterations += 1;
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = eval(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = eval(d);
        }
    }
    let arg = 0.5 * (a + b);
    let value = eval(arg);
    let (arg, value) = [(arg, value), (c, fc), (d, fd)]
        .into_iter()
        .fold((arg, value), |best, cand| if cand.1 > best.1 { cand } else { best });

    let concavity_warning = concavity_violated(&f, lo, hi);
    if concavity_warning {
        log::warn!("maximize_concave_1d: sampled second differences are positive on [{lo}, {hi}]");
    }
    Ok(ConcaveMax::Maximum { arg, value, concavity_warning, evaluations: evals + CONCAVITY_SAMPLES + 1 })
}

fn concavity_violated<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> bool {
    let step = (hi - lo) / CONCAVITY_SAMPLES as f64;
    let vals: Vec<f64> = (0..=CONCAVITY_SAMPLES).map(|k| f(lo + step * k as f64)).collect();
    vals.windows(3).any(|w| {
        let second = w[0] - 2.0 * w[1] + w[2];
        second > 1e-9 * (1.0 + w[1].abs())
    })
}

/// Inputs of [`minimize_constrained`]. `gradient` is the Riesz representer of
/// the differential in the `measure`-weighted inner product.
pub struct ConstrainedProblem<'a> {
    pub functional: &'a dyn Fn(&[f64]) -> f64,
    pub gradient: &'a dyn Fn(&[f64]) -> Vec<f64>,
    pub normalize: &'a dyn Fn(&[f64]) -> Vec<f64>,
    pub measure: &'a [f64],
    /// Optional symmetric positive definite preconditioner.
    pub precondition: Option<&'a dyn Fn(&[f64]) -> Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct ConstrainedMin {
    pub minimizer: Vec<f64>,
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
    pub projected_gradient_norm: f64,
}

/// Projected (optionally preconditioned) gradient descent on the unit sphere
/// `∫ w² dv = 1`, with Armijo backtracking along the normalized ray.
pub fn minimize_constrained(problem: &ConstrainedProblem<'_>, w0: &[f64], tol: &ToleranceConfig) -> Result<ConstrainedMin> {
    tol.validate()?;
    let m = problem.measure;
    if w0.len() != m.len() {
        return Err(LabError::DimensionMismatch { expected: m.len(), got: w0.len() });
    }
    let mut w = (problem.normalize)(w0);
    let mut value = (problem.functional)(&w);
    if !value.is_finite() {
        return Err(LabError::InvalidArgument("functional is not finite at the initial iterate".into()));
    }
    let mut step: f64 = 1.0;
    let mut grad_norm = f64::INFINITY;
    for it in 0..tol.max_iter {
        let pg = projected_gradient(problem, &w);
        grad_norm = weighted_dot(&pg, &pg, m).sqrt();
        if grad_norm <= tol.abs_tol {
            return Ok(ConstrainedMin { minimizer: w, value, converged: true, iterations: it, projected_gradient_norm: grad_norm });
        }
        let mut dir: Vec<f64> = match problem.precondition {
            Some(k) => k(&pg).into_iter().map(|v| -v).collect(),
            None => pg.iter().map(|v| -v).collect(),
        };
        let mut slope = weighted_dot(&pg, &dir, m);
        if !(slope < 0.0) {
            dir = pg.iter().map(|v| -v).collect();
            slope = -grad_norm * grad_norm;
        }
        let mut accepted = None;
        let mut alpha = (2.0 * step).min(1e6);
        for _ in 0..80 {
            let trial: Vec<f64> = w.iter().zip(&dir).map(|(wi, di)| wi + alpha * di).collect();
            let trial = (problem.normalize)(&trial);
            let v = (problem.functional)(&trial);
            if v.is_finite() && v <= value + 1e-4 * alpha * slope {
                // one parabolic refinement along the ray; keep whichever is lower
                let curv = v - value - slope * alpha;
                let mut best = (trial, v, alpha);
                if curv > 0.0 {
                    let aq = (-slope * alpha * alpha / (2.0 * curv)).min(4.0 * alpha);
                    let tq: Vec<f64> = w.iter().zip(&dir).map(|(wi, di)| wi + aq * di).collect();
                    let tq = (problem.normalize)(&tq);
                    let vq = (problem.functional)(&tq);
                    if vq.is_finite() && vq < best.1 {
                        best = (tq, vq, aq);
                    }
                }
                alpha = best.2;
                accepted = Some((best.0, best.1));
                break;
            }
            if v.is_finite() && (v - value).abs() <= 1e-14 * value.abs().max(1.0) {
                // value changes are below round-off: secant on the directional
                // derivative, accepted when the projected gradient shrinks
                let s1 = weighted_dot(&projected_gradient(problem, &trial), &dir, m);
                if s1 > slope {
                    let a_star = alpha * slope / (slope - s1);
                    let t_star: Vec<f64> = w.iter().zip(&dir).map(|(wi, di)| wi + a_star * di).collect();
                    let t_star = (problem.normalize)(&t_star);
                    let pg_star = projected_gradient(problem, &t_star);
                    let v_star = (problem.functional)(&t_star);
                    if v_star.is_finite() && weighted_dot(&pg_star, &pg_star, m).sqrt() < grad_norm {
                        alpha = a_star;
                        accepted = Some((t_star, v_star));
                        break;
                    }
                }
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((trial, v)) => {
                w = trial;
                value = v;
                step = alpha;
            }
            None => {
                return Ok(ConstrainedMin { minimizer: w, value, converged: false, iterations: it, projected_gradient_norm: grad_norm });
            }
        }
    }
    Ok(ConstrainedMin { minimizer: w, value, converged: false, iterations: tol.max_iter, projected_gradient_norm: grad_norm })
}

fn projected_gradient(problem: &ConstrainedProblem<'_>, w: &[f64]) -> Vec<f64> {
    let m = problem.measure;
    let g = (problem.gradient)(w);
    let gw = weighted_dot(&g, w, m) / weighted_dot(w, w, m);
    g.iter().zip(w).map(|(gi, wi)| gi - gw * wi).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> ToleranceConfig {
        ToleranceConfig { abs_tol: 1e-9, rel_tol: 1e-12, max_iter: 500, fd_step: 1e-4 }
    }

    #[test]
    fn quadratic_peak() {
        let r = maximize_concave_1d(|s| -(s - 1.0) * (s - 1.0), (0.1, 0.5), &tol()).unwrap();
        let (arg, _) = r.arg_value().unwrap();
        assert!((arg - 1.0).abs() < 1e-8);
    }

    #[test]
    fn hyperbolic_mu_profile_peaks_at_quarter() {
        let f = |s: f64| -6.0 * s + 1.5 * s.ln() + 2.0;
        let r = maximize_concave_1d(f, (1e-3, 1.0), &tol()).unwrap();
        let (arg, _) = r.arg_value().unwrap();
        assert!((arg - 0.25).abs() < 1e-8);
    }

    #[test]
    fn monotone_profile_is_unbounded() {
        let r = maximize_concave_1d(|s: f64| 1.5 * s.ln() + 3.0, (1e-3, 1.0), &tol()).unwrap();
        assert!(r.is_unbounded());
    }

    #[test]
    fn sphere_constrained_quadratic() {
        // minimize Σ a_i w_i² on the unit sphere → smallest a_i
        let a = [3.0, 1.0, 2.0];
        let m = [1.0, 1.0, 1.0];
        let functional = |w: &[f64]| w.iter().zip(&a).map(|(x, ai)| ai * x * x).sum::<f64>();
        let gradient = |w: &[f64]| w.iter().zip(&a).map(|(x, ai)| 2.0 * ai * x).collect::<Vec<_>>();
        let normalize = |w: &[f64]| {
            let n = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            w.iter().map(|x| x / n).collect::<Vec<_>>()
        };
        let p = ConstrainedProblem { functional: &functional, gradient: &gradient, normalize: &normalize, measure: &m, precondition: None };
        let r = minimize_constrained(&p, &[0.5, 0.6, 0.4], &tol()).unwrap();
        assert!(r.converged);
        assert!((r.value - 1.0).abs() < 1e-12);
    }
}
