//! `ℓ₊ = L₊/2√t` on sets of space-time targets, with local derivatives
//! and the differential inequalities they satisfy.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::geodesic::{path_minimization_oracle, shoot_to, GeodesicSolution, OracleOptions};
use super::geometry::ReducedGeometry;
use crate::error::{LabError, Result};
use crate::flow::FlowHistory;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedOptions {
    /// Paths rest at the base until `η = ε` (needed at an expander vertex).
    pub epsilon: f64,
    /// Spatial step for the local derivative stencils; `None` skips them.
    pub stencil: Option<f64>,
    /// Cross-check every value against [`path_minimization_oracle`].
    pub oracle: Option<OracleOptions>,
    /// Lattice translates `|k_i| ≤ translate_radius` considered on the torus.
    pub translate_radius: i32,
}

impl Default for ReducedOptions {
    fn default() -> Self {
        Self { epsilon: 0.0, stencil: None, oracle: None, translate_radius: 1 }
    }
}

/// Shortest geodesic to a target and the runner-up among lifts.
#[derive(Debug, Clone)]
pub struct EllSolution {
    pub geodesic: GeodesicSolution,
    pub converged: bool,
    /// Lattice offset of the winning lift from the target coordinates.
    pub translate: [i32; 2],
    /// `L₊` gap to the next best lift (infinite when alone).
    pub runner_up_gap: f64,
    /// Lifts kept after the length bounds.
    pub candidates: Vec<Vec<f64>>,
}

/// Reduced geometry of one flow and base point.
pub struct ReducedSolver<'a> {
    pub history: &'a FlowHistory,
    pub geometry: ReducedGeometry,
    /// Base coordinates (ignored on model spaces, whose base is the centre).
    pub base: Vec<f64>,
    pub options: ReducedOptions,
}

impl<'a> ReducedSolver<'a> {
    pub fn new(history: &'a FlowHistory, base: &[f64], options: ReducedOptions) -> Result<Self> {
        let geometry = ReducedGeometry::from_history(history)?;
        if !(options.epsilon >= 0.0) {
            return Err(LabError::InvalidArgument(format!("epsilon must be nonnegative, got {}", options.epsilon)));
        }
        let base = match &geometry {
            ReducedGeometry::Torus(_) => {
                if base.len() != 2 {
                    return Err(LabError::DimensionMismatch { expected: 2, got: base.len() });
                }
                base.to_vec()
            }
            ReducedGeometry::Radial(_) => vec![0.0],
        };
        // paths start at (base, ε); the flow must exist there
        geometry.sample(&base, options.epsilon).map_err(|_| {
            LabError::InvalidArgument(format!(
                "reduced distance is based at t = 0 but the flow is not defined at η = {} (try ε > 0 at a vertex)",
                options.epsilon
            ))
        })?;
        Ok(Self { history, geometry, base, options })
    }

    /// Lifts of `y` whose length lower bound does not exceed the best upper
    /// bound, with those lower bounds, most promising first.
    fn lifts(&self, y: &[f64], t: f64) -> Vec<([i32; 2], Vec<f64>, f64)> {
        match &self.geometry {
            ReducedGeometry::Radial(_) => vec![([0, 0], vec![y[0].abs()], f64::NEG_INFINITY)],
            ReducedGeometry::Torus(f) => {
                let span = t.sqrt() - self.options.epsilon.sqrt();
                let pot = (2.0 / 3.0) * (t.powf(1.5) - self.options.epsilon.powf(1.5));
                let (w_min, w_max) = ((2.0 * f.phi_range.0).exp(), (2.0 * f.phi_range.1).exp());
                let mut nearest = [0.0; 2];
                for i in 0..2 {
                    let p = f.periods[i];
                    let d = y[i] - self.base[i];
                    nearest[i] = self.base[i] + d - p * (d / p).round();
                }
                let rad = self.options.translate_radius;
                let mut all = Vec::new();
                for kx in -rad..=rad {
                    for ky in -rad..=rad {
                        let p = vec![nearest[0] + kx as f64 * f.periods[0], nearest[1] + ky as f64 * f.periods[1]];
                        let d2 = (p[0] - self.base[0]).powi(2) + (p[1] - self.base[1]).powi(2);
                        let lower = w_min * d2 / (2.0 * span) + pot * f.r_range.0;
                        let upper = w_max * d2 / (2.0 * span) + pot * f.r_range.1;
                        // label lifts by their absolute offset from y, which
                        // stays fixed as y moves across a stencil
                        let label = [((p[0] - y[0]) / f.periods[0]).round() as i32, ((p[1] - y[1]) / f.periods[1]).round() as i32];
                        all.push((label, p, lower, upper));
                    }
                }
                let best_upper = all.iter().map(|a| a.3).fold(f64::INFINITY, f64::min);
                all.sort_by(|a, b| a.2.total_cmp(&b.2));
                all.into_iter().filter(|a| a.2 <= best_upper + 1e-12).map(|a| (a.0, a.1, a.2)).collect()
            }
        }
    }

    pub fn solve(&self, y: &[f64], t: f64) -> Result<EllSolution> {
        let eps = self.options.epsilon;
        let lifts = self.lifts(y, t);
        let mut shots: Vec<([i32; 2], super::geodesic::ShotResult)> = Vec::new();
        let mut shortest = f64::INFINITY;
        for (k, p, lower) in &lifts {
            if *lower > shortest + 1e-12 {
                continue;
            }
            if let Ok(shot) = shoot_to(&self.geometry, &self.base, p, t, eps) {
                if shot.converged {
                    shortest = shortest.min(shot.geodesic.l_plus);
                }
                shots.push((*k, shot));
            }
        }
        if shots.is_empty() {
            return Err(LabError::GeodesicBlowUp { eta: t });
        }
        // prefer converged shots, then the shortest
        shots.sort_by(|a, b| {
            b.1.converged.cmp(&a.1.converged).then(a.1.geodesic.l_plus.total_cmp(&b.1.geodesic.l_plus))
        });
        let gap = shots.get(1).map_or(f64::INFINITY, |s| s.1.geodesic.l_plus - shots[0].1.geodesic.l_plus);
        let (translate, shot) = shots.swap_remove(0);
        Ok(EllSolution {
            converged: shot.converged,
            geodesic: shot.geodesic,
            translate,
            runner_up_gap: gap,
            candidates: lifts.into_iter().map(|l| l.1).collect(),
        })
    }

    pub fn ell(&self, y: &[f64], t: f64) -> Result<f64> {
        Ok(self.solve(y, t)?.geodesic.ell())
    }

    /// `(R, metric weight w)` at a target.
    fn local_field(&self, y: &[f64], t: f64) -> Result<(f64, f64)> {
        let s = self.geometry.sample(y, t)?;
        Ok((s.r, s.w))
    }

    fn derivatives(&self, y: &[f64], t: f64, center: f64, step: f64, translate: [i32; 2]) -> Result<LocalDerivatives> {
        let dim = self.geometry.dim();
        let mut smooth = true;
        let probe = |p: Vec<f64>, tt: f64| -> Result<(f64, [i32; 2])> {
            let s = self.solve(&p, tt)?;
            Ok((s.geodesic.ell(), s.translate))
        };
        // fourth-order second and first differences, with the δ vs 2δ
        // second differences compared to detect kinks
        let mut grad = vec![0.0; dim];
        let mut second = vec![0.0; dim];
        for i in 0..dim {
            let at = |k: f64| -> Result<(f64, [i32; 2])> {
                let mut p = y.to_vec();
                p[i] += k * step;
                probe(p, t)
            };
            let (m2, m1, p1, p2) = (at(-2.0)?, at(-1.0)?, at(1.0)?, at(2.0)?);
            if [m2.1, m1.1, p1.1, p2.1].iter().any(|k| *k != translate) {
                smooth = false;
            }
            let (a, b, c, d) = (m2.0, m1.0, p1.0, p2.0);
            grad[i] = (a - 8.0 * b + 8.0 * c - d) / (12.0 * step);
            second[i] = (-a + 16.0 * b - 30.0 * center + 16.0 * c - d) / (12.0 * step * step);
            let narrow = (b - 2.0 * center + c) / (step * step);
            let wide = (a - 2.0 * center + d) / (4.0 * step * step);
            if (narrow - wide).abs() > 0.05 * (1.0 + narrow.abs()) {
                smooth = false;
            }
        }
        // ℓ varies like 1/t, so the time step is a smaller fraction of t
        let dt = 0.25 * step * t;
        let times = [t - 2.0 * dt, t - dt, t + dt, t + 2.0 * dt];
        let mut vals = [0.0; 4];
        for (v, tt) in vals.iter_mut().zip(times) {
            let (e, k) = probe(y.to_vec(), tt)?;
            if k != translate {
                smooth = false;
            }
            *v = e;
        }
        let ell_t = (vals[0] - 8.0 * vals[1] + 8.0 * vals[2] - vals[3]) / (12.0 * dt);

        let (_, w) = self.local_field(y, t)?;
        let (grad_sq, laplacian) = match &self.geometry {
            ReducedGeometry::Torus(_) => (grad.iter().map(|g| g * g).sum::<f64>() / w, second.iter().sum::<f64>() / w),
            ReducedGeometry::Radial(m) => {
                let r = y[0];
                let n = m.dimension as f64;
                let lap = if r.abs() < 1e-12 { n * second[0] } else { second[0] + m.mean_curvature_of_sphere(r) * grad[0] };
                (grad[0] * grad[0] / w, lap / w)
            }
        };
        Ok(LocalDerivatives { grad_sq, laplacian, ell_t, smooth, step })
    }

    fn point(&self, y: &[f64], t: f64) -> Result<ReducedPoint> {
        let sol = self.solve(y, t)?;
        let g = &sol.geodesic;
        let ell = g.ell();
        let derivatives = match self.options.stencil {
            Some(step) => Some(self.derivatives(y, t, ell, step, sol.translate)?),
            None => None,
        };
        let oracle_ell = match &self.options.oracle {
            Some(o) => {
                let res = path_minimization_oracle(&self.geometry, &self.base, &sol.candidates, t, self.options.epsilon, o)?;
                Some(res.l_plus / (2.0 * t.sqrt()))
            }
            None => None,
        };
        Ok(ReducedPoint {
            point: y.to_vec(),
            t,
            ell,
            l_plus: g.l_plus,
            k: g.k,
            r: g.r_end,
            speed_sq: g.speed_sq,
            k_identity_residual: g.k_identity_residual(),
            converged: sol.converged,
            runner_up_gap: sol.runner_up_gap,
            oracle_ell,
            derivatives,
        })
    }
}

/// Finite-difference derivatives of `ℓ₊` at a target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalDerivatives {
    pub grad_sq: f64,
    pub laplacian: f64,
    pub ell_t: f64,
    /// False near the cut locus: the stencil straddles two minimizing lifts
    /// or second differences at `δ` and `2δ` disagree.
    pub smooth: bool,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedPoint {
    pub point: Vec<f64>,
    pub t: f64,
    pub ell: f64,
    pub l_plus: f64,
    pub k: f64,
    /// Scalar curvature and `|X|²` at the target.
    pub r: f64,
    pub speed_sq: f64,
    pub k_identity_residual: f64,
    pub converged: bool,
    pub runner_up_gap: f64,
    pub oracle_ell: Option<f64>,
    pub derivatives: Option<LocalDerivatives>,
}

impl ReducedPoint {
    /// `(ℓ_shoot − ℓ_oracle)/max(1, |ℓ_oracle|)`; the oracle is an upper
    /// bound up to quadrature error, so large positive values mean the
    /// shooting missed the minimizer.
    pub fn oracle_gap(&self) -> Option<f64> {
        self.oracle_ell.map(|o| (self.ell - o) / o.abs().max(1.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedField {
    pub dimension: usize,
    pub epsilon: f64,
    pub points: Vec<ReducedPoint>,
}

impl ReducedField {
    pub fn ells(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.ell).collect()
    }

    pub fn all_converged(&self) -> bool {
        self.points.iter().all(|p| p.converged)
    }

    pub fn max_oracle_gap(&self) -> Option<f64> {
        self.points.iter().filter_map(|p| p.oracle_gap()).map(f64::abs).reduce(f64::max)
    }

    pub fn max_k_identity_residual(&self) -> f64 {
        self.points.iter().map(|p| p.k_identity_residual).fold(0.0, f64::max)
    }

    /// Smallest `ℓ₊ + n/2`, nonnegative for flows that exist from `t = 0`.
    pub fn lower_bound_margin(&self) -> f64 {
        let half_n = 0.5 * self.dimension as f64;
        self.points.iter().map(|p| p.ell + half_n).fold(f64::INFINITY, f64::min)
    }

    /// Columns: coordinates, `t`, `ℓ₊`, `L̄₊ = 4tℓ₊`, `K`, oracle value.
    pub fn to_csv(&self) -> String {
        let coords = self.points.first().map_or(0, |p| p.point.len());
        let mut out: String = (0..coords).map(|i| format!("y{i},")).collect();
        out.push_str("t,ell_plus,l_bar,k,oracle_ell\n");
        for p in &self.points {
            for c in &p.point {
                out.push_str(&format!("{c:.12e},"));
            }
            let oracle = p.oracle_ell.map_or(String::new(), |o| format!("{o:.12e}"));
            out.push_str(&format!("{:.12e},{:.12e},{:.12e},{:.12e},{oracle}\n", p.t, p.ell, 4.0 * p.t * p.ell, p.k));
        }
        out
    }
}

/// `ℓ₊` at every `(point, t)` target, in parallel.
pub fn ell_plus_field(h: &FlowHistory, base: &[f64], targets: &[(Vec<f64>, f64)], options: &ReducedOptions) -> Result<ReducedField> {
    let solver = ReducedSolver::new(h, base, options.clone())?;
    ell_plus_field_with(&solver, targets)
}

pub fn ell_plus_field_with(solver: &ReducedSolver<'_>, targets: &[(Vec<f64>, f64)]) -> Result<ReducedField> {
    let points = targets.par_iter().map(|(y, t)| solver.point(y, *t)).collect::<Result<Vec<_>>>()?;
    Ok(ReducedField { dimension: solver.geometry.manifold_dimension(), epsilon: solver.options.epsilon, points })
}

/// Worst residuals of the gradient and time-derivative identities
/// `|∇ℓ|² = −R + ℓ/t + K/t^{3/2}` and `∂ℓ/∂t = R − K/2t^{3/2} − ℓ/t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityResiduals {
    pub gradient: f64,
    pub time: f64,
    pub checked: usize,
    pub skipped_nonsmooth: usize,
}

pub fn check_gradient_time_identities(field: &ReducedField) -> Result<IdentityResiduals> {
    let mut out = IdentityResiduals { gradient: 0.0, time: 0.0, checked: 0, skipped_nonsmooth: 0 };
    for p in &field.points {
        let d = p.derivatives.ok_or_else(|| LabError::InvalidArgument("identity checks need stencil derivatives".into()))?;
        if !d.smooth {
            out.skipped_nonsmooth += 1;
            continue;
        }
        let t = p.t;
        let grad = -p.r + p.ell / t + p.k / t.powf(1.5);
        let time = p.r - p.k / (2.0 * t.powf(1.5)) - p.ell / t;
        out.gradient = out.gradient.max((d.grad_sq - grad).abs());
        out.time = out.time.max((d.ell_t - time).abs());
        out.checked += 1;
    }
    Ok(out)
}

/// Largest values of the three differential inequalities at smooth points
/// (each is `≤ 0` in theory; the heat-type one is reported with its sign
/// flipped so that all three share that convention).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    /// `ℓ_t + Δℓ + |∇ℓ|² − R − n/2t`.
    pub conjugate_heat: f64,
    /// `−(∂_t − Δ)(4tℓ + 2nt)`.
    pub heat_supersolution: f64,
    /// `t(2Δℓ + |∇ℓ|² − R) − ℓ − n`.
    pub harnack: f64,
    /// `Δℓ − R − n/2t + K/2t^{3/2}`.
    pub traced_hessian: f64,
    /// `(∂_t + Δ − R)û` for `û = e^{ℓ}/(4πt)^{n/2}`, equal to `û` times the first.
    pub supersolution: f64,
    /// Largest absolute value of the three, for equality cases.
    pub max_abs: f64,
    pub checked: usize,
    pub skipped_nonsmooth: usize,
}

impl InequalityReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.conjugate_heat <= tol && self.heat_supersolution <= tol && self.harnack <= tol && self.traced_hessian <= tol
    }
}

pub fn check_inequalities(field: &ReducedField) -> Result<InequalityReport> {
    let n = field.dimension as f64;
    let mut out = InequalityReport {
        conjugate_heat: f64::NEG_INFINITY,
        heat_supersolution: f64::NEG_INFINITY,
        harnack: f64::NEG_INFINITY,
        traced_hessian: f64::NEG_INFINITY,
        supersolution: f64::NEG_INFINITY,
        max_abs: 0.0,
        checked: 0,
        skipped_nonsmooth: 0,
    };
    for p in &field.points {
        let d = p.derivatives.ok_or_else(|| LabError::InvalidArgument("inequality checks need stencil derivatives".into()))?;
        if !d.smooth {
            out.skipped_nonsmooth += 1;
            continue;
        }
        let t = p.t;
        let a = d.ell_t + d.laplacian + d.grad_sq - p.r - 0.5 * n / t;
        let b = -(4.0 * p.ell + 4.0 * t * d.ell_t + 2.0 * n - 4.0 * t * d.laplacian);
        let c = t * (2.0 * d.laplacian + d.grad_sq - p.r) - p.ell - n;
        out.conjugate_heat = out.conjugate_heat.max(a);
        out.heat_supersolution = out.heat_supersolution.max(b);
        let trace = d.laplacian - p.r - 0.5 * n / t + p.k / (2.0 * t.powf(1.5));
        let u_hat = p.ell.exp() * (4.0 * std::f64::consts::PI * t).powf(-0.5 * n);
        out.harnack = out.harnack.max(c);
        out.traced_hessian = out.traced_hessian.max(trace);
        out.supersolution = out.supersolution.max(u_hat * a);
        out.max_abs = out.max_abs.max(a.abs()).max(b.abs()).max(c.abs()).max(trace.abs());
        out.checked += 1;
    }
    Ok(out)
}
