//! Space-time fields seen by reduced-length paths.
//!
//! A path is written in coordinates with `|ẋ|²_g = w(x, η)|ẋ|²`: on the
//! conformal torus `w = e^{2φ}` in flat coordinates, on a model space the
//! radial coordinate is arclength of the unit model metric and `w = a(η)`.

use rayon::prelude::*;

use crate::error::{LabError, Result};
use crate::flow::{phi_rate, scalar_rate, FlowHistory};
use crate::geometry::spline::{PeriodicSpline2D, SplineSample};
use crate::geometry::{ConformalTorusMetric, MetricModel};

/// Field values at one space-time point.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FieldSample {
    pub r: f64,
    pub dr: [f64; 2],
    pub r_t: f64,
    /// Metric weight `w` and its spatial gradient.
    pub w: f64,
    pub dw: [f64; 2],
    /// `Rc(X, X) = ric_factor·|X|²_g` for the directions a path can take.
    pub ric_factor: f64,
}

/// Spline snapshots of `φ`, `φ_t`, `R`, `R_t`, Hermite-interpolated in time.
#[derive(Debug, Clone)]
pub struct TorusFlowField {
    pub periods: [f64; 2],
    pub grid_size: [usize; 2],
    times: Vec<f64>,
    phi: Vec<PeriodicSpline2D>,
    phi_t: Vec<PeriodicSpline2D>,
    r: Vec<PeriodicSpline2D>,
    r_t: Vec<PeriodicSpline2D>,
    pub phi_range: (f64, f64),
    pub r_range: (f64, f64),
}

impl TorusFlowField {
    pub fn from_history(h: &FlowHistory) -> Result<Self> {
        let times = h.snapshot_times();
        let slices: Vec<[Vec<f64>; 4]> = times
            .par_iter()
            .map(|&t| -> Result<[Vec<f64>; 4]> {
                let m = h.metric_at(t)?;
                let tm = m.as_torus().ok_or_else(|| LabError::Unsupported("torus field on a non-torus history".into()))?;
                let r = tm.scalar_curvature();
                let rt = scalar_rate(tm, &tm.phi, &r);
                Ok([tm.phi.clone(), phi_rate(tm, &tm.phi), r, rt])
            })
            .collect::<Result<_>>()?;
        let template = h.metric_at(times[0])?;
        let tm: &ConformalTorusMetric = template.as_torus().expect("checked above");
        let (grid_size, periods) = (tm.grid_size, tm.periods);
        let spline = |k: usize, f: usize| PeriodicSpline2D::new(&slices[k][f], grid_size, periods);
        let range = |f: usize| {
            slices.iter().flat_map(|s| s[f].iter().copied()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)))
        };
        Ok(Self {
            periods,
            grid_size,
            phi: (0..times.len()).map(|k| spline(k, 0)).collect(),
            phi_t: (0..times.len()).map(|k| spline(k, 1)).collect(),
            r: (0..times.len()).map(|k| spline(k, 2)).collect(),
            r_t: (0..times.len()).map(|k| spline(k, 3)).collect(),
            phi_range: range(0),
            r_range: range(2),
            times,
        })
    }

    pub fn t_range(&self) -> (f64, f64) {
        (self.times[0], *self.times.last().expect("nonempty"))
    }

    /// Hermite blend of `(f, f_t)` spline pairs; returns the blended sample
    /// and its time derivative.
    fn blend(&self, f: &[PeriodicSpline2D], ft: &[PeriodicSpline2D], x: f64, y: f64, eta: f64) -> (SplineSample, f64) {
        let n = self.times.len();
        if n == 1 {
            return (f[0].eval(x, y), ft[0].eval(x, y).value);
        }
        let k = self.times.partition_point(|&t| t <= eta).clamp(1, n - 1) - 1;
        let (ta, tb) = (self.times[k], self.times[k + 1]);
        let dt = tb - ta;
        let u = ((eta - ta) / dt).clamp(0.0, 1.0);
        let (h00, h10, h01, h11) = (
            (1.0 + 2.0 * u) * (1.0 - u) * (1.0 - u),
            u * (1.0 - u) * (1.0 - u),
            u * u * (3.0 - 2.0 * u),
            u * u * (u - 1.0),
        );
        let (d00, d10, d01, d11) = (6.0 * u * u - 6.0 * u, 3.0 * u * u - 4.0 * u + 1.0, 6.0 * u - 6.0 * u * u, 3.0 * u * u - 2.0 * u);
        let (a, at, b, bt) = (f[k].eval(x, y), ft[k].eval(x, y), f[k + 1].eval(x, y), ft[k + 1].eval(x, y));
        let mix = |p: f64, pt: f64, q: f64, qt: f64| h00 * p + h10 * dt * pt + h01 * q + h11 * dt * qt;
        let s = SplineSample {
            value: mix(a.value, at.value, b.value, bt.value),
            dx: mix(a.dx, at.dx, b.dx, bt.dx),
            dy: mix(a.dy, at.dy, b.dy, bt.dy),
            dxx: mix(a.dxx, at.dxx, b.dxx, bt.dxx),
            dxy: mix(a.dxy, at.dxy, b.dxy, bt.dxy),
            dyy: mix(a.dyy, at.dyy, b.dyy, bt.dyy),
        };
        let rate = (d00 * a.value + d10 * dt * at.value + d01 * b.value + d11 * dt * bt.value) / dt;
        (s, rate)
    }

    pub fn sample(&self, x: f64, y: f64, eta: f64) -> FieldSample {
        let (phi, phi_rate) = self.blend(&self.phi, &self.phi_t, x, y, eta);
        let (r, r_t) = self.blend(&self.r, &self.r_t, x, y, eta);
        let w = (2.0 * phi.value).exp();
        FieldSample {
            r: r.value,
            dr: [r.dx, r.dy],
            r_t,
            w,
            dw: [2.0 * w * phi.dx, 2.0 * w * phi.dy],
            // Rc = −∂_t g/2 of the interpolated metric rather than R/2, so
            // the geodesic identities hold exactly for the field as sampled
            ric_factor: -phi_rate,
        }
    }
}

/// Constant-curvature model `g(η) = a(η)g₁` in geodesic polar coordinates.
#[derive(Debug, Clone)]
pub struct RadialModel {
    pub dimension: usize,
    pub sectional_sign: i8,
    pub base_volume: f64,
    history: FlowHistory,
}

impl RadialModel {
    pub fn rho0(&self) -> f64 {
        self.sectional_sign as f64 * (self.dimension as f64 - 1.0)
    }

    pub fn scale(&self, eta: f64) -> Result<f64> {
        self.history.model_scale_at(eta)
    }

    pub fn sample(&self, eta: f64) -> Result<FieldSample> {
        let a = self.scale(eta)?;
        let rho0 = self.rho0();
        let n = self.dimension as f64;
        // a' = −2ρ₀ in every blowdown of the closed form
        Ok(FieldSample {
            r: n * rho0 / a,
            dr: [0.0; 2],
            r_t: 2.0 * n * rho0 * rho0 / (a * a),
            w: a,
            dw: [0.0; 2],
            ric_factor: rho0 / a,
        })
    }

    /// `(d/dr)log` of the unit-model area element: `(n−1)·cot`, `coth` or `1/r`.
    pub fn mean_curvature_of_sphere(&self, r: f64) -> f64 {
        let k = (self.dimension - 1) as f64;
        match self.sectional_sign {
            1 => k / r.tan(),
            -1 => k / r.tanh(),
            _ => k / r,
        }
    }

    /// Area of the unit-model geodesic sphere of radius `r`.
    pub fn sphere_area(&self, r: f64) -> f64 {
        let n = self.dimension as f64;
        let unit = 2.0 * std::f64::consts::PI.powf(0.5 * n) / gamma_half(self.dimension);
        let profile = match self.sectional_sign {
            1 => r.sin(),
            -1 => r.sinh(),
            _ => r,
        };
        unit * profile.powi(self.dimension as i32 - 1)
    }

    /// Radius of the unit-model geodesic ball with volume `base_volume`; the
    /// whole round sphere when the volume matches it.
    pub fn ball_radius(&self) -> f64 {
        let target = self.base_volume;
        let volume = |rad: f64| crate::numerics::quadrature::gauss_legendre(|r| self.sphere_area(r), 0.0, rad, 64);
        let mut hi = if self.sectional_sign > 0 { std::f64::consts::PI } else { 1.0 };
        if self.sectional_sign <= 0 {
            while volume(hi) < target {
                hi *= 2.0;
            }
        } else if volume(hi) <= target * (1.0 + 1e-12) {
            return hi;
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if volume(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// `Γ(n/2)`.
fn gamma_half(n: usize) -> f64 {
    let sqrt_pi = std::f64::consts::PI.sqrt();
    let (mut g, mut x) = if n % 2 == 0 { (1.0, 1.0) } else { (sqrt_pi, 0.5) };
    while x + 1e-12 < 0.5 * n as f64 {
        g *= x;
        x += 1.0;
    }
    g
}

#[derive(Debug, Clone)]
pub enum ReducedGeometry {
    Torus(TorusFlowField),
    Radial(RadialModel),
}

impl ReducedGeometry {
    pub fn from_history(h: &FlowHistory) -> Result<Self> {
        match h.kind() {
            "conformal_torus" => Ok(ReducedGeometry::Torus(TorusFlowField::from_history(h)?)),
            "model_space" => {
                let m = h.metric_at(h.t_start())?;
                let ms = m.as_model_space().expect("model history");
                Ok(ReducedGeometry::Radial(RadialModel {
                    dimension: ms.dimension,
                    sectional_sign: ms.sectional_sign,
                    base_volume: ms.base_volume,
                    history: h.clone(),
                }))
            }
            other => Err(LabError::Unsupported(format!("reduced distance is not implemented on {other} histories"))),
        }
    }

    /// Number of path coordinates.
    pub fn dim(&self) -> usize {
        match self {
            ReducedGeometry::Torus(_) => 2,
            ReducedGeometry::Radial(_) => 1,
        }
    }

    pub fn manifold_dimension(&self) -> usize {
        match self {
            ReducedGeometry::Torus(_) => 2,
            ReducedGeometry::Radial(m) => m.dimension,
        }
    }

    pub fn sample(&self, x: &[f64], eta: f64) -> Result<FieldSample> {
        match self {
            ReducedGeometry::Torus(f) => Ok(f.sample(x[0], x[1], eta)),
            ReducedGeometry::Radial(m) => m.sample(eta),
        }
    }
}

/// Whether `MetricModel` slices of `h` at `times` all have nonnegative curvature operator.
pub fn curvature_operator_nonneg_on(h: &FlowHistory, times: &[f64]) -> Result<bool> {
    for &t in times {
        let m: MetricModel = h.metric_at(t)?;
        if !crate::geometry::curvature_operator_nonneg(&m) {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::evolve;
    use crate::geometry::ModelSpaceMetric;
    use crate::numerics::ToleranceConfig;
    use std::f64::consts::PI;

    #[test]
    fn ball_radius_of_round_sphere_is_pi() {
        let m = MetricModel::ModelSpace(ModelSpaceMetric::new(3, 1, 1.0, 2.0 * PI * PI).unwrap());
        let h = evolve(&m, (0.0, 0.2), &ToleranceConfig::default()).unwrap();
        let ReducedGeometry::Radial(r) = ReducedGeometry::from_history(&h).unwrap() else { panic!() };
        assert!((r.ball_radius() - PI).abs() < 1e-12);
        assert!((r.sphere_area(1.0) - 4.0 * PI * 1f64.sin().powi(2)).abs() < 1e-12);
    }

    #[test]
    fn hyperbolic_ball_volume() {
        let m = MetricModel::ModelSpace(ModelSpaceMetric::hyperbolic3(1.0, 1.0));
        let h = evolve(&m, (0.0, 1.0), &ToleranceConfig::default()).unwrap();
        let ReducedGeometry::Radial(r) = ReducedGeometry::from_history(&h).unwrap() else { panic!() };
        let rad = r.ball_radius();
        // V(ρ) = π(sinh 2ρ − 2ρ)
        assert!((PI * ((2.0 * rad).sinh() - 2.0 * rad) - 1.0).abs() < 1e-10);
    }
}
