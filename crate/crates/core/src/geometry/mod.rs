//! Testbed metrics and their curvature.
//!
//! Three reductions are supported: diagonal left-invariant metrics on 3-D
//! unimodular groups, conformally flat 2-tori on a periodic grid, and
//! constant-curvature model spaces carried only by a scale and a volume.
//! Homogeneous and model-space metrics are sampled at a single "point".

mod homogeneous;
mod model_space;
pub mod spline;
mod torus;

pub use homogeneous::HomogeneousMetric;
pub use model_space::ModelSpaceMetric;
pub use torus::ConformalTorusMetric;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MetricModel {
    Homogeneous(HomogeneousMetric),
    ConformalTorus(ConformalTorusMetric),
    ModelSpace(ModelSpaceMetric),
}

/// Ricci curvature in principal form: `ricci[p]` holds the eigenvalues of
/// `Rc` relative to `g` at sample point `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureData {
    pub dimension: usize,
    pub ricci: Vec<Vec<f64>>,
    pub scalar: Vec<f64>,
    pub ricci_norm_sq: Vec<f64>,
}

impl CurvatureData {
    pub fn from_principal(ricci: Vec<Vec<f64>>) -> Self {
        let dimension = ricci.first().map_or(0, Vec::len);
        let scalar = ricci.iter().map(|r| r.iter().sum()).collect();
        let ricci_norm_sq = ricci.iter().map(|r| r.iter().map(|v| v * v).sum()).collect();
        Self { dimension, ricci, scalar, ricci_norm_sq }
    }

    pub fn min_scalar(&self) -> f64 {
        self.scalar.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_scalar(&self) -> f64 {
        self.scalar.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

impl MetricModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            MetricModel::Homogeneous(m) => m.validate(),
            MetricModel::ConformalTorus(m) => m.validate(),
            MetricModel::ModelSpace(m) => m.validate(),
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            MetricModel::Homogeneous(_) => 3,
            MetricModel::ConformalTorus(_) => 2,
            MetricModel::ModelSpace(m) => m.dimension,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            MetricModel::Homogeneous(_) => "homogeneous",
            MetricModel::ConformalTorus(_) => "conformal_torus",
            MetricModel::ModelSpace(_) => "model_space",
        }
    }

    /// Number of sample points a field on this model carries.
    pub fn field_len(&self) -> usize {
        match self {
            MetricModel::ConformalTorus(m) => m.len(),
            _ => 1,
        }
    }

    /// Volume weights of the sample points; sums to the volume.
    pub fn measure(&self) -> Vec<f64> {
        match self {
            MetricModel::ConformalTorus(m) => m.measure(),
            other => vec![other.volume()],
        }
    }

    pub fn volume(&self) -> f64 {
        volume(self)
    }

    pub fn curvature(&self) -> CurvatureData {
        match self {
            MetricModel::Homogeneous(m) => curvature_homogeneous(m),
            MetricModel::ConformalTorus(m) => curvature_conformal(m),
            MetricModel::ModelSpace(m) => m.curvature(),
        }
    }

    pub fn scalar_curvature(&self) -> Vec<f64> {
        match self {
            MetricModel::ConformalTorus(m) => m.scalar_curvature(),
            other => other.curvature().scalar,
        }
    }

    pub fn laplacian(&self, f: &[f64]) -> Result<Vec<f64>> {
        laplacian(self, f)
    }

    /// `|∇f|²_g`; identically zero on the single-point models.
    pub fn grad_sq(&self, f: &[f64]) -> Result<Vec<f64>> {
        match self {
            MetricModel::ConformalTorus(m) => m.grad_sq(f),
            other => {
                check_field(other, f)?;
                Ok(vec![0.0])
            }
        }
    }

    /// `⟨∇a, ∇b⟩_g` with central differences.
    pub fn grad_dot(&self, a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
        check_field(self, a)?;
        check_field(self, b)?;
        match self {
            MetricModel::ConformalTorus(m) => {
                let (ga, gb) = (m.central_gradient(a), m.central_gradient(b));
                Ok((0..m.len())
                    .map(|k| (-2.0 * m.phi[k]).exp() * (ga[k][0] * gb[k][0] + ga[k][1] * gb[k][1]))
                    .collect())
            }
            _ => Ok(vec![0.0]),
        }
    }

    /// Pointwise `|Rc + ∇²f + c·g|²_g`.
    pub fn soliton_norm_sq(&self, f: &[f64], c: f64) -> Result<Vec<f64>> {
        check_field(self, f)?;
        match self {
            MetricModel::ConformalTorus(m) => {
                let r = m.scalar_curvature();
                let hess = m.covariant_hessian(f)?;
                Ok((0..m.len())
                    .map(|k| {
                        let e2 = (2.0 * m.phi[k]).exp();
                        let diag = (0.5 * r[k] + c) * e2;
                        let (txx, txy, tyy) = (diag + hess[k][0], hess[k][1], diag + hess[k][2]);
                        (txx * txx + 2.0 * txy * txy + tyy * tyy) / (e2 * e2)
                    })
                    .collect())
            }
            other => Ok(vec![other.curvature().ricci[0].iter().map(|r| (r + c) * (r + c)).sum()]),
        }
    }

    /// The metric `α·g`.
    pub fn scaled(&self, alpha: f64) -> Self {
        match self {
            MetricModel::Homogeneous(m) => MetricModel::Homogeneous(m.scaled(alpha)),
            MetricModel::ConformalTorus(m) => MetricModel::ConformalTorus(m.scaled(alpha)),
            MetricModel::ModelSpace(m) => MetricModel::ModelSpace(m.scaled(alpha)),
        }
    }

    pub fn as_torus(&self) -> Option<&ConformalTorusMetric> {
        match self {
            MetricModel::ConformalTorus(m) => Some(m),
            _ => None,
        }
    }

    pub fn as_model_space(&self) -> Option<&ModelSpaceMetric> {
        match self {
            MetricModel::ModelSpace(m) => Some(m),
            _ => None,
        }
    }

    pub fn as_homogeneous(&self) -> Option<&HomogeneousMetric> {
        match self {
            MetricModel::Homogeneous(m) => Some(m),
            _ => None,
        }
    }
}

fn check_field(m: &MetricModel, f: &[f64]) -> Result<()> {
    if f.len() != m.field_len() {
        return Err(LabError::DimensionMismatch { expected: m.field_len(), got: f.len() });
    }
    Ok(())
}

pub fn curvature_homogeneous(m: &HomogeneousMetric) -> CurvatureData {
    m.curvature()
}

pub fn curvature_conformal(m: &ConformalTorusMetric) -> CurvatureData {
    m.curvature()
}

pub fn volume(m: &MetricModel) -> f64 {
    match m {
        MetricModel::Homogeneous(h) => h.volume(),
        MetricModel::ConformalTorus(t) => t.volume(),
        MetricModel::ModelSpace(s) => s.volume(),
    }
}

/// `Δ_g f`. On the single-point models fields are constants and the result is zero.
pub fn laplacian(m: &MetricModel, f: &[f64]) -> Result<Vec<f64>> {
    match m {
        MetricModel::ConformalTorus(t) => t.laplacian(f),
        other => {
            check_field(other, f)?;
            Ok(vec![0.0])
        }
    }
}

/// Whether the curvature operator is positive semidefinite everywhere.
pub fn curvature_operator_nonneg(m: &MetricModel) -> bool {
    const SLACK: f64 = 1e-12;
    match m {
        MetricModel::ModelSpace(s) => s.sectional_sign >= 0,
        MetricModel::ConformalTorus(t) => {
            // in two dimensions the curvature operator is multiplication by K = R/2
            let r = t.scalar_curvature();
            let scale = r.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
            r.iter().all(|v| *v >= -SLACK * scale)
        }
        MetricModel::Homogeneous(h) => {
            let k = h.plane_curvatures();
            let scale = k.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
            k.iter().all(|v| *v >= -SLACK * scale)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn abelian_is_flat() {
        let m = HomogeneousMetric::new([0.0; 3], [2.0, 0.5, 3.0], 1.0).unwrap();
        let c = curvature_homogeneous(&m);
        assert_eq!(c.scalar[0], 0.0);
        assert!(c.ricci[0].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn round_sphere_is_einstein() {
        let c = curvature_homogeneous(&HomogeneousMetric::round_sphere());
        for r in &c.ricci[0] {
            assert!((r - 2.0).abs() < 1e-15);
        }
        let model = ModelSpaceMetric::new(3, 1, 1.0, 2.0 * PI * PI).unwrap();
        assert!((c.scalar[0] - model.scalar()).abs() < 1e-14);
        assert!((HomogeneousMetric::round_sphere().volume() - model.volume()).abs() < 1e-14);
    }

    #[test]
    fn heisenberg_principal_ricci() {
        let c = curvature_homogeneous(&HomogeneousMetric::heisenberg([1.0; 3], 1.0));
        assert_eq!(c.ricci[0], vec![0.5, -0.5, -0.5]);
        assert_eq!(c.scalar[0], -0.5);
    }

    #[test]
    fn torus_constant_phi_is_flat_and_volume_scales() {
        let t = ConformalTorusMetric::new([16, 16], [1.0, 1.0], vec![0.2; 256]).unwrap();
        assert!(t.scalar_curvature().iter().all(|r| r.abs() < 1e-12));
        assert!((t.volume() - (0.4f64).exp()).abs() < 1e-13);
    }

    #[test]
    fn model_space_volume_law() {
        let m = MetricModel::ModelSpace(ModelSpaceMetric::hyperbolic3(2.5, 3.0));
        assert!((volume(&m) - 2.5f64.powf(1.5) * 3.0).abs() < 1e-12);
        assert!(!curvature_operator_nonneg(&m));
    }

    #[test]
    fn json_round_trip() {
        let m = MetricModel::Homogeneous(HomogeneousMetric::heisenberg([1.0, 2.0, 3.0], 1.5));
        let s = serde_json::to_string(&m).unwrap();
        assert!(s.contains("\"kind\":\"homogeneous\""));
        let back: MetricModel = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
    }
}
