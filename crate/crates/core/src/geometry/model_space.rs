use serde::{Deserialize, Serialize};

use super::CurvatureData;
use crate::error::{LabError, Result};

/// `a·g₁` where `g₁` is the unit sphere, flat or hyperbolic metric on a
/// compact quotient of volume `base_volume`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpaceMetric {
    pub dimension: usize,
    pub sectional_sign: i8,
    pub scale: f64,
    pub base_volume: f64,
}

impl ModelSpaceMetric {
    pub fn new(dimension: usize, sectional_sign: i8, scale: f64, base_volume: f64) -> Result<Self> {
        let m = Self { dimension, sectional_sign, scale, base_volume };
        m.validate()?;
        Ok(m)
    }

    pub fn hyperbolic3(scale: f64, base_volume: f64) -> Self {
        Self { dimension: 3, sectional_sign: -1, scale, base_volume }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimension < 2 {
            return Err(LabError::InvalidModel("model space dimension must be at least 2".into()));
        }
        if !matches!(self.sectional_sign, -1..=1) {
            return Err(LabError::InvalidModel("sectional_sign must be -1, 0 or 1".into()));
        }
        if !(self.scale.is_finite() && self.scale > 0.0) || !(self.base_volume.is_finite() && self.base_volume > 0.0) {
            return Err(LabError::InvalidModel("scale and base_volume must be positive".into()));
        }
        Ok(())
    }

    /// `ρ₀` in `Rc = ρ₀·g₁`.
    pub fn rho0(&self) -> f64 {
        self.sectional_sign as f64 * (self.dimension as f64 - 1.0)
    }

    pub fn scalar(&self) -> f64 {
        self.dimension as f64 * self.rho0() / self.scale
    }

    pub fn volume(&self) -> f64 {
        self.scale.powf(0.5 * self.dimension as f64) * self.base_volume
    }

    pub fn curvature(&self) -> CurvatureData {
        CurvatureData::from_principal(vec![vec![self.rho0() / self.scale; self.dimension]])
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self { scale: alpha * self.scale, ..self.clone() }
    }
}
