use serde::{Deserialize, Serialize};

use super::CurvatureData;
use crate::error::{LabError, Result};

/// Diagonal left-invariant metric on a 3-D unimodular Lie group, written in a
/// Milnor frame `[e2,e3] = c1 e1`, `[e3,e1] = c2 e2`, `[e1,e2] = c3 e3` with
/// `g = diag(A, B, C)` in that frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomogeneousMetric {
    pub structure_constants: [f64; 3],
    pub diag: [f64; 3],
    /// Volume of the compact quotient when `A = B = C = 1`.
    pub frame_volume: f64,
}

impl HomogeneousMetric {
    pub fn new(structure_constants: [f64; 3], diag: [f64; 3], frame_volume: f64) -> Result<Self> {
        let m = Self { structure_constants, diag, frame_volume };
        m.validate()?;
        Ok(m)
    }

    /// Unit round 3-sphere as SU(2) with `c = (2,2,2)`.
    pub fn round_sphere() -> Self {
        let two_pi_sq = 2.0 * std::f64::consts::PI * std::f64::consts::PI;
        Self { structure_constants: [2.0; 3], diag: [1.0; 3], frame_volume: two_pi_sq }
    }

    pub fn heisenberg(diag: [f64; 3], frame_volume: f64) -> Self {
        Self { structure_constants: [1.0, 0.0, 0.0], diag, frame_volume }
    }

    pub fn validate(&self) -> Result<()> {
        if self.diag.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(LabError::InvalidModel(format!("metric eigenvalues must be positive: {:?}", self.diag)));
        }
        if !(self.frame_volume.is_finite() && self.frame_volume > 0.0) {
            return Err(LabError::InvalidModel("frame_volume must be positive".into()));
        }
        if self.structure_constants.iter().any(|c| !c.is_finite()) {
            return Err(LabError::InvalidModel("structure constants must be finite".into()));
        }
        Ok(())
    }

    pub fn volume(&self) -> f64 {
        let [a, b, c] = self.diag;
        (a * b * c).sqrt() * self.frame_volume
    }

    /// Principal Ricci curvatures in the orthonormal Milnor frame.
    pub fn principal_ricci(&self) -> [f64; 3] {
        let [a, b, c] = self.diag;
        let root = (a * b * c).sqrt();
        let lam = [
            self.structure_constants[0] * a / root,
            self.structure_constants[1] * b / root,
            self.structure_constants[2] * c / root,
        ];
        let half = 0.5 * (lam[0] + lam[1] + lam[2]);
        let mu = [half - lam[0], half - lam[1], half - lam[2]];
        [2.0 * mu[1] * mu[2], 2.0 * mu[0] * mu[2], 2.0 * mu[0] * mu[1]]
    }

    /// Sectional curvatures of the coordinate planes `(23, 13, 12)`; in three
    /// dimensions these are the eigenvalues of the curvature operator.
    pub fn plane_curvatures(&self) -> [f64; 3] {
        let r = self.principal_ricci();
        [0.5 * (r[1] + r[2] - r[0]), 0.5 * (r[0] + r[2] - r[1]), 0.5 * (r[0] + r[1] - r[2])]
    }

    pub fn curvature(&self) -> CurvatureData {
        CurvatureData::from_principal(vec![self.principal_ricci().to_vec()])
    }

    /// `α·g`: the frame and quotient are unchanged.
    pub fn scaled(&self, alpha: f64) -> Self {
        Self { diag: self.diag.map(|v| alpha * v), ..self.clone() }
    }
}
