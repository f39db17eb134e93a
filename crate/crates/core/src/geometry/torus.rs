use serde::{Deserialize, Serialize};

use super::CurvatureData;
use crate::error::{LabError, Result};

/// `g = e^{2φ}(dx² + dy²)` on the flat torus `[0,Lx) × [0,Ly)`, sampled on a
/// uniform periodic grid. Fields are stored row-major with `x` fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConformalTorusMetric {
    pub grid_size: [usize; 2],
    pub periods: [f64; 2],
    pub phi: Vec<f64>,
}

impl ConformalTorusMetric {
    pub fn new(grid_size: [usize; 2], periods: [f64; 2], phi: Vec<f64>) -> Result<Self> {
        let m = Self { grid_size, periods, phi };
        m.validate()?;
        Ok(m)
    }

    pub fn from_fn<F: Fn(f64, f64) -> f64>(grid_size: [usize; 2], periods: [f64; 2], phi: F) -> Result<Self> {
        let [nx, ny] = grid_size;
        let (hx, hy) = (periods[0] / nx as f64, periods[1] / ny as f64);
        let values = (0..nx * ny).map(|k| phi((k % nx) as f64 * hx, (k / nx) as f64 * hy)).collect();
        Self::new(grid_size, periods, values)
    }

    pub fn flat(grid_size: [usize; 2], periods: [f64; 2]) -> Result<Self> {
        Self::new(grid_size, periods, vec![0.0; grid_size[0] * grid_size[1]])
    }

    pub fn validate(&self) -> Result<()> {
        let [nx, ny] = self.grid_size;
        if nx < 8 || ny < 8 {
            return Err(LabError::InvalidModel(format!("torus grid must be at least 8x8, got {nx}x{ny}")));
        }
        if self.periods.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(LabError::InvalidModel("torus periods must be positive".into()));
        }
        if self.phi.len() != nx * ny {
            return Err(LabError::DimensionMismatch { expected: nx * ny, got: self.phi.len() });
        }
        if self.phi.iter().any(|v| !v.is_finite()) {
            return Err(LabError::InvalidModel("conformal exponent must be finite".into()));
        }
        Ok(())
    }

    pub fn nx(&self) -> usize {
        self.grid_size[0]
    }

    pub fn ny(&self) -> usize {
        self.grid_size[1]
    }

    /// Number of grid points.
    pub fn len(&self) -> usize {
        self.grid_size[0] * self.grid_size[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn hx(&self) -> f64 {
        self.periods[0] / self.grid_size[0] as f64
    }

    pub fn hy(&self) -> f64 {
        self.periods[1] / self.grid_size[1] as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.hx() * self.hy()
    }

    pub fn coords(&self, k: usize) -> (f64, f64) {
        let nx = self.nx();
        ((k % nx) as f64 * self.hx(), (k / nx) as f64 * self.hy())
    }

    /// Indices of the (east, west, north, south) neighbours.
    #[inline]
    pub fn neighbours(&self, k: usize) -> [usize; 4] {
        let (nx, ny) = (self.nx(), self.ny());
        let (i, j) = (k % nx, k / nx);
        let east = j * nx + (i + 1) % nx;
        let west = j * nx + (i + nx - 1) % nx;
        let north = ((j + 1) % ny) * nx + i;
        let south = ((j + ny - 1) % ny) * nx + i;
        [east, west, north, south]
    }

    fn check_len(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.len() {
            return Err(LabError::DimensionMismatch { expected: self.len(), got: f.len() });
        }
        Ok(())
    }

    /// Five-point periodic flat Laplacian `Δ₀`.
    pub fn flat_laplacian(&self, f: &[f64]) -> Vec<f64> {
        let (ix2, iy2) = (1.0 / (self.hx() * self.hx()), 1.0 / (self.hy() * self.hy()));
        (0..self.len())
            .map(|k| {
                let [e, w, n, s] = self.neighbours(k);
                (f[e] - 2.0 * f[k] + f[w]) * ix2 + (f[n] - 2.0 * f[k] + f[s]) * iy2
            })
            .collect()
    }

    pub fn conformal_factor(&self) -> Vec<f64> {
        self.phi.iter().map(|p| (2.0 * p).exp()).collect()
    }

    /// Riemannian cell volumes `e^{2φ}·hx·hy`.
    pub fn measure(&self) -> Vec<f64> {
        let cell = self.cell_area();
        self.phi.iter().map(|p| (2.0 * p).exp() * cell).collect()
    }

    pub fn volume(&self) -> f64 {
        crate::numerics::ordered_sum(self.measure())
    }

    /// `R = −2e^{−2φ}Δ₀φ`.
    pub fn scalar_curvature(&self) -> Vec<f64> {
        let lap = self.flat_laplacian(&self.phi);
        lap.iter().zip(&self.phi).map(|(l, p)| -2.0 * (-2.0 * p).exp() * l).collect()
    }

    /// `Δ_g f = e^{−2φ}Δ₀f`.
    pub fn laplacian(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.check_len(f)?;
        let lap = self.flat_laplacian(f);
        Ok(lap.iter().zip(&self.phi).map(|(l, p)| (-2.0 * p).exp() * l).collect())
    }

    /// Flat `|∇f|²` averaged over forward and backward differences. Summed
    /// against the flat cell area it equals `−Σ f Δ₀f` exactly.
    pub fn flat_grad_sq(&self, f: &[f64]) -> Vec<f64> {
        let (hx, hy) = (self.hx(), self.hy());
        (0..self.len())
            .map(|k| {
                let [e, w, n, s] = self.neighbours(k);
                let (fe, fw) = ((f[e] - f[k]) / hx, (f[k] - f[w]) / hx);
                let (fn_, fs) = ((f[n] - f[k]) / hy, (f[k] - f[s]) / hy);
                0.5 * (fe * fe + fw * fw + fn_ * fn_ + fs * fs)
            })
            .collect()
    }

    /// Riemannian `|∇f|²_g = e^{−2φ}|∇f|²₀`.
    pub fn grad_sq(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.check_len(f)?;
        Ok(self.flat_grad_sq(f).iter().zip(&self.phi).map(|(g, p)| (-2.0 * p).exp() * g).collect())
    }

    /// Central-difference coordinate gradient `(∂x f, ∂y f)`.
    pub fn central_gradient(&self, f: &[f64]) -> Vec<[f64; 2]> {
        let (hx, hy) = (self.hx(), self.hy());
        (0..self.len())
            .map(|k| {
                let [e, w, n, s] = self.neighbours(k);
                [(f[e] - f[w]) / (2.0 * hx), (f[n] - f[s]) / (2.0 * hy)]
            })
            .collect()
    }

    /// Coordinate second derivatives `(f_xx, f_xy, f_yy)` by central differences.
    pub fn coordinate_hessian(&self, f: &[f64]) -> Vec<[f64; 3]> {
        let (hx, hy) = (self.hx(), self.hy());
        (0..self.len())
            .map(|k| {
                let [e, w, n, s] = self.neighbours(k);
                let ne = self.neighbours(n)[0];
                let nw = self.neighbours(n)[1];
                let se = self.neighbours(s)[0];
                let sw = self.neighbours(s)[1];
                [
                    (f[e] - 2.0 * f[k] + f[w]) / (hx * hx),
                    (f[ne] - f[nw] - f[se] + f[sw]) / (4.0 * hx * hy),
                    (f[n] - 2.0 * f[k] + f[s]) / (hy * hy),
                ]
            })
            .collect()
    }

    /// Covariant Hessian components `(∇²f)_{xx}, _{xy}, _{yy}` for the
    /// conformal metric: `f_ij − φ_i f_j − φ_j f_i + δ_ij ⟨∇φ, ∇f⟩₀`.
    pub fn covariant_hessian(&self, f: &[f64]) -> Result<Vec<[f64; 3]>> {
        self.check_len(f)?;
        let hess = self.coordinate_hessian(f);
        let df = self.central_gradient(f);
        let dphi = self.central_gradient(&self.phi);
        Ok((0..self.len())
            .map(|k| {
                let [fx, fy] = df[k];
                let [px, py] = dphi[k];
                let dot = px * fx + py * fy;
                [
                    hess[k][0] - 2.0 * px * fx + dot,
                    hess[k][1] - px * fy - py * fx,
                    hess[k][2] - 2.0 * py * fy + dot,
                ]
            })
            .collect())
    }

    pub fn curvature(&self) -> CurvatureData {
        let r = self.scalar_curvature();
        CurvatureData::from_principal(r.iter().map(|v| vec![0.5 * v, 0.5 * v]).collect())
    }

    /// `α·g`.
    pub fn scaled(&self, alpha: f64) -> Self {
        let shift = 0.5 * alpha.ln();
        Self { phi: self.phi.iter().map(|p| p + shift).collect(), ..self.clone() }
    }

    /// Shortest flat displacement from `a` to `b` among lattice translates.
    pub fn flat_displacement(&self, a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
        let wrap = |d: f64, l: f64| d - l * (d / l).round();
        (wrap(b.0 - a.0, self.periods[0]), wrap(b.1 - a.1, self.periods[1]))
    }
}
