//! Convergence bookkeeping for claimed identities evaluated on refined grids.

use serde::{Deserialize, Serialize};

/// Residuals below this are treated as exact (round-off only).
const EXACT_FLOOR: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelResidual {
    pub h: f64,
    pub max_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub levels: Vec<LevelResidual>,
    /// Observed order between consecutive levels, `log(r_k/r_{k+1}) / log(h_k/h_{k+1})`.
    pub pairwise_orders: Vec<f64>,
    /// Least-squares slope of `log r` against `log h`; `None` when every
    /// residual is at round-off level or fewer than two levels were given.
    pub fitted_order: Option<f64>,
    /// The residual does not shrink under refinement: the pair is not an identity.
    pub non_decaying: bool,
}

impl ConvergenceReport {
    pub fn from_levels(levels: Vec<LevelResidual>) -> Self {
        let usable: Vec<&LevelResidual> = levels.iter().filter(|l| l.max_residual > EXACT_FLOOR).collect();
        let pairwise_orders = levels
            .windows(2)
            .map(|w| (w[0].max_residual / w[1].max_residual).ln() / (w[0].h / w[1].h).ln())
            .collect();
        let fitted_order = if usable.len() >= 2 {
            let xs: Vec<f64> = usable.iter().map(|l| l.h.ln()).collect();
            let ys: Vec<f64> = usable.iter().map(|l| l.max_residual.ln()).collect();
            let n = xs.len() as f64;
            let mx = xs.iter().sum::<f64>() / n;
            let my = ys.iter().sum::<f64>() / n;
            let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
            let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
            Some(sxy / sxx)
        } else {
            None
        };
        let non_decaying = match (levels.first(), levels.last()) {
            (Some(first), Some(last)) if levels.len() >= 2 => {
                last.max_residual > EXACT_FLOOR && last.max_residual > 0.5 * first.max_residual
            }
            _ => false,
        };
        Self { levels, pairwise_orders, fitted_order, non_decaying }
    }

    pub fn finest_residual(&self) -> f64 {
        self.levels.last().map_or(f64::NAN, |l| l.max_residual)
    }

    /// True when the fitted order reaches `order`, or every level is exact.
    pub fn order_at_least(&self, order: f64) -> bool {
        match self.fitted_order {
            Some(p) => p >= order,
            None => self.levels.iter().all(|l| l.max_residual <= EXACT_FLOOR),
        }
    }
}

/// Evaluates both sides of a claimed identity at each grid spacing in
/// `levels` and reports the max-norm residual per level.
pub fn fd_residual<L, R>(lhs: L, rhs: R, levels: &[f64]) -> ConvergenceReport
where
    L: Fn(f64) -> Vec<f64>,
    R: Fn(f64) -> Vec<f64>,
{
    let levels = levels
        .iter()
        .map(|&h| {
            let a = lhs(h);
            let b = rhs(h);
            let max_residual = if a.len() != b.len() {
                f64::INFINITY
            } else {
                a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
            };
            LevelResidual { h, max_residual }
        })
        .collect();
    ConvergenceReport::from_levels(levels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn central_second_derivative_of_sin(h: f64) -> Vec<f64> {
        (0..20)
            .map(|k| {
                let x = 0.3 * k as f64;
                ((x + h).sin() - 2.0 * x.sin() + (x - h).sin()) / (h * h)
            })
            .collect()
    }

    fn exact_second_derivative_of_sin(_h: f64) -> Vec<f64> {
        (0..20).map(|k| -(0.3 * k as f64).sin()).collect()
    }

    #[test]
    fn exact_pair_has_zero_residual() {
        let r = fd_residual(|_| vec![1.0, 2.0], |_| vec![1.0, 2.0], &[0.1, 0.05]);
        assert_eq!(r.finest_residual(), 0.0);
        assert!(!r.non_decaying);
        assert!(r.order_at_least(2.0));
    }

    #[test]
    fn second_order_stencil_ratio_is_four() {
        let r = fd_residual(central_second_derivative_of_sin, exact_second_derivative_of_sin, &[0.1, 0.05]);
        let ratio = r.levels[0].max_residual / r.levels[1].max_residual;
        assert!((ratio - 4.0).abs() < 0.8, "ratio {ratio}");
        assert!((r.fitted_order.unwrap() - 2.0).abs() < 0.1);
    }

    #[test]
    fn non_identity_is_flagged() {
        let r = fd_residual(central_second_derivative_of_sin, |h| exact_second_derivative_of_sin(h).iter().map(|v| v + 0.1).collect(), &[0.1, 0.05, 0.025]);
        assert!(r.non_decaying);
    }
}
