//! Randomized invariants.

use std::f64::consts::PI;

use proptest::prelude::*;
use rflab::conjugate_heat::{solve_conjugate_backward, ConjugateOptions};
use rflab::entropy::{mu_plus, w_plus};
use rflab::flow::{blowdown, evolve, scaled_volume, BlowdownSpec};
use rflab::geometry::{ConformalTorusMetric, HomogeneousMetric, MetricModel};
use rflab::reduced::{ReducedOptions, ReducedSolver};
use rflab::ToleranceConfig;

fn wavy(amplitude: f64) -> ConformalTorusMetric {
    ConformalTorusMetric::from_fn([8, 8], [1.0, 1.0], |x, y| amplitude * (2.0 * PI * x).sin() * (2.0 * PI * y).cos()).unwrap()
}

fn unit_mass(m: &ConformalTorusMetric, raw: &[f64]) -> Vec<f64> {
    let mass: f64 = raw.iter().zip(m.measure()).map(|(a, b)| a * b).sum();
    raw.iter().map(|v| v / mass).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn w_plus_is_scale_invariant(amp in 0.0..0.4f64, alpha in 0.2..5.0f64, sigma in 0.05..2.0f64, raw in prop::collection::vec(0.5..2.0f64, 64)) {
        let m = wavy(amp);
        let u = unit_mass(&m, &raw);
        let scaled = m.scaled(alpha);
        // dv scales by α in two dimensions
        let us: Vec<f64> = u.iter().map(|v| v / alpha).collect();
        let a = w_plus(&MetricModel::ConformalTorus(m), &u, sigma).unwrap().value;
        let b = w_plus(&MetricModel::ConformalTorus(scaled), &us, alpha * sigma).unwrap().value;
        prop_assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()));
    }

    #[test]
    fn mu_plus_is_below_w_plus(amp in 0.0..0.3f64, sigma in 0.05..1.0f64, raw in prop::collection::vec(0.5..2.0f64, 64)) {
        let m = wavy(amp);
        let u = unit_mass(&m, &raw);
        let model = MetricModel::ConformalTorus(m);
        let mu = mu_plus(&model, sigma, &ToleranceConfig::default()).unwrap().value;
        prop_assert!(mu <= w_plus(&model, &u, sigma).unwrap().value + 1e-9);
    }

    #[test]
    fn conjugate_solve_keeps_mass_and_sign(amp in 0.0..0.3f64, raw in prop::collection::vec(0.2..3.0f64, 64)) {
        let m = MetricModel::ConformalTorus(wavy(amp));
        let h = evolve(&m, (0.0, 0.05), &ToleranceConfig::default()).unwrap();
        let end = h.metric_at(0.05).unwrap();
        let u = unit_mass(end.as_torus().unwrap(), &raw);
        let opts = ConjugateOptions { t_stop: 0.01, dt_max: None, record_times: vec![], keep_all: false };
        let sol = solve_conjugate_backward(&h, 0.05, &u, &opts, &ToleranceConfig::default()).unwrap();
        prop_assert!(sol.max_mass_defect < 1e-10);
        prop_assert!(sol.min_u > 0.0);
    }

    #[test]
    fn scaled_volume_is_blowdown_invariant(a in 0.5..2.0f64, b in 0.5..2.0f64, c in 0.5..2.0f64, alpha in 1.0..8.0f64, t in 0.1..1.0f64) {
        let m = MetricModel::Homogeneous(HomogeneousMetric::heisenberg([a, b, c], 1.0));
        let h = evolve(&m, (0.0, 10.0), &ToleranceConfig::default()).unwrap();
        let hb = blowdown(&h, BlowdownSpec { alpha }).unwrap();
        let (x, y) = (scaled_volume(&hb, t).unwrap(), scaled_volume(&h, alpha * t).unwrap());
        prop_assert!((x - y).abs() < 1e-12 * x);
    }

    #[test]
    fn flat_ell_is_quarter_distance_squared(x in 0.0..1.0f64, y in 0.0..1.0f64, t in 0.05..1.0f64) {
        let flat = MetricModel::ConformalTorus(ConformalTorusMetric::flat([8, 8], [1.0, 1.0]).unwrap());
        let h = evolve(&flat, (0.0, 1.0), &ToleranceConfig::default()).unwrap();
        let solver = ReducedSolver::new(&h, &[0.25, 0.5], ReducedOptions::default()).unwrap();
        let wrap = |d: f64| (d + 0.5).rem_euclid(1.0) - 0.5;
        let (dx, dy) = (wrap(x - 0.25), wrap(y - 0.5));
        let expect = (dx * dx + dy * dy) / (4.0 * t);
        prop_assert!((solver.ell(&[x, y], t).unwrap() - expect).abs() < 1e-9);
    }
}
