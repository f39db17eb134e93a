use std::f64::consts::PI;

use super::*;
use crate::flow::{evolve, evolve_with, EvolveOptions};
use crate::geometry::{ConformalTorusMetric, MetricModel, ModelSpaceMetric};
use crate::numerics::ToleranceConfig;

fn flat_history(periods: [f64; 2], t_end: f64) -> crate::flow::FlowHistory {
    let m = MetricModel::ConformalTorus(ConformalTorusMetric::flat([8, 8], periods).unwrap());
    let opts = EvolveOptions { torus_dt_max: Some(t_end / 8.0), ..EvolveOptions::default() };
    evolve_with(&m, (0.0, t_end), &ToleranceConfig::default(), &opts).unwrap()
}

fn wavy_history() -> crate::flow::FlowHistory {
    let m = MetricModel::ConformalTorus(
        ConformalTorusMetric::from_fn([16, 16], [1.0, 1.0], |x, _| 0.3 * (2.0 * PI * x).sin()).unwrap(),
    );
    evolve(&m, (0.0, 0.05), &ToleranceConfig::default()).unwrap()
}

fn vertex_history() -> crate::flow::FlowHistory {
    let m = MetricModel::ModelSpace(ModelSpaceMetric::hyperbolic3(4.0 * 0.5, 1.0));
    evolve(&m, (0.5, 2.0), &ToleranceConfig::default()).unwrap()
}

#[test]
fn flat_ell_is_quarter_distance_squared() {
    let h = flat_history([1.0, 1.0], 1.0);
    let solver = ReducedSolver::new(&h, &[0.1, 0.2], ReducedOptions::default()).unwrap();
    for (y, t, d2) in [([0.4, 0.3], 0.5, 0.1), ([0.9, 0.25], 0.8, 0.0425), ([0.1, 0.2], 1.0, 0.0)] {
        let sol = solver.solve(&y, t).unwrap();
        assert!(sol.converged);
        assert!((sol.geodesic.ell() - d2 / (4.0 * t)).abs() < 1e-9, "{y:?}: {}", sol.geodesic.ell());
        assert!(sol.geodesic.k_identity_residual() < 1e-9);
        assert!(sol.geodesic.k.abs() < 1e-12);
    }
}

#[test]
fn path_length_closed_forms() {
    let h = flat_history([4.0, 4.0], 1.0);
    let g = ReducedGeometry::from_history(&h).unwrap();
    let t = 1.0;
    let eta: Vec<f64> = (0..=50).map(|k| t * k as f64 / 50.0).collect();
    let straight = PathSample {
        positions: eta.iter().map(|e| vec![e / t, 0.0]).collect(),
        eta: eta.clone(),
        interpolation: Interpolation::LinearInEta,
    };
    assert!((l_plus_of_path(&g, &straight).unwrap() - 2.0 / 3.0).abs() < 1e-12);
    let s: Vec<f64> = (0..=50).map(|k| k as f64 / 50.0).collect();
    let optimal = PathSample {
        positions: s.iter().map(|v| vec![*v, 0.0]).collect(),
        eta: s.iter().map(|v| v * v).collect(),
        interpolation: Interpolation::LinearInSqrtEta,
    };
    assert!((l_plus_of_path(&g, &optimal).unwrap() - 0.5).abs() < 1e-12);
}

#[test]
fn oracle_on_flat_torus() {
    let h = flat_history([4.0, 4.0], 1.0);
    let g = ReducedGeometry::from_history(&h).unwrap();
    let ends = vec![vec![1.0, 0.0]];
    let res = path_minimization_oracle(&g, &[0.0, 0.0], &ends, 1.0, 0.0, &OracleOptions::default()).unwrap();
    assert!((res.l_plus - 0.5).abs() < 1e-3, "{}", res.l_plus);
    let frozen = OracleOptions { descend: false, random_starts: 0, ..OracleOptions::default() };
    let res = path_minimization_oracle(&g, &[0.0, 0.0], &ends, 1.0, 0.0, &frozen).unwrap();
    assert!((res.l_plus - 2.0 / 3.0).abs() < 1e-3, "{}", res.l_plus);
}

#[test]
fn wavy_torus_shooting_matches_oracle_and_identities() {
    let h = wavy_history();
    let opts = ReducedOptions { oracle: Some(OracleOptions::default()), stencil: Some(1e-2), ..ReducedOptions::default() };
    let targets: Vec<(Vec<f64>, f64)> =
        vec![(vec![0.3, 0.1], 0.04), (vec![0.7, 0.6], 0.03), (vec![0.05, 0.9], 0.02), (vec![0.45, 0.35], 0.045)];
    let field = ell_plus_field(&h, &[0.2, 0.3], &targets, &opts).unwrap();
    assert!(field.all_converged());
    assert!(field.max_oracle_gap().unwrap() < 1e-3, "{:?}", field.max_oracle_gap());
    for p in &field.points {
        assert!(p.oracle_gap().unwrap() < 1e-6, "shooting above oracle: {p:?}");
    }
    assert!(field.max_k_identity_residual() < 1e-6, "{}", field.max_k_identity_residual());
    let ids = check_gradient_time_identities(&field).unwrap();
    assert!(ids.checked > 0);
    assert!(ids.gradient < 1e-4 && ids.time < 1e-4, "{ids:?}");
    let ineq = check_inequalities(&field).unwrap();
    assert!(ineq.holds(1e-4), "{ineq:?}");
}

#[test]
fn flat_inequalities_are_equalities() {
    let h = flat_history([1.0, 1.0], 1.0);
    let opts = ReducedOptions { stencil: Some(1e-2), ..ReducedOptions::default() };
    let targets = vec![(vec![0.3, 0.1], 0.5), (vec![0.6, 0.45], 0.25)];
    let field = ell_plus_field(&h, &[0.2, 0.2], &targets, &opts).unwrap();
    let ineq = check_inequalities(&field).unwrap();
    assert_eq!(ineq.checked, 2);
    assert!(ineq.max_abs < 1e-8, "{ineq:?}");
}

#[test]
fn gradient_matches_endpoint_covector() {
    let h = wavy_history();
    let solver = ReducedSolver::new(&h, &[0.2, 0.3], ReducedOptions::default()).unwrap();
    let (y, t) = ([0.35, 0.2], 0.04);
    let sol = solver.solve(&y, t).unwrap();
    let d = 1e-5;
    for i in 0..2 {
        let mut p = y;
        p[i] += d;
        let mut m = y;
        m[i] -= d;
        let fd = (solver.solve(&p, t).unwrap().geodesic.l_plus - solver.solve(&m, t).unwrap().geodesic.l_plus) / (2.0 * d);
        let exact = sol.geodesic.gradient[i];
        assert!((fd - exact).abs() <= 1e-4 * exact.abs().max(1.0), "{fd} vs {exact}");
    }
}

#[test]
fn geodesics_are_critical() {
    let h = wavy_history();
    let solver = ReducedSolver::new(&h, &[0.2, 0.3], ReducedOptions::default()).unwrap();
    let sol = solver.solve(&[0.5, 0.5], 0.04).unwrap().geodesic;
    // resample on a fine √η grid and bump with an endpoint-fixed field
    let s1 = 0.04f64.sqrt();
    let nodes: Vec<f64> = (0..=400).map(|k| s1 * k as f64 / 400.0).collect();
    let base_path: Vec<Vec<f64>> = nodes
        .iter()
        .map(|s| {
            let j = sol.path.eta.partition_point(|e| *e <= s * s).clamp(1, sol.path.eta.len() - 1);
            let (sa, sb) = (sol.path.eta[j - 1].sqrt(), sol.path.eta[j].sqrt());
            let u = (s - sa) / (sb - sa);
            let (pa, pb) = (&sol.path.positions[j - 1], &sol.path.positions[j]);
            (0..2).map(|i| pa[i] + u * (pb[i] - pa[i])).collect()
        })
        .collect();
    let action = |amp: f64| {
        let positions = base_path
            .iter()
            .zip(&nodes)
            .map(|(p, s)| vec![p[0] + amp * (PI * s / s1).sin(), p[1] - 0.5 * amp * (2.0 * PI * s / s1).sin()])
            .collect();
        let path = PathSample { eta: nodes.iter().map(|s| s * s).collect(), positions, interpolation: Interpolation::LinearInSqrtEta };
        l_plus_of_path(&solver.geometry, &path).unwrap()
    };
    let l0 = action(0.0);
    let (lp, lm) = (action(1e-3), action(-1e-3));
    // first variation vanishes: the change is second order and positive
    assert!(((lp - lm) / 2e-3).abs() < 1e-3 * l0.abs().max(1.0), "{lp} {l0} {lm}");
    assert!(lp > l0 && lm > l0);
}

#[test]
fn hyperbolic_vertex_ell_and_theta() {
    let h = vertex_history();
    for eps in [1e-4, 1e-6] {
        let solver = ReducedSolver::new(&h, &[], ReducedOptions { epsilon: eps, ..ReducedOptions::default() }).unwrap();
        let t = 1.0f64;
        let r = 0.4f64;
        // L = −3√t + r²/J with J = (ε^{-1/2} − t^{-1/2})/2
        let j = 0.5 * (eps.powf(-0.5) - t.powf(-0.5));
        let expect = (-3.0 * t.sqrt() + r * r / j) / (2.0 * t.sqrt());
        let sol = solver.solve(&[r], t).unwrap();
        assert!((sol.geodesic.ell() - expect).abs() < 1e-9, "{} vs {expect}", sol.geodesic.ell());
    }
    assert!(ReducedSolver::new(&h, &[], ReducedOptions::default()).is_err());
    let opts = ThetaOptions::for_history(&h);
    assert_eq!(opts.epsilons.len(), 3);
    let series = theta_plus(&h, &[], &[0.75, 1.5], &opts).unwrap();
    let expect = (-1.5f64).exp() * PI.powf(-1.5);
    for th in &series.theta {
        assert!((th - expect).abs() < 1e-3 * expect, "{th} vs {expect}");
    }
    // the vertex attains the lower bound
    assert!(series.lower_bound_margin() > -1e-6 * expect, "{}", series.lower_bound_margin());
}

#[test]
fn flat_theta_decreases() {
    let h = flat_history([1.0, 1.0], 0.2);
    let opts = ThetaOptions::for_history(&h);
    let series = theta_plus(&h, &[0.0, 0.0], &[0.02, 0.05, 0.1, 0.2], &opts).unwrap();
    assert!(series.max_increase() <= 0.0, "{:?}", series.theta);
    assert!(series.lower_bound_margin() > 0.0);
    // grid sum of e^{d²/4t}/4πt with d the nearest-image distance
    for (t, th) in series.times.iter().zip(&series.theta) {
        let mut sum = 0.0;
        for i in 0..8 {
            for j in 0..8 {
                let (x, y) = (i as f64 / 8.0, j as f64 / 8.0);
                let d2 = (x - x.round()).powi(2) + (y - y.round()).powi(2);
                sum += (d2 / (4.0 * t)).exp() / 64.0;
            }
        }
        let expect = sum / (4.0 * PI * t);
        assert!((th - expect).abs() < 1e-9 * expect, "{th} vs {expect}");
    }
}

#[test]
fn sphere_hessian_bound_and_refusal() {
    let m = MetricModel::ModelSpace(ModelSpaceMetric::new(3, 1, 1.0, 2.0 * PI * PI).unwrap());
    let h = evolve(&m, (0.0, 0.2), &ToleranceConfig::default()).unwrap();
    let targets: Vec<Vec<f64>> = [0.3, 1.0, 2.0].iter().map(|r| vec![*r]).collect();
    let check = hessian_comparison(&h, &[], 0.1, &targets, 1e-3).unwrap();
    assert_eq!(check.samples.len(), 9);
    assert!(check.min_margin >= -1e-3, "{check:?}");

    let hyp = evolve(&MetricModel::ModelSpace(ModelSpaceMetric::hyperbolic3(1.0, 1.0)), (0.0, 1.0), &ToleranceConfig::default()).unwrap();
    assert!(matches!(hessian_comparison(&hyp, &[], 0.5, &targets, 1e-3), Err(crate::LabError::Unsupported(_))));
}

#[test]
fn blowdown_invariance_of_ell() {
    let h = wavy_history();
    let alpha = 2.0;
    let hb = crate::flow::blowdown(&h, crate::flow::BlowdownSpec { alpha }).unwrap();
    let s = ReducedSolver::new(&h, &[0.2, 0.3], ReducedOptions::default()).unwrap();
    let sb = ReducedSolver::new(&hb, &[0.2, 0.3], ReducedOptions::default()).unwrap();
    let (y, t) = ([0.6, 0.1], 0.02);
    let a = sb.ell(&y, t).unwrap();
    let b = s.ell(&y, alpha * t).unwrap();
    assert!((a - b).abs() < 1e-8, "{a} vs {b}");
}

#[test]
fn homogeneous_is_unsupported() {
    let m = MetricModel::Homogeneous(crate::geometry::HomogeneousMetric::round_sphere());
    let h = evolve(&m, (0.0, 0.01), &ToleranceConfig::default()).unwrap();
    assert!(matches!(ReducedSolver::new(&h, &[0.0, 0.0], ReducedOptions::default()), Err(crate::LabError::Unsupported(_))));
}
