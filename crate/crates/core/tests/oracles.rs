//! Independent oracles: curvature from the Koszul formula, the closed-form
//! Nil flow, and dense symmetric eigensolves.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rflab::entropy::lambda;
use rflab::flow::evolve;
use rflab::geometry::{ConformalTorusMetric, HomogeneousMetric, MetricModel, ModelSpaceMetric};
use rflab::numerics::smallest_eigenpair_deflated;
use rflab::ToleranceConfig;

/// Principal Ricci curvatures of a left-invariant diagonal metric from the
/// Koszul formula applied to the frame brackets directly.
fn koszul_ricci(c: [f64; 3], g: [f64; 3]) -> ([f64; 3], f64) {
    // [e_i, e_j] = Σ_k b[i][j][k] e_k in the Milnor convention
    let mut b = [[[0.0; 3]; 3]; 3];
    for (i, j, k) in [(1, 2, 0), (2, 0, 1), (0, 1, 2)] {
        b[i][j][k] = c[k];
        b[j][i][k] = -c[k];
    }
    let ip = |x: &[f64; 3], y: &[f64; 3]| (0..3).map(|k| g[k] * x[k] * y[k]).sum::<f64>();
    let e = |i: usize| {
        let mut v = [0.0; 3];
        v[i] = 1.0;
        v
    };
    // Γ[i][j][k]: component along e_k of ∇_{e_i} e_j
    let mut gamma = [[[0.0; 3]; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                let koszul = ip(&b[i][j], &e(k)) - ip(&b[j][k], &e(i)) + ip(&b[k][i], &e(j));
                gamma[i][j][k] = 0.5 * koszul / g[k];
            }
        }
    }
    let nabla = |i: usize, v: &[f64; 3]| {
        let mut out = [0.0; 3];
        for m in 0..3 {
            for k in 0..3 {
                out[k] += v[m] * gamma[i][m][k];
            }
        }
        out
    };
    let mut ric = [[0.0; 3]; 3];
    for j in 0..3 {
        for l in 0..3 {
            for i in 0..3 {
                // R(e_i, e_j)e_l = ∇_i∇_j e_l − ∇_j∇_i e_l − ∇_{[e_i,e_j]} e_l
                let a = nabla(i, &gamma[j][l]);
                let bb = nabla(j, &gamma[i][l]);
                let mut cc = [0.0; 3];
                for m in 0..3 {
                    for k in 0..3 {
                        cc[k] += b[i][j][m] * gamma[m][l][k];
                    }
                }
                ric[j][l] += a[i] - bb[i] - cc[i];
            }
        }
    }
    let off = (0..3).flat_map(|j| (0..3).filter(move |&l| l != j).map(move |l| (j, l))).map(|(j, l)| ric[j][l].abs()).fold(0.0, f64::max);
    ([ric[0][0] / g[0], ric[1][1] / g[1], ric[2][2] / g[2]], off)
}

#[test]
fn milnor_ricci_matches_koszul_on_random_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        let c = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
        let g = [rng.gen_range(0.2..3.0), rng.gen_range(0.2..3.0), rng.gen_range(0.2..3.0)];
        let (oracle, off) = koszul_ricci(c, g);
        let got = HomogeneousMetric::new(c, g, 1.0).unwrap().principal_ricci();
        let scale = oracle.iter().map(|v| v.abs()).fold(1e-12, f64::max);
        for k in 0..3 {
            assert!((got[k] - oracle[k]).abs() <= 1e-5 * scale, "c = {c:?}, g = {g:?}: {got:?} vs {oracle:?}");
        }
        assert!(off <= 1e-12 * scale, "off-diagonal Ricci {off}");
    }
}

#[test]
fn heisenberg_koszul_values() {
    let (oracle, _) = koszul_ricci([1.0, 0.0, 0.0], [1.0; 3]);
    assert!((oracle[0] - 0.5).abs() < 1e-12 && (oracle[1] + 0.5).abs() < 1e-12 && (oracle[2] + 0.5).abs() < 1e-12);
    let got = HomogeneousMetric::heisenberg([1.0; 3], 1.0).principal_ricci();
    for k in 0..3 {
        assert!((got[k] - oracle[k]).abs() < 1e-6);
    }
}

#[test]
fn su2_round_sphere_matches_model_space() {
    let m = HomogeneousMetric::round_sphere();
    let r = m.principal_ricci();
    assert!(r.iter().all(|v| (v - 2.0).abs() < 1e-14));
    let model = ModelSpaceMetric::new(3, 1, 1.0, 2.0 * PI * PI).unwrap();
    assert!((r.iter().sum::<f64>() - model.scalar()).abs() < 1e-14);
    assert!((m.volume() - model.volume()).abs() < 1e-12);
}

#[test]
fn heisenberg_flow_matches_closed_form() {
    // A' = −A²/(BC), B' = A/C, C' = A/B: AB and AC are constant, so
    // A(t) = (A₀⁻³ + 3t/(A₀²B₀C₀))^{-1/3}
    let tol = ToleranceConfig { abs_tol: 1e-12, rel_tol: 1e-12, ..Default::default() };
    for diag in [[1.0, 1.0, 1.0], [0.5, 2.0, 1.5], [3.0, 0.7, 0.4]] {
        let h = evolve(&MetricModel::Homogeneous(HomogeneousMetric::heisenberg(diag, 1.0)), (0.0, 10.0), &tol).unwrap();
        let [a0, b0, c0] = diag;
        for k in 0..=40 {
            let t = 10.0 * k as f64 / 40.0;
            let a = (a0.powi(-3) + 3.0 * t / (a0 * a0 * b0 * c0)).powf(-1.0 / 3.0);
            let expect = [a, a0 * b0 / a, a0 * c0 / a];
            let got = h.metric_at(t).unwrap().as_homogeneous().unwrap().diag;
            for i in 0..3 {
                assert!((got[i] - expect[i]).abs() <= 1e-7 * expect[i].max(1.0), "t = {t}: {got:?} vs {expect:?}");
            }
        }
    }
}

#[test]
fn periodic_laplacian_gap_matches_dense_eigensolve() {
    let n = 64;
    let h = 1.0 / n as f64;
    let apply = |w: &[f64]| -> Vec<f64> {
        (0..n).map(|i| -4.0 * (w[(i + 1) % n] + w[(i + n - 1) % n] - 2.0 * w[i]) / (h * h)).collect()
    };
    let measure = vec![h; n];
    let tol = ToleranceConfig { abs_tol: 1e-11, rel_tol: 1e-11, ..Default::default() };
    let pair = smallest_eigenpair_deflated(apply, &measure, 0.0, &[vec![1.0; n]], &tol).unwrap();

    let mut dense = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        dense[(i, i)] = 8.0 / (h * h);
        dense[(i, (i + 1) % n)] = -4.0 / (h * h);
        dense[(i, (i + n - 1) % n)] = -4.0 / (h * h);
    }
    let mut values: Vec<f64> = SymmetricEigen::new(dense).eigenvalues.iter().copied().collect();
    values.sort_by(f64::total_cmp);
    assert!(values[0].abs() < 1e-8);
    assert!((pair.value - values[1]).abs() <= 1e-10 * values[1], "{} vs {}", pair.value, values[1]);
}

#[test]
fn torus_lambda_matches_dense_eigensolve() {
    let m = ConformalTorusMetric::from_fn([8, 8], [1.0, 1.0], |x, y| 0.3 * (2.0 * PI * x).sin() + 0.1 * (2.0 * PI * y).cos()).unwrap();
    let tol = ToleranceConfig { abs_tol: 1e-11, rel_tol: 1e-11, ..Default::default() };
    let got = lambda(&MetricModel::ConformalTorus(m.clone()), &tol).unwrap().lambda;

    // −4e^{−2φ}Δ₀ + R is self-adjoint for the measure e^{2φ}dx; conjugating
    // by the square root of that measure gives a symmetric matrix
    let len = m.len();
    let r = m.scalar_curvature();
    let d: Vec<f64> = m.phi.iter().map(|p| (-p).exp()).collect();
    let mut dense = DMatrix::<f64>::zeros(len, len);
    for k in 0..len {
        let mut unit = vec![0.0; len];
        unit[k] = 1.0;
        let lap = m.flat_laplacian(&unit);
        for i in 0..len {
            dense[(i, k)] = -4.0 * d[i] * lap[i] * d[k];
        }
        dense[(k, k)] += r[k];
    }
    let smallest = SymmetricEigen::new(dense).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    assert!((got - smallest).abs() <= 1e-9 * smallest.abs().max(1.0), "{got} vs {smallest}");
}
