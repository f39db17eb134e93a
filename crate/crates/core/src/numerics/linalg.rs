//! Small linear-algebra helpers: matrix-free conjugate gradients, banded and
//! dense direct solves.

use crate::error::{LabError, Result};

/// Conjugate gradients for a symmetric positive definite operator given as a
/// closure. Converges when `‖r‖ ≤ rel_tol·‖b‖ + abs_tol`.
pub fn conjugate_gradient<A>(
    apply: A,
    b: &[f64],
    x0: Option<&[f64]>,
    rel_tol: f64,
    abs_tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>>
where
    A: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let mut x = match x0 {
        Some(x0) => x0.to_vec(),
        None => vec![0.0; n],
    };
    let mut ax = vec![0.0; n];
    apply(&x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let b_norm = dot(b, b).sqrt();
    let target = rel_tol * b_norm + abs_tol;
    let mut rr = dot(&r, &r);
    if rr.sqrt() <= target {
        return Ok(x);
    }
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    for _ in 0..max_iter {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(LabError::LinearSolve { iterations: 0, residual: rr.sqrt() });
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        if rr_new.sqrt() <= target {
            return Ok(x);
        }
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    Err(LabError::LinearSolve { iterations: max_iter, residual: rr.sqrt() })
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..a.len() {
        acc += a[i] * b[i];
    }
    acc
}

/// Gaussian elimination with partial pivoting.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap_or(col);
        if a[pivot][col].abs() < 1e-300 {
            return Err(LabError::InvalidArgument("singular dense system".into()));
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            if factor != 0.0 {
                for k in col..n {
                    a[row][k] -= factor * a[col][k];
                }
                b[row] -= factor * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Ok(x)
}

/// Thomas algorithm for `lower[i]·x[i-1] + diag[i]·x[i] + upper[i]·x[i+1] = rhs[i]`.
/// `lower[0]` and `upper[n-1]` are ignored.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    if n == 0 {
        return Vec::new();
    }
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = upper[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - lower[i] * c[i - 1];
        c[i] = if i + 1 < n { upper[i] / m } else { 0.0 };
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

/// Periodic tridiagonal system with constant stencil `(off, diag, off)`,
/// solved by Sherman–Morrison on top of the Thomas algorithm.
pub fn solve_cyclic_constant(off: f64, diag: f64, rhs: &[f64]) -> Vec<f64> {
    let n = rhs.len();
    match n {
        0 => return Vec::new(),
        1 => return vec![rhs[0] / (diag + 2.0 * off)],
        2 => {
            // [d, 2o; 2o, d]
            let a = diag;
            let b = 2.0 * off;
            let det = a * a - b * b;
            return vec![(a * rhs[0] - b * rhs[1]) / det, (a * rhs[1] - b * rhs[0]) / det];
        }
        _ => {}
    }
    let gamma = -diag;
    let mut main = vec![diag; n];
    main[0] = diag - gamma;
    main[n - 1] = diag - off * off / gamma;
    let lower = vec![off; n];
    let upper = vec![off; n];
    let x = solve_tridiagonal(&lower, &main, &upper, rhs);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = off;
    let z = solve_tridiagonal(&lower, &main, &upper, &u);
    let fact = (x[0] + off * x[n - 1] / gamma) / (1.0 + z[0] + off * z[n - 1] / gamma);
    x.iter().zip(&z).map(|(xi, zi)| xi - fact * zi).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cyclic_solver_matches_direct_multiplication() {
        let n = 9;
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin() + 0.3).collect();
        let x = solve_cyclic_constant(1.0 / 6.0, 4.0 / 6.0, &rhs);
        for i in 0..n {
            let back = (x[(i + n - 1) % n] + 4.0 * x[i] + x[(i + 1) % n]) / 6.0;
            assert!((back - rhs[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn cg_solves_spd_system() {
        // 1-D shifted Laplacian
        let n = 20;
        let apply = |x: &[f64], y: &mut [f64]| {
            for i in 0..n {
                let l = if i > 0 { x[i - 1] } else { 0.0 };
                let r = if i + 1 < n { x[i + 1] } else { 0.0 };
                y[i] = 3.0 * x[i] - l - r;
            }
        };
        let b: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let x = conjugate_gradient(apply, &b, None, 1e-14, 0.0, 200).unwrap();
        let mut y = vec![0.0; n];
        apply(&x, &mut y);
        for i in 0..n {
            assert!((y[i] - b[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn dense_solve_with_pivoting() {
        let a = vec![vec![0.0, 2.0], vec![3.0, 1.0]];
        let x = solve_dense(a, vec![4.0, 5.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 2.0).abs() < 1e-15);
    }
}
