//! Gauss–Legendre rules and composite integration.

/// Nodes and weights of the 3-point rule on [-1, 1].
pub const GL3: [(f64, f64); 3] = [
    (-0.774_596_669_241_483_4, 5.0 / 9.0),
    (0.0, 8.0 / 9.0),
    (0.774_596_669_241_483_4, 5.0 / 9.0),
];

/// Nodes and weights of the 5-point rule on [-1, 1].
pub const GL5: [(f64, f64); 5] = [
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.0, 0.568_888_888_888_888_9),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

/// Composite 5-point Gauss–Legendre on `[a, b]` with `panels` equal panels.
pub fn gauss_legendre<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let panels = panels.max(1);
    let h = (b - a) / panels as f64;
    let mut acc = 0.0;
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        let half = 0.5 * h;
        for &(x, w) in &GL5 {
            acc += w * half * f(mid + half * x);
        }
    }
    acc
}

/// Trapezoid rule on arbitrary (increasing) abscissae.
pub fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    let mut acc = 0.0;
    for k in 1..xs.len() {
        acc += 0.5 * (xs[k] - xs[k - 1]) * (ys[k] + ys[k - 1]);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gl5_is_exact_for_degree_nine() {
        let v = gauss_legendre(|x| x.powi(9) + 3.0 * x.powi(8), 0.0, 1.0, 1);
        assert!((v - (0.1 + 3.0 / 9.0)).abs() < 1e-14);
    }

    #[test]
    fn gl3_weights_sum_to_two() {
        let s: f64 = GL3.iter().map(|p| p.1).sum();
        assert!((s - 2.0).abs() < 1e-15);
    }
}
