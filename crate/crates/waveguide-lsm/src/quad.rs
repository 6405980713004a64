//! Gauss-Legendre quadrature rules.
//!
//! Nodes are the roots of the Legendre polynomial P_n, found by Newton
//! iteration on the three-term recurrence; weights are 2/((1-x^2) P_n'(x)^2).
//! Rules are returned on [0, 1] because every consumer in this crate
//! integrates over scaled cross-section edges.

/// Legendre P_n(x) and its derivative via the three-term recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    // P_n'(x) = n (x P_n - P_{n-1}) / (x^2 - 1)
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// `n`-point Gauss-Legendre rule on [0, 1]. Panics if `n == 0`.
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "quadrature rule needs at least one point");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // Symmetric pair on [-1, 1]; i = 0 is the largest root.
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        nodes[i] = 0.5 * (1.0 - x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    if n % 2 == 1 {
        // Odd rules have the centre node exactly.
        nodes[n / 2] = 0.5;
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_interval_length() {
        for n in 1..=24 {
            let (_, w) = gauss_legendre_unit(n);
            let s: f64 = w.iter().sum();
            assert!((s - 1.0).abs() < 1e-14, "n = {n}: weight sum {s}");
        }
    }

    #[test]
    fn one_point_rule_is_midpoint() {
        let (x, w) = gauss_legendre_unit(1);
        assert!((x[0] - 0.5).abs() < 1e-15);
        assert!((w[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn two_point_rule_nodes() {
        // 0.5 +- 1/(2 sqrt(3))
        let (x, _) = gauss_legendre_unit(2);
        let d = 0.5 / 3.0_f64.sqrt();
        assert!((x[0] - (0.5 - d)).abs() < 1e-14);
        assert!((x[1] - (0.5 + d)).abs() < 1e-14);
    }

    #[test]
    fn exact_for_polynomials_up_to_degree_2n_minus_1() {
        for n in 1..=10 {
            let (x, w) = gauss_legendre_unit(n);
            for deg in 0..(2 * n) {
                let num: f64 = x
                    .iter()
                    .zip(&w)
                    .map(|(&xi, &wi)| wi * xi.powi(deg as i32))
                    .sum();
                let exact = 1.0 / (deg as f64 + 1.0);
                assert!(
                    (num - exact).abs() < 1e-13,
                    "n = {n}, degree {deg}: {num} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn resolves_trigonometric_integrand() {
        // Trace projections integrate products of order-q eigenfunctions, so
        // the worst integrand oscillates like cos(2 q pi x). The projection
        // default of 2q + 12 points drives that error to machine precision.
        for q in [1u32, 4, 7, 10] {
            let n = (2 * q + 12) as usize;
            let (x, w) = gauss_legendre_unit(n);
            let freq = 2.0 * q as f64 * std::f64::consts::PI;
            let num: f64 = x
                .iter()
                .zip(&w)
                .map(|(&xi, &wi)| wi * (freq * xi).cos())
                .sum();
            // exact integral of cos(2 q pi x) over [0,1] is 0
            assert!(num.abs() < 1e-13, "q = {q}: {num}");
        }
    }
}
