//! Gauss–Legendre rules.

use std::f64::consts::PI;

/// Nodes and weights of the `n`-point rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    (p1, n as f64 * (x * p1 - p0) / (x * x - 1.0))
}

/// Legendre polynomial `P_l(x)`.
pub fn legendre(l: usize, x: f64) -> f64 {
    legendre_with_derivative(l, x).0
}

/// Tensor-product rule on the box `∏[lo_i, hi_i]`: points and weights.
pub fn tensor_rule(lo: &[f64], hi: &[f64], n: usize) -> Vec<(Vec<f64>, f64)> {
    let (x, w) = gauss_legendre(n);
    let d = lo.len();
    let total = n.pow(d as u32);
    (0..total)
        .map(|mut flat| {
            let mut p = vec![0.0; d];
            let mut weight = 1.0;
            for i in 0..d {
                let k = flat % n;
                flat /= n;
                let half = 0.5 * (hi[i] - lo[i]);
                p[i] = lo[i] + half * (x[k] + 1.0);
                weight *= half * w[k];
            }
            (p, weight)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(21);
        for deg in 0..=41 {
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg)).sum();
            let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
            assert!((q - exact).abs() < 1e-14, "degree {deg}");
        }
    }

    #[test]
    fn tensor_rule_area() {
        let rule = tensor_rule(&[0.0, -1.0], &[2.0, 2.0], 5);
        let area: f64 = rule.iter().map(|(_, w)| w).sum();
        assert!((area - 6.0).abs() < 1e-13);
        let m: f64 = rule.iter().map(|(p, w)| w * p[0] * p[1] * p[1]).sum();
        assert!((m - 2.0 * 3.0).abs() < 1e-12);
    }
}
