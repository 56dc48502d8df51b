//! Independent closed-form and statistical reference values used to check
//! the estimators.

use std::f64::consts::PI;

use rand::seq::SliceRandom;

use crate::quadrature::{gauss_legendre, legendre};
use crate::rng;

/// Spectral heat kernel of the unit sphere at geodesic distance `theta`,
/// density against area, for `∂_t p = ½Δp`.
pub fn sphere_heat_kernel(theta: f64, t: f64, lmax: usize) -> f64 {
    let c = theta.cos();
    (0..=lmax)
        .map(|l| {
            let lf = l as f64;
            (2.0 * lf + 1.0) * (-lf * (lf + 1.0) * t / 2.0).exp() * legendre(l, c)
        })
        .sum::<f64>()
        / (4.0 * PI)
}

/// Density of the geodesic distance from the start of spherical Brownian motion.
pub fn sphere_distance_density(theta: f64, t: f64) -> f64 {
    2.0 * PI * theta.sin() * sphere_heat_kernel(theta, t, 50)
}

/// Heat kernel of the unit circle at angular offset `theta`.
pub fn wrapped_gaussian(theta: f64, t: f64) -> f64 {
    (-20..=20)
        .map(|k| {
            let x = theta + 2.0 * PI * k as f64;
            (-x * x / (2.0 * t)).exp()
        })
        .sum::<f64>()
        / (2.0 * PI * t).sqrt()
}

/// Isotropic Gaussian density `N(mean, var·I)` at `x`.
pub fn gaussian_density(x: &[f64], mean: &[f64], var: f64) -> f64 {
    let d = x.len() as f64;
    let r2: f64 = x.iter().zip(mean).map(|(a, b)| (a - b) * (a - b)).sum();
    (-r2 / (2.0 * var)).exp() / (2.0 * PI * var).powf(d / 2.0)
}

/// Integral of a function over `[a, b]` by composite Gauss–Legendre.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let (x, w) = gauss_legendre(10);
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|p| {
            let lo = a + p as f64 * h;
            x.iter().zip(&w).map(|(xi, wi)| 0.5 * h * wi * f(lo + 0.5 * h * (xi + 1.0))).sum::<f64>()
        })
        .sum()
}

/// Total-variation distance between the histogram of `samples` on `bins`
/// equal bins of `[a, b]` and the probability of each bin under `density`.
pub fn histogram_tv(samples: &[f64], density: impl Fn(f64) -> f64, a: f64, b: f64, bins: usize) -> f64 {
    let h = (b - a) / bins as f64;
    let mut counts = vec![0usize; bins];
    for s in samples {
        let k = ((s - a) / h).floor();
        if k >= 0.0 && (k as usize) < bins {
            counts[k as usize] += 1;
        }
    }
    let n = samples.len() as f64;
    let mut tv = 0.0;
    let mut covered = 0.0;
    for (k, c) in counts.iter().enumerate() {
        let lo = a + k as f64 * h;
        let p = integrate(&density, lo, lo + h, 4);
        covered += p;
        tv += (*c as f64 / n - p).abs();
    }
    let outside = samples.len() - counts.iter().sum::<usize>();
    tv += (outside as f64 / n - (1.0 - covered)).abs();
    0.5 * tv
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Energy-distance statistic between two samples.
pub fn energy_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let pooled: Vec<&[f64]> = a.iter().chain(b).map(|v| v.as_slice()).collect();
    let dist = distance_matrix(&pooled);
    let labels: Vec<bool> = (0..pooled.len()).map(|i| i < a.len()).collect();
    energy_from_matrix(&dist, pooled.len(), &labels)
}

fn distance_matrix(pts: &[&[f64]]) -> Vec<f64> {
    let n = pts.len();
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = euclid(pts[i], pts[j]);
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    dist
}

fn energy_from_matrix(dist: &[f64], n: usize, in_a: &[bool]) -> f64 {
    let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
    let na = in_a.iter().filter(|x| **x).count() as f64;
    let nb = n as f64 - na;
    for i in 0..n {
        for j in 0..n {
            let d = dist[i * n + j];
            match (in_a[i], in_a[j]) {
                (true, true) => aa += d,
                (false, false) => bb += d,
                (true, false) => ab += d,
                _ => {}
            }
        }
    }
    2.0 * ab / (na * nb) - aa / (na * na) - bb / (nb * nb)
}

/// Permutation p-value of the two-sample energy-distance test.
pub fn energy_test_pvalue(a: &[Vec<f64>], b: &[Vec<f64>], n_perm: usize, seed: u64) -> f64 {
    let pooled: Vec<&[f64]> = a.iter().chain(b).map(|v| v.as_slice()).collect();
    let n = pooled.len();
    let dist = distance_matrix(&pooled);
    let mut labels: Vec<bool> = (0..n).map(|i| i < a.len()).collect();
    let observed = energy_from_matrix(&dist, n, &labels);
    let mut r = rng::stream(seed, 0);
    let mut exceed = 0;
    for _ in 0..n_perm {
        labels.shuffle(&mut r);
        if energy_from_matrix(&dist, n, &labels) >= observed {
            exceed += 1;
        }
    }
    (exceed as f64 + 1.0) / (n_perm as f64 + 1.0)
}

/// Great-circle distance between unit vectors.
pub fn great_circle(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    dot.clamp(-1.0, 1.0).acos()
}

/// `E[Π_i k_i(−ΔW_i) f(x + W_T)]` in `R^d` for centered Gaussian densities
/// `k_i` of standard deviation `sigmas[i]`, increments over `T/n` each, and
/// `f(y) = exp(−|y − c|²/2s²)`. One layer gives the Gaussian-weighted
/// convolution `∫ k(−v) f(x+v) p_T(v) dv`.
pub fn gaussian_stack_conv(x: &[f64], c: &[f64], s: f64, sigmas: &[f64], t: f64) -> f64 {
    let d = x.len() as f64;
    let dt = t / sigmas.len() as f64;
    let mut scale = 1.0;
    let mut spread = s * s;
    for sig in sigmas {
        let a = sig * sig + dt;
        scale *= (2.0 * PI * a).powf(-d / 2.0);
        spread += sig * sig * dt / a;
    }
    let r2: f64 = x.iter().zip(c).map(|(a, b)| (a - b).powi(2)).sum();
    scale * (s * s / spread).powf(d / 2.0) * (-r2 / (2.0 * spread)).exp()
}

/// Lebesgue convolution `∫ k(−v) f(x+v) dv` for the same Gaussian `k`, `f`.
pub fn gaussian_lebesgue_conv(x: &[f64], c: &[f64], s: f64, sigma: f64) -> f64 {
    let d = x.len() as f64;
    let spread = s * s + sigma * sigma;
    let r2: f64 = x.iter().zip(c).map(|(a, b)| (a - b).powi(2)).sum();
    (s * s / spread).powf(d / 2.0) * (-r2 / (2.0 * spread)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_kernel_is_normalized() {
        for t in [0.2, 0.5, 1.0] {
            let mass = integrate(|th| sphere_distance_density(th, t), 0.0, PI, 200);
            assert!((mass - 1.0).abs() < 1e-10, "T={t}: {mass}");
        }
    }

    #[test]
    fn small_time_sphere_kernel_is_nearly_gaussian() {
        let t = 0.05;
        let flat = 1.0 / (2.0 * PI * t);
        assert!((sphere_heat_kernel(0.0, t, 50) / flat - 1.0).abs() < 0.03);
    }

    #[test]
    fn wrapped_gaussian_is_normalized() {
        let mass = integrate(|th| wrapped_gaussian(th, 0.5), -PI, PI, 100);
        assert!((mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn energy_test_separates_shifted_samples() {
        let mut r = rng::stream(1, 0);
        let a: Vec<Vec<f64>> = (0..200).map(|_| rng::normals(&mut r, 2, 1.0)).collect();
        let b: Vec<Vec<f64>> = (0..200).map(|_| rng::normals(&mut r, 2, 1.0)).collect();
        let c: Vec<Vec<f64>> = b.iter().map(|v| vec![v[0] + 0.6, v[1]]).collect();
        assert!(energy_test_pvalue(&a, &b, 200, 2) > 0.05);
        assert!(energy_test_pvalue(&a, &c, 200, 2) < 0.01);
        assert!(energy_distance(&a, &c) > energy_distance(&a, &b));
    }
}
