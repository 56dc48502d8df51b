use std::f64::consts::PI;

use rand::{Rng, RngCore};

use super::{geometry, Manifold, Point};

/// Flat `R^d` in a single global chart.
#[derive(Debug, Clone, Copy)]
pub struct Euclidean {
    dim: usize,
}

impl Euclidean {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }
}

impl Manifold for Euclidean {
    fn dim(&self) -> usize {
        self.dim
    }

    fn id(&self) -> String {
        format!("euclidean:{}", self.dim)
    }

    fn in_domain(&self, chart: usize, x: &[f64]) -> bool {
        chart == 0 && x.iter().all(|v| v.is_finite())
    }

    fn metric_into(&self, _chart: usize, _x: &[f64], out: &mut [f64]) {
        identity_into(self.dim, out);
    }

    fn christoffel_analytic(&self, _chart: usize, _x: &[f64], out: &mut [f64]) -> bool {
        out.fill(0.0);
        true
    }

    fn injectivity_radius(&self) -> Option<f64> {
        Some(f64::INFINITY)
    }

    fn embed(&self, p: &Point) -> Option<Vec<f64>> {
        Some(p.coords.clone())
    }

    fn random_point(&self, rng: &mut dyn RngCore) -> Point {
        Point::new(0, (0..self.dim).map(|_| rng.random_range(-2.0..2.0)).collect())
    }
}

/// Flat torus `R^d / 2πZ^d`, one identification chart with coordinates in `[0, 2π)`.
#[derive(Debug, Clone, Copy)]
pub struct FlatTorus {
    dim: usize,
}

impl FlatTorus {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }
}

fn wrap_angle(x: f64) -> f64 {
    x.rem_euclid(2.0 * PI)
}

fn wrap_signed(x: f64) -> f64 {
    let w = (x + PI).rem_euclid(2.0 * PI) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}

impl Manifold for FlatTorus {
    fn dim(&self) -> usize {
        self.dim
    }

    fn id(&self) -> String {
        match self.dim {
            1 => "circle".into(),
            2 => "torus2".into(),
            d => format!("torus:{d}"),
        }
    }

    fn in_domain(&self, chart: usize, x: &[f64]) -> bool {
        chart == 0 && x.iter().all(|v| v.is_finite())
    }

    fn metric_into(&self, _chart: usize, _x: &[f64], out: &mut [f64]) {
        identity_into(self.dim, out);
    }

    fn christoffel_analytic(&self, _chart: usize, _x: &[f64], out: &mut [f64]) -> bool {
        out.fill(0.0);
        true
    }

    fn rechart(&self, _chart: usize, x: &[f64]) -> Option<(usize, Vec<f64>)> {
        let outside = x.iter().any(|&v| !(0.0..2.0 * PI).contains(&v));
        outside.then(|| (0, x.iter().map(|&v| wrap_angle(v)).collect()))
    }

    fn coord_difference(&self, _chart: usize, a: &[f64], b: &[f64], out: &mut [f64]) {
        for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
            *o = wrap_signed(x - y);
        }
    }

    fn injectivity_radius(&self) -> Option<f64> {
        Some(PI)
    }

    fn embed(&self, p: &Point) -> Option<Vec<f64>> {
        Some(p.coords.iter().flat_map(|&t| [t.cos(), t.sin()]).collect())
    }

    fn random_point(&self, rng: &mut dyn RngCore) -> Point {
        Point::new(0, (0..self.dim).map(|_| rng.random_range(0.0..2.0 * PI)).collect())
    }
}

/// Conformal metric `λ(x)² δ_ij` with `λ = 2 / (1 + κ|x|²)`; κ = +1 gives the
/// stereographic sphere, κ = -1 the Poincaré disk.
fn conformal_metric(kappa: f64, x: &[f64], out: &mut [f64]) {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    let lam = 2.0 / (1.0 + kappa * r2);
    let d = x.len();
    identity_into(d, out);
    for v in out.iter_mut() {
        *v *= lam * lam;
    }
}

/// `Γ^i_{jk} = δ^i_j ∂_kσ + δ^i_k ∂_jσ − δ_jk ∂_iσ` for `g = e^{2σ} δ`.
fn conformal_christoffel(kappa: f64, x: &[f64], out: &mut [f64]) {
    let d = x.len();
    let r2: f64 = x.iter().map(|v| v * v).sum();
    let ds: Vec<f64> = x.iter().map(|&xi| -2.0 * kappa * xi / (1.0 + kappa * r2)).collect();
    out.fill(0.0);
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                let mut v = 0.0;
                if i == j {
                    v += ds[k];
                }
                if i == k {
                    v += ds[j];
                }
                if j == k {
                    v -= ds[i];
                }
                out[(i * d + j) * d + k] = v;
            }
        }
    }
}

/// Unit sphere `S²` with two stereographic charts.
///
/// Chart 0 projects from the north pole (its origin is the south pole), chart 1
/// from the south pole with the second axis reflected so that the transition
/// `x ↦ (x₁, −x₂)/|x|²` preserves orientation. Integrators switch charts once
/// `|x| > 2`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sphere2;

impl Sphere2 {
    pub const SAFE_RADIUS: f64 = 2.0;
    const DOMAIN_RADIUS: f64 = 1e6;

    /// Chart point of a unit vector in `R³`, in whichever chart has `|x| ≤ 1`.
    pub fn from_embedded(p: &[f64]) -> Point {
        let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        let (a, b, c) = (p[0] / n, p[1] / n, p[2] / n);
        if c <= 0.0 {
            Point::new(0, vec![a / (1.0 - c), b / (1.0 - c)])
        } else {
            Point::new(1, vec![a / (1.0 + c), -b / (1.0 + c)])
        }
    }

    /// Chart-0 point at geodesic angle `theta` from the south pole, in direction `phi`.
    pub fn polar(theta: f64, phi: f64) -> Point {
        let r = (theta / 2.0).tan();
        Point::new(0, vec![r * phi.cos(), r * phi.sin()])
    }

    fn invert(x: &[f64]) -> Vec<f64> {
        let r2 = x[0] * x[0] + x[1] * x[1];
        vec![x[0] / r2, -x[1] / r2]
    }
}

impl Manifold for Sphere2 {
    fn dim(&self) -> usize {
        2
    }

    fn id(&self) -> String {
        "sphere2".into()
    }

    fn chart_count(&self) -> usize {
        2
    }

    fn in_domain(&self, chart: usize, x: &[f64]) -> bool {
        chart < 2 && x.iter().all(|v| v.is_finite()) && x[0].hypot(x[1]) < Self::DOMAIN_RADIUS
    }

    fn metric_into(&self, _chart: usize, x: &[f64], out: &mut [f64]) {
        conformal_metric(1.0, x, out);
    }

    fn christoffel_analytic(&self, _chart: usize, x: &[f64], out: &mut [f64]) -> bool {
        conformal_christoffel(1.0, x, out);
        true
    }

    fn rechart(&self, chart: usize, x: &[f64]) -> Option<(usize, Vec<f64>)> {
        (x[0].hypot(x[1]) > Self::SAFE_RADIUS).then(|| (1 - chart, Self::invert(x)))
    }

    fn transition(&self, from: usize, to: usize, x: &[f64]) -> Option<Vec<f64>> {
        if from == to {
            return Some(x.to_vec());
        }
        let r2 = x[0] * x[0] + x[1] * x[1];
        (r2 > 0.0 && from < 2 && to < 2).then(|| Self::invert(x))
    }

    fn transition_jacobian(&self, from: usize, to: usize, x: &[f64], out: &mut [f64]) -> bool {
        if from == to {
            identity_into(2, out);
            return true;
        }
        let r2 = x[0] * x[0] + x[1] * x[1];
        if r2 == 0.0 {
            return false;
        }
        let r4 = r2 * r2;
        // C (I r² − 2 x xᵀ) / r⁴ with C = diag(1, −1)
        out[0] = (r2 - 2.0 * x[0] * x[0]) / r4;
        out[1] = -2.0 * x[0] * x[1] / r4;
        out[2] = 2.0 * x[1] * x[0] / r4;
        out[3] = -(r2 - 2.0 * x[1] * x[1]) / r4;
        true
    }

    fn injectivity_radius(&self) -> Option<f64> {
        Some(PI)
    }

    fn embed(&self, p: &Point) -> Option<Vec<f64>> {
        let x = &p.coords;
        let r2 = x[0] * x[0] + x[1] * x[1];
        let s = 1.0 + r2;
        Some(match p.chart {
            0 => vec![2.0 * x[0] / s, 2.0 * x[1] / s, (r2 - 1.0) / s],
            _ => vec![2.0 * x[0] / s, -2.0 * x[1] / s, (1.0 - r2) / s],
        })
    }

    fn random_point(&self, rng: &mut dyn RngCore) -> Point {
        let z: f64 = rng.random_range(-1.0..1.0);
        let phi: f64 = rng.random_range(0.0..2.0 * PI);
        let s = (1.0 - z * z).sqrt();
        Self::from_embedded(&[s * phi.cos(), s * phi.sin(), z])
    }
}

/// Poincaré disk model of the hyperbolic plane (curvature −1).
#[derive(Debug, Clone, Copy, Default)]
pub struct PoincareDisk;

impl PoincareDisk {
    /// Closed-form hyperbolic distance, used as a test oracle.
    pub fn closed_form_distance(a: &[f64], b: &[f64]) -> f64 {
        let na = a[0] * a[0] + a[1] * a[1];
        let nb = b[0] * b[0] + b[1] * b[1];
        let diff = (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2);
        (1.0 + 2.0 * diff / ((1.0 - na) * (1.0 - nb))).acosh()
    }
}

impl Manifold for PoincareDisk {
    fn dim(&self) -> usize {
        2
    }

    fn id(&self) -> String {
        "hyperbolic2".into()
    }

    fn in_domain(&self, chart: usize, x: &[f64]) -> bool {
        chart == 0 && x.iter().all(|v| v.is_finite()) && x[0] * x[0] + x[1] * x[1] < 1.0
    }

    fn metric_into(&self, _chart: usize, x: &[f64], out: &mut [f64]) {
        conformal_metric(-1.0, x, out);
    }

    fn christoffel_analytic(&self, _chart: usize, x: &[f64], out: &mut [f64]) -> bool {
        conformal_christoffel(-1.0, x, out);
        true
    }

    fn injectivity_radius(&self) -> Option<f64> {
        Some(f64::INFINITY)
    }

    fn random_point(&self, rng: &mut dyn RngCore) -> Point {
        let r: f64 = rng.random_range(0.0..0.8);
        let phi: f64 = rng.random_range(0.0..2.0 * PI);
        Point::new(0, vec![r * phi.cos(), r * phi.sin()])
    }
}

/// Mutation fixture: wraps a manifold and negates its Christoffel symbols.
///
/// Curvature is then always derived from the (wrong) connection, so suites
/// that check curvature, transport and heat kernels must fail on it.
#[derive(Debug, Clone)]
pub struct ChristoffelSignFlip<M> {
    pub inner: M,
}

impl<M: Manifold> Manifold for ChristoffelSignFlip<M> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn id(&self) -> String {
        format!("{}+christoffel-sign-flip", self.inner.id())
    }

    fn chart_count(&self) -> usize {
        self.inner.chart_count()
    }

    fn in_domain(&self, chart: usize, x: &[f64]) -> bool {
        self.inner.in_domain(chart, x)
    }

    fn metric_into(&self, chart: usize, x: &[f64], out: &mut [f64]) {
        self.inner.metric_into(chart, x, out)
    }

    fn christoffel_analytic(&self, chart: usize, x: &[f64], out: &mut [f64]) -> bool {
        if !self.inner.christoffel_analytic(chart, x, out) {
            out.copy_from_slice(&geometry::christoffel_fd(&self.inner, chart, x));
        }
        for v in out.iter_mut() {
            *v = -*v;
        }
        true
    }

    fn rechart(&self, chart: usize, x: &[f64]) -> Option<(usize, Vec<f64>)> {
        self.inner.rechart(chart, x)
    }

    fn transition(&self, from: usize, to: usize, x: &[f64]) -> Option<Vec<f64>> {
        self.inner.transition(from, to, x)
    }

    fn transition_jacobian(&self, from: usize, to: usize, x: &[f64], out: &mut [f64]) -> bool {
        self.inner.transition_jacobian(from, to, x, out)
    }

    fn coord_difference(&self, chart: usize, a: &[f64], b: &[f64], out: &mut [f64]) {
        self.inner.coord_difference(chart, a, b, out)
    }

    fn injectivity_radius(&self) -> Option<f64> {
        self.inner.injectivity_radius()
    }

    fn embed(&self, p: &Point) -> Option<Vec<f64>> {
        self.inner.embed(p)
    }

    fn random_point(&self, rng: &mut dyn RngCore) -> Point {
        self.inner.random_point(rng)
    }
}

fn identity_into(d: usize, out: &mut [f64]) {
    out.fill(0.0);
    for i in 0..d {
        out[i * d + i] = 1.0;
    }
}
