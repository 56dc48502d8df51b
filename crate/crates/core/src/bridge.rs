//! Guided diffusion bridges, bridge-based heat-kernel estimates and the
//! weighted diffusion mean.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::convolution::McEstimate;
use crate::error::{Error, Result};
use crate::frame::OrthonormalFrame;
use crate::linalg;
use crate::manifold::{geometry, Manifold, Point, Tangent};
use crate::rng;

/// Neighbour weights below this are dropped by [`conv_wdm`].
pub const WEIGHT_FLOOR: f64 = 1e-8;

const RESAMPLE_SALT: u64 = 0x5352_5253;

/// One simulated bridge. `states[k]` holds the components at `t_grid[k]`
/// (a single component for a point-to-point bridge).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuidedPath {
    pub t_grid: Vec<f64>,
    pub states: Vec<Vec<Point>>,
    /// Accumulated log correction factor.
    pub log_phi: f64,
    /// Gap to the target (or largest pairwise gap between components) left by
    /// the last step, before the terminal value is forced.
    pub hit_defect: f64,
}

impl GuidedPath {
    pub fn endpoint(&self) -> &Point {
        &self.states[self.states.len() - 1][0]
    }
}

/// Guiding drift of the diagonal bridge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DriftVariant {
    /// `(μ − x_i)/(w_i (T − t))`.
    Paper,
    /// `(μ − x_i)/(T − t)`, the exact conditioned drift in flat space.
    #[default]
    EuclideanExact,
}

/// Data of a weighted diffusion mean.
#[derive(Debug, Clone)]
pub struct WdmProblem {
    pub manifold: Arc<dyn Manifold>,
    pub xs: Vec<Point>,
    pub ws: Vec<f64>,
    pub t: f64,
    pub drift: DriftVariant,
}

impl WdmProblem {
    pub fn new(manifold: Arc<dyn Manifold>, xs: Vec<Point>, ws: Vec<f64>, t: f64, drift: DriftVariant) -> Result<Self> {
        if xs.is_empty() || xs.len() != ws.len() {
            return Err(Error::InvalidArgument("need n ≥ 1 points with one weight each".into()));
        }
        if ws.iter().any(|w| !(*w > 0.0 && w.is_finite())) || !(t > 0.0) {
            return Err(Error::InvalidArgument("weights and T must be positive".into()));
        }
        for x in &xs {
            geometry::check_point(manifold.as_ref(), x)?;
        }
        Ok(Self { manifold, xs, ws, t, drift })
    }

    pub fn total_weight(&self) -> f64 {
        self.ws.iter().sum()
    }
}

/// Terminal samples of diagonal bridges with their log correction factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedSampleSet {
    pub samples: Vec<Point>,
    pub log_weights: Vec<f64>,
    pub hit_defects: Vec<f64>,
    /// Samples were drawn on consecutive streams of this seed, skipping
    /// escaped paths.
    pub seed: u64,
    /// Paths dropped because they left the chart or diverged.
    #[serde(default)]
    pub escaped: usize,
}

impl WeightedSampleSet {
    /// Self-normalized weights, accumulated in index order.
    pub fn normalized_weights(&self) -> Result<Vec<f64>> {
        let top = self.log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !top.is_finite() {
            return Err(Error::DegenerateWeights);
        }
        let w: Vec<f64> = self.log_weights.iter().map(|l| (l - top).exp()).collect();
        let s: f64 = w.iter().sum();
        Ok(w.into_iter().map(|x| x / s).collect())
    }

    /// `(Σw)² / Σw²`.
    pub fn effective_sample_size(&self) -> Result<f64> {
        Ok(1.0 / self.normalized_weights()?.iter().map(|w| w * w).sum::<f64>())
    }
}

/// Chart containing every point, preferring small coordinates.
fn pick_chart(m: &dyn Manifold, pts: &[&Point]) -> Result<(usize, Vec<Vec<f64>>)> {
    let mut best: Option<(f64, usize, Vec<Vec<f64>>)> = None;
    for c in 0..m.chart_count() {
        let Ok(conv) = pts.iter().map(|p| geometry::to_chart(m, p, c).map(|q| q.coords)).collect::<Result<Vec<_>>>() else {
            continue;
        };
        let size = conv.iter().map(|x| linalg::norm(x)).fold(0.0, f64::max);
        if best.as_ref().is_none_or(|b| size < b.0) {
            best = Some((size, c, conv));
        }
    }
    let (_, c, conv) = best.ok_or_else(|| Error::ChartEscape { chart: pts[0].chart, coords: pts[0].coords.clone() })?;
    Ok((c, conv))
}

/// Coefficients of `dx = b dt + a dW` for Brownian motion run at `rate`, and
/// the precision `A⁻¹ = g / rate`.
struct Coeffs {
    b: Vec<f64>,
    a: Vec<f64>,
    prec: Vec<f64>,
}

fn coeffs(m: &dyn Manifold, chart: usize, x: &[f64], rate: f64) -> Result<Coeffs> {
    let d = x.len();
    let g = geometry::metric_flat(m, chart, x);
    let ginv = linalg::invert(&g, d).ok_or_else(|| Error::NumericalBlowup("singular metric".into()))?;
    let mut gamma = vec![0.0; d * d * d];
    geometry::christoffel_into(m, chart, x, &mut gamma);
    let b = (0..d)
        .map(|i| {
            let mut s = 0.0;
            for k in 0..d {
                for l in 0..d {
                    s += ginv[k * d + l] * gamma[(i * d + k) * d + l];
                }
            }
            -0.5 * rate * s
        })
        .collect();
    let a = linalg::spd_sqrt(&ginv, d).into_iter().map(|v| v * rate.sqrt()).collect();
    let prec = g.into_iter().map(|v| v / rate).collect();
    Ok(Coeffs { b, a, prec })
}

enum Target<'a> {
    Point(&'a [f64]),
    Diagonal { ws: &'a [f64], drift: DriftVariant },
}

struct Simulated {
    states: Vec<Vec<Vec<f64>>>,
    log_phi: f64,
    hit_defect: f64,
    terminal: Vec<f64>,
}

/// `(Σ A_i⁻¹)⁻¹ Σ A_i⁻¹ x_i`, the minimizer of `Σ (x_i − c)ᵀA_i⁻¹(x_i − c)`.
fn precision_mean(xs: &[Vec<f64>], cs: &[Coeffs]) -> Result<Vec<f64>> {
    if xs.len() == 1 {
        return Ok(xs[0].clone());
    }
    let d = xs[0].len();
    let mut total = vec![0.0; d * d];
    let mut rhs = vec![0.0; d];
    for (x, c) in xs.iter().zip(cs) {
        total.iter_mut().zip(&c.prec).for_each(|(t, p)| *t += p);
        rhs.iter_mut().zip(linalg::matvec(&c.prec, x, d)).for_each(|(r, v)| *r += v);
    }
    let inv = linalg::invert(&total, d).ok_or_else(|| Error::NumericalBlowup("singular precision".into()))?;
    Ok(linalg::matvec(&inv, &rhs, d))
}

/// Euler–Maruyama for the guided process in one chart, accumulating the
/// discretized log correction
/// `Σ_k −z_kᵀA⁻¹b Δ/(T−t_k) − ½ [z_kᵀ ΔA⁻¹ z_k + Σ_ab ΔA⁻¹_ab Δ(z^a z^b)]/(T−t_k)`
/// with `z` the displacement from the target point, or from the precision-weighted
/// mean for the diagonal. The last step carries no noise
/// transverse to the target; its gap is the hit defect.
#[allow(clippy::too_many_arguments)]
fn simulate(
    m: &dyn Manifold,
    chart: usize,
    start: Vec<Vec<f64>>,
    rates: &[f64],
    target: &Target,
    t: f64,
    n_steps: usize,
    rng: &mut ChaCha8Rng,
    store: bool,
) -> Result<Simulated> {
    let d = m.dim();
    let n = start.len();
    let dt = t / n_steps as f64;
    let center = |xs: &[Vec<f64>], cs: &[Coeffs]| match target {
        Target::Point(v) => Ok(v.to_vec()),
        Target::Diagonal { .. } => precision_mean(xs, cs),
    };
    let mut xs = start;
    let mut cur = xs.iter().zip(rates).map(|(x, r)| coeffs(m, chart, x, *r)).collect::<Result<Vec<_>>>()?;
    let mut states = Vec::new();
    if store {
        states.push(xs.clone());
    }
    let mut log_phi = 0.0;
    let mut hit_defect = 0.0;
    for k in 0..n_steps {
        let tau = (t - k as f64 * dt).max(dt / 2.0);
        let c = center(&xs, &cur)?;
        let zs: Vec<Vec<f64>> = xs.iter().map(|x| x.iter().zip(&c).map(|(a, b)| a - b).collect()).collect();
        let last = k + 1 == n_steps;
        let mut next = Vec::with_capacity(n);
        let mut noise = Vec::with_capacity(n);
        for i in 0..n {
            let co = &cur[i];
            let scale = match target {
                Target::Diagonal { ws, drift: DriftVariant::Paper } => 1.0 / ws[i],
                _ => 1.0,
            };
            let dw = rng::normals(rng, d, dt.sqrt());
            let adw = linalg::matvec(&co.a, &dw, d);
            let x: Vec<f64> = (0..d)
                .map(|j| xs[i][j] + (co.b[j] - scale * zs[i][j] / tau) * dt + if last { 0.0 } else { adw[j] })
                .collect();
            log_phi -= linalg::quad_form(&co.prec, &zs[i], &co.b) * dt / tau;
            next.push(x);
            noise.push(adw);
        }
        if last {
            let gref = geometry::metric_flat(m, chart, &c);
            hit_defect = match target {
                Target::Point(v) => linalg::quad_form(&gref, &diff(&next[0], v), &diff(&next[0], v)).sqrt(),
                Target::Diagonal { .. } => {
                    let mut gap: f64 = 0.0;
                    for a in 0..n {
                        for b in a + 1..n {
                            let e = diff(&next[a], &next[b]);
                            gap = gap.max(linalg::quad_form(&gref, &e, &e).sqrt());
                        }
                    }
                    gap
                }
            };
            let forced = match target {
                Target::Point(v) => v.to_vec(),
                Target::Diagonal { .. } => {
                    // keep the noise along the diagonal
                    let common = precision_mean(&noise, &cur)?;
                    precision_mean(&next, &cur)?.iter().zip(&common).map(|(a, b)| a + b).collect()
                }
            };
            next.iter_mut().for_each(|x| x.clone_from(&forced));
        }
        for x in &next {
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::NumericalBlowup("guided bridge diverged".into()));
            }
            if !m.in_domain(chart, x) {
                return Err(Error::ChartEscape { chart, coords: x.clone() });
            }
        }
        let new = next.iter().zip(rates).map(|(x, r)| coeffs(m, chart, x, *r)).collect::<Result<Vec<_>>>()?;
        let c2 = center(&next, &new)?;
        for i in 0..n {
            let z2 = diff(&next[i], &c2);
            let dprec: Vec<f64> = new[i].prec.iter().zip(&cur[i].prec).map(|(a, b)| a - b).collect();
            let mut cov = 0.0;
            for a in 0..d {
                for b in 0..d {
                    cov += dprec[a * d + b] * (z2[a] * z2[b] - zs[i][a] * zs[i][b]);
                }
            }
            log_phi -= 0.5 * (linalg::quad_form(&dprec, &zs[i], &zs[i]) + cov) / tau;
        }
        xs = next;
        cur = new;
        if store {
            states.push(xs.clone());
        }
    }
    if !log_phi.is_finite() {
        return Err(Error::NumericalBlowup("non-finite bridge correction".into()));
    }
    Ok(Simulated { terminal: xs[0].clone(), states, log_phi, hit_defect })
}

/// Paths that leave the chart or diverge count as carrying zero weight: the
/// Euler scheme becomes unstable where the chart metric degenerates, a region
/// the conditioned process reaches with negligible probability.
fn survivor(s: Result<Simulated>) -> Result<Option<Simulated>> {
    match s {
        Ok(s) => Ok(Some(s)),
        Err(Error::ChartEscape { .. } | Error::NumericalBlowup(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn check_steps(t: f64, n_steps: usize) -> Result<()> {
    if !(t > 0.0) || n_steps < 2 {
        return Err(Error::InvalidArgument("need T > 0 and n_steps ≥ 2".into()));
    }
    Ok(())
}

fn to_path(chart: usize, t: f64, n_steps: usize, s: Simulated) -> GuidedPath {
    let dt = t / n_steps as f64;
    GuidedPath {
        t_grid: (0..=n_steps).map(|k| k as f64 * dt).collect(),
        states: s.states.into_iter().map(|xs| xs.into_iter().map(|x| Point::new(chart, x)).collect()).collect(),
        log_phi: s.log_phi,
        hit_defect: s.hit_defect,
    }
}

/// Guided bridge from `x0` to `v` over `[0, T]`, stream 0 of `seed`.
pub fn guided_bridge(m: &dyn Manifold, x0: &Point, v: &Point, t: f64, n_steps: usize, seed: u64) -> Result<GuidedPath> {
    guided_bridge_stream(m, x0, v, t, n_steps, seed, 0)
}

pub fn guided_bridge_stream(
    m: &dyn Manifold,
    x0: &Point,
    v: &Point,
    t: f64,
    n_steps: usize,
    seed: u64,
    stream: u64,
) -> Result<GuidedPath> {
    check_steps(t, n_steps)?;
    let (chart, c) = pick_chart(m, &[x0, v])?;
    let mut r = rng::stream(seed, stream);
    let s = simulate(m, chart, vec![c[0].clone()], &[1.0], &Target::Point(&c[1]), t, n_steps, &mut r, true)?;
    Ok(to_path(chart, t, n_steps, s))
}

/// `p_T(y, v)` with respect to Riemannian volume:
/// `(2πT)^{−d/2} exp(−(y−v)ᵀ g(y) (y−v)/2T) · E[φ]` over guided bridges.
pub fn heat_kernel_estimate(
    m: &dyn Manifold,
    y: &Point,
    v: &Point,
    t: f64,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
) -> Result<McEstimate> {
    check_steps(t, n_steps)?;
    if n_paths == 0 {
        return Err(Error::InvalidArgument("need n_paths ≥ 1".into()));
    }
    let (chart, c) = pick_chart(m, &[y, v])?;
    let d = m.dim();
    let z = diff(&c[0], &c[1]);
    let g = geometry::metric_flat(m, chart, &c[0]);
    let prefactor = (2.0 * PI * t).powf(-(d as f64) / 2.0) * (-linalg::quad_form(&g, &z, &z) / (2.0 * t)).exp();
    let phis = (0..n_paths)
        .into_par_iter()
        .map(|j| {
            let mut r = rng::stream(seed, j as u64);
            let s = simulate(m, chart, vec![c[0].clone()], &[1.0], &Target::Point(&c[1]), t, n_steps, &mut r, false);
            Ok(survivor(s)?.map(|s| prefactor * s.log_phi.exp()))
        })
        .collect::<Result<Vec<_>>>()?;
    let escaped = phis.iter().filter(|p| p.is_none()).count();
    if escaped == n_paths {
        return Err(Error::ChartEscape { chart, coords: c[0].clone() });
    }
    let phis: Vec<Vec<f64>> = phis.into_iter().map(|p| vec![p.unwrap_or(0.0)]).collect();
    Ok(McEstimate::from_samples(&phis, 1, seed).with("prefactor", prefactor).with("escaped_fraction", escaped as f64 / n_paths as f64))
}

/// Product of independent Brownian motions with variance rates `1/w_i`,
/// guided to meet on the diagonal at time `T`; components are forced to their
/// weighted mean at the end.
pub fn product_diagonal_bridge(prob: &WdmProblem, n_steps: usize, seed: u64) -> Result<GuidedPath> {
    product_diagonal_bridge_stream(prob, n_steps, seed, 0)
}

pub fn product_diagonal_bridge_stream(prob: &WdmProblem, n_steps: usize, seed: u64, stream: u64) -> Result<GuidedPath> {
    check_steps(prob.t, n_steps)?;
    let m = prob.manifold.as_ref();
    let (chart, c) = pick_chart(m, &prob.xs.iter().collect::<Vec<_>>())?;
    let rates: Vec<f64> = prob.ws.iter().map(|w| 1.0 / w).collect();
    let mut r = rng::stream(seed, stream);
    let target = Target::Diagonal { ws: &prob.ws, drift: prob.drift };
    let s = simulate(m, chart, c, &rates, &target, prob.t, n_steps, &mut r, true)?;
    Ok(to_path(chart, prob.t, n_steps, s))
}

/// Sampling importance resampling over `j_samples` diagonal bridges: returns
/// the resampled terminal point and the full weighted set.
pub fn sample_wdm_sir(prob: &WdmProblem, j_samples: usize, n_steps: usize, seed: u64) -> Result<(Point, WeightedSampleSet)> {
    check_steps(prob.t, n_steps)?;
    if j_samples == 0 {
        return Err(Error::InvalidArgument("need J ≥ 1".into()));
    }
    let m = prob.manifold.as_ref();
    let (chart, c) = pick_chart(m, &prob.xs.iter().collect::<Vec<_>>())?;
    let rates: Vec<f64> = prob.ws.iter().map(|w| 1.0 / w).collect();
    let target = Target::Diagonal { ws: &prob.ws, drift: prob.drift };
    let sims = (0..j_samples)
        .into_par_iter()
        .map(|j| {
            let mut r = rng::stream(seed, j as u64);
            survivor(simulate(m, chart, c.clone(), &rates, &target, prob.t, n_steps, &mut r, false))
        })
        .collect::<Result<Vec<_>>>()?;
    let escaped = sims.iter().filter(|s| s.is_none()).count();
    let sims: Vec<Simulated> = sims.into_iter().flatten().collect();
    if sims.is_empty() {
        return Err(Error::ChartEscape { chart, coords: c[0].clone() });
    }
    let set = WeightedSampleSet {
        samples: sims.iter().map(|s| Point::new(chart, s.terminal.clone())).collect(),
        log_weights: sims.iter().map(|s| s.log_phi).collect(),
        hit_defects: sims.iter().map(|s| s.hit_defect).collect(),
        seed,
        escaped,
    };
    let weights = set.normalized_weights()?;
    let u: f64 = rng::stream(rng::derive(seed, RESAMPLE_SALT), 0).random();
    let mut acc = 0.0;
    let mut pick = weights.len() - 1;
    for (j, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            pick = j;
            break;
        }
    }
    Ok((set.samples[pick].clone(), set))
}

/// Gradient descent for `argmin_y Σ w_i d(y, x_i)²`, started at the heaviest
/// data point.
pub fn wfm_gradient_descent(m: &dyn Manifold, xs: &[Point], ws: &[f64], step: f64, tol: f64, max_iter: usize) -> Result<Point> {
    if xs.is_empty() || xs.len() != ws.len() {
        return Err(Error::InvalidArgument("need n ≥ 1 points with one weight each".into()));
    }
    let total: f64 = ws.iter().sum();
    let start = ws.iter().enumerate().fold(0, |best, (i, w)| if *w > ws[best] { i } else { best });
    let mut y = xs[start].clone();
    let mut last = f64::INFINITY;
    for _ in 0..max_iter {
        let mut grad = vec![0.0; m.dim()];
        for (x, w) in xs.iter().zip(ws) {
            let v = geometry::riemannian_log(m, &y, x, geometry::LOG_TOL)?;
            grad.iter_mut().zip(&v.components).for_each(|(g, c)| *g += step * w * c / total);
        }
        last = geometry::metric_norm(m, &y, &grad);
        if last < tol {
            return Ok(y);
        }
        y = geometry::exp(m, &Tangent::new(y, grad))?;
    }
    Err(Error::NoConvergence { iterations: max_iter, residual: last })
}

/// `Σ_i log p_{T/w_i}(x_i; y)` with bridge-based heat-kernel estimates;
/// the standard error combines the per-term relative errors.
pub fn wdm_loglik(prob: &WdmProblem, y: &Point, n_paths: usize, n_steps: usize, seed: u64) -> Result<McEstimate> {
    let m = prob.manifold.as_ref();
    let mut value = 0.0;
    let mut var = 0.0;
    for (i, (x, w)) in prob.xs.iter().zip(&prob.ws).enumerate() {
        let est = heat_kernel_estimate(m, y, x, prob.t / w, n_paths, n_steps, rng::derive(seed, i as u64))?;
        value += est.value[0].ln();
        var += (est.stderr[0] / est.value[0]).powi(2);
    }
    Ok(McEstimate { value: vec![value], stderr: vec![var.sqrt()], n_paths, seed, diagnostics: Default::default() })
}

/// Self-normalized weighted mean and covariance of a sample set, computed in
/// normal coordinates at the (chart-distance) medoid with respect to an
/// orthonormal frame there. The covariance is the weighted population form
/// `Σ w_j (v_j − m)(v_j − m)ᵀ`.
pub fn wdm_moments(m: &dyn Manifold, set: &WeightedSampleSet) -> Result<(Point, DMatrix<f64>)> {
    let d = m.dim();
    let weights = set.normalized_weights()?;
    if set.samples.len() == 1 {
        return Ok((set.samples[0].clone(), DMatrix::zeros(d, d)));
    }
    let (chart, coords) = pick_chart(m, &set.samples.iter().collect::<Vec<_>>())?;
    let medoid = (0..coords.len())
        .into_par_iter()
        .map(|a| coords.iter().map(|b| linalg::dist(&coords[a], b)).sum::<f64>())
        .collect::<Vec<_>>()
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (i, s)| if *s < best.1 { (i, *s) } else { best })
        .0;
    let base = Point::new(chart, coords[medoid].clone());
    let frame = OrthonormalFrame::standard(m, base.clone())?;
    let local = coords
        .par_iter()
        .map(|c| {
            let v = geometry::riemannian_log(m, &base, &Point::new(chart, c.clone()), geometry::LOG_TOL)?;
            frame.solve(&v.components)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut mean = vec![0.0; d];
    for (v, w) in local.iter().zip(&weights) {
        mean.iter_mut().zip(v).for_each(|(a, b)| *a += w * b);
    }
    let mut cov = DMatrix::zeros(d, d);
    for (v, w) in local.iter().zip(&weights) {
        let e = nalgebra::DVector::from_iterator(d, v.iter().zip(&mean).map(|(a, b)| a - b));
        cov += &e * e.transpose() * *w;
    }
    let point = geometry::exp(m, &Tangent::new(base, frame.apply(&mean)))?;
    Ok((point, cov))
}

/// Neighbour weights `k(x, z)` for [`conv_wdm`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SpatialKernel {
    /// `exp(−d(x, z)²/2σ²)`.
    Gaussian { sigma: f64 },
    Constant { value: f64 },
}

impl SpatialKernel {
    pub fn eval(&self, m: &dyn Manifold, x: &Point, z: &Point) -> Result<f64> {
        match *self {
            Self::Gaussian { sigma } => Ok((-geometry::distance(m, x, z)?.powi(2) / (2.0 * sigma * sigma)).exp()),
            Self::Constant { value } => Ok(value),
        }
    }
}

/// Manifold-valued signals `f: M → M` for [`conv_wdm`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PointMap {
    #[default]
    Identity,
}

impl PointMap {
    pub fn apply(&self, p: &Point) -> Point {
        match self {
            Self::Identity => p.clone(),
        }
    }
}

/// Manifold-valued convolution: the weighted diffusion mean of `f(z_i)` with
/// weights `k(x, z_i)`, sampled by [`sample_wdm_sir`]. Neighbours with weight
/// below [`WEIGHT_FLOOR`] are dropped.
#[allow(clippy::too_many_arguments)]
pub fn conv_wdm(
    m: Arc<dyn Manifold>,
    k: &SpatialKernel,
    f: &PointMap,
    x: &Point,
    zs: &[Point],
    t: f64,
    j_samples: usize,
    n_steps: usize,
    seed: u64,
) -> Result<(Point, WeightedSampleSet)> {
    let mut xs = Vec::new();
    let mut ws = Vec::new();
    for z in zs {
        let w = k.eval(m.as_ref(), x, z)?;
        if w >= WEIGHT_FLOOR {
            xs.push(f.apply(z));
            ws.push(w);
        }
    }
    if xs.is_empty() {
        return Err(Error::EmptyNeighborhood);
    }
    let prob = WdmProblem::new(m, xs, ws, t, DriftVariant::EuclideanExact)?;
    sample_wdm_sir(&prob, j_samples, n_steps, seed)
}
