//! Wiener paths, stochastic development and anti-development.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{self, OrthonormalFrame};
use crate::linalg;
use crate::manifold::geometry::{self, FlowState};
use crate::manifold::Manifold;
use crate::rng;

/// Default resolution of development, in steps per unit time.
pub const STEPS_PER_UNIT_TIME: f64 = 200.0;

pub fn default_steps(t: f64) -> usize {
    ((t * STEPS_PER_UNIT_TIME).ceil() as usize).max(1)
}

/// Where a path's randomness came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub seed: u64,
    pub stream: u64,
}

/// A discretized `R^d` path given by its increments on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DrivingPath {
    pub t_grid: Vec<f64>,
    /// One `d`-vector per step.
    pub increments: Vec<Vec<f64>>,
    pub seed: Option<SeedRecord>,
}

impl DrivingPath {
    pub fn new(t_grid: Vec<f64>, increments: Vec<Vec<f64>>) -> Result<Self> {
        if t_grid.len() != increments.len() + 1 || t_grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("time grid must be increasing with one more node than increments".into()));
        }
        if increments.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("increments must be finite".into()));
        }
        Ok(Self { t_grid, increments, seed: None })
    }

    pub fn dim(&self) -> usize {
        self.increments.first().map_or(0, |v| v.len())
    }

    pub fn n_steps(&self) -> usize {
        self.increments.len()
    }

    /// `W_{t_k}` with `W_0 = 0`.
    pub fn value_at(&self, k: usize) -> Vec<f64> {
        let mut w = vec![0.0; self.dim()];
        for inc in &self.increments[..k] {
            w.iter_mut().zip(inc).for_each(|(a, b)| *a += b);
        }
        w
    }

    pub fn endpoint(&self) -> Vec<f64> {
        self.value_at(self.n_steps())
    }

    /// Left-multiplies every increment by `a` (row-major `d×d`).
    pub fn rotated(&self, a: &[f64]) -> Self {
        let d = self.dim();
        Self {
            t_grid: self.t_grid.clone(),
            increments: self.increments.iter().map(|w| linalg::matvec(a, w, d)).collect(),
            seed: self.seed,
        }
    }
}

/// A discretized path in the orthonormal frame bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct FramePath {
    pub t_grid: Vec<f64>,
    pub frames: Vec<OrthonormalFrame>,
    pub driving: Option<DrivingPath>,
    /// Largest orthonormality defect seen before re-projection.
    pub max_defect: f64,
}

impl FramePath {
    pub fn endpoint(&self) -> &OrthonormalFrame {
        self.frames.last().expect("frame paths are never empty")
    }
}

/// Integration scheme for development.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Exact horizontal transport along the geodesic of each increment.
    #[default]
    GeodesicStep,
    /// Stratonovich Heun predictor–corrector in chart coordinates.
    Heun,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DevelopOptions {
    pub scheme: Scheme,
    /// RK4 sub-steps per increment for the geodesic-step scheme.
    pub substeps: usize,
}

impl Default for DevelopOptions {
    fn default() -> Self {
        Self { scheme: Scheme::GeodesicStep, substeps: 2 }
    }
}

/// Uniform-grid Wiener increments with variance `T/n_steps`, stream 0 of `seed`.
pub fn sample_wiener(d: usize, t: f64, n_steps: usize, seed: u64) -> Result<DrivingPath> {
    sample_wiener_stream(d, t, n_steps, seed, 0)
}

pub fn sample_wiener_stream(d: usize, t: f64, n_steps: usize, seed: u64, stream: u64) -> Result<DrivingPath> {
    if !(t > 0.0) || n_steps == 0 || d == 0 {
        return Err(Error::InvalidArgument("need T > 0, n_steps ≥ 1 and d ≥ 1".into()));
    }
    let mut r = rng::stream(seed, stream);
    let dt = t / n_steps as f64;
    let increments = (0..n_steps).map(|_| rng::normals(&mut r, d, dt.sqrt())).collect();
    let t_grid = (0..=n_steps).map(|k| k as f64 * dt).collect();
    Ok(DrivingPath { t_grid, increments, seed: Some(SeedRecord { seed, stream }) })
}

/// Stochastic development of `w` from `u0`.
pub fn develop(m: &dyn Manifold, u0: &OrthonormalFrame, w: &DrivingPath) -> Result<FramePath> {
    develop_with(m, u0, w, &DevelopOptions::default())
}

pub fn develop_with(m: &dyn Manifold, u0: &OrthonormalFrame, w: &DrivingPath, opts: &DevelopOptions) -> Result<FramePath> {
    let d = m.dim();
    if w.dim() != d && w.n_steps() > 0 {
        return Err(Error::IndexOutOfRange { index: w.dim(), dim: d });
    }
    let mut st = FlowState { chart: u0.base.chart, x: u0.base.coords.clone(), cols: u0.basis_flat(), ncols: d };
    let mut frames = Vec::with_capacity(w.n_steps() + 1);
    frames.push(u0.clone());
    let mut max_defect: f64 = 0.0;
    for inc in &w.increments {
        max_defect = max_defect.max(step(m, &mut st, inc, opts)?);
        frames.push(OrthonormalFrame::from_flat_unchecked(crate::manifold::Point::new(st.chart, st.x.clone()), &st.cols));
    }
    Ok(FramePath { t_grid: w.t_grid.clone(), frames, driving: Some(w.clone()), max_defect })
}

/// Develops increments without storing the path; returns the final frame.
pub fn develop_endpoint(
    m: &dyn Manifold,
    u0: &OrthonormalFrame,
    increments: &[Vec<f64>],
    opts: &DevelopOptions,
) -> Result<OrthonormalFrame> {
    let d = m.dim();
    let mut st = FlowState { chart: u0.base.chart, x: u0.base.coords.clone(), cols: u0.basis_flat(), ncols: d };
    for inc in increments {
        step(m, &mut st, inc, opts)?;
    }
    Ok(OrthonormalFrame::from_flat_unchecked(crate::manifold::Point::new(st.chart, st.x), &st.cols))
}

/// Advances one increment; returns the orthonormality defect before re-projection.
fn step(m: &dyn Manifold, st: &mut FlowState, inc: &[f64], opts: &DevelopOptions) -> Result<f64> {
    if inc.iter().all(|c| *c == 0.0) {
        return Ok(0.0);
    }
    match opts.scheme {
        Scheme::GeodesicStep => geometry::horizontal_flow(m, st, inc, opts.substeps.max(1))?,
        Scheme::Heun => heun_step(m, st, inc)?,
    }
    let d = m.dim();
    let defect = flat_defect(m, st.chart, &st.x, &st.cols, d);
    if defect > frame::REORTHONORMALIZE_THRESHOLD {
        st.cols = frame::polar_orthonormalize(m, st.chart, &st.x, &st.cols)?;
    }
    Ok(defect)
}

fn heun_step(m: &dyn Manifold, st: &mut FlowState, inc: &[f64]) -> Result<()> {
    let d = m.dim();
    let chart = st.chart;
    let field = |x: &[f64], u: &[f64]| -> Vec<f64> {
        let mut gamma = vec![0.0; d * d * d];
        geometry::christoffel_into(m, chart, x, &mut gamma);
        let vel: Vec<f64> = (0..d).map(|i| (0..d).map(|a| u[i * d + a] * inc[a]).sum()).collect();
        let mut out = vel.clone();
        out.resize(d + d * d, 0.0);
        for i in 0..d {
            for a in 0..d {
                let mut s = 0.0;
                for j in 0..d {
                    for k in 0..d {
                        s += gamma[(i * d + j) * d + k] * vel[j] * u[k * d + a];
                    }
                }
                out[d + i * d + a] = -s;
            }
        }
        out
    };
    let f0 = field(&st.x, &st.cols);
    let xp: Vec<f64> = (0..d).map(|i| st.x[i] + f0[i]).collect();
    let up: Vec<f64> = (0..d * d).map(|q| st.cols[q] + f0[d + q]).collect();
    let f1 = field(&xp, &up);
    for i in 0..d {
        st.x[i] += 0.5 * (f0[i] + f1[i]);
    }
    for q in 0..d * d {
        st.cols[q] += 0.5 * (f0[d + q] + f1[d + q]);
    }
    if st.x.iter().chain(&st.cols).any(|v| !v.is_finite()) {
        return Err(Error::IntegrationDiverged);
    }
    geometry::settle_chart(m, st)
}

fn flat_defect(m: &dyn Manifold, chart: usize, x: &[f64], u: &[f64], d: usize) -> f64 {
    let g = geometry::metric_flat(m, chart, x);
    let mut s = 0.0;
    for a in 0..d {
        for b in 0..d {
            let mut q = 0.0;
            for i in 0..d {
                for j in 0..d {
                    q += u[i * d + a] * g[i * d + j] * u[j * d + b];
                }
            }
            let e = q - if a == b { 1.0 } else { 0.0 };
            s += e * e;
        }
    }
    s.sqrt()
}

/// Inverse of development: `ΔW_k = U_k⁻¹ Log_{x_k}(x_{k+1})`.
pub fn antidevelop(m: &dyn Manifold, fp: &FramePath) -> Result<DrivingPath> {
    let increments = fp
        .frames
        .windows(2)
        .map(|w| {
            let v = geometry::riemannian_log(m, &w[0].base, &w[1].base, geometry::LOG_TOL)?;
            w[0].solve(&v.components)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DrivingPath { t_grid: fp.t_grid.clone(), increments, seed: None })
}

/// Brownian motion on `m` started at `u0`: develop a fresh Wiener path.
pub fn sample_brownian(m: &dyn Manifold, u0: &OrthonormalFrame, t: f64, n_steps: usize, seed: u64) -> Result<FramePath> {
    sample_brownian_stream(m, u0, t, n_steps, seed, 0)
}

pub fn sample_brownian_stream(
    m: &dyn Manifold,
    u0: &OrthonormalFrame,
    t: f64,
    n_steps: usize,
    seed: u64,
    stream: u64,
) -> Result<FramePath> {
    let w = sample_wiener_stream(m.dim(), t, n_steps, seed, stream)?;
    develop(m, u0, &w)
}

/// Endpoint of one developed path with its driving path sampled at checkpoints.
#[derive(Debug, Clone)]
pub struct DevelopedSample {
    pub frame: OrthonormalFrame,
    /// `W` at each requested checkpoint step.
    pub w: Vec<Vec<f64>>,
}

impl DevelopedSample {
    /// `W_T`, the last checkpoint.
    pub fn w_total(&self) -> &[f64] {
        self.w.last().map_or(&[], |w| w.as_slice())
    }
}

/// Develops stream `stream` of `seed` without storing the path. Draws the same
/// increments as [`sample_wiener_stream`].
#[allow(clippy::too_many_arguments)]
pub fn develop_stream(
    m: &dyn Manifold,
    u0: &OrthonormalFrame,
    t: f64,
    n_steps: usize,
    seed: u64,
    stream: u64,
    checkpoints: &[usize],
    opts: &DevelopOptions,
) -> Result<DevelopedSample> {
    let d = m.dim();
    if !(t > 0.0) || n_steps == 0 {
        return Err(Error::InvalidArgument("need T > 0 and n_steps ≥ 1".into()));
    }
    let mut r = rng::stream(seed, stream);
    let sd = (t / n_steps as f64).sqrt();
    let mut st = FlowState { chart: u0.base.chart, x: u0.base.coords.clone(), cols: u0.basis_flat(), ncols: d };
    let mut w = vec![0.0; d];
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut next = 0;
    for k in 1..=n_steps {
        let inc = rng::normals(&mut r, d, sd);
        step(m, &mut st, &inc, opts)?;
        w.iter_mut().zip(&inc).for_each(|(a, b)| *a += b);
        while next < checkpoints.len() && checkpoints[next] == k {
            out.push(w.clone());
            next += 1;
        }
    }
    let frame = OrthonormalFrame::from_flat_unchecked(crate::manifold::Point::new(st.chart, st.x), &st.cols);
    Ok(DevelopedSample { frame, w: out })
}

/// Develops `n_paths` independent paths in parallel, path `j` on stream `j`;
/// results are returned in path order.
pub fn sample_endpoints(
    m: &dyn Manifold,
    u0: &OrthonormalFrame,
    t: f64,
    n_steps: usize,
    n_paths: usize,
    seed: u64,
    opts: &DevelopOptions,
) -> Result<Vec<DevelopedSample>> {
    (0..n_paths)
        .into_par_iter()
        .map(|j| develop_stream(m, u0, t, n_steps, seed, j as u64, &[n_steps], opts))
        .collect()
}

/// Writes paths as CSV with columns
/// `path, step, t, chart_id, x0…, u00…(row-major), dW0…`; the increment on a
/// row leads to the next row and is empty on the last one.
pub fn write_csv<W: Write>(paths: &[FramePath], out: W) -> Result<()> {
    let io = |e: csv::Error| Error::InvalidArgument(format!("csv: {e}"));
    let mut wtr = csv::Writer::from_writer(out);
    let d = paths.first().map_or(0, |p| p.endpoint().dim());
    let mut header = vec!["path".to_string(), "step".into(), "t".into(), "chart_id".into()];
    header.extend((0..d).map(|i| format!("x{i}")));
    for i in 0..d {
        header.extend((0..d).map(|a| format!("u{i}{a}")));
    }
    header.extend((0..d).map(|i| format!("dW{i}")));
    wtr.write_record(&header).map_err(io)?;
    for (p, path) in paths.iter().enumerate() {
        for (k, f) in path.frames.iter().enumerate() {
            let mut rec = vec![p.to_string(), k.to_string(), format!("{:?}", path.t_grid[k]), f.base.chart.to_string()];
            rec.extend(f.base.coords.iter().map(|x| format!("{x:?}")));
            rec.extend(f.basis_flat().iter().map(|x| format!("{x:?}")));
            match path.driving.as_ref().and_then(|w| w.increments.get(k)) {
                Some(inc) => rec.extend(inc.iter().map(|x| format!("{x:?}"))),
                None => rec.extend((0..d).map(|_| String::new())),
            }
            wtr.write_record(&rec).map_err(io)?;
        }
    }
    wtr.flush().map_err(|e| Error::InvalidArgument(format!("csv: {e}")))?;
    Ok(())
}
