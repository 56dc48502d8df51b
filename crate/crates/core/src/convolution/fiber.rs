use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{apply_matrix, frame_angle, neg, DirectionalFunction, Kernel, McEstimate, McParams};
use crate::error::{Error, Result};
use crate::frame::{orthonormalize, Frame, OrthonormalFrame};
use crate::manifold::{Manifold, Point};
use crate::stochastics::sample_endpoints;

/// Discretization of base × fiber × driving-endpoint space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiberGrid {
    /// Cell width in chart coordinates.
    pub base_spacing: f64,
    /// Number of angular bins on the `SO(2)` fiber.
    pub fiber_bins: usize,
    /// Cell width for `W_T`.
    pub w_spacing: f64,
}

impl Default for FiberGrid {
    fn default() -> Self {
        Self { base_spacing: 0.05, fiber_bins: 64, w_spacing: 0.05 }
    }
}

#[derive(Debug, Clone, Copy)]
struct Sample {
    chart: usize,
    orientation: i8,
    x: [f64; 2],
    angle: f64,
    w: [f64; 2],
}

type BinKey = (usize, i8, i64, i64, usize, i64, i64);

#[derive(Debug, Clone, Copy, Default)]
struct Bin {
    count: usize,
    x: [f64; 2],
    cos: f64,
    sin: f64,
    w: [f64; 2],
}

/// Empirical law of `(U_T, W_T)` binned on a [`FiberGrid`]. Built once per
/// `(u, T)` and reusable for any kernel and function.
#[derive(Debug, Clone)]
pub struct FiberDensity {
    pub grid: FiberGrid,
    pub n_paths: usize,
    pub seed: u64,
    bins: BTreeMap<BinKey, Bin>,
    samples: Vec<Sample>,
}

impl FiberDensity {
    /// Bins `n_paths` developed paths from `u`.
    pub fn estimate(m: &dyn Manifold, u: &OrthonormalFrame, p: &McParams, grid: FiberGrid) -> Result<Self> {
        if m.dim() != 2 {
            return Err(Error::DimensionUnsupported { required: 2, actual: m.dim() });
        }
        if !(grid.base_spacing > 0.0) || !(grid.w_spacing > 0.0) || grid.fiber_bins == 0 {
            return Err(Error::InvalidArgument("fiber grid needs positive spacings and bins".into()));
        }
        let paths = sample_endpoints(m, u, p.t, p.n_steps, p.n_paths, p.seed, &p.develop)?;
        let samples: Vec<Sample> = paths
            .iter()
            .map(|s| {
                let fr = &s.frame;
                Sample {
                    chart: fr.base.chart,
                    orientation: if fr.basis.determinant() >= 0.0 { 1 } else { -1 },
                    x: [fr.base.coords[0], fr.base.coords[1]],
                    angle: frame_angle(m, fr),
                    w: [s.w_total()[0], s.w_total()[1]],
                }
            })
            .collect();
        let mut bins: BTreeMap<BinKey, Bin> = BTreeMap::new();
        for s in &samples {
            let b = bins.entry(key(&grid, s)).or_default();
            b.count += 1;
            for i in 0..2 {
                b.x[i] += s.x[i];
                b.w[i] += s.w[i];
            }
            b.cos += s.angle.cos();
            b.sin += s.angle.sin();
        }
        Ok(Self { grid, n_paths: p.n_paths, seed: p.seed, bins, samples })
    }

    pub fn occupied_bins(&self) -> usize {
        self.bins.len()
    }

    /// Fraction of paths in each angular bin; bin `b` is centered at `2πb/n`.
    pub fn fiber_marginal(&self) -> Vec<f64> {
        let n = self.grid.fiber_bins;
        let mut out = vec![0.0; n];
        for s in &self.samples {
            out[angle_bin(n, s.angle)] += 1.0;
        }
        out.iter_mut().for_each(|x| *x /= self.samples.len() as f64);
        out
    }

    /// `Σ_bins k(−w̄) f(ũ) ρ̂`, with `ρ̂` normalized to a probability measure
    /// and each bin represented by the mean of its samples. The diagnostic
    /// `binning_bias` is the mean absolute change of the integrand when a
    /// sample is replaced by its bin representative.
    pub fn integrate(&self, m: &dyn Manifold, k: &Kernel, f: &DirectionalFunction) -> Result<McEstimate> {
        if k.channels_in() != f.channels() {
            return Err(Error::ChannelMismatch { expected: k.channels_in(), found: f.channels() });
        }
        let c = k.channels_out();
        let integrand = |chart: usize, orientation: i8, x: [f64; 2], angle: f64, w: [f64; 2]| -> Result<Vec<f64>> {
            let fr = frame_from_angle(m, chart, orientation, x, angle)?;
            Ok(apply_matrix(&k.eval(&neg(&w)), &f.eval(&fr), c))
        };
        let mut values: BTreeMap<BinKey, Vec<f64>> = BTreeMap::new();
        let (mut mean, mut second) = (vec![0.0; c], vec![0.0; c]);
        let total = self.samples.len() as f64;
        for (key, b) in &self.bins {
            let n = b.count as f64;
            let v = integrand(key.0, key.1, [b.x[0] / n, b.x[1] / n], b.sin.atan2(b.cos), [b.w[0] / n, b.w[1] / n])?;
            for ch in 0..c {
                mean[ch] += n / total * v[ch];
                second[ch] += n / total * v[ch] * v[ch];
            }
            values.insert(*key, v);
        }
        let mut bias = 0.0;
        for s in &self.samples {
            let exact = integrand(s.chart, s.orientation, s.x, s.angle, s.w)?;
            let rep = &values[&key(&self.grid, s)];
            bias += exact.iter().zip(rep).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / total;
        }
        let stderr = mean.iter().zip(&second).map(|(m1, m2)| ((m2 - m1 * m1).max(0.0) / (total - 1.0).max(1.0)).sqrt()).collect();
        Ok(McEstimate { value: mean, stderr, n_paths: self.n_paths, seed: self.seed, diagnostics: Default::default() }
            .with("binning_bias", bias)
            .with("occupied_bins", self.bins.len() as f64))
    }
}

fn angle_bin(n: usize, angle: f64) -> usize {
    ((angle * n as f64 / (2.0 * PI)).round() as i64).rem_euclid(n as i64) as usize
}

fn key(grid: &FiberGrid, s: &Sample) -> BinKey {
    let cell = |v: f64, h: f64| (v / h).floor() as i64;
    (
        s.chart,
        s.orientation,
        cell(s.x[0], grid.base_spacing),
        cell(s.x[1], grid.base_spacing),
        angle_bin(grid.fiber_bins, s.angle),
        cell(s.w[0], grid.w_spacing),
        cell(s.w[1], grid.w_spacing),
    )
}

/// Orthonormal frame at `x` whose first vector makes `angle` with the
/// Gram–Schmidt chart frame.
fn frame_from_angle(m: &dyn Manifold, chart: usize, orientation: i8, x: [f64; 2], angle: f64) -> Result<Frame> {
    let reference = orthonormalize(m, &Frame::new(Point::new(chart, x.to_vec()), DMatrix::identity(2, 2))?)?;
    let e = &reference.basis;
    let (c, s, o) = (angle.cos(), angle.sin(), orientation as f64);
    let u1 = e.column(0) * c + e.column(1) * s;
    let u2 = (e.column(1) * c - e.column(0) * s) * o;
    Frame::new(reference.base.clone(), DMatrix::from_columns(&[u1, u2]))
}

/// Two-step fiber-density convolution: bin developed paths, then integrate
/// `k(−w̄) f(ũ)` against the binned density.
pub fn conv_fiber_density(
    m: &dyn Manifold,
    k: &Kernel,
    f: &DirectionalFunction,
    u: &OrthonormalFrame,
    p: &McParams,
    grid: FiberGrid,
) -> Result<McEstimate> {
    FiberDensity::estimate(m, u, p, grid)?.integrate(m, k, f)
}
