use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{apply_matrix, neg, DirectionalFunction, Kernel, McEstimate};
use crate::error::{Error, Result};
use crate::frame::OrthonormalFrame;
use crate::manifold::Manifold;
use crate::rng;
use crate::stochastics::{develop_stream, DevelopOptions};

/// Pointwise nonlinearity applied after a layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Nonlinearity {
    #[default]
    Identity,
    Relu,
    Tanh,
}

impl Nonlinearity {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Self::Identity => x,
            Self::Relu => x.max(0.0),
            Self::Tanh => x.tanh(),
        }
    }

    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Self::Identity => 1.0,
            Self::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Tanh => 1.0 - x.tanh().powi(2),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub kernel: Kernel,
    #[serde(default)]
    pub nonlinearity: Nonlinearity,
}

/// Layers listed innermost first: `layers[0]` acts on `f` directly. Each
/// layer integrates over time `total_time / n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerStack {
    pub layers: Vec<Layer>,
    pub total_time: f64,
}

impl LayerStack {
    pub fn new(layers: Vec<Layer>, total_time: f64) -> Result<Self> {
        if layers.is_empty() || !(total_time > 0.0) {
            return Err(Error::InvalidArgument("need at least one layer and total_time > 0".into()));
        }
        for w in layers.windows(2) {
            if w[0].kernel.channels_out() != w[1].kernel.channels_in() {
                return Err(Error::ChannelMismatch { expected: w[0].kernel.channels_out(), found: w[1].kernel.channels_in() });
            }
        }
        Ok(Self { layers, total_time })
    }

    pub fn layer_time(&self) -> f64 {
        self.total_time / self.layers.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// One expectation over a single path with the filters applied to
    /// successive increments.
    #[default]
    Collapsed,
    /// Recursive estimation restarting Brownian motion at every layer.
    Nested,
}

/// Multilayer stochastic convolution. `n_steps` counts steps over the whole
/// time horizon and is rounded up to a multiple of the layer count. In nested
/// mode each level draws `n_paths^(1/n)` paths per evaluation.
#[allow(clippy::too_many_arguments)]
pub fn conv_multilayer(
    m: &dyn Manifold,
    stack: &LayerStack,
    f: &DirectionalFunction,
    u: &OrthonormalFrame,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
    mode: Mode,
    opts: &DevelopOptions,
) -> Result<McEstimate> {
    let n = stack.layers.len();
    if stack.layers[0].kernel.channels_in() != f.channels() {
        return Err(Error::ChannelMismatch { expected: stack.layers[0].kernel.channels_in(), found: f.channels() });
    }
    if n_paths == 0 || n_steps == 0 {
        return Err(Error::InvalidArgument("need n_paths ≥ 1 and n_steps ≥ 1".into()));
    }
    let per_layer = n_steps.div_ceil(n);
    match mode {
        Mode::Collapsed => {
            if stack.layers.iter().any(|l| l.nonlinearity != Nonlinearity::Identity) {
                return Err(Error::ModeMismatch);
            }
            collapsed(m, stack, f, u, n_paths, per_layer, seed, opts)
        }
        Mode::Nested => {
            let budget = ((n_paths as f64).powf(1.0 / n as f64).round() as usize).max(2);
            let ctx = Nested { m, stack, f, per_layer, budget, opts };
            let (value, stderr) = ctx.level(n, u, seed)?;
            let n_total = budget.pow(n as u32);
            Ok(McEstimate { value, stderr, n_paths: n_total, seed, diagnostics: Default::default() }
                .with("paths_per_level", budget as f64))
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn collapsed(
    m: &dyn Manifold,
    stack: &LayerStack,
    f: &DirectionalFunction,
    u: &OrthonormalFrame,
    n_paths: usize,
    per_layer: usize,
    seed: u64,
    opts: &DevelopOptions,
) -> Result<McEstimate> {
    let n = stack.layers.len();
    let checkpoints: Vec<usize> = (1..=n).map(|i| i * per_layer).collect();
    let c_out = stack.layers[n - 1].kernel.channels_out();
    let samples = (0..n_paths)
        .into_par_iter()
        .map(|j| {
            let s = develop_stream(m, u, stack.total_time, n * per_layer, seed, j as u64, &checkpoints, opts)?;
            // Layer i (innermost = 0) sees increment n − 1 − i.
            let mut val = f.eval(&s.frame);
            for (i, layer) in stack.layers.iter().enumerate() {
                let seg = n - 1 - i;
                let end = &s.w[seg];
                let inc: Vec<f64> = if seg == 0 { neg(end) } else { s.w[seg - 1].iter().zip(end).map(|(a, b)| a - b).collect() };
                val = apply_matrix(&layer.kernel.eval(&inc), &val, layer.kernel.channels_out());
            }
            Ok(val)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(McEstimate::from_samples(&samples, c_out, seed))
}

struct Nested<'a> {
    m: &'a dyn Manifold,
    stack: &'a LayerStack,
    f: &'a DirectionalFunction,
    per_layer: usize,
    budget: usize,
    opts: &'a DevelopOptions,
}

impl Nested<'_> {
    /// Output of the first `level` layers at `u` with its standard error.
    fn level(&self, level: usize, u: &OrthonormalFrame, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
        if level == 0 {
            let v = self.f.eval(u);
            let z = vec![0.0; v.len()];
            return Ok((v, z));
        }
        let layer = &self.stack.layers[level - 1];
        let level_seed = rng::derive(seed, level as u64);
        let t = self.stack.layer_time();
        let samples = (0..self.budget)
            .into_par_iter()
            .map(|j| {
                let s = develop_stream(self.m, u, t, self.per_layer, level_seed, j as u64, &[self.per_layer], self.opts)?;
                let (inner, _) = self.level(level - 1, &s.frame, rng::derive(level_seed, j as u64))?;
                Ok(apply_matrix(&layer.kernel.eval(&neg(s.w_total())), &inner, layer.kernel.channels_out()))
            })
            .collect::<Result<Vec<_>>>()?;
        let est = McEstimate::from_samples(&samples, layer.kernel.channels_out(), seed);
        let sigma = layer.nonlinearity;
        let value = est.value.iter().map(|x| sigma.apply(*x)).collect();
        let stderr = est.value.iter().zip(&est.stderr).map(|(x, s)| sigma.derivative(*x).abs() * s).collect();
        Ok((value, stderr))
    }
}
