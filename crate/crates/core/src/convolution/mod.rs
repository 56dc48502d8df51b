//! Convolutions on the orthonormal frame bundle: deterministic directional
//! convolution by quadrature and stochastic convolutions driven by developed
//! Brownian paths.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::stochastics::DevelopOptions;

mod defect;
mod directional;
mod fiber;
mod function;
mod horizontal;
mod kernel;
mod multilayer;

pub use defect::{bracket_term, bracket_term_with, commutator_defect, Defects};
pub use directional::{conv_directional, Quadrature};
pub use fiber::{conv_fiber_density, FiberDensity, FiberGrid};
pub use function::{frame_angle, DirectionalFunction, FunctionSpec};
pub use horizontal::{conv_horizontal_mc, conv_log_form, small_time_gap, tensor_conv};
pub use kernel::{heat_density, reweight_kernel, Kernel, KernelSpec, Support};
pub use multilayer::{conv_multilayer, Layer, LayerStack, Mode, Nonlinearity};

/// Monte-Carlo settings shared by the stochastic convolutions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McParams {
    pub t: f64,
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    #[serde(default)]
    pub develop: DevelopOptions,
}

impl McParams {
    pub fn new(t: f64, n_paths: usize, n_steps: usize, seed: u64) -> Self {
        Self { t, n_paths, n_steps, seed, develop: DevelopOptions::default() }
    }
}

/// A Monte-Carlo mean with its standard error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: Vec<f64>,
    pub stderr: Vec<f64>,
    pub n_paths: usize,
    pub seed: u64,
    #[serde(default)]
    pub diagnostics: BTreeMap<String, f64>,
}

impl McEstimate {
    /// Channelwise sample mean and standard error, accumulated in index order.
    pub fn from_samples(samples: &[Vec<f64>], channels: usize, seed: u64) -> Self {
        let n = samples.len();
        let mut mean = vec![0.0; channels];
        let mut m2 = vec![0.0; channels];
        for (k, s) in samples.iter().enumerate() {
            for c in 0..channels {
                let delta = s[c] - mean[c];
                mean[c] += delta / (k + 1) as f64;
                m2[c] += delta * (s[c] - mean[c]);
            }
        }
        let stderr = m2
            .iter()
            .map(|v| if n > 1 { (v / (n - 1) as f64 / n as f64).sqrt() } else { 0.0 })
            .collect();
        Self { value: mean, stderr, n_paths: n, seed, diagnostics: BTreeMap::new() }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.diagnostics.insert(key.to_string(), value);
        self
    }
}

/// `K · f` for a row-major `c_out × c_in` kernel matrix.
pub(crate) fn apply_matrix(k: &[f64], f: &[f64], c_out: usize) -> Vec<f64> {
    let c_in = f.len();
    (0..c_out).map(|o| (0..c_in).map(|i| k[o * c_in + i] * f[i]).sum()).collect()
}

pub(crate) fn neg(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| -x).collect()
}
