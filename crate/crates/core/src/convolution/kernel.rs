//! Convolution kernels `k: R^d → R^{c_out×c_in}` built from declarative descriptors.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Declarative kernel description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum KernelSpec {
    /// `scale · N(center, σ² I)` density, optionally cut to the cube
    /// `|v − center|_∞ ≤ truncate·σ`.
    Gaussian {
        sigma: f64,
        #[serde(default)]
        center: Option<Vec<f64>>,
        #[serde(default)]
        truncate: Option<f64>,
        #[serde(default)]
        scale: Option<f64>,
    },
    /// Uniform density on the cube `|v − center|_∞ ≤ radius`, times `scale`.
    Box {
        radius: f64,
        #[serde(default)]
        center: Option<Vec<f64>>,
        #[serde(default)]
        scale: Option<f64>,
    },
    /// Weighted lattice `spacing·(n − (shape−1)/2)`, weights row-major with
    /// the last axis fastest; evaluates to `weight / spacing^d` on each cell.
    Grid { spacing: f64, shape: Vec<usize>, weights: Vec<f64> },
    /// The constant 1.
    Identity,
    /// Matrix of scalar kernels, row-major `channels_out × channels_in`.
    Tensor { channels_out: usize, channels_in: usize, entries: Vec<KernelSpec> },
    /// `k / p_T` with `p_T` the centered Gaussian density of variance `T`.
    Reweighted { kernel: Box<KernelSpec>, t: f64 },
    /// `k · p_T`, the inverse of `Reweighted`.
    Unweighted { kernel: Box<KernelSpec>, t: f64 },
}

/// A validated kernel on `R^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub dim: usize,
    pub spec: KernelSpec,
}

/// Axis-aligned support box.
#[derive(Debug, Clone, PartialEq)]
pub struct Support {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Support {
    /// Largest Euclidean norm over the box.
    pub fn radius(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| a.abs().max(b.abs()).powi(2)).sum::<f64>().sqrt()
    }

    fn union(&self, o: &Support) -> Support {
        Support {
            lo: self.lo.iter().zip(&o.lo).map(|(a, b)| a.min(*b)).collect(),
            hi: self.hi.iter().zip(&o.hi).map(|(a, b)| a.max(*b)).collect(),
        }
    }
}

/// Centered Gaussian density of variance `t` in `d` dimensions.
pub fn heat_density(v: &[f64], t: f64) -> f64 {
    let r2: f64 = v.iter().map(|x| x * x).sum();
    (-r2 / (2.0 * t)).exp() / (2.0 * PI * t).powf(v.len() as f64 / 2.0)
}

impl Kernel {
    pub fn new(dim: usize, spec: KernelSpec) -> Result<Self> {
        validate(dim, &spec, true)?;
        Ok(Self { dim, spec })
    }

    pub fn gaussian(dim: usize, sigma: f64) -> Result<Self> {
        Self::new(dim, KernelSpec::Gaussian { sigma, center: None, truncate: None, scale: None })
    }

    pub fn identity(dim: usize) -> Self {
        Self { dim, spec: KernelSpec::Identity }
    }

    pub fn channels_out(&self) -> usize {
        match &self.spec {
            KernelSpec::Tensor { channels_out, .. } => *channels_out,
            _ => 1,
        }
    }

    pub fn channels_in(&self) -> usize {
        match &self.spec {
            KernelSpec::Tensor { channels_in, .. } => *channels_in,
            _ => 1,
        }
    }

    /// `k(v)` as a row-major `c_out × c_in` matrix.
    pub fn eval(&self, v: &[f64]) -> Vec<f64> {
        match &self.spec {
            KernelSpec::Tensor { entries, .. } => entries.iter().map(|e| eval_scalar(e, v)).collect(),
            s => vec![eval_scalar(s, v)],
        }
    }

    /// Scalar value of a `1×1` kernel.
    pub fn eval_scalar(&self, v: &[f64]) -> f64 {
        eval_scalar(&self.spec, v)
    }

    /// Bounding box of the support, `None` when unbounded.
    pub fn support(&self) -> Option<Support> {
        support(&self.spec, self.dim)
    }

    /// Lattice nodes and weights of a grid kernel.
    pub fn lattice(&self) -> Option<Vec<(Vec<f64>, f64)>> {
        match &self.spec {
            KernelSpec::Grid { spacing, shape, weights } => Some(lattice_nodes(*spacing, shape, weights)),
            _ => None,
        }
    }

    /// `k / p_T`.
    pub fn reweight(&self, t: f64) -> Result<Self> {
        Self::new(self.dim, KernelSpec::Reweighted { kernel: Box::new(self.spec.clone()), t })
    }

    /// `k · p_T`.
    pub fn unweight(&self, t: f64) -> Result<Self> {
        Self::new(self.dim, KernelSpec::Unweighted { kernel: Box::new(self.spec.clone()), t })
    }
}

/// `k / p_T`.
pub fn reweight_kernel(k: &Kernel, t: f64) -> Result<Kernel> {
    k.reweight(t)
}

fn validate(dim: usize, spec: &KernelSpec, top: bool) -> Result<()> {
    let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
    let center_ok = |c: &Option<Vec<f64>>| c.as_ref().is_none_or(|c| c.len() == dim && c.iter().all(|x| x.is_finite()));
    match spec {
        KernelSpec::Gaussian { sigma, center, truncate, scale } => {
            if !(*sigma > 0.0) || !center_ok(center) || truncate.is_some_and(|t| !(t > 0.0)) || scale.is_some_and(|s| !s.is_finite()) {
                return bad("gaussian kernel needs sigma > 0, matching center and positive truncation");
            }
        }
        KernelSpec::Box { radius, center, scale } => {
            if !(*radius > 0.0) || !center_ok(center) || scale.is_some_and(|s| !s.is_finite()) {
                return bad("box kernel needs radius > 0 and matching center");
            }
        }
        KernelSpec::Grid { spacing, shape, weights } => {
            if !(*spacing > 0.0) || shape.len() != dim || shape.iter().product::<usize>() != weights.len() || shape.contains(&0) {
                return bad("grid kernel needs spacing > 0 and one weight per lattice node");
            }
        }
        KernelSpec::Identity => {}
        KernelSpec::Tensor { channels_out, channels_in, entries } => {
            if !top || *channels_out == 0 || *channels_in == 0 || entries.len() != channels_out * channels_in {
                return bad("tensor kernel needs channels_out·channels_in scalar entries");
            }
            for e in entries {
                validate(dim, e, false)?;
            }
        }
        KernelSpec::Reweighted { kernel, t } | KernelSpec::Unweighted { kernel, t } => {
            if !(*t > 0.0) {
                return bad("reweighting time must be positive");
            }
            validate(dim, kernel, false)?;
        }
    }
    Ok(())
}

fn offset(v: &[f64], center: &Option<Vec<f64>>) -> Vec<f64> {
    match center {
        Some(c) => v.iter().zip(c).map(|(a, b)| a - b).collect(),
        None => v.to_vec(),
    }
}

fn eval_scalar(spec: &KernelSpec, v: &[f64]) -> f64 {
    let d = v.len();
    match spec {
        KernelSpec::Gaussian { sigma, center, truncate, scale } => {
            let y = offset(v, center);
            if let Some(tr) = truncate {
                if y.iter().any(|c| c.abs() > tr * sigma) {
                    return 0.0;
                }
            }
            scale.unwrap_or(1.0) * heat_density(&y, sigma * sigma)
        }
        KernelSpec::Box { radius, center, scale } => {
            let y = offset(v, center);
            if y.iter().any(|c| c.abs() > *radius) {
                0.0
            } else {
                scale.unwrap_or(1.0) / (2.0 * radius).powi(d as i32)
            }
        }
        KernelSpec::Grid { spacing, shape, weights } => {
            let mut flat = 0;
            for (x, n) in v.iter().zip(shape) {
                let idx = (x / spacing + (*n as f64 - 1.0) / 2.0).round();
                if idx < 0.0 || idx >= *n as f64 {
                    return 0.0;
                }
                flat = flat * n + idx as usize;
            }
            weights[flat] / spacing.powi(d as i32)
        }
        KernelSpec::Identity => 1.0,
        KernelSpec::Tensor { entries, .. } => eval_scalar(&entries[0], v),
        KernelSpec::Reweighted { kernel, t } => {
            let k = eval_scalar(kernel, v);
            if k == 0.0 {
                0.0
            } else {
                // divide in log space so tails stay finite
                let r2: f64 = v.iter().map(|x| x * x).sum();
                k * (2.0 * PI * t).powf(d as f64 / 2.0) * (r2 / (2.0 * t)).exp()
            }
        }
        KernelSpec::Unweighted { kernel, t } => eval_scalar(kernel, v) * heat_density(v, *t),
    }
}

fn support(spec: &KernelSpec, d: usize) -> Option<Support> {
    let cube = |center: &Option<Vec<f64>>, h: f64| {
        let c = center.clone().unwrap_or_else(|| vec![0.0; d]);
        Some(Support { lo: c.iter().map(|x| x - h).collect(), hi: c.iter().map(|x| x + h).collect() })
    };
    match spec {
        KernelSpec::Gaussian { sigma, center, truncate, .. } => truncate.and_then(|t| cube(center, t * sigma)),
        KernelSpec::Box { radius, center, .. } => cube(center, *radius),
        KernelSpec::Grid { spacing, shape, .. } => Some(Support {
            lo: shape.iter().map(|n| -(*n as f64) / 2.0 * spacing).collect(),
            hi: shape.iter().map(|n| *n as f64 / 2.0 * spacing).collect(),
        }),
        KernelSpec::Identity => None,
        KernelSpec::Tensor { entries, .. } => {
            let mut acc: Option<Support> = None;
            for e in entries {
                let s = support(e, d)?;
                acc = Some(match acc {
                    Some(a) => a.union(&s),
                    None => s,
                });
            }
            acc
        }
        KernelSpec::Reweighted { kernel, .. } | KernelSpec::Unweighted { kernel, .. } => support(kernel, d),
    }
}

fn lattice_nodes(spacing: f64, shape: &[usize], weights: &[f64]) -> Vec<(Vec<f64>, f64)> {
    weights
        .iter()
        .enumerate()
        .map(|(mut flat, w)| {
            let mut p = vec![0.0; shape.len()];
            for i in (0..shape.len()).rev() {
                let idx = flat % shape[i];
                flat /= shape[i];
                p[i] = spacing * (idx as f64 - (shape[i] as f64 - 1.0) / 2.0);
            }
            (p, *w)
        })
        .collect()
}
