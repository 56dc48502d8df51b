use rayon::prelude::*;

use super::directional::flow;
use super::{apply_matrix, heat_density, neg, DirectionalFunction, Kernel, McEstimate, McParams};
use crate::error::{Error, Result};
use crate::frame::OrthonormalFrame;
use crate::manifold::{geometry, Manifold};
use crate::stochastics::{develop_stream, DevelopedSample};

/// Rejection fraction above which `conv_log_form` raises its warning flag.
pub const LOG_REJECTION_WARNING: f64 = 0.5;

fn check_params(p: &McParams) -> Result<()> {
    if !(p.t > 0.0) || p.n_paths == 0 || p.n_steps == 0 {
        return Err(Error::InvalidArgument("need T > 0, n_paths ≥ 1 and n_steps ≥ 1".into()));
    }
    Ok(())
}

fn check_channels(k: &Kernel, f: &DirectionalFunction) -> Result<()> {
    if k.channels_in() != f.channels() {
        return Err(Error::ChannelMismatch { expected: k.channels_in(), found: f.channels() });
    }
    Ok(())
}

/// Runs `per_path` on every developed path (path `j` on stream `j`) and
/// returns the results in path order.
fn over_paths<T: Send>(
    m: &dyn Manifold,
    u: &OrthonormalFrame,
    p: &McParams,
    per_path: impl Fn(DevelopedSample) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    (0..p.n_paths)
        .into_par_iter()
        .map(|j| per_path(develop_stream(m, u, p.t, p.n_steps, p.seed, j as u64, &[p.n_steps], &p.develop)?))
        .collect()
}

/// `E[k(−W_T) f(U_T)]` over Brownian paths developed from `u`.
pub fn conv_horizontal_mc(
    m: &dyn Manifold,
    k: &Kernel,
    f: &DirectionalFunction,
    u: &OrthonormalFrame,
    p: &McParams,
) -> Result<McEstimate> {
    check_params(p)?;
    check_channels(k, f)?;
    let c_out = k.channels_out();
    let samples = over_paths(m, u, p, |s| Ok(apply_matrix(&k.eval(&neg(s.w_total())), &f.eval(&s.frame), c_out)))?;
    Ok(McEstimate::from_samples(&samples, c_out, p.seed))
}

/// Channel-mixing convolution `yⁿ = Σ_m kⁿ_m ∗ f^m` inside one expectation.
pub fn tensor_conv(
    m: &dyn Manifold,
    k: &Kernel,
    f: &DirectionalFunction,
    u: &OrthonormalFrame,
    p: &McParams,
) -> Result<McEstimate> {
    conv_horizontal_mc(m, k, f, u, p)
}

/// `E[k(−u⁻¹ Log_x π(U_T)) f(U_T)]`. Paths whose endpoint has no logarithm
/// inside the injectivity radius are rejected; the mean runs over accepted
/// paths and the rejected fraction is reported as `rejection_fraction`.
pub fn conv_log_form(
    m: &dyn Manifold,
    k: &Kernel,
    f: &DirectionalFunction,
    u: &OrthonormalFrame,
    p: &McParams,
) -> Result<McEstimate> {
    check_params(p)?;
    check_channels(k, f)?;
    let c_out = k.channels_out();
    let radius = m.injectivity_radius().unwrap_or(f64::INFINITY);
    let outcomes = over_paths(m, u, p, |s| {
        let Ok(v) = geometry::riemannian_log(m, &u.base, &s.frame.base, geometry::LOG_TOL) else {
            return Ok(None);
        };
        if geometry::metric_norm(m, &u.base, &v.components) >= radius {
            return Ok(None);
        }
        let vbar = u.solve(&v.components)?;
        Ok(Some(apply_matrix(&k.eval(&neg(&vbar)), &f.eval(&s.frame), c_out)))
    })?;
    let samples: Vec<Vec<f64>> = outcomes.into_iter().flatten().collect();
    let rejected = (p.n_paths - samples.len()) as f64 / p.n_paths as f64;
    if rejected > LOG_REJECTION_WARNING {
        log::warn!("log-form convolution rejected {:.1}% of paths", 100.0 * rejected);
    }
    let est = if samples.is_empty() {
        McEstimate { value: vec![f64::NAN; c_out], stderr: vec![f64::NAN; c_out], n_paths: 0, seed: p.seed, diagnostics: Default::default() }
    } else {
        McEstimate::from_samples(&samples, c_out, p.seed)
    };
    Ok(est
        .with("rejection_fraction", rejected)
        .with("warning", if rejected > LOG_REJECTION_WARNING { 1.0 } else { 0.0 }))
}

/// Paired estimate of `E[(k/p_T)(−W_T) f(U_T)] − (k ∗ f)(u)`, the gap between
/// the reweighted stochastic convolution and the directional one. Each path
/// contributes `(k/p_T)(−W_T)·(f(U_T) − f(P(u, W_T)))`, whose mean is the gap
/// because `W_T` has density `p_T`; sharing `W_T` between both terms removes
/// most of the variance of the two separate estimators.
pub fn small_time_gap(
    m: &dyn Manifold,
    k: &Kernel,
    f: &DirectionalFunction,
    u: &OrthonormalFrame,
    p: &McParams,
) -> Result<McEstimate> {
    check_params(p)?;
    check_channels(k, f)?;
    let c_out = k.channels_out();
    let samples = over_paths(m, u, p, |s| {
        let w = s.w_total();
        let weight: Vec<f64> = k.eval(&neg(w)).into_iter().map(|x| x / heat_density(w, p.t)).collect();
        if weight.iter().all(|x| *x == 0.0) {
            return Ok(vec![0.0; c_out]);
        }
        let diff: Vec<f64> = f.eval(&s.frame).iter().zip(f.eval(&flow(m, u, w)?)).map(|(a, b)| a - b).collect();
        Ok(apply_matrix(&weight, &diff, c_out))
    })?;
    Ok(McEstimate::from_samples(&samples, c_out, p.seed))
}
