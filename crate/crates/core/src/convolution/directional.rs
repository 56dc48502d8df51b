use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{apply_matrix, neg, DirectionalFunction, Kernel};
use crate::error::{Error, Result};
use crate::frame::{self, Frame, OrthonormalFrame};
use crate::manifold::{geometry, Manifold};
use crate::quadrature::tensor_rule;

/// Tensor Gauss–Legendre resolution per axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Quadrature {
    pub nodes: usize,
}

impl Default for Quadrature {
    fn default() -> Self {
        Self { nodes: 21 }
    }
}

/// Displacements `v̄` and kernel-weight matrices approximating `∫ k(−v̄) · dv̄`.
pub(crate) fn directional_nodes(m: &dyn Manifold, k: &Kernel, quad: Quadrature) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    let support = k.support().ok_or(Error::UnboundedKernel)?;
    if let Some(r) = m.injectivity_radius() {
        if support.radius() > r {
            return Err(Error::InvalidArgument(format!("kernel support {} exceeds injectivity radius {r}", support.radius())));
        }
    }
    if let Some(lattice) = k.lattice() {
        return Ok(lattice.into_iter().filter(|(_, w)| *w != 0.0).map(|(p, w)| (neg(&p), vec![w])).collect());
    }
    let lo = neg(&support.hi);
    let hi = neg(&support.lo);
    Ok(tensor_rule(&lo, &hi, quad.nodes)
        .into_iter()
        .filter_map(|(v, w)| {
            let kv: Vec<f64> = k.eval(&neg(&v)).into_iter().map(|x| x * w).collect();
            kv.iter().any(|x| *x != 0.0).then_some((v, kv))
        })
        .collect())
}

/// Flow `P(u, v̄)` of the horizontal field `h_u(u v̄)` for unit time.
pub(crate) fn flow(m: &dyn Manifold, u: &Frame, vbar: &[f64]) -> Result<Frame> {
    if vbar.iter().all(|c| *c == 0.0) {
        return Ok(u.clone());
    }
    let len = geometry::metric_norm(m, &u.base, &u.apply(vbar));
    let (chart, x, cols) = frame::flow_raw(m, u.base.chart, &u.base.coords, &u.basis_flat(), vbar, geometry::default_steps(len))?;
    Ok(frame::finish_transport(m, chart, x, cols)?.frame.into_frame())
}

/// `(k ∗ f)(u) = ∫ k(−v̄) f(P(u, v̄)) dv̄` by tensor Gauss–Legendre over the
/// support (exact lattice sums for grid kernels).
pub fn conv_directional(
    m: &dyn Manifold,
    k: &Kernel,
    f: &DirectionalFunction,
    u: &OrthonormalFrame,
    quad: Quadrature,
) -> Result<Vec<f64>> {
    if k.channels_in() != f.channels() {
        return Err(Error::ChannelMismatch { expected: k.channels_in(), found: f.channels() });
    }
    let nodes = directional_nodes(m, k, quad)?;
    let c_out = k.channels_out();
    let parts = nodes
        .par_iter()
        .map(|(v, w)| Ok(apply_matrix(w, &f.eval(&flow(m, u, v)?), c_out)))
        .collect::<Result<Vec<_>>>()?;
    let mut out = vec![0.0; c_out];
    for p in parts {
        out.iter_mut().zip(&p).for_each(|(a, b)| *a += b);
    }
    if out.iter().any(|x| !x.is_finite()) {
        return Err(Error::NumericalBlowup("non-finite directional convolution".into()));
    }
    Ok(out)
}
