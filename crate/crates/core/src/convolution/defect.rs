use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::directional::{directional_nodes, flow};
use super::{DirectionalFunction, Kernel, Quadrature};
use crate::error::{Error, Result};
use crate::frame::{horizontal_bracket, FMTangent, Frame, OrthonormalFrame};
use crate::manifold::Manifold;

/// Associativity and commutativity defects of two directional convolutions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Defects {
    /// `k₂∗(k₁∗f) − (k₂∗k₁)∗f`.
    pub assoc: Vec<f64>,
    /// `k₂∗(k₁∗f) − k₁∗(k₂∗f)`.
    pub comm: Vec<f64>,
    /// `k₂∗(k₁∗f)` itself, for scale.
    pub nested: Vec<f64>,
}

fn scalar_only(k: &Kernel) -> Result<()> {
    if k.channels_in() != 1 || k.channels_out() != 1 {
        return Err(Error::ChannelMismatch { expected: 1, found: k.channels_in() * k.channels_out() });
    }
    Ok(())
}

/// Both defects by nested quadrature. `(k₂∗k₁)∗f` is evaluated through the
/// substitution `v = v̄₁ + v̄₂`, which turns its Euclidean kernel convolution
/// into the same double quadrature.
pub fn commutator_defect(
    m: &dyn Manifold,
    k1: &Kernel,
    k2: &Kernel,
    f: &DirectionalFunction,
    u: &OrthonormalFrame,
    quad: Quadrature,
) -> Result<Defects> {
    scalar_only(k1)?;
    scalar_only(k2)?;
    let c = f.channels();
    let n1 = directional_nodes(m, k1, quad)?;
    let n2 = directional_nodes(m, k2, quad)?;

    // Σ_outer w_o Σ_inner w_i f(P(P(u, v_o), v_i))
    let nested = |outer: &[(Vec<f64>, Vec<f64>)], inner: &[(Vec<f64>, Vec<f64>)]| -> Result<Vec<f64>> {
        let parts = outer
            .par_iter()
            .map(|(vo, wo)| {
                let mid = flow(m, u, vo)?;
                let mut acc = vec![0.0; c];
                for (vi, wi) in inner {
                    let val = f.eval(&flow(m, &mid, vi)?);
                    acc.iter_mut().zip(&val).for_each(|(a, b)| *a += wo[0] * wi[0] * b);
                }
                Ok(acc)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(sum(parts, c))
    };
    let k2k1 = nested(&n2, &n1)?;
    let k1k2 = nested(&n1, &n2)?;
    let combined = n2
        .par_iter()
        .map(|(v2, w2)| {
            let mut acc = vec![0.0; c];
            for (v1, w1) in &n1 {
                let v: Vec<f64> = v1.iter().zip(v2).map(|(a, b)| a + b).collect();
                let val = f.eval(&flow(m, u, &v)?);
                acc.iter_mut().zip(&val).for_each(|(a, b)| *a += w2[0] * w1[0] * b);
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    let combined = sum(combined, c);
    Ok(Defects {
        assoc: k2k1.iter().zip(&combined).map(|(a, b)| a - b).collect(),
        comm: k2k1.iter().zip(&k1k2).map(|(a, b)| a - b).collect(),
        nested: k2k1,
    })
}

fn sum(parts: Vec<Vec<f64>>, c: usize) -> Vec<f64> {
    let mut out = vec![0.0; c];
    for p in parts {
        out.iter_mut().zip(&p).for_each(|(a, b)| *a += b);
    }
    out
}

/// Leading-order prediction of the commutativity defect:
/// `∫∫ k₂(−v̄₂) k₁(−v̄₁) [h_u(u v̄₂), h_u(u v̄₁)] f dv̄₁ dv̄₂`, with the bracket
/// from [`horizontal_bracket`] and its action on `f` by central differences.
pub fn bracket_term(
    m: &dyn Manifold,
    k1: &Kernel,
    k2: &Kernel,
    f: &DirectionalFunction,
    u: &OrthonormalFrame,
    quad: Quadrature,
    h: f64,
) -> Result<Vec<f64>> {
    bracket_term_with(m, k1, k2, f, u, quad, &|a, b| horizontal_bracket(m, u, a, b, h))
}

/// [`bracket_term`] with the bracket `[h_u(u ē_a), h_u(u ē_b)]` supplied by
/// the caller, e.g. from a closed-form curvature.
#[allow(clippy::too_many_arguments, clippy::type_complexity)]
pub fn bracket_term_with(
    m: &dyn Manifold,
    k1: &Kernel,
    k2: &Kernel,
    f: &DirectionalFunction,
    u: &OrthonormalFrame,
    quad: Quadrature,
    bracket: &dyn Fn(&[f64], &[f64]) -> Result<FMTangent>,
) -> Result<Vec<f64>> {
    scalar_only(k1)?;
    scalar_only(k2)?;
    let d = m.dim();
    let c = f.channels();
    let moment = |k: &Kernel| -> Result<Vec<f64>> {
        let mut mom = vec![0.0; d];
        for (v, w) in directional_nodes(m, k, quad)? {
            mom.iter_mut().zip(&v).for_each(|(a, b)| *a += w[0] * b);
        }
        Ok(mom)
    };
    let (m1, m2) = (moment(k1)?, moment(k2)?);
    let eps = 1e-5;
    let mut out = vec![0.0; c];
    for a in 0..d {
        for b in 0..d {
            let coef = m2[a] * m1[b];
            if a == b || coef == 0.0 {
                continue;
            }
            let (mut ea, mut eb) = (vec![0.0; d], vec![0.0; d]);
            ea[a] = 1.0;
            eb[b] = 1.0;
            let br = bracket(&ea, &eb)?;
            let shifted = |s: f64| Frame {
                base: crate::manifold::Point::new(u.base.chart, u.base.coords.iter().zip(&br.dx).map(|(x, v)| x + s * v).collect()),
                basis: &u.basis + &br.du * s,
            };
            let (fp, fm) = (f.eval(&shifted(eps)), f.eval(&shifted(-eps)));
            for ch in 0..c {
                out[ch] += coef * (fp[ch] - fm[ch]) / (2.0 * eps);
            }
        }
    }
    Ok(out)
}
