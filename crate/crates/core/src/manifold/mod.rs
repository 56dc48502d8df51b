//! Chart-based Riemannian manifolds.
//!
//! A [`Manifold`] is an atlas of coordinate charts carrying a metric. Every
//! geometric routine (Christoffel symbols, curvature, geodesics, logarithm,
//! transport) is written once against this trait in [`geometry`]; concrete
//! manifolds only supply the metric and the chart bookkeeping, plus optional
//! analytic shortcuts.
//!
//! Flat layouts used throughout:
//! - metric `g_{ij}` at `i*d + j`
//! - Christoffel symbols `Γ^i_{jk}` at `(i*d + j)*d + k`
//! - curvature `R^i_{jkl}` at `((i*d + j)*d + k)*d + l`

use std::fmt;
use std::sync::Arc;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

mod builtin;
pub mod geometry;

pub use builtin::{ChristoffelSignFlip, Euclidean, FlatTorus, PoincareDisk, Sphere2};
pub use geometry::*;

/// A point given by its chart index and chart coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub chart: usize,
    pub coords: Vec<f64>,
}

impl Point {
    pub fn new(chart: usize, coords: Vec<f64>) -> Self {
        Self { chart, coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

/// A tangent vector in the coordinate basis of its base point's chart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tangent {
    pub base: Point,
    pub components: Vec<f64>,
}

impl Tangent {
    pub fn new(base: Point, components: Vec<f64>) -> Self {
        Self { base, components }
    }

    pub fn zero(base: Point) -> Self {
        let d = base.dim();
        Self { base, components: vec![0.0; d] }
    }
}

/// Riemann tensor `R^i_{jkl}` at a point, with `R(∂_k, ∂_l)∂_j = R^i_{jkl} ∂_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureTensor {
    pub base: Point,
    pub dim: usize,
    pub components: Vec<f64>,
}

impl CurvatureTensor {
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let d = self.dim;
        self.components[((i * d + j) * d + k) * d + l]
    }

    /// `R(x, y)z` in chart components.
    #[allow(clippy::needless_range_loop)]
    pub fn apply(&self, x: &[f64], y: &[f64], z: &[f64]) -> Vec<f64> {
        let d = self.dim;
        (0..d)
            .map(|i| {
                let mut s = 0.0;
                for j in 0..d {
                    for k in 0..d {
                        for l in 0..d {
                            s += self.get(i, j, k, l) * z[j] * x[k] * y[l];
                        }
                    }
                }
                s
            })
            .collect()
    }

    /// Largest violation of `R^i_{jkl} = -R^i_{jlk}`.
    pub fn antisymmetry_defect(&self) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    for l in 0..d {
                        worst = worst.max((self.get(i, j, k, l) + self.get(i, j, l, k)).abs());
                    }
                }
            }
        }
        worst
    }
}

/// A Riemannian manifold described by an atlas of charts.
///
/// Implementations must be immutable; every method is a pure function of its
/// arguments so manifolds can be shared across worker threads.
pub trait Manifold: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    /// Identifier accepted by [`from_id`].
    fn id(&self) -> String;

    fn chart_count(&self) -> usize {
        1
    }

    /// Whether `x` lies in the valid region of `chart`.
    fn in_domain(&self, chart: usize, x: &[f64]) -> bool;

    /// Writes `g_{ij}(x)` into `out` (row-major, `d*d`).
    fn metric_into(&self, chart: usize, x: &[f64], out: &mut [f64]);

    /// Writes analytic `Γ^i_{jk}(x)` into `out` and returns true, or returns
    /// false when no closed form is available.
    fn christoffel_analytic(&self, _chart: usize, _x: &[f64], _out: &mut [f64]) -> bool {
        false
    }

    /// Writes analytic `R^i_{jkl}(x)` into `out` and returns true, or returns
    /// false when curvature must be derived from the Christoffel symbols.
    fn curvature_analytic(&self, _chart: usize, _x: &[f64], _out: &mut [f64]) -> bool {
        false
    }

    /// When `x` has left the safe region of `chart`, the chart and coordinates
    /// to continue in.
    fn rechart(&self, _chart: usize, _x: &[f64]) -> Option<(usize, Vec<f64>)> {
        None
    }

    /// Chart transition map; `None` when `x` has no image in `to`.
    fn transition(&self, from: usize, to: usize, x: &[f64]) -> Option<Vec<f64>> {
        (from == to).then(|| x.to_vec())
    }

    /// Analytic Jacobian of [`Manifold::transition`], row-major.
    fn transition_jacobian(&self, _from: usize, _to: usize, _x: &[f64], _out: &mut [f64]) -> bool {
        false
    }

    /// Coordinate displacement `a - b` within one chart (wrapped on identified charts).
    fn coord_difference(&self, _chart: usize, a: &[f64], b: &[f64], out: &mut [f64]) {
        for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
            *o = x - y;
        }
    }

    /// Injectivity-radius hint; `None` when unknown.
    fn injectivity_radius(&self) -> Option<f64>;

    /// Isometric or at least smooth embedding into a Euclidean space, when known.
    fn embed(&self, _p: &Point) -> Option<Vec<f64>> {
        None
    }

    /// A random valid point inside a safe chart region, for tests and diagnostics.
    fn random_point(&self, rng: &mut dyn RngCore) -> Point;
}

/// Parses a manifold identifier: `euclidean:d`, `sphere2`, `hyperbolic2`,
/// `torus2`, `torus:d` or `circle`.
pub fn from_id(id: &str) -> Result<Arc<dyn Manifold>> {
    let id = id.trim();
    let bad = || Error::InvalidArgument(format!("unknown manifold id {id:?}"));
    match id {
        "sphere2" => Ok(Arc::new(Sphere2)),
        "hyperbolic2" | "poincare2" => Ok(Arc::new(PoincareDisk)),
        "torus2" => Ok(Arc::new(FlatTorus::new(2))),
        "circle" => Ok(Arc::new(FlatTorus::new(1))),
        _ => {
            let (kind, d) = id.split_once(':').ok_or_else(bad)?;
            let d: usize = d.parse().map_err(|_| bad())?;
            if d == 0 {
                return Err(bad());
            }
            match kind {
                "euclidean" => Ok(Arc::new(Euclidean::new(d))),
                "torus" => Ok(Arc::new(FlatTorus::new(d))),
                _ => Err(bad()),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_catalog_ids() {
        assert_eq!(from_id("euclidean:3").unwrap().dim(), 3);
        assert_eq!(from_id("sphere2").unwrap().dim(), 2);
        assert_eq!(from_id("hyperbolic2").unwrap().dim(), 2);
        assert_eq!(from_id("torus2").unwrap().dim(), 2);
        assert_eq!(from_id("circle").unwrap().dim(), 1);
        for bad in ["", "euclidean", "euclidean:0", "euclidean:x", "klein2", "sphere:3"] {
            assert!(from_id(bad).is_err(), "{bad}");
        }
    }
}
