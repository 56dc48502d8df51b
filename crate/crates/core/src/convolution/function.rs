//! Functions on the orthonormal frame bundle and a small named catalog.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{orthonormalize, Frame};
use crate::linalg;
use crate::manifold::{Manifold, Point};

type EvalFn = dyn Fn(&Frame) -> Vec<f64> + Send + Sync;

/// `f: OM → R^c`.
#[derive(Clone)]
pub struct DirectionalFunction {
    channels: usize,
    eval: Arc<EvalFn>,
}

impl fmt::Debug for DirectionalFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DirectionalFunction({} channels)", self.channels)
    }
}

impl DirectionalFunction {
    pub fn new(channels: usize, eval: impl Fn(&Frame) -> Vec<f64> + Send + Sync + 'static) -> Self {
        Self { channels, eval: Arc::new(eval) }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn eval(&self, u: &Frame) -> Vec<f64> {
        (self.eval)(u)
    }

    /// `α f + β g`.
    pub fn combine(alpha: f64, f: &Self, beta: f64, g: &Self) -> Result<Self> {
        if f.channels != g.channels {
            return Err(Error::ChannelMismatch { expected: f.channels, found: g.channels });
        }
        let (f, g) = (f.clone(), g.clone());
        Ok(Self::new(f.channels, move |u| f.eval(u).iter().zip(g.eval(u)).map(|(a, b)| alpha * a + beta * b).collect()))
    }

    /// Concatenates channels.
    pub fn stack(parts: &[Self]) -> Self {
        let parts = parts.to_vec();
        let channels = parts.iter().map(|p| p.channels).sum();
        Self::new(channels, move |u| parts.iter().flat_map(|p| p.eval(u)).collect())
    }

    /// Builds a catalog function on `m`.
    pub fn from_spec(m: Arc<dyn Manifold>, spec: &FunctionSpec) -> Result<Self> {
        let d = m.dim();
        match spec.clone() {
            FunctionSpec::Constant { value } => Ok(Self::new(1, move |_| vec![value])),
            FunctionSpec::BaseGaussian { center, sigma } => {
                if !(sigma > 0.0) {
                    return Err(Error::InvalidArgument("sigma must be positive".into()));
                }
                let probe = embedded_or_chart(m.as_ref(), &Point::new(0, vec![0.0; d]));
                if center.len() != probe.len() {
                    return Err(Error::InvalidArgument(format!("center must have {} entries", probe.len())));
                }
                Ok(Self::new(1, move |u| {
                    let p = embedded_or_chart(m.as_ref(), &u.base);
                    vec![(-linalg::dist(&p, &center).powi(2) / (2.0 * sigma * sigma)).exp()]
                }))
            }
            FunctionSpec::BaseCoordinate { axis } => {
                let n = embedded_or_chart(m.as_ref(), &Point::new(0, vec![0.0; d])).len();
                if axis >= n {
                    return Err(Error::IndexOutOfRange { index: axis, dim: n });
                }
                Ok(Self::new(1, move |u| vec![embedded_or_chart(m.as_ref(), &u.base)[axis]]))
            }
            FunctionSpec::FrameAngle => {
                if d != 2 {
                    return Err(Error::DimensionUnsupported { required: 2, actual: d });
                }
                Ok(Self::new(1, move |u| vec![frame_angle(m.as_ref(), u)]))
            }
            FunctionSpec::FrameComponent { axis, column } => {
                if column >= d {
                    return Err(Error::IndexOutOfRange { index: column, dim: d });
                }
                let n = embedded_or_chart(m.as_ref(), &Point::new(0, vec![0.0; d])).len();
                if axis >= n {
                    return Err(Error::IndexOutOfRange { index: axis, dim: n });
                }
                Ok(Self::new(1, move |u| vec![pushforward(m.as_ref(), u, column)[axis]]))
            }
            FunctionSpec::Stack { parts } => {
                let built = parts.iter().map(|p| Self::from_spec(m.clone(), p)).collect::<Result<Vec<_>>>()?;
                Ok(Self::stack(&built))
            }
        }
    }
}

/// Named test functions selectable from configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FunctionSpec {
    Constant { value: f64 },
    /// `exp(−|p − center|²/2σ²)` with `p` the embedded base point (chart
    /// coordinates when the manifold has no embedding).
    BaseGaussian { center: Vec<f64>, sigma: f64 },
    /// One coordinate of the embedded base point.
    BaseCoordinate { axis: usize },
    /// Angle of `u_1` against the orthonormalized chart basis (`d = 2`).
    FrameAngle,
    /// Embedded component `axis` of frame vector `column`.
    FrameComponent { axis: usize, column: usize },
    Stack { parts: Vec<FunctionSpec> },
}

fn embedded_or_chart(m: &dyn Manifold, p: &Point) -> Vec<f64> {
    m.embed(p).unwrap_or_else(|| p.coords.clone())
}

/// Angle of the first frame vector relative to the Gram–Schmidt chart frame.
pub fn frame_angle(m: &dyn Manifold, u: &Frame) -> f64 {
    let d = u.dim();
    let reference = match Frame::new(u.base.clone(), nalgebra::DMatrix::identity(d, d)).and_then(|f| orthonormalize(m, &f)) {
        Ok(r) => r,
        Err(_) => return f64::NAN,
    };
    let g = crate::manifold::geometry::metric_flat(m, u.base.chart, &u.base.coords);
    let u1: Vec<f64> = u.basis.column(0).iter().copied().collect();
    let e1: Vec<f64> = reference.basis.column(0).iter().copied().collect();
    let e2: Vec<f64> = reference.basis.column(1).iter().copied().collect();
    linalg::quad_form(&g, &u1, &e2).atan2(linalg::quad_form(&g, &u1, &e1))
}

/// Embedded image of frame vector `column`, by central differences of the embedding.
fn pushforward(m: &dyn Manifold, u: &Frame, column: usize) -> Vec<f64> {
    let h = 1e-6;
    let dir: Vec<f64> = u.basis.column(column).iter().copied().collect();
    let shift = |s: f64| Point::new(u.base.chart, u.base.coords.iter().zip(&dir).map(|(x, v)| x + s * v).collect());
    match (m.embed(&shift(h)), m.embed(&shift(-h))) {
        (Some(a), Some(b)) => a.iter().zip(&b).map(|(p, q)| (p - q) / (2.0 * h)).collect(),
        _ => dir,
    }
}
