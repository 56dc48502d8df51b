//! Frame-bundle convolutions, stochastic development and guided diffusion
//! bridges on chart-based Riemannian manifolds.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bridge;
pub mod convolution;
pub mod error;
pub mod linalg;
pub mod frame;
pub mod manifold;
pub mod oracle;
pub mod quadrature;
pub mod rng;
pub mod stochastics;
pub mod suite;

pub use error::{Error, Result};
pub use manifold::{Manifold, Point, Tangent};
