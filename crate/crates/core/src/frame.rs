//! Frames, orthonormal frames and horizontal flows on the frame bundle.

use std::ops::Deref;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;
use crate::manifold::geometry::{self, FlowState};
use crate::manifold::{Manifold, Point, Tangent};

/// Orthonormality defect above which transported frames are re-projected.
pub const REORTHONORMALIZE_THRESHOLD: f64 = 1e-10;
/// Tolerance of the orthonormality invariant.
pub const ORTHONORMAL_TOL: f64 = 1e-8;
pub const DEFAULT_BRACKET_STEP: f64 = 1e-3;

/// A base point with a basis of its tangent space; column `α` of `basis`
/// holds the chart components of `u_α`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub base: Point,
    pub basis: DMatrix<f64>,
}

impl Frame {
    pub fn new(base: Point, basis: DMatrix<f64>) -> Result<Self> {
        let d = base.dim();
        if basis.shape() != (d, d) {
            return Err(Error::InvalidArgument(format!("basis must be {d}x{d}")));
        }
        let det = basis.determinant();
        if !det.is_finite() || det.abs() <= 1e-12 {
            return Err(Error::DegenerateFrame { det });
        }
        Ok(Self { base, basis })
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    /// The chart vector `u v̄`.
    pub fn apply(&self, vbar: &[f64]) -> Vec<f64> {
        let d = self.dim();
        (0..d).map(|i| (0..d).map(|a| self.basis[(i, a)] * vbar[a]).sum()).collect()
    }

    /// Frame coordinates `u⁻¹ w` of a chart vector.
    pub fn solve(&self, w: &[f64]) -> Result<Vec<f64>> {
        let inv = self.basis.clone().try_inverse().ok_or(Error::DegenerateFrame { det: 0.0 })?;
        let d = self.dim();
        Ok((0..d).map(|a| (0..d).map(|i| inv[(a, i)] * w[i]).sum()).collect())
    }

    /// Row-major basis entries.
    pub fn basis_flat(&self) -> Vec<f64> {
        linalg::to_row_major(&self.basis)
    }

    /// Flat serialization `[chart, coords…, basis…]`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = vec![self.base.chart as f64];
        out.extend(&self.base.coords);
        out.extend(self.basis_flat());
        out
    }
}

/// Frame whose basis is orthonormal for the metric at its base point.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthonormalFrame(Frame);

impl Deref for OrthonormalFrame {
    type Target = Frame;
    fn deref(&self) -> &Frame {
        &self.0
    }
}

impl OrthonormalFrame {
    /// Checks `uᵀ g u = I` to [`ORTHONORMAL_TOL`].
    pub fn new(m: &dyn Manifold, base: Point, basis: DMatrix<f64>) -> Result<Self> {
        geometry::check_point(m, &base)?;
        let f = Frame::new(base, basis)?;
        let defect = orthonormality_defect(m, &f);
        if defect > ORTHONORMAL_TOL {
            return Err(Error::InvalidArgument(format!("basis is not orthonormal (defect {defect:e})")));
        }
        Ok(Self(f))
    }

    /// The orthonormal frame obtained by Gram–Schmidt on the chart basis.
    pub fn standard(m: &dyn Manifold, base: Point) -> Result<Self> {
        let d = base.dim();
        orthonormalize(m, &Frame::new(base, DMatrix::identity(d, d))?)
    }

    pub(crate) fn from_flat_unchecked(base: Point, basis: &[f64]) -> Self {
        let d = base.dim();
        Self(Frame { base, basis: DMatrix::from_row_slice(d, d, basis) })
    }

    pub fn frame(&self) -> &Frame {
        &self.0
    }

    pub fn into_frame(self) -> Frame {
        self.0
    }

    /// `u ∘ a` for orthogonal `a`.
    pub fn right_action(&self, a: &DMatrix<f64>) -> Result<Self> {
        let d = self.dim();
        if a.shape() != (d, d) || (a.transpose() * a - DMatrix::identity(d, d)).norm() > 1e-10 {
            return Err(Error::SingularAction);
        }
        Ok(Self(frame_right_action(&self.0, a)?))
    }
}

/// A tangent vector to the frame bundle at `at`.
#[derive(Debug, Clone, PartialEq)]
pub struct FMTangent {
    pub at: Frame,
    pub dx: Vec<f64>,
    pub du: DMatrix<f64>,
}

/// Frobenius norm of `uᵀ g u − I`.
pub fn orthonormality_defect(m: &dyn Manifold, f: &Frame) -> f64 {
    let d = f.dim();
    let g = linalg::to_dmatrix(&geometry::metric_flat(m, f.base.chart, &f.base.coords), d);
    (f.basis.transpose() * g * &f.basis - DMatrix::identity(d, d)).norm()
}

/// Metric Gram–Schmidt on the columns, in order.
pub fn orthonormalize(m: &dyn Manifold, f: &Frame) -> Result<OrthonormalFrame> {
    geometry::check_point(m, &f.base)?;
    let d = f.dim();
    let g = geometry::metric_flat(m, f.base.chart, &f.base.coords);
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(d);
    for a in 0..d {
        let mut c: Vec<f64> = f.basis.column(a).iter().copied().collect();
        // two passes keep the result orthogonal to round-off
        for _ in 0..2 {
            for prev in &cols {
                let p = linalg::quad_form(&g, prev, &c);
                c.iter_mut().zip(prev).for_each(|(x, y)| *x -= p * y);
            }
        }
        let n = linalg::quad_form(&g, &c, &c).sqrt();
        if !(n > 1e-12) {
            return Err(Error::DegenerateFrame { det: 0.0 });
        }
        c.iter_mut().for_each(|x| *x /= n);
        cols.push(c);
    }
    let basis = DMatrix::from_fn(d, d, |i, a| cols[a][i]);
    Ok(OrthonormalFrame(Frame { base: f.base.clone(), basis }))
}

/// Polar projection `u (uᵀ g u)^{-1/2}` onto the orthonormal frames; commutes
/// with the right `O(d)` action.
pub(crate) fn polar_orthonormalize(m: &dyn Manifold, chart: usize, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
    let d = x.len();
    let g = geometry::metric_flat(m, chart, x);
    let gu = linalg::matmul(&g, u, d);
    let mut ut = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            ut[i * d + j] = u[j * d + i];
        }
    }
    let gram = linalg::matmul(&ut, &gu, d);
    let root = linalg::spd_sqrt(&gram, d);
    let inv = linalg::invert(&root, d).ok_or(Error::DegenerateFrame { det: 0.0 })?;
    Ok(linalg::matmul(u, &inv, d))
}

/// `u ∘ a`: basis multiplied on the right by `a`.
pub fn frame_right_action(u: &Frame, a: &DMatrix<f64>) -> Result<Frame> {
    let d = u.dim();
    if a.shape() != (d, d) {
        return Err(Error::SingularAction);
    }
    let det = a.determinant();
    if !det.is_finite() || det.abs() < 1e-14 {
        return Err(Error::SingularAction);
    }
    Ok(Frame { base: u.base.clone(), basis: &u.basis * a })
}

/// Horizontal lift `h_u(w)`: `dx = w`, `dU^i_α = −Γ^i_{jk} w^j u^k_α`.
pub fn horizontal_lift(m: &dyn Manifold, u: &Frame, w: &Tangent) -> Result<FMTangent> {
    if w.base != u.base {
        return Err(Error::BaseMismatch);
    }
    let d = u.dim();
    let gamma = geometry::christoffel(m, &u.base)?;
    let conn = connection_matrix(&gamma, &w.components, d);
    let du = -(conn * &u.basis);
    Ok(FMTangent { at: u.clone(), dx: w.components.clone(), du })
}

/// `H_i(u) = h_u(u_i)`, zero-based `i`.
pub fn horizontal_field(m: &dyn Manifold, u: &Frame, i: usize) -> Result<FMTangent> {
    let d = u.dim();
    if i >= d {
        return Err(Error::IndexOutOfRange { index: i, dim: d });
    }
    let w = Tangent::new(u.base.clone(), u.basis.column(i).iter().copied().collect());
    horizontal_lift(m, u, &w)
}

/// `M^i_k = Γ^i_{jk} v^j`.
fn connection_matrix(gamma: &[f64], v: &[f64], d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(d, d, |i, k| (0..d).map(|j| gamma[(i * d + j) * d + k] * v[j]).sum())
}

/// Connection form: `dU + Γ(dx) U`, zero exactly on horizontal vectors.
pub fn vertical_projection(m: &dyn Manifold, t: &FMTangent) -> DMatrix<f64> {
    let d = t.at.dim();
    let mut gamma = vec![0.0; d * d * d];
    geometry::christoffel_into(m, t.at.base.chart, &t.at.base.coords, &mut gamma);
    &t.du + connection_matrix(&gamma, &t.dx, d) * &t.at.basis
}

/// Result of a frame transport with its orthonormality drift.
#[derive(Debug, Clone)]
pub struct Transported {
    pub frame: OrthonormalFrame,
    /// Defect before any re-projection.
    pub defect: f64,
    pub reprojected: bool,
}

/// Flow of the horizontal field `h_u(u v̄)` for time `t`: the base follows the
/// geodesic `γ(x, t·u v̄)` and every column is parallel transported along it.
pub fn transport_frame_geodesic(
    m: &dyn Manifold,
    u: &OrthonormalFrame,
    vbar: &[f64],
    t: f64,
    n_steps: usize,
) -> Result<OrthonormalFrame> {
    transport_frame_geodesic_report(m, u, vbar, t, n_steps).map(|r| r.frame)
}

/// [`transport_frame_geodesic`] that also reports the drift.
pub fn transport_frame_geodesic_report(
    m: &dyn Manifold,
    u: &OrthonormalFrame,
    vbar: &[f64],
    t: f64,
    n_steps: usize,
) -> Result<Transported> {
    let d = u.dim();
    if vbar.len() != d {
        return Err(Error::IndexOutOfRange { index: vbar.len(), dim: d });
    }
    if n_steps == 0 {
        return Err(Error::InvalidArgument("n_steps must be at least 1".into()));
    }
    if t == 0.0 || vbar.iter().all(|c| *c == 0.0) {
        return Ok(Transported { frame: u.clone(), defect: 0.0, reprojected: false });
    }
    let coeffs: Vec<f64> = vbar.iter().map(|c| c * t).collect();
    let (chart, x, cols) = flow_raw(m, u.base.chart, &u.base.coords, &u.basis_flat(), &coeffs, n_steps)?;
    finish_transport(m, chart, x, cols)
}

pub(crate) fn flow_raw(
    m: &dyn Manifold,
    chart: usize,
    x: &[f64],
    basis: &[f64],
    coeffs: &[f64],
    n_steps: usize,
) -> Result<(usize, Vec<f64>, Vec<f64>)> {
    let d = x.len();
    let mut st = FlowState { chart, x: x.to_vec(), cols: basis.to_vec(), ncols: d };
    geometry::horizontal_flow(m, &mut st, coeffs, n_steps)?;
    Ok((st.chart, st.x, st.cols))
}

pub(crate) fn finish_transport(m: &dyn Manifold, chart: usize, x: Vec<f64>, cols: Vec<f64>) -> Result<Transported> {
    let base = Point::new(chart, x);
    let mut frame = OrthonormalFrame::from_flat_unchecked(base, &cols);
    let defect = orthonormality_defect(m, &frame);
    let reprojected = defect > REORTHONORMALIZE_THRESHOLD;
    if reprojected {
        let fixed = polar_orthonormalize(m, chart, &frame.base.coords, &cols)?;
        frame = OrthonormalFrame::from_flat_unchecked(frame.base.clone(), &fixed);
    }
    Ok(Transported { frame, defect, reprojected })
}

/// Expresses a frame in another chart.
pub fn frame_to_chart(m: &dyn Manifold, u: &Frame, chart: usize) -> Result<Frame> {
    if u.base.chart == chart {
        return Ok(u.clone());
    }
    let d = u.dim();
    let base = geometry::to_chart(m, &u.base, chart)?;
    let jac = geometry::transition_jacobian(m, u.base.chart, chart, &u.base.coords)?;
    Ok(Frame { base, basis: linalg::to_dmatrix(&jac, d) * &u.basis })
}

/// Finite-difference Lie bracket `[h_u(u v̄), h_u(u w̄)]` of two horizontal
/// flows, from the composition difference `(Φ^w̄_h∘Φ^v̄_h − Φ^v̄_h∘Φ^w̄_h)(u)/h²`
/// Richardson-extrapolated between `h` and `h/2`.
pub fn horizontal_bracket(m: &dyn Manifold, u: &OrthonormalFrame, vbar: &[f64], wbar: &[f64], h: f64) -> Result<FMTangent> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument("bracket step must be positive".into()));
    }
    let (dx1, du1) = bracket_quotient(m, u, vbar, wbar, h)?;
    let (dx2, du2) = bracket_quotient(m, u, vbar, wbar, 0.5 * h)?;
    let dx = dx1.iter().zip(&dx2).map(|(a, b)| 2.0 * b - a).collect();
    let du = du2 * 2.0 - du1;
    Ok(FMTangent { at: u.frame().clone(), dx, du })
}

fn bracket_quotient(
    m: &dyn Manifold,
    u: &OrthonormalFrame,
    vbar: &[f64],
    wbar: &[f64],
    h: f64,
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let compose = |first: &[f64], second: &[f64]| -> Result<Frame> {
        let basis = u.basis_flat();
        let steps = |c: &[f64]| geometry::default_steps(h * linalg::norm(c)).max(4);
        let (c1, x1, u1) = flow_raw(m, u.base.chart, &u.base.coords, &basis, &scale(first, h), steps(first))?;
        let (c2, x2, u2) = flow_raw(m, c1, &x1, &u1, &scale(second, h), steps(second))?;
        let f = Frame { base: Point::new(c2, x2), basis: DMatrix::from_row_slice(u.dim(), u.dim(), &u2) };
        frame_to_chart(m, &f, u.base.chart)
    };
    let a = compose(vbar, wbar)?;
    let b = compose(wbar, vbar)?;
    let d = u.dim();
    let mut dx = vec![0.0; d];
    m.coord_difference(u.base.chart, &a.base.coords, &b.base.coords, &mut dx);
    let h2 = h * h;
    dx.iter_mut().for_each(|c| *c /= h2);
    Ok((dx, (a.basis - b.basis) / h2))
}

fn scale(v: &[f64], s: f64) -> Vec<f64> {
    v.iter().map(|c| c * s).collect()
}

/// `−R(u v̄, u w̄)` applied to each column of `u`.
pub fn curvature_endomorphism(m: &dyn Manifold, u: &Frame, vbar: &[f64], wbar: &[f64]) -> Result<DMatrix<f64>> {
    let r = geometry::curvature(m, &u.base)?;
    let (x, y) = (u.apply(vbar), u.apply(wbar));
    let d = u.dim();
    let cols: Vec<Vec<f64>> = (0..d)
        .map(|a| {
            let z: Vec<f64> = u.basis.column(a).iter().copied().collect();
            r.apply(&x, &y, &z)
        })
        .collect();
    Ok(DMatrix::from_fn(d, d, |i, a| -cols[a][i]))
}

/// Holonomy `a = u⁻¹ · (transported u)` of a closed loop starting at `u.base`.
pub fn holonomy(m: &dyn Manifold, u: &Frame, lp: &[Point]) -> Result<DMatrix<f64>> {
    let (first, last) = match (lp.first(), lp.last()) {
        (Some(f), Some(l)) if lp.len() >= 2 => (f, l),
        _ => return Err(Error::OpenLoop { gap: f64::INFINITY }),
    };
    let last_in_first = geometry::to_chart(m, last, first.chart).map_err(|_| Error::OpenLoop { gap: f64::INFINITY })?;
    let mut gap = vec![0.0; u.dim()];
    m.coord_difference(first.chart, &last_in_first.coords, &first.coords, &mut gap);
    let gap = linalg::norm(&gap);
    if gap > 1e-10 {
        return Err(Error::OpenLoop { gap });
    }
    if first.chart != u.base.chart || linalg::dist(&first.coords, &u.base.coords) > 1e-10 {
        return Err(Error::BaseMismatch);
    }
    let d = u.dim();
    let (end, cols) = geometry::transport_columns(m, lp, &u.basis_flat(), d)?;
    let transported = frame_to_chart(m, &Frame { base: end, basis: DMatrix::from_row_slice(d, d, &cols) }, u.base.chart)?;
    let inv = u.basis.clone().try_inverse().ok_or(Error::DegenerateFrame { det: 0.0 })?;
    Ok(inv * transported.basis)
}
