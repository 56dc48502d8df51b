//! Differential geometry written once against the [`Manifold`] trait.

use nalgebra::DMatrix;

use super::{CurvatureTensor, Manifold, Point, Tangent};
use crate::error::{Error, Result};
use crate::linalg;

/// Central-difference step for metric derivatives.
pub const H_CHRISTOFFEL: f64 = 1e-4;
/// Central-difference step for Christoffel derivatives.
pub const H_CURVATURE: f64 = 1e-3;
/// Central-difference step for chart-transition Jacobians.
pub const H_JACOBIAN: f64 = 1e-6;
/// Default RK4 resolution of geodesics, in steps per unit metric length.
pub const GEODESIC_STEPS_PER_UNIT: f64 = 100.0;
pub const LOG_MAX_ITER: usize = 100;
pub const LOG_TOL: f64 = 1e-8;

/// Default RK4 step count for a geodesic of metric length `len`.
pub fn default_steps(len: f64) -> usize {
    ((len * GEODESIC_STEPS_PER_UNIT).ceil() as usize).max(1)
}

pub fn check_point(m: &dyn Manifold, p: &Point) -> Result<()> {
    if p.coords.len() != m.dim() || !m.in_domain(p.chart, &p.coords) {
        return Err(Error::InvalidChartPoint { chart: p.chart, coords: p.coords.clone() });
    }
    Ok(())
}

pub fn metric_flat(m: &dyn Manifold, chart: usize, x: &[f64]) -> Vec<f64> {
    let d = m.dim();
    let mut g = vec![0.0; d * d];
    m.metric_into(chart, x, &mut g);
    g
}

pub fn metric(m: &dyn Manifold, p: &Point) -> Result<DMatrix<f64>> {
    check_point(m, p)?;
    Ok(linalg::to_dmatrix(&metric_flat(m, p.chart, &p.coords), m.dim()))
}

pub fn inner(m: &dyn Manifold, p: &Point, a: &[f64], b: &[f64]) -> f64 {
    linalg::quad_form(&metric_flat(m, p.chart, &p.coords), a, b)
}

pub fn metric_norm(m: &dyn Manifold, p: &Point, a: &[f64]) -> f64 {
    inner(m, p, a, a).max(0.0).sqrt()
}

/// `Γ^i_{jk}` by central differences of the metric with step [`H_CHRISTOFFEL`].
pub fn christoffel_fd(m: &dyn Manifold, chart: usize, x: &[f64]) -> Vec<f64> {
    let d = m.dim();
    let g = metric_flat(m, chart, x);
    let ginv = linalg::invert(&g, d).unwrap_or_else(|| vec![f64::NAN; d * d]);
    // dg[l][i*d+j] = ∂_l g_ij
    let mut dg = vec![vec![0.0; d * d]; d];
    let mut xp = x.to_vec();
    let mut gp = vec![0.0; d * d];
    let mut gm = vec![0.0; d * d];
    for l in 0..d {
        xp[l] = x[l] + H_CHRISTOFFEL;
        m.metric_into(chart, &xp, &mut gp);
        xp[l] = x[l] - H_CHRISTOFFEL;
        m.metric_into(chart, &xp, &mut gm);
        xp[l] = x[l];
        for (o, (a, b)) in dg[l].iter_mut().zip(gp.iter().zip(&gm)) {
            *o = (a - b) / (2.0 * H_CHRISTOFFEL);
        }
    }
    let mut out = vec![0.0; d * d * d];
    for i in 0..d {
        for j in 0..d {
            for k in j..d {
                let mut s = 0.0;
                for l in 0..d {
                    s += ginv[i * d + l] * (dg[j][l * d + k] + dg[k][l * d + j] - dg[l][j * d + k]);
                }
                out[(i * d + j) * d + k] = 0.5 * s;
                out[(i * d + k) * d + j] = 0.5 * s;
            }
        }
    }
    out
}

/// Writes `Γ(x)` into `out`, preferring the manifold's closed form.
pub fn christoffel_into(m: &dyn Manifold, chart: usize, x: &[f64], out: &mut [f64]) {
    if !m.christoffel_analytic(chart, x, out) {
        out.copy_from_slice(&christoffel_fd(m, chart, x));
    }
}

/// Christoffel symbols at `p`, flat layout `(i*d + j)*d + k`.
pub fn christoffel(m: &dyn Manifold, p: &Point) -> Result<Vec<f64>> {
    check_point(m, p)?;
    let d = m.dim();
    let mut out = vec![0.0; d * d * d];
    christoffel_into(m, p.chart, &p.coords, &mut out);
    Ok(out)
}

/// `R^i_{jkl} = ∂_k Γ^i_{lj} − ∂_l Γ^i_{kj} + Γ^i_{km}Γ^m_{lj} − Γ^i_{lm}Γ^m_{kj}`,
/// derivatives by central differences with step [`H_CURVATURE`].
pub fn curvature_fd(m: &dyn Manifold, chart: usize, x: &[f64]) -> Vec<f64> {
    let d = m.dim();
    let d3 = d * d * d;
    let idx = |i: usize, j: usize, k: usize| (i * d + j) * d + k;
    let mut gamma = vec![0.0; d3];
    christoffel_into(m, chart, x, &mut gamma);
    let mut dgamma = vec![vec![0.0; d3]; d];
    let mut xp = x.to_vec();
    let mut gp = vec![0.0; d3];
    let mut gm = vec![0.0; d3];
    for k in 0..d {
        xp[k] = x[k] + H_CURVATURE;
        christoffel_into(m, chart, &xp, &mut gp);
        xp[k] = x[k] - H_CURVATURE;
        christoffel_into(m, chart, &xp, &mut gm);
        xp[k] = x[k];
        for (o, (a, b)) in dgamma[k].iter_mut().zip(gp.iter().zip(&gm)) {
            *o = (a - b) / (2.0 * H_CURVATURE);
        }
    }
    let mut r = vec![0.0; d3 * d];
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                for l in 0..d {
                    let mut v = dgamma[k][idx(i, l, j)] - dgamma[l][idx(i, k, j)];
                    for mm in 0..d {
                        v += gamma[idx(i, k, mm)] * gamma[idx(mm, l, j)]
                            - gamma[idx(i, l, mm)] * gamma[idx(mm, k, j)];
                    }
                    r[((i * d + j) * d + k) * d + l] = v;
                }
            }
        }
    }
    r
}

pub fn curvature(m: &dyn Manifold, p: &Point) -> Result<CurvatureTensor> {
    check_point(m, p)?;
    let d = m.dim();
    let mut components = vec![0.0; d * d * d * d];
    if !m.curvature_analytic(p.chart, &p.coords, &mut components) {
        components = curvature_fd(m, p.chart, &p.coords);
    }
    Ok(CurvatureTensor { base: p.clone(), dim: d, components })
}

/// Sectional curvature of the plane spanned by `a`, `b` at `p`.
pub fn sectional_curvature(m: &dyn Manifold, p: &Point, a: &[f64], b: &[f64]) -> Result<f64> {
    let r = curvature(m, p)?;
    let g = metric_flat(m, p.chart, &p.coords);
    let rabb = r.apply(a, b, b);
    let num = linalg::quad_form(&g, &rabb, a);
    let den = linalg::quad_form(&g, a, a) * linalg::quad_form(&g, b, b) - linalg::quad_form(&g, a, b).powi(2);
    if den.abs() < 1e-300 {
        return Err(Error::InvalidArgument("sectional curvature of a degenerate plane".into()));
    }
    Ok(num / den)
}

/// Jacobian of the transition `from → to` at `x`, row-major.
pub fn transition_jacobian(m: &dyn Manifold, from: usize, to: usize, x: &[f64]) -> Result<Vec<f64>> {
    let d = m.dim();
    let mut jac = vec![0.0; d * d];
    if m.transition_jacobian(from, to, x, &mut jac) {
        return Ok(jac);
    }
    if from == to {
        for i in 0..d {
            jac[i * d + i] = 1.0;
        }
        return Ok(jac);
    }
    let mut xp = x.to_vec();
    let missing = || Error::ChartEscape { chart: to, coords: x.to_vec() };
    for j in 0..d {
        xp[j] = x[j] + H_JACOBIAN;
        let fp = m.transition(from, to, &xp).ok_or_else(missing)?;
        xp[j] = x[j] - H_JACOBIAN;
        let fm = m.transition(from, to, &xp).ok_or_else(missing)?;
        xp[j] = x[j];
        for i in 0..d {
            jac[i * d + j] = (fp[i] - fm[i]) / (2.0 * H_JACOBIAN);
        }
    }
    Ok(jac)
}

/// Expresses `p` in chart `chart`.
pub fn to_chart(m: &dyn Manifold, p: &Point, chart: usize) -> Result<Point> {
    if p.chart == chart {
        return Ok(p.clone());
    }
    let escape = || Error::ChartEscape { chart, coords: p.coords.clone() };
    let coords = m.transition(p.chart, chart, &p.coords).ok_or_else(escape)?;
    if !m.in_domain(chart, &coords) {
        return Err(escape());
    }
    Ok(Point::new(chart, coords))
}

/// Expresses a tangent vector in chart `chart`.
pub fn tangent_to_chart(m: &dyn Manifold, v: &Tangent, chart: usize) -> Result<Tangent> {
    if v.base.chart == chart {
        return Ok(v.clone());
    }
    let base = to_chart(m, &v.base, chart)?;
    let jac = transition_jacobian(m, v.base.chart, chart, &v.base.coords)?;
    Ok(Tangent::new(base, linalg::matvec(&jac, &v.components, m.dim())))
}

/// Maps the columns of a row-major `d×ncols` block through a chart transition.
pub(crate) fn columns_to_chart(
    m: &dyn Manifold,
    from: usize,
    to: usize,
    x: &[f64],
    cols: &[f64],
    ncols: usize,
) -> Result<Vec<f64>> {
    let d = m.dim();
    let jac = transition_jacobian(m, from, to, x)?;
    let mut out = vec![0.0; d * ncols];
    for i in 0..d {
        for a in 0..ncols {
            out[i * ncols + a] = (0..d).map(|k| jac[i * d + k] * cols[k * ncols + a]).sum();
        }
    }
    Ok(out)
}

/// Chart in which both points are valid, preferring `a`'s chart.
pub fn common_chart(m: &dyn Manifold, a: &Point, b: &Point) -> Option<(Point, Point)> {
    let mut charts = vec![a.chart, b.chart];
    charts.extend((0..m.chart_count()).filter(|c| *c != a.chart && *c != b.chart));
    charts
        .into_iter()
        .find_map(|c| Some((to_chart(m, a, c).ok()?, to_chart(m, b, c).ok()?)))
}

/// Point, transported column block and chart: the state of a horizontal flow.
#[derive(Debug, Clone)]
pub(crate) struct FlowState {
    pub chart: usize,
    pub x: Vec<f64>,
    /// Row-major `d × ncols`.
    pub cols: Vec<f64>,
    pub ncols: usize,
}

/// Integrates over unit time, with fixed-step RK4, the flow
/// `ẋ = U c`, `U̇^i_a = −Γ^i_{jk} ẋ^j U^k_a`.
///
/// With `U` a frame this is the horizontal flow generated by `h_u(u c)`;
/// with a single column and `c = [1]` it is the geodesic equation.
/// Charts are switched between steps when the manifold asks for it.
pub(crate) fn horizontal_flow(m: &dyn Manifold, state: &mut FlowState, coeffs: &[f64], n_steps: usize) -> Result<()> {
    let d = m.dim();
    let nc = state.ncols;
    let n = d + d * nc;
    let h = 1.0 / n_steps as f64;
    let mut gamma = vec![0.0; d * d * d];
    let mut conn = vec![0.0; d * d];
    let mut vel = vec![0.0; d];
    let mut ks = vec![vec![0.0; n]; 4];
    let mut tmp = vec![0.0; n];
    let mut s = vec![0.0; n];

    let deriv = |st: &[f64], out: &mut [f64], gamma: &mut [f64], conn: &mut [f64], vel: &mut [f64], chart: usize| {
        let (x, u) = st.split_at(d);
        for i in 0..d {
            vel[i] = (0..nc).map(|a| u[i * nc + a] * coeffs[a]).sum();
        }
        christoffel_into(m, chart, x, gamma);
        for i in 0..d {
            for k in 0..d {
                conn[i * d + k] = (0..d).map(|j| gamma[(i * d + j) * d + k] * vel[j]).sum();
            }
        }
        out[..d].copy_from_slice(vel);
        for i in 0..d {
            for a in 0..nc {
                out[d + i * nc + a] = -(0..d).map(|k| conn[i * d + k] * u[k * nc + a]).sum::<f64>();
            }
        }
    };

    for _ in 0..n_steps {
        s[..d].copy_from_slice(&state.x);
        s[d..].copy_from_slice(&state.cols);
        let chart = state.chart;
        deriv(&s, &mut ks[0], &mut gamma, &mut conn, &mut vel, chart);
        for stage in 1..4 {
            let f = if stage == 3 { h } else { 0.5 * h };
            for q in 0..n {
                tmp[q] = s[q] + f * ks[stage - 1][q];
            }
            let (done, rest) = ks.split_at_mut(stage);
            let _ = done;
            deriv(&tmp, &mut rest[0], &mut gamma, &mut conn, &mut vel, chart);
        }
        for q in 0..n {
            s[q] += h / 6.0 * (ks[0][q] + 2.0 * ks[1][q] + 2.0 * ks[2][q] + ks[3][q]);
        }
        if s.iter().any(|v| !v.is_finite()) {
            return Err(Error::IntegrationDiverged);
        }
        state.x.copy_from_slice(&s[..d]);
        state.cols.copy_from_slice(&s[d..]);
        settle_chart(m, state)?;
    }
    Ok(())
}

/// Moves a flow state into a safe chart, or fails if it left the atlas.
pub(crate) fn settle_chart(m: &dyn Manifold, state: &mut FlowState) -> Result<()> {
    if let Some((to, y)) = m.rechart(state.chart, &state.x) {
        state.cols = columns_to_chart(m, state.chart, to, &state.x, &state.cols, state.ncols)?;
        state.chart = to;
        state.x = y;
    }
    if !m.in_domain(state.chart, &state.x) {
        return Err(Error::ChartEscape { chart: state.chart, coords: state.x.clone() });
    }
    Ok(())
}

/// `Exp(v)` by integrating `ẍ^i = −Γ^i_{jk} ẋ^j ẋ^k` over unit time with `n_steps` RK4 steps.
pub fn geodesic_exp(m: &dyn Manifold, v: &Tangent, n_steps: usize) -> Result<Point> {
    geodesic_exp_velocity(m, v, n_steps).map(|t| t.base)
}

/// Like [`geodesic_exp`] but also returns the final velocity.
pub fn geodesic_exp_velocity(m: &dyn Manifold, v: &Tangent, n_steps: usize) -> Result<Tangent> {
    check_point(m, &v.base)?;
    if n_steps == 0 {
        return Err(Error::InvalidArgument("n_steps must be at least 1".into()));
    }
    if v.components.iter().all(|c| *c == 0.0) {
        return Ok(v.clone());
    }
    let mut st = FlowState { chart: v.base.chart, x: v.base.coords.clone(), cols: v.components.clone(), ncols: 1 };
    horizontal_flow(m, &mut st, &[1.0], n_steps)?;
    Ok(Tangent::new(Point::new(st.chart, st.x), st.cols))
}

/// `Exp(v)` at the default resolution.
pub fn exp(m: &dyn Manifold, v: &Tangent) -> Result<Point> {
    let len = metric_norm(m, &v.base, &v.components);
    geodesic_exp(m, v, default_steps(len))
}

/// `Log_x(y)` by shooting: Newton on the initial velocity with a
/// finite-difference Jacobian, halving the update when the residual grows.
///
/// Never searches past the cut locus: iterates are kept inside the
/// injectivity-radius hint and a target beyond it surfaces as
/// [`Error::NoConvergence`].
pub fn riemannian_log(m: &dyn Manifold, x: &Point, y: &Point, tol: f64) -> Result<Tangent> {
    check_point(m, x)?;
    check_point(m, y)?;
    let d = m.dim();
    let fail = |iterations, residual| Error::NoConvergence { iterations, residual };
    let radius = m.injectivity_radius().unwrap_or(f64::INFINITY);

    // Start from the common chart whose coordinate-difference guess lands closest.
    let mut best: Option<(f64, Point, Point, Vec<f64>, usize)> = None;
    for c in 0..m.chart_count() {
        let (Ok(xc), Ok(yc)) = (to_chart(m, x, c), to_chart(m, y, c)) else { continue };
        let mut v = vec![0.0; d];
        m.coord_difference(c, &yc.coords, &xc.coords, &mut v);
        if v.iter().all(|c| *c == 0.0) {
            return Ok(Tangent::zero(x.clone()));
        }
        let g = metric_flat(m, c, &xc.coords);
        let len = linalg::quad_form(&g, &v, &v).sqrt();
        if len >= radius {
            let s = 0.9 * radius / len;
            v.iter_mut().for_each(|c| *c *= s);
        }
        let n_steps = default_steps(1.5 * len.min(radius).max(1.0));
        let Some(r) = shoot_residual(m, &xc, &yc, &v, n_steps) else { continue };
        let rn = linalg::norm(&r);
        if best.as_ref().is_none_or(|b| rn < b.0) {
            best = Some((rn, xc, yc, v, n_steps));
        }
    }
    let (mut rn, xc, yc, mut v, n_steps) = best.ok_or(fail(0, f64::INFINITY))?;
    let g0 = metric_flat(m, xc.chart, &xc.coords);
    let mut r = shoot_residual(m, &xc, &yc, &v, n_steps).ok_or(fail(0, f64::INFINITY))?;

    let mut iterations = 0;
    while rn > tol {
        if iterations >= LOG_MAX_ITER {
            return Err(fail(iterations, rn));
        }
        iterations += 1;
        let h = H_JACOBIAN * linalg::norm(&v).max(1.0);
        let mut jac = vec![0.0; d * d];
        let mut vp = v.clone();
        for j in 0..d {
            vp[j] = v[j] + h;
            let rp = shoot_residual(m, &xc, &yc, &vp, n_steps);
            vp[j] = v[j] - h;
            let rm = shoot_residual(m, &xc, &yc, &vp, n_steps);
            vp[j] = v[j];
            let (Some(rp), Some(rm)) = (rp, rm) else { return Err(fail(iterations, rn)) };
            for i in 0..d {
                jac[i * d + j] = (rp[i] - rm[i]) / (2.0 * h);
            }
        }
        let jinv = linalg::invert(&jac, d).ok_or(fail(iterations, rn))?;
        let step: Vec<f64> = linalg::matvec(&jinv, &r, d).into_iter().map(|s| -s).collect();
        let mut scale = 1.0;
        loop {
            let cand: Vec<f64> = v.iter().zip(&step).map(|(a, s)| a + scale * s).collect();
            let inside = linalg::quad_form(&g0, &cand, &cand).sqrt() < radius;
            if let Some(rc) = inside.then(|| shoot_residual(m, &xc, &yc, &cand, n_steps)).flatten() {
                let rcn = linalg::norm(&rc);
                if rcn < rn {
                    v = cand;
                    r = rc;
                    rn = rcn;
                    break;
                }
            }
            scale *= 0.5;
            if scale < 1e-6 {
                return Err(fail(iterations, rn));
            }
        }
    }
    let sol = Tangent::new(xc, v);
    tangent_to_chart(m, &sol, x.chart).map(|t| Tangent::new(x.clone(), t.components))
}

fn shoot_residual(m: &dyn Manifold, x: &Point, y: &Point, v: &[f64], n_steps: usize) -> Option<Vec<f64>> {
    let end = geodesic_exp(m, &Tangent::new(x.clone(), v.to_vec()), n_steps).ok()?;
    let end = to_chart(m, &end, y.chart).ok()?;
    let mut r = vec![0.0; m.dim()];
    m.coord_difference(y.chart, &end.coords, &y.coords, &mut r);
    Some(r)
}

/// Geodesic distance as the metric norm of the logarithm.
pub fn distance(m: &dyn Manifold, x: &Point, y: &Point) -> Result<f64> {
    let v = riemannian_log(m, x, y, LOG_TOL)?;
    Ok(metric_norm(m, x, &v.components))
}

/// Parallel transport of `v` along the piecewise-linear chart interpolation of `path`.
pub fn parallel_transport(m: &dyn Manifold, path: &[Point], v: &Tangent) -> Result<Tangent> {
    let first = path.first().ok_or_else(|| Error::InvalidArgument("empty path".into()))?;
    if first.chart != v.base.chart || linalg::dist(&first.coords, &v.base.coords) > 1e-10 {
        return Err(Error::BaseMismatch);
    }
    let (end, cols) = transport_columns(m, path, &v.components, 1)?;
    Ok(Tangent::new(end, cols))
}

/// Transports the columns of a row-major `d×ncols` block along `path`.
pub(crate) fn transport_columns(m: &dyn Manifold, path: &[Point], cols: &[f64], ncols: usize) -> Result<(Point, Vec<f64>)> {
    let d = m.dim();
    for p in path {
        check_point(m, p)?;
    }
    let mut chart = path[0].chart;
    let mut x = path[0].coords.clone();
    let mut u = cols.to_vec();
    let mut gamma = vec![0.0; d * d * d];
    let mut delta = vec![0.0; d];
    for k in 0..path.len() - 1 {
        let next = to_chart(m, &path[k + 1], chart).map_err(|_| Error::PathChartMismatch { index: k, next: k + 1 })?;
        m.coord_difference(chart, &next.coords, &x, &mut delta);
        let len = linalg::norm(&delta);
        let n_sub = ((len * 50.0).ceil() as usize).max(1);
        let h = 1.0 / n_sub as f64;
        let step = |xs: &[f64], uu: &[f64], out: &mut [f64], gamma: &mut [f64]| {
            christoffel_into(m, chart, xs, gamma);
            for i in 0..d {
                for a in 0..ncols {
                    let mut s = 0.0;
                    for j in 0..d {
                        for kk in 0..d {
                            s += gamma[(i * d + j) * d + kk] * delta[j] * uu[kk * ncols + a];
                        }
                    }
                    out[i * ncols + a] = -s;
                }
            }
        };
        let nu = d * ncols;
        let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; nu], vec![0.0; nu], vec![0.0; nu], vec![0.0; nu]);
        let mut tmp = vec![0.0; nu];
        let mut xs = vec![0.0; d];
        for sidx in 0..n_sub {
            let s0 = sidx as f64 * h;
            let at = |s: f64, xs: &mut [f64]| {
                for i in 0..d {
                    xs[i] = x[i] + s * delta[i];
                }
            };
            at(s0, &mut xs);
            step(&xs, &u, &mut k1, &mut gamma);
            at(s0 + 0.5 * h, &mut xs);
            for q in 0..nu {
                tmp[q] = u[q] + 0.5 * h * k1[q];
            }
            step(&xs, &tmp, &mut k2, &mut gamma);
            for q in 0..nu {
                tmp[q] = u[q] + 0.5 * h * k2[q];
            }
            step(&xs, &tmp, &mut k3, &mut gamma);
            at(s0 + h, &mut xs);
            for q in 0..nu {
                tmp[q] = u[q] + h * k3[q];
            }
            step(&xs, &tmp, &mut k4, &mut gamma);
            for q in 0..nu {
                u[q] += h / 6.0 * (k1[q] + 2.0 * k2[q] + 2.0 * k3[q] + k4[q]);
            }
        }
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::IntegrationDiverged);
        }
        x = next.coords;
        let target = path[k + 1].chart;
        if target != chart {
            u = columns_to_chart(m, chart, target, &x, &u, ncols)?;
            x = path[k + 1].coords.clone();
            chart = target;
        }
    }
    Ok((Point::new(chart, x), u))
}
