use std::f64::consts::PI;
use std::sync::Arc;

use horocell::convolution::*;
use horocell::frame::{transport_frame_geodesic, OrthonormalFrame};
use horocell::manifold::*;
use horocell::stochastics::{develop_stream, DevelopOptions};
use horocell::{oracle, Manifold};

fn base_gaussian(m: Arc<dyn Manifold>, center: Vec<f64>, sigma: f64) -> DirectionalFunction {
    DirectionalFunction::from_spec(m, &FunctionSpec::BaseGaussian { center, sigma }).unwrap()
}

fn gauss(d: usize, sigma: f64) -> Kernel {
    Kernel::gaussian(d, sigma).unwrap()
}

fn truncated(d: usize, sigma: f64, cut: f64) -> Kernel {
    Kernel::new(d, KernelSpec::Gaussian { sigma, center: None, truncate: Some(cut), scale: None }).unwrap()
}

fn boxed(d: usize, radius: f64, center: Vec<f64>) -> Kernel {
    Kernel::new(d, KernelSpec::Box { radius, center: Some(center), scale: None }).unwrap()
}

fn within(est: &McEstimate, truth: f64, n_sigma: f64) -> bool {
    (est.value[0] - truth).abs() <= n_sigma * est.stderr[0]
}

fn sphere_frame() -> OrthonormalFrame {
    OrthonormalFrame::standard(&Sphere2, Sphere2::polar(0.7, 0.3)).unwrap()
}

/// Composite Simpson rule over a cube in `R^2`.
fn simpson2(f: impl Fn(f64, f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
    let h = (hi - lo) / n as f64;
    let w = |i: usize| if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
    let mut s = 0.0;
    for i in 0..=n {
        for j in 0..=n {
            s += w(i) * w(j) * f(lo + i as f64 * h, lo + j as f64 * h);
        }
    }
    s * h * h / 9.0
}

#[test]
fn euclidean_directional_is_classical_convolution() {
    let e: Arc<dyn Manifold> = Arc::new(Euclidean::new(2));
    let c = vec![0.4, -0.1];
    let f = base_gaussian(e.clone(), c.clone(), 0.5);
    let u = OrthonormalFrame::standard(e.as_ref(), Point::new(0, vec![0.1, 0.2])).unwrap();
    let k = boxed(2, 0.3, vec![0.0, 0.0]);
    let got = conv_directional(e.as_ref(), &k, &f, &u, Quadrature::default()).unwrap()[0];
    let direct = simpson2(
        |a, b| (-((0.1 + a - c[0]).powi(2) + (0.2 + b - c[1]).powi(2)) / 0.5).exp() / 0.36,
        -0.3,
        0.3,
        400,
    );
    assert!((got - direct).abs() < 1e-10, "{got} vs {direct}");

    let kt = truncated(2, 0.2, 3.0);
    let got = conv_directional(e.as_ref(), &kt, &f, &u, Quadrature { nodes: 40 }).unwrap()[0];
    let direct = simpson2(
        |a, b| {
            let kv = (-(a * a + b * b) / 0.08).exp() / (2.0 * PI * 0.04);
            kv * (-((0.1 + a - c[0]).powi(2) + (0.2 + b - c[1]).powi(2)) / 0.5).exp()
        },
        -0.6,
        0.6,
        600,
    );
    assert!((got - direct).abs() < 1e-10, "{got} vs {direct}");
}

#[test]
fn dirac_grid_kernel_is_identity() {
    let m: Arc<dyn Manifold> = Arc::new(Sphere2);
    let f = DirectionalFunction::from_spec(m.clone(), &FunctionSpec::FrameAngle).unwrap();
    let u = sphere_frame();
    let k = Kernel::new(2, KernelSpec::Grid { spacing: 0.1, shape: vec![1, 1], weights: vec![1.0] }).unwrap();
    let got = conv_directional(m.as_ref(), &k, &f, &u, Quadrature::default()).unwrap();
    assert_eq!(got, f.eval(&u));
}

#[test]
fn unbounded_kernels_are_rejected() {
    let m = Sphere2;
    let f = DirectionalFunction::new(1, |_| vec![1.0]);
    let u = sphere_frame();
    for k in [gauss(2, 0.2), Kernel::identity(2)] {
        assert_eq!(conv_directional(&m, &k, &f, &u, Quadrature::default()).unwrap_err(), horocell::Error::UnboundedKernel);
    }
}

#[test]
fn sphere_directional_matches_refined_lattice() {
    let m: Arc<dyn Manifold> = Arc::new(Sphere2);
    let f = DirectionalFunction::from_spec(m.clone(), &FunctionSpec::FrameAngle).unwrap();
    let u = sphere_frame();
    let (sigma, cut) = (0.2, 3.0);
    let got = conv_directional(m.as_ref(), &truncated(2, sigma, cut), &f, &u, Quadrature::default()).unwrap()[0];
    assert!(got.is_finite());

    // midpoint lattice over the support, transported with the public geodesic transport
    let half = cut * sigma;
    let lattice = |n: usize| {
        let h = 2.0 * half / n as f64;
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                let v = [-half + (i as f64 + 0.5) * h, -half + (j as f64 + 0.5) * h];
                let kv = (-(v[0] * v[0] + v[1] * v[1]) / (2.0 * sigma * sigma)).exp() / (2.0 * PI * sigma * sigma);
                let moved = transport_frame_geodesic(m.as_ref(), &u, &v, 1.0, 64).unwrap().into_frame();
                s += kv * f.eval(&moved)[0] * h * h;
            }
        }
        s
    };
    let (coarse, fine) = (lattice(60), lattice(120));
    let extrapolated = (4.0 * fine - coarse) / 3.0;
    assert!((fine - extrapolated).abs() < 1e-3);
    assert!((got - extrapolated).abs() < 1e-4, "{got} vs {extrapolated}");
}

#[test]
fn euclidean_horizontal_matches_gaussian_closed_form() {
    for d in [2, 3] {
        let e: Arc<dyn Manifold> = Arc::new(Euclidean::new(d));
        let x = vec![0.1; d];
        let c = vec![0.3; d];
        let f = base_gaussian(e.clone(), c.clone(), 0.6);
        let u = OrthonormalFrame::standard(e.as_ref(), Point::new(0, x.clone())).unwrap();
        let p = McParams::new(0.5, 20_000, 4, 11);
        let est = conv_horizontal_mc(e.as_ref(), &gauss(d, 0.4), &f, &u, &p).unwrap();
        assert!(within(&est, oracle::gaussian_stack_conv(&x, &c, 0.6, &[0.4], 0.5), 3.0), "{est:?}");

        // reweighting recovers the Lebesgue convolution
        let est = conv_horizontal_mc(e.as_ref(), &gauss(d, 0.4).reweight(0.5).unwrap(), &f, &u, &p).unwrap();
        assert!(within(&est, oracle::gaussian_lebesgue_conv(&x, &c, 0.6, 0.4), 3.0), "{est:?}");

        // f ≡ 1: E[k(−W_T)] = N(0; 0, σ² + T)
        let one = DirectionalFunction::new(1, |_| vec![1.0]);
        let est = conv_horizontal_mc(e.as_ref(), &gauss(d, 0.4), &one, &u, &p).unwrap();
        assert!(within(&est, (2.0 * PI * (0.16 + 0.5)).powf(-(d as f64) / 2.0), 3.0));
    }
}

#[test]
fn horizontal_is_deterministic_and_stderr_scales() {
    let e: Arc<dyn Manifold> = Arc::new(Euclidean::new(2));
    let f = base_gaussian(e.clone(), vec![0.2, 0.0], 0.5);
    let u = OrthonormalFrame::standard(e.as_ref(), Point::new(0, vec![0.0, 0.0])).unwrap();
    let k = gauss(2, 0.3);
    let a = conv_horizontal_mc(e.as_ref(), &k, &f, &u, &McParams::new(0.4, 2_000, 2, 3)).unwrap();
    let b = conv_horizontal_mc(e.as_ref(), &k, &f, &u, &McParams::new(0.4, 2_000, 2, 3)).unwrap();
    assert_eq!(a, b);
    let big = conv_horizontal_mc(e.as_ref(), &k, &f, &u, &McParams::new(0.4, 20_000, 2, 3)).unwrap();
    let ratio = a.stderr[0] / big.stderr[0] / 10f64.sqrt();
    assert!((ratio - 1.0).abs() < 0.2, "{ratio}");
}

#[test]
fn log_form_coincides_on_flat_space() {
    let e: Arc<dyn Manifold> = Arc::new(Euclidean::new(2));
    let f = base_gaussian(e.clone(), vec![0.2, 0.0], 0.5);
    let u = OrthonormalFrame::standard(e.as_ref(), Point::new(0, vec![0.0, 0.3])).unwrap();
    let p = McParams::new(0.5, 2_000, 5, 8);
    let a = conv_horizontal_mc(e.as_ref(), &gauss(2, 0.3), &f, &u, &p).unwrap();
    let b = conv_log_form(e.as_ref(), &gauss(2, 0.3), &f, &u, &p).unwrap();
    assert!((a.value[0] - b.value[0]).abs() < 1e-12);
    assert_eq!(b.diagnostics["rejection_fraction"], 0.0);

    let one = DirectionalFunction::new(1, |_| vec![1.0]);
    let s = conv_log_form(&Sphere2, &Kernel::identity(2), &one, &sphere_frame(), &McParams::new(0.5, 500, 20, 1)).unwrap();
    assert_eq!(s.value[0], 1.0);
}

#[test]
fn log_form_agrees_with_horizontal_on_sphere() {
    let m: Arc<dyn Manifold> = Arc::new(Sphere2);
    let f = DirectionalFunction::from_spec(m.clone(), &FunctionSpec::FrameComponent { axis: 0, column: 0 }).unwrap();
    let u = sphere_frame();
    let p = McParams::new(0.05, 10_000, 10, 21);
    let k = gauss(2, 0.2);
    let a = conv_horizontal_mc(m.as_ref(), &k, &f, &u, &p).unwrap();
    let b = conv_log_form(m.as_ref(), &k, &f, &u, &p).unwrap();
    let tol = 3.0 * (a.stderr[0].powi(2) + b.stderr[0].powi(2)).sqrt();
    assert!((a.value[0] - b.value[0]).abs() <= tol, "{a:?} {b:?}");
    assert_eq!(b.diagnostics["warning"], 0.0);
}

#[test]
fn tensor_conv_is_linear_and_decouples() {
    let m: Arc<dyn Manifold> = Arc::new(Sphere2);
    let u = sphere_frame();
    let p = McParams::new(0.3, 500, 10, 5);
    let f = base_gaussian(m.clone(), vec![0.0, 0.0, -1.0], 0.5);
    let g = DirectionalFunction::from_spec(m.clone(), &FunctionSpec::FrameAngle).unwrap();
    let k = gauss(2, 0.3);

    let single = conv_horizontal_mc(m.as_ref(), &k, &f, &u, &p).unwrap();
    assert_eq!(tensor_conv(m.as_ref(), &k, &f, &u, &p).unwrap(), single);

    let (alpha, beta) = (0.7, -1.3);
    let combo = DirectionalFunction::combine(alpha, &f, beta, &g).unwrap();
    let lhs = tensor_conv(m.as_ref(), &k, &combo, &u, &p).unwrap().value[0];
    let rhs = alpha * single.value[0] + beta * tensor_conv(m.as_ref(), &k, &g, &u, &p).unwrap().value[0];
    assert!((lhs - rhs).abs() < 1e-12);

    let k2 = gauss(2, 0.5);
    let block = Kernel::new(
        2,
        KernelSpec::Tensor {
            channels_out: 2,
            channels_in: 2,
            entries: vec![k.spec.clone(), KernelSpec::Gaussian { sigma: 0.3, center: None, truncate: None, scale: Some(0.0) }, KernelSpec::Gaussian { sigma: 0.3, center: None, truncate: None, scale: Some(0.0) }, k2.spec.clone()],
        },
    )
    .unwrap();
    let both = tensor_conv(m.as_ref(), &block, &DirectionalFunction::stack(&[f.clone(), g.clone()]), &u, &p).unwrap();
    assert!((both.value[0] - single.value[0]).abs() < 1e-12);
    assert!((both.value[1] - conv_horizontal_mc(m.as_ref(), &k2, &g, &u, &p).unwrap().value[0]).abs() < 1e-12);

    assert!(matches!(tensor_conv(m.as_ref(), &block, &f, &u, &p), Err(horocell::Error::ChannelMismatch { .. })));
}

#[test]
fn commutator_defects_vanish_on_flat_spaces() {
    let k1 = boxed(2, 0.01, vec![0.06, 0.0]);
    let k2 = boxed(2, 0.01, vec![0.0, 0.06]);
    let flat: [Arc<dyn Manifold>; 2] = [Arc::new(Euclidean::new(2)), Arc::new(FlatTorus::new(2))];
    for m in flat {
        let f = DirectionalFunction::new(1, |u| vec![(-(u.base.coords[0] - 0.3).powi(2) - 2.0 * (u.base.coords[1] - 0.1).powi(2)).exp()]);
        let u = OrthonormalFrame::standard(m.as_ref(), Point::new(0, vec![0.2, 0.2])).unwrap();
        let d = commutator_defect(m.as_ref(), &k1, &k2, &f, &u, Quadrature { nodes: 8 }).unwrap();
        assert!(d.assoc[0].abs() <= 1e-8 && d.comm[0].abs() <= 1e-8, "{d:?}");
    }
}

#[test]
fn equal_kernels_commute() {
    let m: Arc<dyn Manifold> = Arc::new(Sphere2);
    let f = DirectionalFunction::from_spec(m.clone(), &FunctionSpec::FrameAngle).unwrap();
    let k = boxed(2, 0.02, vec![0.05, 0.03]);
    let d = commutator_defect(m.as_ref(), &k, &k, &f, &sphere_frame(), Quadrature { nodes: 8 }).unwrap();
    assert!(d.comm[0].abs() <= 1e-12);
}

#[test]
fn sphere_commutator_defect_matches_bracket_term() {
    let m: Arc<dyn Manifold> = Arc::new(Sphere2);
    let f = DirectionalFunction::from_spec(m.clone(), &FunctionSpec::FrameAngle).unwrap();
    let u = OrthonormalFrame::standard(m.as_ref(), Point::new(0, vec![0.0, 0.0])).unwrap();
    let mut ratios = Vec::new();
    for r in [0.2, 0.1, 0.05] {
        let k1 = boxed(2, 0.1 * r, vec![0.6 * r, 0.0]);
        let k2 = boxed(2, 0.1 * r, vec![0.0, 0.6 * r]);
        let q = Quadrature { nodes: 8 };
        let d = commutator_defect(m.as_ref(), &k1, &k2, &f, &u, q).unwrap();
        let b = bracket_term(m.as_ref(), &k1, &k2, &f, &u, q, 1e-3).unwrap();
        ratios.push((r, d.comm[0] / b[0]));
    }
    let at = |r: f64| ratios.iter().find(|x| x.0 == r).unwrap().1;
    assert!((0.8..=1.2).contains(&at(0.1)), "{ratios:?}");
    assert!((at(0.05) - 1.0).abs() <= (at(0.2) - 1.0).abs(), "{ratios:?}");
}

#[test]
fn collapsed_two_layers_match_nested_composition() {
    let m: Arc<dyn Manifold> = Arc::new(Sphere2);
    let f = base_gaussian(m.clone(), vec![0.3, 0.0, -0.9], 0.6);
    let u = sphere_frame();
    let layer = |s: f64| Layer { kernel: gauss(2, s), nonlinearity: Nonlinearity::Identity };
    let stack = LayerStack::new(vec![layer(0.4), layer(0.5)], 0.4).unwrap();
    let opts = DevelopOptions::default();
    let a = conv_multilayer(m.as_ref(), &stack, &f, &u, 10_000, 20, 4, Mode::Collapsed, &opts).unwrap();
    let b = conv_multilayer(m.as_ref(), &stack, &f, &u, 10_000, 20, 4, Mode::Nested, &opts).unwrap();
    let tol = 3.0 * (a.stderr[0].powi(2) + b.stderr[0].powi(2)).sqrt();
    assert!((a.value[0] - b.value[0]).abs() <= tol, "{a:?} {b:?}");
}

#[test]
fn gaussian_stride_rearranges_exactly() {
    let m: Arc<dyn Manifold> = Arc::new(Sphere2);
    let f = base_gaussian(m.clone(), vec![0.3, 0.0, -0.9], 0.6);
    let u = sphere_frame();
    let k1 = gauss(2, 0.4);
    let stack = LayerStack::new(
        vec![Layer { kernel: k1.clone(), nonlinearity: Nonlinearity::Identity }, Layer { kernel: Kernel::identity(2), nonlinearity: Nonlinearity::Identity }],
        0.6,
    )
    .unwrap();
    let opts = DevelopOptions::default();
    let (n, steps, seed) = (400, 20, 17);
    let est = conv_multilayer(m.as_ref(), &stack, &f, &u, n, steps, seed, Mode::Collapsed, &opts).unwrap();
    let direct: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let s = develop_stream(m.as_ref(), &u, 0.6, steps, seed, j as u64, &[steps / 2, steps], &opts).unwrap();
            let inc: Vec<f64> = s.w[1].iter().zip(&s.w[0]).map(|(a, b)| -(a - b)).collect();
            vec![k1.eval_scalar(&inc) * f.eval(&s.frame)[0]]
        })
        .collect();
    let direct = McEstimate::from_samples(&direct, 1, seed);
    assert!((est.value[0] - direct.value[0]).abs() <= 1e-12);
}

#[test]
fn euclidean_linear_stack_matches_gaussian_calculus() {
    let e: Arc<dyn Manifold> = Arc::new(Euclidean::new(2));
    let (x, c) = (vec![0.0, 0.1], vec![0.3, -0.2]);
    let f = base_gaussian(e.clone(), c.clone(), 0.5);
    let u = OrthonormalFrame::standard(e.as_ref(), Point::new(0, x.clone())).unwrap();
    let sig = [0.3, 0.4, 0.5];
    let layers = sig.iter().map(|s| Layer { kernel: gauss(2, *s), nonlinearity: Nonlinearity::Identity }).collect();
    let stack = LayerStack::new(layers, 0.9).unwrap();
    let est = conv_multilayer(e.as_ref(), &stack, &f, &u, 40_000, 3, 2, Mode::Collapsed, &DevelopOptions::default()).unwrap();
    assert!(within(&est, oracle::gaussian_stack_conv(&x, &c, 0.5, &sig, 0.9), 3.0), "{est:?}");
}

#[test]
fn nonlinear_stacks_need_nested_mode() {
    let m: Arc<dyn Manifold> = Arc::new(Sphere2);
    let f = base_gaussian(m.clone(), vec![0.0, 0.0, -1.0], 0.6);
    let layers = vec![
        Layer { kernel: gauss(2, 0.4), nonlinearity: Nonlinearity::Tanh },
        Layer { kernel: gauss(2, 0.4), nonlinearity: Nonlinearity::Relu },
    ];
    let stack = LayerStack::new(layers, 0.4).unwrap();
    let opts = DevelopOptions::default();
    let err = conv_multilayer(m.as_ref(), &stack, &f, &sphere_frame(), 100, 10, 1, Mode::Collapsed, &opts).unwrap_err();
    assert_eq!(err, horocell::Error::ModeMismatch);
    let a = conv_multilayer(m.as_ref(), &stack, &f, &sphere_frame(), 400, 10, 1, Mode::Nested, &opts).unwrap();
    let b = conv_multilayer(m.as_ref(), &stack, &f, &sphere_frame(), 400, 10, 1, Mode::Nested, &opts).unwrap();
    assert_eq!(a, b);
    assert!(a.value[0] >= 0.0 && a.stderr[0] >= 0.0);
}

#[test]
fn fiber_density_concentrates_without_holonomy() {
    let m = FlatTorus::new(2);
    let u = OrthonormalFrame::standard(&m, Point::new(0, vec![1.0, 2.0])).unwrap();
    let dens = FiberDensity::estimate(&m, &u, &McParams::new(1.0, 5_000, 20, 3), FiberGrid::default()).unwrap();
    let marginal = dens.fiber_marginal();
    assert!(marginal.iter().cloned().fold(0.0, f64::max) >= 0.99);
}

#[test]
fn fiber_density_matches_horizontal_estimate() {
    let m: Arc<dyn Manifold> = Arc::new(Sphere2);
    let u = sphere_frame();
    let p = McParams::new(0.3, 20_000, 15, 9);
    let f = DirectionalFunction::from_spec(m.clone(), &FunctionSpec::FrameComponent { axis: 0, column: 0 }).unwrap();
    let dens = FiberDensity::estimate(m.as_ref(), &u, &p, FiberGrid::default()).unwrap();
    for k in [gauss(2, 0.4), gauss(2, 0.8)] {
        let a = dens.integrate(m.as_ref(), &k, &f).unwrap();
        let b = conv_horizontal_mc(m.as_ref(), &k, &f, &u, &p).unwrap();
        let tol = 3.0 * (a.stderr[0].powi(2) + b.stderr[0].powi(2)).sqrt() + a.diagnostics["binning_bias"];
        assert!((a.value[0] - b.value[0]).abs() <= tol, "{a:?} {b:?}");
    }
    assert!(matches!(
        FiberDensity::estimate(&Euclidean::new(3), &OrthonormalFrame::standard(&Euclidean::new(3), Point::new(0, vec![0.0; 3])).unwrap(), &p, FiberGrid::default()),
        Err(horocell::Error::DimensionUnsupported { .. })
    ));
}

#[test]
fn fiber_marginal_spreads_on_sphere() {
    let u = sphere_frame();
    let opts = DevelopOptions { substeps: 1, ..Default::default() };
    let mut ratios = Vec::new();
    for t in [1.0, 2.0, 4.0] {
        let p = McParams { develop: opts, ..McParams::new(t, 200_000, 50, 5) };
        let marginal = FiberDensity::estimate(&Sphere2, &u, &p, FiberGrid::default()).unwrap().fiber_marginal();
        assert!(marginal.iter().all(|x| *x > 0.0));
        let (lo, hi) = marginal.iter().fold((f64::INFINITY, 0.0f64), |(a, b), x| (a.min(*x), b.max(*x)));
        ratios.push(lo / hi);
    }
    assert!(ratios.windows(2).all(|w| w[1] > w[0]), "{ratios:?}");
    assert!(ratios[1] >= 0.1, "{ratios:?}");
}

#[test]
fn small_time_gap_decreases() {
    let m: Arc<dyn Manifold> = Arc::new(Sphere2);
    let f = DirectionalFunction::from_spec(m.clone(), &FunctionSpec::BaseCoordinate { axis: 0 }).unwrap();
    let u = sphere_frame();
    // an off-center kernel keeps the leading term of the gap from cancelling
    let k = Kernel::new(2, KernelSpec::Gaussian { sigma: 0.05, center: Some(vec![0.1, 0.0]), truncate: Some(6.0), scale: None }).unwrap();
    let mut gaps = Vec::new();
    for t in [0.1, 0.03, 0.01, 0.003] {
        let g = small_time_gap(m.as_ref(), &k, &f, &u, &McParams::new(t, 20_000, 20, 12)).unwrap();
        gaps.push((t, g.value[0], g.stderr[0]));
    }
    for w in gaps.windows(2) {
        assert!(w[1].1.abs() + 2.0 * w[1].2 < w[0].1.abs() - 2.0 * w[0].2, "{gaps:?}");
    }
}

#[test]
fn reweighted_horizontal_approaches_directional() {
    let m: Arc<dyn Manifold> = Arc::new(Sphere2);
    let f = base_gaussian(m.clone(), vec![0.3, 0.0, -0.9], 0.3);
    let u = sphere_frame();
    let (t, k) = (1e-3, truncated(2, 0.03, 6.0));
    let direct = conv_directional(m.as_ref(), &k, &f, &u, Quadrature::default()).unwrap()[0];
    let est = conv_horizontal_mc(m.as_ref(), &k.reweight(t).unwrap(), &f, &u, &McParams::new(t, 100_000, 10, 4)).unwrap();
    assert!((est.value[0] - direct).abs() <= 5e-2, "{est:?} vs {direct}");
}
