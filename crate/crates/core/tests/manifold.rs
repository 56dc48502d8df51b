use std::f64::consts::PI;

use horocell::manifold::*;
use horocell::{linalg, Manifold};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn great_circle(m: &Sphere2, a: &Point, b: &Point) -> f64 {
    let (ea, eb) = (m.embed(a).unwrap(), m.embed(b).unwrap());
    let dot: f64 = ea.iter().zip(&eb).map(|(x, y)| x * y).sum();
    dot.clamp(-1.0, 1.0).acos()
}

/// Closed-form Christoffels of `λ(x)² δ` with `λ = 2/(1 + κ|x|²)`.
fn conformal_oracle(kappa: f64, x: &[f64]) -> Vec<f64> {
    let r2 = x[0] * x[0] + x[1] * x[1];
    let ds = [-2.0 * kappa * x[0] / (1.0 + kappa * r2), -2.0 * kappa * x[1] / (1.0 + kappa * r2)];
    let mut g = vec![0.0; 8];
    let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                g[(i * 2 + j) * 2 + k] = delta(i, j) * ds[k] + delta(i, k) * ds[j] - delta(j, k) * ds[i];
            }
        }
    }
    g
}

#[test]
fn metric_examples() {
    let e = Euclidean::new(2);
    let g = metric(&e, &Point::new(0, vec![0.7, -3.0])).unwrap();
    assert_eq!(g, nalgebra::DMatrix::identity(2, 2));
    for m in [&Sphere2 as &dyn Manifold, &PoincareDisk] {
        let g = metric(m, &Point::new(0, vec![0.0, 0.0])).unwrap();
        assert!((g - nalgebra::DMatrix::identity(2, 2) * 4.0).norm() < 1e-14);
    }
    assert!(matches!(
        metric(&PoincareDisk, &Point::new(0, vec![1.0, 0.5])),
        Err(horocell::Error::InvalidChartPoint { .. })
    ));
}

#[test]
fn christoffel_fd_matches_closed_form() {
    let x = [0.3, 0.1];
    let fd = christoffel_fd(&Sphere2, 0, &x);
    for (a, b) in fd.iter().zip(conformal_oracle(1.0, &x)) {
        assert!((a - b).abs() < 1e-6);
    }
    let origin = christoffel(&Sphere2, &Point::new(0, vec![0.0, 0.0])).unwrap();
    assert!(origin.iter().all(|c| c.abs() < 1e-15));
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (m, kappa) in [(&Sphere2 as &dyn Manifold, 1.0), (&PoincareDisk, -1.0)] {
        for _ in 0..50 {
            let p = m.random_point(&mut rng);
            let fd = christoffel_fd(m, p.chart, &p.coords);
            let an = christoffel(m, &p).unwrap();
            let oracle = conformal_oracle(kappa, &p.coords);
            for ((a, b), c) in fd.iter().zip(&an).zip(&oracle) {
                assert!((a - b).abs() < 1e-5, "{} at {:?}", m.id(), p);
                assert!((b - c).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn metric_positive_definite_everywhere() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let ms: Vec<Box<dyn Manifold>> =
        vec![Box::new(Euclidean::new(3)), Box::new(Sphere2), Box::new(PoincareDisk), Box::new(FlatTorus::new(2))];
    for m in &ms {
        for _ in 0..1000 {
            let p = m.random_point(&mut rng);
            let g = metric_flat(m.as_ref(), p.chart, &p.coords);
            assert!(linalg::min_eigenvalue(&g, m.dim()) > 0.0);
        }
    }
}

#[test]
fn constant_sectional_curvature() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cases: Vec<(Box<dyn Manifold>, f64)> =
        vec![(Box::new(Sphere2), 1.0), (Box::new(PoincareDisk), -1.0), (Box::new(Euclidean::new(2)), 0.0)];
    for (m, k) in &cases {
        for _ in 0..100 {
            let p = m.random_point(&mut rng);
            let r = curvature(m.as_ref(), &p).unwrap();
            assert!(r.antisymmetry_defect() < 1e-10);
            let s = sectional_curvature(m.as_ref(), &p, &[1.0, 0.2], &[-0.3, 0.8]).unwrap();
            assert!((s - k).abs() < 1e-4, "{}: {s}", m.id());
        }
    }
}

#[test]
fn sign_flip_breaks_curvature() {
    let m = ChristoffelSignFlip { inner: Sphere2 };
    let p = Point::new(0, vec![0.4, -0.2]);
    let s = sectional_curvature(&m, &p, &[1.0, 0.0], &[0.0, 1.0]).unwrap();
    assert!((s - 1.0).abs() > 0.1, "{s}");
}

#[test]
fn exp_examples() {
    let e = Euclidean::new(2);
    let p = geodesic_exp(&e, &Tangent::new(Point::new(0, vec![0.0, 0.0]), vec![1.0, 2.0]), 10).unwrap();
    assert!(linalg::dist(&p.coords, &[1.0, 2.0]) < 1e-14);
    let base = Point::new(0, vec![0.3, 0.1]);
    assert_eq!(geodesic_exp(&Sphere2, &Tangent::zero(base.clone()), 7).unwrap(), base);

    // |v| = π reaches the antipode
    let x = Sphere2.embed(&base).unwrap();
    let dir = [0.2, 1.0];
    let n = metric_norm(&Sphere2, &base, &dir);
    let v = Tangent::new(base.clone(), dir.iter().map(|c| c * PI / n).collect());
    let y = Sphere2.embed(&exp(&Sphere2, &v).unwrap()).unwrap();
    for (a, b) in x.iter().zip(&y) {
        assert!((a + b).abs() < 1e-4);
    }
}

#[test]
fn log_and_distance_examples() {
    let e = Euclidean::new(3);
    let (a, b) = (Point::new(0, vec![1.0, 2.0, 3.0]), Point::new(0, vec![-1.0, 0.5, 2.0]));
    let v = riemannian_log(&e, &a, &b, LOG_TOL).unwrap();
    assert!(linalg::dist(&v.components, &[-2.0, -1.5, -1.0]) < 1e-12);
    assert_eq!(distance(&e, &a, &a).unwrap(), 0.0);

    let s = Sphere2;
    let p = Sphere2::polar(0.7, 0.3);
    let q = Sphere2::polar(0.7 + PI / 3.0, 0.3);
    assert!((distance(&s, &p, &q).unwrap() - PI / 3.0).abs() < 1e-5);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..20 {
        let (a, b) = (s.random_point(&mut rng), s.random_point(&mut rng));
        let gc = great_circle(&s, &a, &b);
        if gc > 2.5 {
            continue;
        }
        let d1 = distance(&s, &a, &b).unwrap();
        let d2 = distance(&s, &b, &a).unwrap();
        assert!((d1 - gc).abs() < 1e-5, "{d1} vs {gc}");
        assert!((d1 - d2).abs() <= 1e-6 * d1.max(1e-12));
    }
    let (a, b) = (Point::new(0, vec![0.1, 0.2]), Point::new(0, vec![-0.5, 0.4]));
    let d = distance(&PoincareDisk, &a, &b).unwrap();
    assert!((d - PoincareDisk::closed_form_distance(&a.coords, &b.coords)).abs() < 1e-6);
}

#[test]
fn log_never_crosses_cut_locus() {
    let p = Sphere2::polar(0.5, 0.0);
    let antipode = Sphere2::polar(PI - 0.5, PI);
    if let Ok(v) = riemannian_log(&Sphere2, &p, &antipode, LOG_TOL) {
        let n = metric_norm(&Sphere2, &p, &v.components);
        assert!(n < PI && n > PI - 1e-3, "{n}");
    }
    let near = Sphere2::polar(PI - 0.6, PI);
    let v = riemannian_log(&Sphere2, &p, &near, LOG_TOL).unwrap();
    assert!((metric_norm(&Sphere2, &p, &v.components) - (PI - 0.1)).abs() < 1e-5);
}

fn octant_loop(steps: usize) -> Vec<Point> {
    let mut pts = Vec::new();
    let arc = |a: [f64; 3], b: [f64; 3], pts: &mut Vec<Point>| {
        for k in 0..steps {
            let t = k as f64 / steps as f64 * PI / 2.0;
            let p: Vec<f64> = (0..3).map(|i| a[i] * t.cos() + b[i] * t.sin()).collect();
            pts.push(Sphere2::from_embedded(&p));
        }
    };
    let (e1, e2, e3) = ([1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]);
    arc(e3, e1, &mut pts);
    arc(e1, e2, &mut pts);
    arc(e2, e3, &mut pts);
    pts.push(Sphere2::from_embedded(&e3));
    pts
}

#[test]
fn octant_transport_rotates_by_quarter_turn() {
    let path = octant_loop(1000);
    let v = Tangent::new(path[0].clone(), vec![1.0, 0.0]);
    let w = parallel_transport(&Sphere2, &path, &v).unwrap();
    assert_eq!(w.base.chart, path[0].chart);
    let g = metric_flat(&Sphere2, w.base.chart, &w.base.coords);
    let cos = linalg::quad_form(&g, &v.components, &w.components)
        / (linalg::quad_form(&g, &v.components, &v.components) * linalg::quad_form(&g, &w.components, &w.components)).sqrt();
    assert!((cos.acos() - PI / 2.0).abs() < 1e-2, "{}", cos.acos());
}

#[test]
fn euclidean_transport_is_identity() {
    let e = Euclidean::new(3);
    let path: Vec<Point> = (0..10).map(|k| Point::new(0, vec![k as f64, (k * k) as f64 * 0.1, -1.0])).collect();
    let v = Tangent::new(path[0].clone(), vec![1.0, -2.0, 0.5]);
    assert_eq!(parallel_transport(&e, &path, &v).unwrap().components, v.components);
}

#[test]
fn transport_rejects_disconnected_path() {
    let path = vec![Point::new(0, vec![0.0, 0.0]), Point::new(0, vec![0.9, 0.0]), Point::new(1, vec![0.0, 0.0])];
    let v = Tangent::new(path[0].clone(), vec![1.0, 0.0]);
    assert!(matches!(
        parallel_transport(&PoincareDisk, &path, &v),
        Err(horocell::Error::InvalidChartPoint { .. })
    ));
    let s_path = vec![Point::new(0, vec![0.0, 0.0]), Point::new(1, vec![0.0, 0.0])];
    let v = Tangent::new(s_path[0].clone(), vec![1.0, 0.0]);
    assert!(matches!(
        parallel_transport(&Sphere2, &s_path, &v),
        Err(horocell::Error::PathChartMismatch { index: 0, next: 1 })
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn exp_log_round_trip(seed in 0u64..10_000, a in 0.0..(2.0 * PI), len in 0.05f64..1.5) {
        let m = Sphere2;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = m.random_point(&mut rng);
        let g = metric_flat(&m, x.chart, &x.coords);
        let dir = [a.cos(), a.sin()];
        let n = linalg::quad_form(&g, &dir, &dir).sqrt();
        let v = Tangent::new(x.clone(), dir.iter().map(|c| c * len / n).collect());
        let y = exp(&m, &v).unwrap();
        let back = riemannian_log(&m, &x, &y, LOG_TOL).unwrap();
        let diff: Vec<f64> = back.components.iter().zip(&v.components).map(|(p, q)| p - q).collect();
        prop_assert!(linalg::quad_form(&g, &diff, &diff).sqrt() < 1e-4);
    }

    #[test]
    fn transport_preserves_inner_products(seed in 0u64..10_000) {
        let m = PoincareDisk;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut path = vec![Point::new(0, vec![0.0, 0.0])];
        let mut length = 0.0;
        use rand::Rng;
        for _ in 0..20 {
            let last = path.last().unwrap().coords.clone();
            let step = [rng.random_range(-0.05..0.05), rng.random_range(-0.05..0.05)];
            let next = vec![last[0] + step[0], last[1] + step[1]];
            length += metric_norm(&m, &path.last().unwrap().clone(), &step);
            path.push(Point::new(0, next));
        }
        let (a, b) = ([1.0, 0.3], [-0.2, 0.7]);
        let ta = parallel_transport(&m, &path, &Tangent::new(path[0].clone(), a.to_vec())).unwrap();
        let tb = parallel_transport(&m, &path, &Tangent::new(path[0].clone(), b.to_vec())).unwrap();
        let before = inner(&m, &path[0], &a, &b);
        let after = inner(&m, &ta.base, &ta.components, &tb.components);
        prop_assert!((before - after).abs() <= 1e-5 * length.max(1.0));
    }
}

/// `g^{kl} Γ^i_{kl}` at `p`, the first-order part of the Laplace–Beltrami operator.
fn contracted_christoffel(m: &dyn Manifold, p: &Point) -> Vec<f64> {
    let d = m.dim();
    let gamma = christoffel(m, p).unwrap();
    let ginv = metric(m, p).unwrap().try_inverse().unwrap();
    (0..d).map(|i| (0..d).flat_map(|k| (0..d).map(move |l| (k, l))).map(|(k, l)| ginv[(k, l)] * gamma[(i * d + k) * d + l]).sum()).collect()
}

fn assert_no_contracted_christoffel<M: Manifold + Clone + 'static>(m: M) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let flipped = ChristoffelSignFlip { inner: m.clone() };
    for _ in 0..20 {
        let p = m.random_point(&mut rng);
        for c in [contracted_christoffel(&m, &p), contracted_christoffel(&flipped, &p)] {
            assert!(linalg::norm(&c) < 1e-6, "{m:?} at {p:?}: {c:?}");
        }
    }
}

#[test]
fn conformal_charts_have_no_brownian_drift() {
    // In two-dimensional conformal charts the contraction vanishes, so the
    // Brownian generator does not see the sign of Γ.
    assert_no_contracted_christoffel(Sphere2);
    assert_no_contracted_christoffel(PoincareDisk);
}
