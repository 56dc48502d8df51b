use std::f64::consts::PI;

use horocell::frame::{orthonormality_defect, OrthonormalFrame};
use horocell::manifold::*;
use horocell::stochastics::*;
use horocell::{linalg, oracle, Manifold};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (m, xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0))
}

#[test]
fn wiener_moments_and_determinism() {
    let (d, t, n) = (2, 1.5, 100_000);
    let ends: Vec<Vec<f64>> = (0..n).map(|j| sample_wiener_stream(d, t, 4, 9, j).unwrap().endpoint()).collect();
    for i in 0..d {
        let comp: Vec<f64> = ends.iter().map(|w| w[i]).collect();
        let (m, v) = mean_var(&comp);
        assert!(m.abs() < 3.0 * (t * d as f64 / n as f64).sqrt());
        assert!((v / t - 1.0).abs() < 0.05);
    }
    assert_eq!(sample_wiener(3, 1.0, 50, 42).unwrap(), sample_wiener(3, 1.0, 50, 42).unwrap());
    assert_ne!(sample_wiener(3, 1.0, 50, 42).unwrap(), sample_wiener(3, 1.0, 50, 43).unwrap());
    assert!(sample_wiener(2, 0.0, 5, 1).is_err());
}

#[test]
fn euclidean_development_is_cumulative_sum() {
    let e = Euclidean::new(3);
    let u0 = OrthonormalFrame::standard(&e, Point::new(0, vec![1.0, -1.0, 0.5])).unwrap();
    let w = sample_wiener(3, 2.0, 300, 5).unwrap();
    let fp = develop(&e, &u0, &w).unwrap();
    for (k, f) in fp.frames.iter().enumerate() {
        let wk = w.value_at(k);
        let expect: Vec<f64> = u0.base.coords.iter().zip(&wk).map(|(a, b)| a + b).collect();
        assert!(linalg::dist(&f.base.coords, &expect) < 1e-12);
        assert_eq!(f.basis, u0.basis);
    }
    let back = antidevelop(&e, &fp).unwrap();
    for (a, b) in back.increments.iter().zip(&w.increments) {
        assert!(linalg::dist(a, b) < 1e-12);
    }
}

#[test]
fn zero_path_is_constant() {
    let u0 = OrthonormalFrame::standard(&Sphere2, Point::new(0, vec![0.2, 0.2])).unwrap();
    let w = DrivingPath::new(vec![0.0, 0.5, 1.0], vec![vec![0.0, 0.0], vec![0.0, 0.0]]).unwrap();
    let fp = develop(&Sphere2, &u0, &w).unwrap();
    assert!(fp.frames.iter().all(|f| *f == u0));
    let back = antidevelop(&Sphere2, &fp).unwrap();
    assert!(back.increments.iter().flatten().all(|c| *c == 0.0));
}

#[test]
fn sphere_development_stays_orthonormal_and_round_trips() {
    let s = Sphere2;
    let u0 = OrthonormalFrame::standard(&s, Sphere2::polar(1.0, 0.4)).unwrap();
    let fp = sample_brownian(&s, &u0, 1.0, 1000, 17).unwrap();
    assert!(fp.frames.iter().all(|f| orthonormality_defect(&s, f) < 1e-6));
    let w = antidevelop(&s, &fp).unwrap();
    let again = develop(&s, &u0, &w).unwrap();
    let worst = fp
        .frames
        .iter()
        .zip(&again.frames)
        .map(|(a, b)| oracle::great_circle(&s.embed(&a.base).unwrap(), &s.embed(&b.base).unwrap()))
        .fold(0.0, f64::max);
    assert!(worst <= 1e-3, "{worst}");
}

#[test]
fn heun_scheme_agrees_with_geodesic_steps() {
    let s = Sphere2;
    let u0 = OrthonormalFrame::standard(&s, Point::new(0, vec![0.3, -0.2])).unwrap();
    let w = sample_wiener(2, 0.5, 2000, 3).unwrap();
    let a = develop(&s, &u0, &w).unwrap();
    let b = develop_with(&s, &u0, &w, &DevelopOptions { scheme: Scheme::Heun, substeps: 1 }).unwrap();
    let (ea, eb) = (s.embed(&a.endpoint().base).unwrap(), s.embed(&b.endpoint().base).unwrap());
    assert!(oracle::great_circle(&ea, &eb) < 1e-2);
}

#[test]
fn euclidean_brownian_moments() {
    let e = Euclidean::new(2);
    let u0 = OrthonormalFrame::standard(&e, Point::new(0, vec![0.5, -0.5])).unwrap();
    let t = 0.8;
    let ends = sample_endpoints(&e, &u0, t, 8, 100_000, 21, &DevelopOptions::default()).unwrap();
    for i in 0..2 {
        let comp: Vec<f64> = ends.iter().map(|s| s.frame.base.coords[i]).collect();
        let (m, v) = mean_var(&comp);
        assert!((m - u0.base.coords[i]).abs() < 0.05 * t.sqrt());
        assert!((v / t - 1.0).abs() < 0.05);
    }
    let p1 = sample_brownian(&e, &u0, t, 10, 4).unwrap();
    assert_eq!(p1, sample_brownian(&e, &u0, t, 10, 4).unwrap());
}

#[test]
fn restarting_at_half_time_preserves_the_law() {
    let s = Sphere2;
    let u0 = OrthonormalFrame::standard(&s, Sphere2::polar(0.8, 0.0)).unwrap();
    let (t, n, steps) = (1.0, 600, 200);
    let opts = DevelopOptions::default();
    let single: Vec<Vec<f64>> = sample_endpoints(&s, &u0, t, steps, n, 100, &opts)
        .unwrap()
        .iter()
        .map(|e| s.embed(&e.frame.base).unwrap())
        .collect();
    let half = sample_endpoints(&s, &u0, t / 2.0, steps / 2, n, 200, &opts).unwrap();
    let restarted: Vec<Vec<f64>> = half
        .iter()
        .enumerate()
        .map(|(j, h)| {
            let w = sample_wiener_stream(2, t / 2.0, steps / 2, 300, j as u64).unwrap();
            let end = develop_endpoint(&s, &h.frame, &w.increments, &opts).unwrap();
            s.embed(&end.base).unwrap()
        })
        .collect();
    let p = oracle::energy_test_pvalue(&single, &restarted, 300, 7);
    assert!(p > 0.05, "p = {p}");
}

#[test]
fn csv_has_documented_columns() {
    let u0 = OrthonormalFrame::standard(&Sphere2, Point::new(0, vec![0.0, 0.0])).unwrap();
    let fp = sample_brownian(&Sphere2, &u0, 0.1, 5, 1).unwrap();
    let mut buf = Vec::new();
    write_csv(&[fp.clone(), fp], &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "path,step,t,chart_id,x0,x1,u00,u01,u10,u11,dW0,dW1");
    assert_eq!(text.lines().count(), 1 + 2 * 6);
    assert!(text.lines().nth(6).unwrap().ends_with(",,"));
}

fn orthogonal(angle: f64, flip: bool) -> DMatrix<f64> {
    let mut a = DMatrix::from_row_slice(2, 2, &[angle.cos(), -angle.sin(), angle.sin(), angle.cos()]);
    if flip {
        a.column_mut(1).neg_mut();
    }
    a
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    #[test]
    fn development_is_rotation_covariant(angle in 0.0..(2.0 * PI), flip in proptest::bool::ANY, seed in 0u64..1000) {
        let s = Sphere2;
        let u0 = OrthonormalFrame::standard(&s, Sphere2::polar(1.2, 2.0)).unwrap();
        let a = orthogonal(angle, flip);
        let w = sample_wiener(2, 1.0, 200, seed).unwrap();
        let lhs = develop(&s, &u0.right_action(&a).unwrap(), &w).unwrap();
        let rhs = develop(&s, &u0, &w.rotated(&linalg::to_row_major(&a))).unwrap();
        for (l, r) in lhs.frames.iter().zip(&rhs.frames) {
            let r = r.right_action(&a).unwrap();
            prop_assert_eq!(l.base.chart, r.base.chart);
            prop_assert!(linalg::dist(&l.base.coords, &r.base.coords) < 1e-10);
            prop_assert!((l.basis.clone() - r.basis.clone()).norm() < 1e-10);
        }
    }
}
