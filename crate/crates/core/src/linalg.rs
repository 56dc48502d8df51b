//! Small dense helpers on row-major `d×d` slices.
//!
//! Hot integration loops work on flat buffers; public types use nalgebra.

use nalgebra::{DMatrix, DVector};

pub fn to_dmatrix(m: &[f64], d: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(d, d, m)
}

pub fn to_row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let (r, c) = m.shape();
    let mut out = Vec::with_capacity(r * c);
    for i in 0..r {
        for j in 0..c {
            out.push(m[(i, j)]);
        }
    }
    out
}

pub fn invert(m: &[f64], d: usize) -> Option<Vec<f64>> {
    match d {
        1 => (m[0] != 0.0).then(|| vec![1.0 / m[0]]),
        2 => {
            let det = m[0] * m[3] - m[1] * m[2];
            if det == 0.0 || !det.is_finite() {
                return None;
            }
            Some(vec![m[3] / det, -m[1] / det, -m[2] / det, m[0] / det])
        }
        _ => to_dmatrix(m, d).try_inverse().map(|inv| to_row_major(&inv)),
    }
}

pub fn det(m: &[f64], d: usize) -> f64 {
    match d {
        1 => m[0],
        2 => m[0] * m[3] - m[1] * m[2],
        _ => to_dmatrix(m, d).determinant(),
    }
}

pub fn min_eigenvalue(m: &[f64], d: usize) -> f64 {
    if d == 1 {
        return m[0];
    }
    let sym = to_dmatrix(m, d);
    sym.symmetric_eigenvalues().min()
}

/// Principal square root of a symmetric positive-definite matrix.
pub fn spd_sqrt(m: &[f64], d: usize) -> Vec<f64> {
    match d {
        1 => vec![m[0].sqrt()],
        2 => {
            let s = (m[0] * m[3] - m[1] * m[2]).max(0.0).sqrt();
            let t = (m[0] + m[3] + 2.0 * s).sqrt();
            vec![(m[0] + s) / t, m[1] / t, m[2] / t, (m[3] + s) / t]
        }
        _ => {
            let eig = to_dmatrix(m, d).symmetric_eigen();
            let root = DVector::from_iterator(d, eig.eigenvalues.iter().map(|l| l.max(0.0).sqrt()));
            let q = &eig.eigenvectors;
            to_row_major(&(q * DMatrix::from_diagonal(&root) * q.transpose()))
        }
    }
}

/// `out = a · b` for row-major `n×n` matrices.
pub fn matmul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..n {
                out[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    out
}

pub fn matvec(a: &[f64], x: &[f64], n: usize) -> Vec<f64> {
    (0..n).map(|i| (0..n).map(|j| a[i * n + j] * x[j]).sum()).collect()
}

pub fn quad_form(g: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let d = a.len();
    let mut s = 0.0;
    for i in 0..d {
        for j in 0..d {
            s += a[i] * g[i * d + j] * b[j];
        }
    }
    s
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spd_sqrt_squares_back() {
        for d in 1..=4 {
            let mut a = vec![0.0; d * d];
            for i in 0..d {
                for j in 0..d {
                    a[i * d + j] = ((i * 7 + j * 3) % 5) as f64 * 0.1;
                }
            }
            // a aᵀ + I is SPD
            let mut m = vec![0.0; d * d];
            for i in 0..d {
                for j in 0..d {
                    m[i * d + j] = (0..d).map(|k| a[i * d + k] * a[j * d + k]).sum::<f64>()
                        + if i == j { 1.0 } else { 0.0 };
                }
            }
            let r = spd_sqrt(&m, d);
            let back = matmul(&r, &r, d);
            for (x, y) in back.iter().zip(&m) {
                assert!((x - y).abs() < 1e-12, "d={d}");
            }
        }
    }

    #[test]
    fn invert_matches_identity() {
        let m = vec![2.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 1.5];
        let inv = invert(&m, 3).unwrap();
        let id = matmul(&m, &inv, 3);
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((id[i * 3 + j] - e).abs() < 1e-12);
            }
        }
        assert!(invert(&[1.0, 2.0, 2.0, 4.0], 2).is_none());
    }
}
