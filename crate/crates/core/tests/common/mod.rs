//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

/// Textbook restricted log-likelihood with `sigma^2` profiled out, from the dense
/// N x N marginal covariance `sigma^2 (I + Z Z')`, `Z = E diag(v)`.
pub fn dense_reml(x: &DMatrix<f64>, e: &DMatrix<f64>, v: &[f64], y: &[f64]) -> f64 {
    let n = x.nrows();
    let k = x.ncols();
    let z = e * DMatrix::from_diagonal(&DVector::from_column_slice(v));
    let h = DMatrix::identity(n, n) + &z * z.transpose();
    let h_inv = h.clone().try_inverse().expect("H invertible");
    let y = DVector::from_column_slice(y);
    let xthx = x.transpose() * &h_inv * x;
    let b = xthx.clone().try_inverse().expect("X'H^-1X invertible") * (x.transpose() * &h_inv * &y);
    let r = &y - x * b;
    let q = (r.transpose() * &h_inv * &r)[(0, 0)];
    let dof = (n - k) as f64;
    let s2 = q / dof;
    -0.5 * (h.determinant().ln()
        + xthx.determinant().ln()
        + dof * (1.0 + (2.0 * std::f64::consts::PI * s2).ln()))
}

/// Minimizer of `||y - Xb - Zu||^2 + ||u||^2` by ordinary least squares on the
/// augmented system `[X Z; 0 I] [b; u] = [y; 0]`, solved with an SVD.
pub fn augmented_blup(
    x: &DMatrix<f64>,
    e: &DMatrix<f64>,
    v: &[f64],
    y: &[f64],
) -> (DVector<f64>, DVector<f64>) {
    let (n, k) = x.shape();
    let p = e.ncols();
    let mut a = DMatrix::zeros(n + p, k + p);
    a.view_mut((0, 0), (n, k)).copy_from(x);
    for j in 0..p {
        for i in 0..n {
            a[(i, k + j)] = e[(i, j)] * v[j];
        }
        a[(n + j, k + j)] = 1.0;
    }
    let mut rhs = DVector::zeros(n + p);
    rhs.rows_mut(0, n).copy_from(&DVector::from_column_slice(y));
    let sol = a.svd(true, true).solve(&rhs, 1e-14).expect("svd solve");
    (sol.rows(0, k).into_owned(), sol.rows(k, p).into_owned())
}

/// Cyclic Jacobi eigenvalues of a symmetric matrix, sorted descending.
pub fn jacobi_eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    let n = a.nrows();
    let mut m = a.clone();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)].powi(2))
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if m[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * m[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for r in 0..n {
                    let (mrp, mrq) = (m[(r, p)], m[(r, q)]);
                    m[(r, p)] = c * mrp - s * mrq;
                    m[(r, q)] = s * mrp + c * mrq;
                }
                for r in 0..n {
                    let (mpr, mqr) = (m[(p, r)], m[(q, r)]);
                    m[(p, r)] = c * mpr - s * mqr;
                    m[(q, r)] = s * mpr + c * mqr;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

/// Brute-force Euclidean distance.
pub fn brute_distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    (dx * dx + dy * dy).sqrt()
}

/// Deterministic pseudo-random values in (-1, 1) from a linear congruential sequence.
pub fn lcg_values(seed: u64, n: usize) -> Vec<f64> {
    let mut s = seed
        .wrapping_mul(6364136223846793005)
        .wrapping_add(1442695040888963407);
    (0..n)
        .map(|_| {
            s = s
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        })
        .collect()
}

/// Per-site weighted normal equations solved by explicit inverse.
pub fn wls_at(x: &DMatrix<f64>, y: &[f64], w: &[f64]) -> DVector<f64> {
    let wm = DMatrix::from_diagonal(&DVector::from_column_slice(w));
    let xtw = x.transpose() * wm;
    (&xtw * x).try_inverse().expect("invertible") * (xtw * DVector::from_column_slice(y))
}
