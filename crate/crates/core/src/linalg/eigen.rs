//! Symmetric eigendecomposition: Householder reduction to tridiagonal form
//! followed by the implicit QL iteration with Wilkinson-style shifts.

use super::matrix::Matrix;
use crate::error::{Error, Result};

/// Eigenpairs of a real symmetric matrix, eigenvalues in descending order.
#[derive(Clone, Debug)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    /// Column `i` is the unit eigenvector for `values[i]`.
    pub vectors: Matrix,
}

impl SymmetricEigen {
    pub fn vector(&self, i: usize) -> Vec<f64> {
        self.vectors.column(i)
    }

    /// `V diag(values) V^T`, restricted to the eigenpairs selected by `keep`.
    pub fn reconstruct(&self, keep: impl Fn(usize, f64) -> bool) -> Matrix {
        let n = self.vectors.rows();
        let mut out = Matrix::zeros(n, n);
        for (i, &lam) in self.values.iter().enumerate() {
            if keep(i, lam) {
                let v = self.vector(i);
                out.add_outer(lam, &v, &v);
            }
        }
        out
    }
}

const MAX_SWEEPS_PER_VALUE: usize = 60;

/// Eigendecomposition of the symmetric part of `a`.
///
/// Deflation happens when an off-diagonal entry falls below machine epsilon
/// relative to the running tridiagonal norm, which is well inside a
/// `1e-12 * ||a||_F` reconstruction tolerance.
pub fn symmetric_eigen(a: &Matrix) -> Result<SymmetricEigen> {
    assert!(a.is_square(), "eigendecomposition of a non-square matrix");
    let n = a.rows();
    if n == 0 {
        return Ok(SymmetricEigen { values: vec![], vectors: Matrix::zeros(0, 0) });
    }
    let mut v: Vec<Vec<f64>> =
        (0..n).map(|i| (0..n).map(|j| 0.5 * (a[(i, j)] + a[(j, i)])).collect()).collect();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(&mut v, &mut d, &mut e);
    tridiagonal_ql(&mut v, &mut d, &mut e)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[j].total_cmp(&d[i]));
    let values = order.iter().map(|&i| d[i]).collect();
    let vectors = Matrix::from_fn(n, n, |r, c| v[r][order[c]]);
    Ok(SymmetricEigen { values, vectors })
}

/// Operator (spectral) norm of a symmetric matrix.
pub fn symmetric_op_norm(a: &Matrix) -> Result<f64> {
    let eig = symmetric_eigen(a)?;
    Ok(eig.values.iter().fold(0.0f64, |m, x| m.max(x.abs())))
}

/// Operator norm of an arbitrary matrix, via the largest eigenvalue of `A^T A`.
pub fn op_norm(a: &Matrix) -> Result<f64> {
    let ata = a.transpose().matmul(a);
    let eig = symmetric_eigen(&ata)?;
    Ok(eig.values.first().copied().unwrap_or(0.0).max(0.0).sqrt())
}

fn tridiagonalize(v: &mut [Vec<f64>], d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    d.copy_from_slice(&v[n - 1]);

    for i in (1..n).rev() {
        let scale: f64 = d[..i].iter().map(|x| x.abs()).sum();
        let mut h = 0.0;
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[i - 1][j];
                v[i][j] = 0.0;
                v[j][i] = 0.0;
            }
        } else {
            for dk in d[..i].iter_mut() {
                *dk /= scale;
                h += *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            e[..i].iter_mut().for_each(|x| *x = 0.0);

            for j in 0..i {
                f = d[j];
                v[j][i] = f;
                g = e[j] + v[j][j] * f;
                for k in j + 1..i {
                    g += v[k][j] * d[k];
                    e[k] += v[k][j] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[k][j] -= f * e[k] + g * d[k];
                }
                d[j] = v[i - 1][j];
                v[i][j] = 0.0;
            }
        }
        d[i] = h;
    }

    for i in 0..n - 1 {
        v[n - 1][i] = v[i][i];
        v[i][i] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[k][i + 1] / h;
            }
            for j in 0..=i {
                let g: f64 = (0..=i).map(|k| v[k][i + 1] * v[k][j]).sum();
                for k in 0..=i {
                    v[k][j] -= g * d[k];
                }
            }
        }
        for row in v.iter_mut().take(i + 1) {
            row[i + 1] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[n - 1][j];
        v[n - 1][j] = 0.0;
    }
    v[n - 1][n - 1] = 1.0;
    e[0] = 0.0;
}

fn tridiagonal_ql(v: &mut [Vec<f64>], d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1 = 0.0f64;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > MAX_SWEEPS_PER_VALUE {
                    return Err(Error::NoConvergence {
                        iterations: iter,
                        detail: format!("tridiagonal QL stalled at index {l}"),
                    });
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for row in v.iter_mut() {
                        h = row[i + 1];
                        row[i + 1] = s * row[i] + c * h;
                        row[i] = c * row[i] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}
