//! Second-moment statistics from 2-snapshots and the thresholded estimate of
//! the constituent covariance `A`.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{dot, gram_schmidt, symmetric_eigen, symmetric_op_norm, Matrix};
use crate::sampling::{RngStream, SnapshotBatch};

/// Symmetrized empirical distribution of 2-snapshots:
/// `M_ii = freq(i, i)`, `M_ij = (freq(i, j) + freq(j, i)) / 2`.
pub fn empirical_m(batch: &SnapshotBatch, n: usize) -> Result<Matrix> {
    if batch.aperture() != 2 {
        return Err(invalid(format!("2-snapshots required, got aperture {}", batch.aperture())));
    }
    if batch.is_empty() {
        return Err(Error::Empty("2-snapshot batch"));
    }
    batch.check_domain(n)?;
    let counts = (0..batch.len())
        .into_par_iter()
        .fold(
            || vec![0u64; n * n],
            |mut c, r| {
                let row = batch.row(r);
                c[row[0] * n + row[1]] += 1;
                c
            },
        )
        .reduce(|| vec![0u64; n * n], |mut a, b| {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
            a
        });
    let total = batch.len() as f64;
    Ok(Matrix::from_fn(n, n, |i, j| (counts[i * n + j] + counts[j * n + i]) as f64 / (2.0 * total)))
}

/// Eigenstructure of `M - r r^T` and the retained subspace.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectralSubspace {
    pub rtilde: Vec<f64>,
    /// All eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    /// Eigenvectors as columns, in eigenvalue order.
    pub eigenvectors: Matrix,
    pub threshold: f64,
    pub kprime: usize,
    /// Orthonormal basis of the retained eigenspace (initially the
    /// eigenvectors themselves).
    pub basis: Vec<Vec<f64>>,
}

impl SpectralSubspace {
    pub fn n(&self) -> usize {
        self.rtilde.len()
    }

    /// `A_tilde = sum over retained pairs of lambda v v^T`.
    pub fn a_tilde(&self) -> Matrix {
        let n = self.n();
        let mut a = Matrix::zeros(n, n);
        for i in 0..self.kprime {
            let v = self.eigenvectors.column(i);
            a.add_outer(self.eigenvalues[i], &v, &v);
        }
        a
    }

    pub fn retained_vectors(&self) -> Vec<Vec<f64>> {
        (0..self.kprime).map(|i| self.eigenvectors.column(i)).collect()
    }
}

/// The threshold `zeta^2 / 2n` used to decide the rank.
pub fn rank_threshold(zeta: f64, n: usize) -> f64 {
    zeta * zeta / (2.0 * n as f64)
}

/// Eigendecomposes `M - r r^T` and keeps the eigenpairs with eigenvalue at
/// least `threshold`.
pub fn estimate_a_with_threshold(m: &Matrix, rtilde: &[f64], threshold: f64) -> Result<SpectralSubspace> {
    let n = rtilde.len();
    if m.rows() != n || m.cols() != n {
        return Err(invalid(format!("matrix is {}x{}, mean has length {n}", m.rows(), m.cols())));
    }
    if !m.is_symmetric(1e-12 * m.max_abs().max(1.0)) {
        return Err(invalid("second-moment matrix must be symmetric"));
    }
    if !(threshold > 0.0) {
        return Err(invalid("rank threshold must be positive"));
    }
    let mut b = m.clone();
    b.add_outer(-1.0, rtilde, rtilde);
    let eig = symmetric_eigen(&b)?;
    let kprime = eig.values.iter().take_while(|&&l| l >= threshold).count();
    let basis = (0..kprime).map(|i| eig.vector(i)).collect();
    Ok(SpectralSubspace {
        rtilde: rtilde.to_vec(),
        eigenvalues: eig.values,
        eigenvectors: eig.vectors,
        threshold,
        kprime,
        basis,
    })
}

pub fn estimate_a(m: &Matrix, rtilde: &[f64], zeta: f64) -> Result<SpectralSubspace> {
    estimate_a_with_threshold(m, rtilde, rank_threshold(zeta, rtilde.len()))
}

/// A uniformly random orthonormal basis of the retained eigenspace: a
/// Gaussian combination of the eigenvectors, orthonormalized.
pub fn random_basis(sub: &SpectralSubspace, rng: RngStream) -> Result<Vec<Vec<f64>>> {
    let kp = sub.kprime;
    if kp == 0 {
        return Err(Error::DegenerateSubspace);
    }
    let v = sub.retained_vectors();
    let mut g = rng.generator();
    for _ in 0..16 {
        let mixed: Vec<Vec<f64>> = (0..kp)
            .map(|_| {
                let coef: Vec<f64> = (0..kp).map(|_| StandardNormal.sample(&mut g)).collect();
                (0..sub.n()).map(|x| (0..kp).map(|i| coef[i] * v[i][x]).sum()).collect()
            })
            .collect();
        let q = gram_schmidt(&mixed, 1e-8);
        if q.len() == kp {
            return Ok(q);
        }
    }
    Err(Error::DegenerateSubspace)
}

/// Orthogonal projector onto the span of orthonormal vectors of length `n`.
pub fn projector(vectors: &[Vec<f64>], n: usize) -> Matrix {
    let mut p = Matrix::zeros(n, n);
    for v in vectors {
        p.add_outer(1.0, v, v);
    }
    p
}

/// `||Pi_U - Pi_V||_op` for two orthonormal sets in the same space.
pub fn projector_distance(u: &[Vec<f64>], v: &[Vec<f64>]) -> Result<f64> {
    let n = u.first().or(v.first()).map_or(0, Vec::len);
    if u.iter().chain(v).any(|x| x.len() != n) {
        return Err(invalid("vectors must share a dimension"));
    }
    if n == 0 {
        return Ok(0.0);
    }
    symmetric_op_norm(&projector(u, n).sub(&projector(v, n)))
}

/// Largest deviation of a vector set from orthonormality.
pub fn orthonormality_error(vs: &[Vec<f64>]) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..vs.len() {
        for j in 0..=i {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((dot(&vs[i], &vs[j]) - target).abs());
        }
    }
    worst
}
