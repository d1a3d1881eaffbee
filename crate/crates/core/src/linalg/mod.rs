//! Dense numerical kernels shared by the learning stages.

pub mod eigen;
pub mod lp;
pub mod matrix;
pub mod roots;

pub use eigen::{op_norm, symmetric_eigen, symmetric_op_norm, SymmetricEigen};
pub use lp::{LinearProgram, LpSolution, Relation};
pub use matrix::{dot, gram_schmidt, norm1, norm2, norm_inf, solve_linear, Matrix};
pub use roots::polynomial_roots;

/// Euclidean projection onto the probability simplex (sort-based).
pub fn project_to_simplex(y: &[f64]) -> Vec<f64> {
    if y.is_empty() {
        return vec![];
    }
    let mut u = y.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, ui) in u.iter().enumerate() {
        cum += ui;
        let t = (cum - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    y.iter().map(|v| (v - theta).max(0.0)).collect()
}
