//! Brute-force reference implementations used to cross-check the library.
//! Nothing here calls into the routines it checks.

#![allow(dead_code)]

use itertools::Itertools;

fn combinations(n: usize, r: usize) -> impl Iterator<Item = Vec<usize>> {
    (0..n).combinations(r)
}

/// Gaussian elimination with partial pivoting; `None` if singular.
pub fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[p][c].abs() < 1e-12 {
            return None;
        }
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for j in c..n {
                a[r][j] -= f * a[c][j];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|j| a[r][j] * x[j]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Optimal transport by enumerating basic feasible solutions: every vertex of
/// the transport polytope is supported on at most `ka + kb - 1` cells.
pub fn transport_by_vertices(wa: &[f64], wb: &[f64], cost: &[Vec<f64>]) -> f64 {
    let (ka, kb) = (wa.len(), wb.len());
    let cells: Vec<(usize, usize)> = (0..ka).flat_map(|i| (0..kb).map(move |j| (i, j))).collect();
    let basis = ka + kb - 1;
    let mut best = f64::INFINITY;
    for subset in combinations(cells.len(), basis) {
        // marginal equations restricted to the chosen cells; drop the last
        // column equation, which is implied by total mass
        let mut a = vec![vec![0.0; basis]; basis];
        let mut rhs = vec![0.0; basis];
        for (c, &idx) in subset.iter().enumerate() {
            let (i, j) = cells[idx];
            a[i][c] = 1.0;
            if j < kb - 1 {
                a[ka + j][c] = 1.0;
            }
        }
        rhs[..ka].copy_from_slice(wa);
        rhs[ka..].copy_from_slice(&wb[..kb - 1]);
        if let Some(x) = solve(a, rhs) {
            if x.iter().all(|&v| v >= -1e-12) {
                let c: f64 = subset.iter().zip(&x).map(|(&idx, v)| cost[cells[idx].0][cells[idx].1] * v).sum();
                best = best.min(c);
            }
        }
    }
    best
}

/// One-dimensional earth mover distance: the integral of `|F - G|`.
pub fn transport_1d(wa: &[f64], xa: &[f64], wb: &[f64], xb: &[f64]) -> f64 {
    let mut pts: Vec<(f64, f64)> = xa.iter().zip(wa).map(|(&x, &w)| (x, w)).collect();
    pts.extend(xb.iter().zip(wb).map(|(&x, &w)| (x, -w)));
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut cdf = 0.0;
    let mut total = 0.0;
    for w in pts.windows(2) {
        cdf += w[0].1;
        total += cdf.abs() * (w[1].0 - w[0].0);
    }
    total
}

/// `min ||x - p||_1` over the simplex: negative parts must be lifted to zero
/// and the positive mass must be brought to one.
pub fn simplex_l1_optimum(p: &[f64]) -> f64 {
    let neg: f64 = p.iter().map(|v| (-v).max(0.0)).sum();
    let pos: f64 = p.iter().map(|v| v.max(0.0)).sum();
    neg + (1.0 - pos).abs()
}

/// `min ||lambda||_1` over `lambda_k = 1`, `||G lambda||_1 <= budget` by
/// enumerating vertices of the arrangement formed by the breakpoints of both
/// l1 norms and the faces of the budget constraint. `g` holds raw moments
/// `g_0..g_{2k-1}`.
pub fn lambda_by_vertices(g: &[f64], budget: f64) -> f64 {
    let k = g.len() / 2;
    let hank = |i: usize, j: usize| g[i + j];
    // each hyperplane is (a, c) meaning a . y = c over y = lambda_0..lambda_{k-1}
    let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
    for i in 0..k {
        let mut a = vec![0.0; k];
        a[i] = 1.0;
        planes.push((a, 0.0));
    }
    for r in 0..k {
        planes.push(((0..k).map(|j| hank(r, j)).collect(), -hank(r, k)));
    }
    for signs in 0..(1u32 << k) {
        let s: Vec<f64> = (0..k).map(|r| if signs >> r & 1 == 1 { -1.0 } else { 1.0 }).collect();
        let a = (0..k).map(|j| (0..k).map(|r| s[r] * hank(r, j)).sum()).collect();
        let c = budget - (0..k).map(|r| s[r] * hank(r, k)).sum::<f64>();
        planes.push((a, c));
    }
    let residual = |y: &[f64]| -> f64 {
        (0..k).map(|r| ((0..k).map(|j| hank(r, j) * y[j]).sum::<f64>() + hank(r, k)).abs()).sum()
    };
    let mut best = f64::INFINITY;
    for subset in combinations(planes.len(), k) {
        let a = subset.iter().map(|&p| planes[p].0.clone()).collect();
        let b = subset.iter().map(|&p| planes[p].1).collect();
        if let Some(y) = solve(a, b) {
            if residual(&y) <= budget * (1.0 + 1e-9) + 1e-13 {
                best = best.min(1.0 + y.iter().map(|v| v.abs()).sum::<f64>());
            }
        }
    }
    best
}

/// `min sum_i (sum_j theta_j alpha_j^i - g_i)^2` over the simplex by
/// enumerating supports and solving each equality-constrained least squares
/// problem through its KKT system. Returns `(value, theta)`.
pub fn weights_by_supports(alphas: &[f64], g: &[f64]) -> (f64, Vec<f64>) {
    let k = alphas.len();
    let v: Vec<Vec<f64>> = alphas.iter().map(|&a| (0..g.len()).map(|i| a.powi(i as i32)).collect()).collect();
    let value = |theta: &[f64]| -> f64 {
        (0..g.len()).map(|i| ((0..k).map(|j| theta[j] * v[j][i]).sum::<f64>() - g[i]).powi(2)).sum()
    };
    let mut best = (f64::INFINITY, vec![0.0; k]);
    for mask in 1u32..(1 << k) {
        let s: Vec<usize> = (0..k).filter(|&j| mask >> j & 1 == 1).collect();
        let m = s.len();
        let mut a = vec![vec![0.0; m + 1]; m + 1];
        let mut b = vec![0.0; m + 1];
        for (p, &jp) in s.iter().enumerate() {
            for (q, &jq) in s.iter().enumerate() {
                a[p][q] = 2.0 * (0..g.len()).map(|i| v[jp][i] * v[jq][i]).sum::<f64>();
            }
            a[p][m] = 1.0;
            a[m][p] = 1.0;
            b[p] = 2.0 * (0..g.len()).map(|i| v[jp][i] * g[i]).sum::<f64>();
        }
        b[m] = 1.0;
        if let Some(x) = solve(a, b) {
            if x[..m].iter().all(|&t| t >= -1e-12) {
                let mut theta = vec![0.0; k];
                for (p, &j) in s.iter().enumerate() {
                    theta[j] = x[p].max(0.0);
                }
                let val = value(&theta);
                if val < best.0 {
                    best = (val, theta);
                }
            }
        }
    }
    best
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, descending.
pub fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j].powi(2)).sum();
        if off < 1e-28 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for r in 0..n {
                    let (arp, arq) = (a[r][p], a[r][q]);
                    a[r][p] = c * arp - s * arq;
                    a[r][q] = s * arp + c * arq;
                }
                for r in 0..n {
                    let (apr, aqr) = (a[p][r], a[q][r]);
                    a[p][r] = c * apr - s * aqr;
                    a[q][r] = s * apr + c * aqr;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(|x, y| y.total_cmp(x));
    ev
}

/// Raw moments `sum_j w_j a_j^i` for `i < count`.
pub fn raw_moments(w: &[f64], a: &[f64], count: usize) -> Vec<f64> {
    (0..count).map(|i| w.iter().zip(a).map(|(w, a)| w * a.powi(i as i32)).sum()).collect()
}
