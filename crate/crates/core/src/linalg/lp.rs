//! Small dense linear programs: minimize `c^T x` subject to linear
//! constraints and `x >= 0`.
//!
//! Two-phase tableau simplex with Bland's pivoting rule, so the optimal vertex
//! returned for a given program is deterministic. After the final basis is
//! found the basic variables are recomputed from the original data by
//! Gaussian elimination, which removes the error accumulated in the tableau.

use super::matrix::{solve_linear, Matrix};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Clone, Debug, Default)]
pub struct LinearProgram {
    objective: Vec<f64>,
    constraints: Vec<Constraint>,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
}

const PIVOT_EPS: f64 = 1e-12;
const COST_EPS: f64 = 1e-12;
const FEAS_EPS: f64 = 1e-9;

impl LinearProgram {
    /// A program over `objective.len()` nonnegative variables.
    pub fn minimize(objective: Vec<f64>) -> Self {
        Self { objective, constraints: Vec::new() }
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn constrain(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) -> &mut Self {
        assert_eq!(coeffs.len(), self.n_vars(), "constraint width mismatch");
        self.constraints.push(Constraint { coeffs, relation, rhs });
        self
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    /// Largest constraint violation of `x` (including negativity).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let mut worst = x.iter().fold(0.0f64, |m, v| m.max(-v));
        for c in &self.constraints {
            let lhs: f64 = c.coeffs.iter().zip(x).map(|(a, b)| a * b).sum();
            let v = match c.relation {
                Relation::Le => lhs - c.rhs,
                Relation::Ge => c.rhs - lhs,
                Relation::Eq => (lhs - c.rhs).abs(),
            };
            worst = worst.max(v);
        }
        worst
    }

    pub fn solve(&self) -> Result<LpSolution> {
        Tableau::build(self).run(self)
    }
}

struct Tableau {
    /// Constraint rows, each of width `width + 1` (last entry is the rhs).
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    n_orig: usize,
    /// Structural + slack/surplus columns; artificials follow.
    n_real: usize,
    width: usize,
    /// Original rows in normalized (rhs >= 0) form, for the final re-solve.
    normalized: Vec<Vec<f64>>,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let n = lp.n_vars();
        let m = lp.constraints.len();
        let n_slack = lp.constraints.iter().filter(|c| c.relation != Relation::Eq).count();
        let mut norm_rows = Vec::with_capacity(m);
        let mut kinds = Vec::with_capacity(m);
        for c in &lp.constraints {
            let (coeffs, rel, rhs) = if c.rhs < 0.0 {
                let flipped = match c.relation {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    Relation::Eq => Relation::Eq,
                };
                (c.coeffs.iter().map(|a| -a).collect::<Vec<_>>(), flipped, -c.rhs)
            } else {
                (c.coeffs.clone(), c.relation, c.rhs)
            };
            norm_rows.push((coeffs, rhs));
            kinds.push(rel);
        }
        let n_art = kinds.iter().filter(|r| **r != Relation::Le).count();
        let n_real = n + n_slack;
        let width = n_real + n_art;

        let mut rows = Vec::with_capacity(m);
        let mut normalized = Vec::with_capacity(m);
        let mut basis = Vec::with_capacity(m);
        let mut slack = n;
        let mut art = n_real;
        for ((coeffs, rhs), rel) in norm_rows.into_iter().zip(kinds) {
            let mut row = vec![0.0; width + 1];
            row[..n].copy_from_slice(&coeffs);
            row[width] = rhs;
            match rel {
                Relation::Le => {
                    row[slack] = 1.0;
                    basis.push(slack);
                    slack += 1;
                }
                Relation::Ge => {
                    row[slack] = -1.0;
                    slack += 1;
                    row[art] = 1.0;
                    basis.push(art);
                    art += 1;
                }
                Relation::Eq => {
                    row[art] = 1.0;
                    basis.push(art);
                    art += 1;
                }
            }
            let mut plain = row[..n_real].to_vec();
            plain.push(rhs);
            normalized.push(plain);
            rows.push(row);
        }
        Self { rows, basis, n_orig: n, n_real, width, normalized }
    }

    fn run(mut self, lp: &LinearProgram) -> Result<LpSolution> {
        if self.width > self.n_real {
            let mut phase1 = vec![0.0; self.width];
            phase1[self.n_real..].iter_mut().for_each(|c| *c = 1.0);
            self.optimize(&phase1, self.width)?;
            let infeas: f64 = self
                .basis
                .iter()
                .zip(&self.rows)
                .filter(|(b, _)| **b >= self.n_real)
                .map(|(_, r)| r[self.width])
                .sum();
            let scale = 1.0 + self.rows.iter().map(|r| r[self.width].abs()).fold(0.0, f64::max);
            if infeas > FEAS_EPS * scale {
                return Err(Error::Infeasible);
            }
            self.expel_artificials();
        }
        let mut cost = vec![0.0; self.width];
        cost[..self.n_orig].copy_from_slice(&lp.objective);
        self.optimize(&cost, self.n_real)?;

        let x = self.resolve_basic();
        let objective = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        Ok(LpSolution { x, objective })
    }

    /// Simplex iterations over columns `< allowed`, Bland's rule.
    fn optimize(&mut self, cost: &[f64], allowed: usize) -> Result<()> {
        let max_iter = 50_000 + 100 * (self.width + self.rows.len());
        for _ in 0..max_iter {
            let entering = (0..allowed).find(|&j| {
                if self.basis.contains(&j) {
                    return false;
                }
                let cb: f64 = self.basis.iter().zip(&self.rows).map(|(&b, r)| cost[b] * r[j]).sum();
                cost[j] - cb < -COST_EPS
            });
            let Some(col) = entering else { return Ok(()) };

            let mut leave: Option<(usize, f64)> = None;
            for (i, r) in self.rows.iter().enumerate() {
                if r[col] > PIVOT_EPS {
                    let ratio = r[self.width] / r[col];
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr - 1e-15 * lr.abs().max(1.0)
                                || (ratio <= lr + 1e-15 * lr.abs().max(1.0) && self.basis[i] < self.basis[li])
                            {
                                Some((i, ratio))
                            } else {
                                Some((li, lr))
                            }
                        }
                    };
                }
            }
            let Some((row, _)) = leave else { return Err(Error::Unbounded) };
            self.pivot(row, col);
        }
        Err(Error::NoConvergence { iterations: max_iter, detail: "simplex pivot limit".into() })
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.rows[row][col];
        self.rows[row].iter_mut().for_each(|a| *a /= p);
        let pivot_row = self.rows[row].clone();
        for (i, r) in self.rows.iter_mut().enumerate() {
            if i == row {
                continue;
            }
            let f = r[col];
            if f != 0.0 {
                for (a, b) in r.iter_mut().zip(&pivot_row) {
                    *a -= f * b;
                }
                r[col] = 0.0;
            }
        }
        self.basis[row] = col;
    }

    /// Pivots artificial variables out of the basis after phase one; rows where
    /// that is impossible are linearly dependent and get dropped.
    fn expel_artificials(&mut self) {
        let mut i = 0;
        while i < self.rows.len() {
            if self.basis[i] >= self.n_real {
                let col = (0..self.n_real)
                    .filter(|j| !self.basis.contains(j))
                    .max_by(|&a, &b| self.rows[i][a].abs().total_cmp(&self.rows[i][b].abs()));
                match col {
                    Some(j) if self.rows[i][j].abs() > 1e-9 => {
                        self.pivot(i, j);
                        i += 1;
                    }
                    _ => {
                        self.rows.remove(i);
                        self.basis.remove(i);
                        self.normalized.remove(i);
                    }
                }
            } else {
                i += 1;
            }
        }
    }

    fn resolve_basic(&self) -> Vec<f64> {
        let m = self.basis.len();
        let mut x_full = vec![0.0; self.n_real];
        for (b, r) in self.basis.iter().zip(&self.rows) {
            x_full[*b] = r[self.width].max(0.0);
        }
        if m > 0 {
            let b_mat = Matrix::from_fn(m, m, |i, j| self.normalized[i][self.basis[j]]);
            let rhs: Vec<f64> = self.normalized.iter().map(|r| r[self.n_real]).collect();
            if let Some(xb) = solve_linear(&b_mat, &rhs, 1e-13) {
                let consistent = xb.iter().zip(&self.basis).all(|(v, b)| (v - x_full[*b]).abs() <= 1e-6 * (1.0 + v.abs()));
                if consistent {
                    for (v, b) in xb.iter().zip(&self.basis) {
                        x_full[*b] = v.max(0.0);
                    }
                }
            }
        }
        x_full.truncate(self.n_orig);
        x_full
    }
}
