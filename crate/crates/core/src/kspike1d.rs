//! Learning a k-spike distribution on `[0, 1]` from (2k-1)-bit snapshots.
//!
//! The bit counts of a (2k-1)-snapshot give the normalized binomial moments
//! (NBMs) `nu`, the Pascal transform turns them into raw moments `g`, a small
//! LP recovers the monic polynomial annihilating the moment sequence, its
//! roots are the spike locations, and a simplex-constrained least-squares fit
//! recovers the weights.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{polynomial_roots, project_to_simplex, solve_linear, symmetric_op_norm, LinearProgram, Matrix, Relation};
use crate::model::KSpikeDistribution;

/// Largest Pascal size whose entries fit comfortably in 64 bits.
pub const MAX_PASCAL: usize = 60;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MomentKind {
    Raw,
    Nbm,
}

/// `2k` raw moments `g_0..g_{2k-1}` or NBMs `nu_0..nu_{2k-1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentVector {
    pub kind: MomentKind,
    pub values: Vec<f64>,
}

impl MomentVector {
    pub fn raw(values: Vec<f64>) -> Self {
        Self { kind: MomentKind::Raw, values }
    }

    pub fn nbm(values: Vec<f64>) -> Self {
        Self { kind: MomentKind::Nbm, values }
    }

    /// Number of spikes the vector describes (`len / 2`).
    pub fn k(&self) -> usize {
        self.values.len() / 2
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn expect(&self, kind: MomentKind) -> Result<()> {
        if self.kind != kind {
            return Err(invalid(format!("expected {kind:?} moments, got {:?}", self.kind)));
        }
        if self.values.is_empty() || self.values.len() % 2 != 0 {
            return Err(invalid(format!("moment vector must have even nonzero length, got {}", self.values.len())));
        }
        Ok(())
    }
}

/// `C(n, r)` in 64-bit arithmetic, `None` on overflow.
pub fn binomial(n: usize, r: usize) -> Option<u64> {
    if r > n {
        return Some(0);
    }
    let r = r.min(n - r);
    let mut acc: u128 = 1;
    for i in 0..r {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return None;
        }
    }
    Some(acc as u64)
}

fn binomial_f64(n: usize, r: usize) -> f64 {
    if r > n {
        return 0.0;
    }
    let r = r.min(n - r);
    (0..r).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Size-`b` Pascal matrix `Pas_ij = C(b-1-j, i-j)` and its integer inverse
/// `(-1)^(i-j) C(b-1-j, i-j)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PascalPair {
    pub b: usize,
    pub pas: Vec<Vec<i64>>,
    pub inv: Vec<Vec<i64>>,
}

pub fn pascal_pair(b: usize) -> Result<PascalPair> {
    if b == 0 {
        return Err(invalid("Pascal size must be at least 1"));
    }
    if b > MAX_PASCAL {
        return Err(Error::Overflow(b));
    }
    let mut pas = vec![vec![0i64; b]; b];
    let mut inv = vec![vec![0i64; b]; b];
    for i in 0..b {
        for j in 0..=i {
            let c = binomial(b - 1 - j, i - j).ok_or(Error::Overflow(b))? as i64;
            pas[i][j] = c;
            inv[i][j] = if (i - j) % 2 == 0 { c } else { -c };
        }
    }
    Ok(PascalPair { b, pas, inv })
}

impl PascalPair {
    /// `pas * inv` in exact integer arithmetic.
    pub fn product(&self) -> Vec<Vec<i128>> {
        let b = self.b;
        let mut out = vec![vec![0i128; b]; b];
        for i in 0..b {
            for j in 0..b {
                out[i][j] = (0..b).map(|l| self.pas[i][l] as i128 * self.inv[l][j] as i128).sum();
            }
        }
        out
    }

    /// Squared Frobenius norm of `pas`, exact.
    pub fn frobenius_sq(&self) -> u128 {
        self.pas.iter().flatten().map(|&v| (v as i128 * v as i128) as u128).sum()
    }

    pub fn pas_f64(&self) -> Matrix {
        Matrix::from_fn(self.b, self.b, |i, j| self.pas[i][j] as f64)
    }
}

/// Raw moments `g_i = sum_j theta_j alpha_j^i` for `i < count`.
pub fn moments_of(d: &KSpikeDistribution, count: usize) -> MomentVector {
    let mut g = vec![0.0; count];
    for (&w, &a) in d.weights().iter().zip(d.locations()) {
        let mut p = 1.0;
        for gi in g.iter_mut() {
            *gi += w * p;
            p *= a;
        }
    }
    MomentVector::raw(g)
}

/// NBMs for aperture `2 d.k() - 1`.
pub fn nbm_of(d: &KSpikeDistribution) -> MomentVector {
    nbm_of_order(d, d.k())
}

/// NBMs `nu_i = sum_j theta_j alpha_j^i (1 - alpha_j)^(2k-1-i)`, `i < 2k`.
pub fn nbm_of_order(d: &KSpikeDistribution, k: usize) -> MomentVector {
    let b = 2 * k - 1;
    let mut nu = vec![0.0; 2 * k];
    for (&w, &a) in d.weights().iter().zip(d.locations()) {
        for (i, v) in nu.iter_mut().enumerate() {
            *v += w * a.powi(i as i32) * (1.0 - a).powi((b - i) as i32);
        }
    }
    MomentVector::nbm(nu)
}

/// Empirical NBMs from (2k-1)-bit snapshots.
pub fn empirical_nbm(bits: &[Vec<bool>], k: usize) -> Result<MomentVector> {
    if k == 0 {
        return Err(invalid("k must be positive"));
    }
    let mut hist = vec![0u64; 2 * k];
    for row in bits {
        if row.len() != 2 * k - 1 {
            return Err(invalid(format!("snapshot of length {} where {} bits expected", row.len(), 2 * k - 1)));
        }
        hist[row.iter().filter(|&&b| b).count()] += 1;
    }
    nbm_from_histogram(&hist)
}

/// Empirical NBMs from the histogram of ones counts (length `2k`):
/// `nu_i = hist_i / (N C(2k-1, i))`.
pub fn nbm_from_histogram(hist: &[u64]) -> Result<MomentVector> {
    if hist.is_empty() || hist.len() % 2 != 0 {
        return Err(invalid("histogram must have length 2k"));
    }
    let total: u64 = hist.iter().sum();
    if total == 0 {
        return Err(Error::Empty("bit snapshots"));
    }
    let b = hist.len() - 1;
    let nu = hist.iter().enumerate().map(|(i, &c)| c as f64 / (total as f64 * binomial_f64(b, i))).collect();
    Ok(MomentVector::nbm(nu))
}

/// `g = nu Pas`.
pub fn nbm_to_moments(nu: &MomentVector) -> Result<MomentVector> {
    nu.expect(MomentKind::Nbm)?;
    let b = nu.len();
    let mut g = vec![0.0; b];
    for (j, gj) in g.iter_mut().enumerate() {
        for i in j..b {
            *gj += nu.values[i] * binomial_f64(b - 1 - j, i - j);
        }
    }
    Ok(MomentVector::raw(g))
}

/// The `k x (k+1)` Hankel matrix `G_ij = g_{i+j}`.
pub fn hankel(g: &MomentVector) -> Matrix {
    let k = g.k();
    Matrix::from_fn(k, k + 1, |i, j| g.values[i + j])
}

/// Coefficients `lambda_0..lambda_k` (`lambda_k = 1`) minimizing `||x||_1`
/// subject to `||G x||_1 <= 2^k k xi`.
pub fn solve_lambda(g: &MomentVector, xi: f64) -> Result<Vec<f64>> {
    g.expect(MomentKind::Raw)?;
    if !(xi >= 0.0) {
        return Err(invalid("xi must be nonnegative"));
    }
    let k = g.k();
    let h = hankel(g);
    // variables: x+ (k+1), x- (k+1), u (k) with u_i >= |(G x)_i|
    let nv = 3 * k + 2;
    let (xp, xm, u) = (0, k + 1, 2 * k + 2);
    let mut obj = vec![0.0; nv];
    obj[xp..xm].iter_mut().for_each(|c| *c = 1.0);
    obj[xm..u].iter_mut().for_each(|c| *c = 1.0);
    let mut lp = LinearProgram::minimize(obj);
    for i in 0..k {
        let mut upper = vec![0.0; nv];
        let mut lower = vec![0.0; nv];
        for j in 0..=k {
            upper[xp + j] = h[(i, j)];
            upper[xm + j] = -h[(i, j)];
            lower[xp + j] = -h[(i, j)];
            lower[xm + j] = h[(i, j)];
        }
        upper[u + i] = -1.0;
        lower[u + i] = -1.0;
        lp.constrain(upper, Relation::Le, 0.0);
        lp.constrain(lower, Relation::Le, 0.0);
    }
    let mut budget = vec![0.0; nv];
    budget[u..].iter_mut().for_each(|c| *c = 1.0);
    lp.constrain(budget, Relation::Le, 2f64.powi(k as i32) * k as f64 * xi);
    let mut lead = vec![0.0; nv];
    lead[xp + k] = 1.0;
    lead[xm + k] = -1.0;
    lp.constrain(lead, Relation::Eq, 1.0);
    let sol = lp.solve()?;
    let mut lambda: Vec<f64> = (0..=k).map(|j| sol.x[xp + j] - sol.x[xm + j]).collect();
    lambda[k] = 1.0;
    Ok(lambda)
}

/// Smallest achievable `||G x||_1` with `x_k = 1`; the least `2^k k xi` for
/// which [`solve_lambda`] is feasible.
pub fn min_residual(g: &MomentVector) -> Result<f64> {
    g.expect(MomentKind::Raw)?;
    let k = g.k();
    let h = hankel(g);
    let nv = 3 * k + 2;
    let (xp, xm, u) = (0, k + 1, 2 * k + 2);
    let mut obj = vec![0.0; nv];
    obj[u..].iter_mut().for_each(|c| *c = 1.0);
    let mut lp = LinearProgram::minimize(obj);
    for i in 0..k {
        let mut upper = vec![0.0; nv];
        let mut lower = vec![0.0; nv];
        for j in 0..=k {
            upper[xp + j] = h[(i, j)];
            upper[xm + j] = -h[(i, j)];
            lower[xp + j] = -h[(i, j)];
            lower[xm + j] = h[(i, j)];
        }
        upper[u + i] = -1.0;
        lower[u + i] = -1.0;
        lp.constrain(upper, Relation::Le, 0.0);
        lp.constrain(lower, Relation::Le, 0.0);
    }
    let mut lead = vec![0.0; nv];
    lead[xp + k] = 1.0;
    lead[xm + k] = -1.0;
    lp.constrain(lead, Relation::Eq, 1.0);
    Ok(lp.solve()?.objective.max(0.0))
}

/// Roots of the monic polynomial `lambda`, real parts clamped to `[0, 1]`,
/// ascending.
pub fn clamped_roots(lambda: &[f64]) -> Result<Vec<f64>> {
    let mut out: Vec<f64> = polynomial_roots(lambda)?.into_iter().map(|z| z.re.clamp(0.0, 1.0)).collect();
    out.sort_by(f64::total_cmp);
    Ok(out)
}

/// Weights `y` on the simplex minimizing `||y V(alpha) - g||_2^2`, where
/// `V_ji = alpha_j^i` has `g.len()` columns.
pub fn solve_weights(alphas: &[f64], g: &MomentVector) -> Result<Vec<f64>> {
    g.expect(MomentKind::Raw)?;
    let k = alphas.len();
    if k == 0 {
        return Err(invalid("at least one spike location is required"));
    }
    if k == 1 {
        return Ok(vec![1.0]);
    }
    // identical locations share one variable; their mass is split evenly
    let mut distinct: Vec<f64> = Vec::new();
    let mut group = Vec::with_capacity(k);
    for &a in alphas {
        match distinct.iter().position(|&d| d == a) {
            Some(i) => group.push(i),
            None => {
                group.push(distinct.len());
                distinct.push(a);
            }
        }
    }
    let merged = if distinct.len() == 1 {
        vec![1.0]
    } else {
        let qp = WeightProblem::new(&distinct, &g.values);
        let y = qp.accelerated_projected_gradient()?;
        qp.polish(y)
    };
    let mut sizes = vec![0usize; distinct.len()];
    group.iter().for_each(|&i| sizes[i] += 1);
    Ok(group.iter().map(|&i| merged[i] / sizes[i] as f64).collect())
}

const APG_MAX_ITERATIONS: usize = 100_000;
const APG_TOL: f64 = 1e-12;

/// `f(y) = y^T Q y - 2 c^T y + |g|^2` with `Q = V V^T`, `c = V g`.
struct WeightProblem {
    q: Matrix,
    c: Vec<f64>,
    gg: f64,
}

impl WeightProblem {
    fn new(alphas: &[f64], g: &[f64]) -> Self {
        let v = Matrix::from_fn(alphas.len(), g.len(), |j, i| alphas[j].powi(i as i32));
        Self { q: v.matmul(&v.transpose()), c: v.matvec(g), gg: g.iter().map(|x| x * x).sum() }
    }

    fn value(&self, y: &[f64]) -> f64 {
        let qy = self.q.matvec(y);
        let quad: f64 = y.iter().zip(&qy).map(|(a, b)| a * b).sum();
        let lin: f64 = y.iter().zip(&self.c).map(|(a, b)| a * b).sum();
        (quad - 2.0 * lin + self.gg).max(0.0)
    }

    fn gradient(&self, y: &[f64]) -> Vec<f64> {
        self.q.matvec(y).iter().zip(&self.c).map(|(a, b)| 2.0 * (a - b)).collect()
    }

    fn accelerated_projected_gradient(&self) -> Result<Vec<f64>> {
        let k = self.c.len();
        let lip = 2.0 * symmetric_op_norm(&self.q)?.max(f64::MIN_POSITIVE);
        let mut y = vec![1.0 / k as f64; k];
        let mut z = y.clone();
        let mut t = 1.0f64;
        let mut fy = self.value(&y);
        for _ in 0..APG_MAX_ITERATIONS {
            let grad = self.gradient(&z);
            let step: Vec<f64> = z.iter().zip(&grad).map(|(a, g)| a - g / lip).collect();
            let next = project_to_simplex(&step);
            let fnext = self.value(&next);
            if fnext > fy {
                // restart the momentum
                z = y.clone();
                t = 1.0;
                continue;
            }
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            z = next.iter().zip(&y).map(|(n, o)| n + (t - 1.0) / t_next * (n - o)).collect();
            let done = fy - fnext < APG_TOL;
            y = next;
            fy = fnext;
            t = t_next;
            if done {
                break;
            }
        }
        Ok(y)
    }

    /// Primal active-set iterations started from `y`; returns whichever of
    /// `y` and the refined point has the smaller objective.
    fn polish(&self, start: Vec<f64>) -> Vec<f64> {
        let k = start.len();
        let mut y = start.clone();
        let mut active: Vec<bool> = y.iter().map(|&v| v > 1e-10).collect();
        if !active.iter().any(|&a| a) {
            return start;
        }
        for _ in 0..(20 * k + 20) {
            let s: Vec<usize> = (0..k).filter(|&i| active[i]).collect();
            let Some((ys, mu)) = self.kkt(&s) else { break };
            if ys.iter().all(|&v| v >= 0.0) {
                let mut full = vec![0.0; k];
                s.iter().zip(&ys).for_each(|(&i, &v)| full[i] = v);
                y = full;
                let grad = self.gradient(&y);
                let entering = (0..k)
                    .filter(|&i| !active[i])
                    .map(|i| (i, grad[i] - mu))
                    .filter(|&(_, r)| r < -1e-13)
                    .min_by(|a, b| a.1.total_cmp(&b.1));
                match entering {
                    Some((i, _)) => active[i] = true,
                    None => break,
                }
            } else {
                // move toward the KKT point until a coordinate reaches zero
                let mut step = 1.0;
                let mut blocking = None;
                for (pos, &i) in s.iter().enumerate() {
                    if ys[pos] < 0.0 {
                        let ratio = y[i] / (y[i] - ys[pos]);
                        if ratio < step {
                            step = ratio;
                            blocking = Some(i);
                        }
                    }
                }
                for (pos, &i) in s.iter().enumerate() {
                    y[i] += step * (ys[pos] - y[i]);
                }
                match blocking {
                    Some(i) => {
                        y[i] = 0.0;
                        active[i] = false;
                    }
                    None => break,
                }
            }
        }
        let total: f64 = y.iter().sum();
        if y.iter().any(|v| *v < 0.0 || !v.is_finite()) || total <= 0.0 {
            return start;
        }
        y.iter_mut().for_each(|v| *v /= total);
        if self.value(&y) <= self.value(&start) {
            y
        } else {
            start
        }
    }

    /// Stationary point of `f` on `{y_S : sum y_S = 1}`; returns `(y_S, mu)`.
    fn kkt(&self, s: &[usize]) -> Option<(Vec<f64>, f64)> {
        let m = s.len();
        let a = Matrix::from_fn(m + 1, m + 1, |i, j| match (i < m, j < m) {
            (true, true) => 2.0 * self.q[(s[i], s[j])],
            (true, false) => -1.0,
            (false, true) => 1.0,
            (false, false) => 0.0,
        });
        let mut rhs: Vec<f64> = s.iter().map(|&i| 2.0 * self.c[i]).collect();
        rhs.push(1.0);
        let sol = solve_linear(&a, &rhs, 1e-14)?;
        Some((sol[..m].to_vec(), sol[m]))
    }
}

/// Parameters of the one-dimensional learner.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KSpikeConfig {
    pub k: usize,
    /// Minimum separation between distinct spikes.
    pub tau: f64,
    /// Bound on `||g_tilde - g||_2`.
    pub xi: f64,
    /// Root accuracy `(4 / tau) (2 k xi)^(1/k)`.
    pub eps_root: f64,
}

impl KSpikeConfig {
    pub fn new(k: usize, tau: f64, xi: f64) -> Result<Self> {
        if k == 0 {
            return Err(invalid("k must be positive"));
        }
        if !(tau > 0.0 && tau <= 1.0) {
            return Err(invalid(format!("tau must lie in (0, 1], got {tau}")));
        }
        if !(xi >= 0.0 && xi.is_finite()) {
            return Err(invalid(format!("xi must be finite and nonnegative, got {xi}")));
        }
        let eps_root = 4.0 / tau * (2.0 * k as f64 * xi).powf(1.0 / k as f64);
        Ok(Self { k, tau, xi, eps_root })
    }

    /// Whether `xi <= tau^(2k)`, the accuracy regime of the recovery guarantee.
    pub fn in_guarantee_regime(&self) -> bool {
        self.xi <= self.tau.powi(2 * self.k as i32)
    }
}

/// A moment-error bound for NBMs estimated from `samples` snapshots: a
/// `z`-sigma bound on `||nu_tilde - nu||_2`, pushed through `Pas`.
pub fn suggested_xi(k: usize, samples: u64, z: f64) -> f64 {
    if samples == 0 {
        return f64::INFINITY;
    }
    let b = 2 * k - 1;
    // Var(nu_tilde_i) <= nu_i / (N C(b,i)) and sum_i C(b,i) nu_i = 1
    let var: f64 = (0..=b).map(|i| 1.0 / (samples as f64 * binomial_f64(b, i))).fold(0.0, f64::max);
    let pas_fro = (0..=b).map(|m| binomial_f64(2 * m, m)).sum::<f64>().sqrt();
    z * pas_fro * var.sqrt()
}

/// Diagnostics of one run of the learner.
#[derive(Clone, Debug, Serialize)]
pub struct KSpikeReport {
    pub xi_used: f64,
    pub escalations: usize,
    pub lambda: Vec<f64>,
    /// `||theta V(alpha) - g_tilde||_2` of the fitted distribution.
    pub fit_residual: f64,
}

/// Rejects statistics whose zeroth raw moment is far from 1.
const G0_TOLERANCE: f64 = 0.1;
/// Each retry multiplies xi by this factor when the root-finding LP is infeasible.
const XI_ESCALATION: f64 = 4.0;
const MAX_ESCALATIONS: usize = 40;

/// Full pipeline from bit snapshots.
pub fn learn_kspike(bits: &[Vec<bool>], cfg: &KSpikeConfig) -> Result<KSpikeDistribution> {
    let nu = empirical_nbm(bits, cfg.k)?;
    Ok(learn_kspike_from_nbm(&nu, cfg)?.0)
}

/// Pipeline from an NBM vector (empirical or exact).
pub fn learn_kspike_from_nbm(nu: &MomentVector, cfg: &KSpikeConfig) -> Result<(KSpikeDistribution, KSpikeReport)> {
    nu.expect(MomentKind::Nbm)?;
    if nu.k() != cfg.k {
        return Err(invalid(format!("NBM vector describes k = {}, config has k = {}", nu.k(), cfg.k)));
    }
    let g = nbm_to_moments(nu)?;
    learn_kspike_from_moments(&g, cfg)
}

/// Pipeline from raw moments. When the root-finding LP is infeasible at `cfg.xi`, the
/// bound is escalated geometrically; the report records how often.
pub fn learn_kspike_from_moments(g: &MomentVector, cfg: &KSpikeConfig) -> Result<(KSpikeDistribution, KSpikeReport)> {
    g.expect(MomentKind::Raw)?;
    if (g.values[0] - 1.0).abs() > G0_TOLERANCE {
        return Err(invalid(format!("zeroth moment {} is not close to 1", g.values[0])));
    }
    if cfg.k == 1 {
        // the LP optimum as xi -> 0: the single spike sits at the mean
        let a = g.values[1] / g.values[0];
        let d = KSpikeDistribution::new(vec![1.0], vec![a.clamp(0.0, 1.0)])?;
        return Ok((d, KSpikeReport { xi_used: 0.0, escalations: 0, lambda: vec![-a, 1.0], fit_residual: 0.0 }));
    }
    let mut xi = cfg.xi;
    let mut escalations = 0;
    let lambda = loop {
        match solve_lambda(g, xi) {
            Ok(l) => break l,
            Err(Error::Infeasible) if escalations < MAX_ESCALATIONS => {
                xi = if xi > 0.0 { xi * XI_ESCALATION } else { 1e-15 };
                escalations += 1;
            }
            Err(e) => return Err(e),
        }
    };
    let alphas = clamped_roots(&lambda)?;
    let mut weights = solve_weights(&alphas, g)?;
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    let fit = WeightProblem::new(&alphas, &g.values).value(&weights).sqrt();
    let d = KSpikeDistribution::new(weights, alphas)?;
    Ok((d, KSpikeReport { xi_used: xi, escalations, lambda, fit_residual: fit }))
}

/// Lower bound on `||g(d1) - g(d2)||_2` for two k-spike distributions on
/// `[0, 1]` at transport distance `tran`:
/// `tran^(4k-2) / ((2k-1)^(4k) 2^(8k-5))`.
pub fn moment_gap_floor(k: usize, tran: f64) -> f64 {
    let kf = k as f64;
    let b = 2.0 * kf - 1.0;
    tran.powf(4.0 * kf - 2.0) / (b.powf(4.0 * kf) * 2f64.powf(8.0 * kf - 5.0))
}

/// Coefficients (ascending) of the degree-`kappa` polynomial equal to 1 on
/// `betas[..ell]` and 0 on `betas[ell..]`, by Lagrange interpolation.
/// `betas` must be strictly increasing with `kappa + 1` entries.
pub fn step_interpolant(betas: &[f64], ell: usize) -> Result<Vec<f64>> {
    if betas.len() < 2 || ell == 0 || ell >= betas.len() {
        return Err(invalid("need at least two points and 1 <= ell < len"));
    }
    if betas.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("interpolation points must be strictly increasing"));
    }
    let deg = betas.len() - 1;
    let mut out = vec![0.0; deg + 1];
    for j in 0..ell {
        let mut basis = vec![1.0];
        let mut denom = 1.0;
        for (i, &b) in betas.iter().enumerate() {
            if i == j {
                continue;
            }
            // basis *= (x - b)
            let mut next = vec![0.0; basis.len() + 1];
            for (d, &c) in basis.iter().enumerate() {
                next[d + 1] += c;
                next[d] -= b * c;
            }
            basis = next;
            denom *= betas[j] - b;
        }
        out.iter_mut().zip(&basis).for_each(|(o, c)| *o += c / denom);
    }
    Ok(out)
}

/// `kappa^2 2^(4 kappa - 1) s^(-2 kappa)`, the bound on the squared
/// coefficient norm of a step interpolant with gap `s` at the step.
pub fn interpolation_bound(kappa: usize, s: f64) -> f64 {
    let kf = kappa as f64;
    kf * kf * 2f64.powf(4.0 * kf - 1.0) * s.powf(-2.0 * kf)
}
