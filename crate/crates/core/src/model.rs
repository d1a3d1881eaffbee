//! Mixture sources over `[n]`, k-spike distributions on the line, the
//! transportation distance between them, and width/isotropy diagnostics.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{norm1, norm2, symmetric_eigen, LinearProgram, Matrix, Relation};

/// Tolerance on the total mass of weight and probability vectors.
pub const MASS_TOL: f64 = 1e-12;

/// Eigenvalues of the covariance below this are treated as zero by
/// [`width_report`].
pub const DEFAULT_RANK_TOL: f64 = 1e-12;

fn check_distribution(v: &[f64], what: &'static str, tol: f64) -> Result<()> {
    if v.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(invalid(format!("{what} must be finite and nonnegative")));
    }
    let sum: f64 = v.iter().sum();
    if (sum - 1.0).abs() > tol {
        return Err(Error::NotNormalized { what, sum });
    }
    Ok(())
}

/// A k-mixture source on `[n]`: weights `w` on the simplex and `k`
/// constituent distributions over `n` items.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MixtureRepr", into = "MixtureRepr")]
pub struct MixtureSource {
    weights: Vec<f64>,
    constituents: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct MixtureRepr {
    n: usize,
    k: usize,
    weights: Vec<f64>,
    constituents: Vec<Vec<f64>>,
}

impl TryFrom<MixtureRepr> for MixtureSource {
    type Error = Error;

    fn try_from(r: MixtureRepr) -> Result<Self> {
        if r.weights.len() != r.k || r.constituents.len() != r.k {
            return Err(Error::Parse(format!("declared k = {} does not match the data", r.k)));
        }
        if r.constituents.iter().any(|p| p.len() != r.n) {
            return Err(Error::Parse(format!("declared n = {} does not match a constituent", r.n)));
        }
        MixtureSource::new(r.weights, r.constituents)
    }
}

impl From<MixtureSource> for MixtureRepr {
    fn from(s: MixtureSource) -> Self {
        Self { n: s.n(), k: s.k(), weights: s.weights, constituents: s.constituents }
    }
}

impl MixtureSource {
    pub fn new(weights: Vec<f64>, constituents: Vec<Vec<f64>>) -> Result<Self> {
        if weights.is_empty() {
            return Err(invalid("a mixture needs at least one constituent"));
        }
        if weights.len() != constituents.len() {
            return Err(invalid("weights and constituents differ in length"));
        }
        let n = constituents[0].len();
        if n == 0 || constituents.iter().any(|p| p.len() != n) {
            return Err(invalid("constituents must share a nonempty domain"));
        }
        check_distribution(&weights, "mixture weights", MASS_TOL)?;
        for p in &constituents {
            check_distribution(p, "constituent", MASS_TOL)?;
        }
        Ok(Self { weights, constituents })
    }

    /// Uniform weights over the given constituents.
    pub fn uniform_weights(constituents: Vec<Vec<f64>>) -> Result<Self> {
        let k = constituents.len().max(1);
        Self::new(vec![1.0 / k as f64; constituents.len()], constituents)
    }

    pub fn n(&self) -> usize {
        self.constituents[0].len()
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn constituents(&self) -> &[Vec<f64>] {
        &self.constituents
    }

    pub fn constituent(&self, t: usize) -> &[f64] {
        &self.constituents[t]
    }

    pub fn w_min(&self) -> f64 {
        self.weights.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// The 1-snapshot distribution `r = sum_t w_t p^t`.
    pub fn mean(&self) -> Vec<f64> {
        let mut r = vec![0.0; self.n()];
        for (w, p) in self.weights.iter().zip(&self.constituents) {
            for (ri, pi) in r.iter_mut().zip(p) {
                *ri += w * pi;
            }
        }
        r
    }

    /// The 2-snapshot distribution `M = sum_t w_t p^t p^t^T`.
    pub fn second_moment(&self) -> Matrix {
        let n = self.n();
        let mut m = Matrix::zeros(n, n);
        for (w, p) in self.weights.iter().zip(&self.constituents) {
            m.add_outer(*w, p, p);
        }
        m
    }

    /// `A = sum_t w_t (p^t - r)(p^t - r)^T`.
    pub fn covariance(&self) -> Matrix {
        let r = self.mean();
        let n = self.n();
        let mut a = Matrix::zeros(n, n);
        for (w, p) in self.weights.iter().zip(&self.constituents) {
            let d: Vec<f64> = p.iter().zip(&r).map(|(x, y)| x - y).collect();
            a.add_outer(*w, &d, &d);
        }
        a
    }

    /// Whether `1/(2n) <= r_i <= 2/n` for every item.
    pub fn is_isotropic(&self) -> bool {
        let n = self.n() as f64;
        self.mean().iter().all(|&r| r >= 0.5 / n && r <= 2.0 / n)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Weighted point masses on the real line. Learned and true spike
/// distributions of the one-dimensional problem live on `[0, 1]`; see
/// [`KSpikeDistribution::new`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpikeRepr")]
pub struct KSpikeDistribution {
    weights: Vec<f64>,
    locations: Vec<f64>,
}

#[derive(Deserialize)]
struct SpikeRepr {
    weights: Vec<f64>,
    locations: Vec<f64>,
}

impl TryFrom<SpikeRepr> for KSpikeDistribution {
    type Error = Error;

    fn try_from(r: SpikeRepr) -> Result<Self> {
        KSpikeDistribution::on_line(r.weights, r.locations)
    }
}

impl KSpikeDistribution {
    /// Spikes supported on `[0, 1]`.
    pub fn new(weights: Vec<f64>, locations: Vec<f64>) -> Result<Self> {
        let d = Self::on_line(weights, locations)?;
        if !d.on_unit_interval() {
            return Err(invalid("spike locations must lie in [0, 1]"));
        }
        Ok(d)
    }

    /// Spikes anywhere on the real line (projections of mixtures onto
    /// arbitrary directions).
    pub fn on_line(weights: Vec<f64>, locations: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.len() != locations.len() {
            return Err(invalid("weights and locations must be nonempty and of equal length"));
        }
        if locations.iter().any(|x| !x.is_finite()) {
            return Err(invalid("spike locations must be finite"));
        }
        check_distribution(&weights, "spike weights", MASS_TOL)?;
        Ok(Self { weights, locations })
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn locations(&self) -> &[f64] {
        &self.locations
    }

    pub fn on_unit_interval(&self) -> bool {
        self.locations.iter().all(|x| (0.0..=1.0).contains(x))
    }

    /// Minimum distance between distinct spikes (`+inf` for a single spike).
    pub fn separation(&self) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.k() {
            for j in 0..i {
                best = best.min((self.locations[i] - self.locations[j]).abs());
            }
        }
        best
    }

    pub fn mean(&self) -> f64 {
        self.weights.iter().zip(&self.locations).map(|(w, a)| w * a).sum()
    }
}

/// Width and isotropy diagnostics of a mixture source.
#[derive(Clone, Debug, Serialize)]
pub struct WidthReport {
    /// `sqrt(n)` times the smallest pairwise l2 distance between constituents
    /// (`+inf` when k = 1).
    pub zeta1: f64,
    /// `sqrt(lambda_min^+(A) / ||r||_inf)`, 0 when `A = 0`.
    pub zeta2: f64,
    pub zeta: f64,
    pub isotropic: bool,
    pub kprime: usize,
    /// Eigenvalues of `A`, descending.
    pub eigenvalues: Vec<f64>,
}

/// Width diagnostics with the default rank threshold.
pub fn width_report(src: &MixtureSource) -> Result<WidthReport> {
    width_report_with_tol(src, DEFAULT_RANK_TOL)
}

/// Width diagnostics; eigenvalues of `A` at most `rank_tol` count as zero.
pub fn width_report_with_tol(src: &MixtureSource, rank_tol: f64) -> Result<WidthReport> {
    let n = src.n() as f64;
    let mut min_dist = f64::INFINITY;
    let ps = src.constituents();
    for i in 0..ps.len() {
        for j in 0..i {
            let d: Vec<f64> = ps[i].iter().zip(&ps[j]).map(|(a, b)| a - b).collect();
            min_dist = min_dist.min(norm2(&d));
        }
    }
    let zeta1 = n.sqrt() * min_dist;

    let eig = symmetric_eigen(&src.covariance())?;
    let kprime = eig.values.iter().filter(|&&l| l > rank_tol).count();
    let r_inf = src.mean().iter().copied().fold(0.0, f64::max);
    let zeta2 = if kprime == 0 { 0.0 } else { (eig.values[kprime - 1] / r_inf).sqrt() };
    Ok(WidthReport {
        zeta1,
        zeta2,
        zeta: zeta1.min(zeta2),
        isotropic: src.is_isotropic(),
        kprime,
        eigenvalues: eig.values,
    })
}

/// Optimal transport between two weight vectors under a ground-cost matrix.
#[derive(Clone, Debug, Serialize)]
pub struct TransportPlan {
    pub cost: f64,
    /// `flow[i][j]`: mass moved from atom `i` of the first measure to atom `j`
    /// of the second.
    pub flow: Vec<Vec<f64>>,
}

/// Transportation distance: the optimum of the transport LP with the given
/// pairwise costs (rows index `wa`, columns index `wb`).
pub fn transport_distance(wa: &[f64], wb: &[f64], cost: &Matrix) -> Result<TransportPlan> {
    check_distribution(wa, "first weight vector", 1e-9)?;
    check_distribution(wb, "second weight vector", 1e-9)?;
    let (k, l) = (wa.len(), wb.len());
    if cost.rows() != k || cost.cols() != l {
        return Err(invalid("cost matrix shape does not match the weight vectors"));
    }
    if cost.as_slice().iter().any(|c| !c.is_finite() || *c < 0.0) {
        return Err(invalid("transport costs must be finite and nonnegative"));
    }
    let mut lp = LinearProgram::minimize(cost.as_slice().to_vec());
    for (i, &w) in wa.iter().enumerate() {
        let mut row = vec![0.0; k * l];
        row[i * l..(i + 1) * l].iter_mut().for_each(|x| *x = 1.0);
        lp.constrain(row, Relation::Eq, w);
    }
    for (j, &w) in wb.iter().enumerate() {
        let mut row = vec![0.0; k * l];
        for i in 0..k {
            row[i * l + j] = 1.0;
        }
        lp.constrain(row, Relation::Eq, w);
    }
    let sol = lp.solve()?;
    let flow = (0..k).map(|i| sol.x[i * l..(i + 1) * l].to_vec()).collect();
    Ok(TransportPlan { cost: sol.objective.max(0.0), flow })
}

/// Transportation distance between mixtures under total variation
/// `1/2 ||p - q||_1`.
pub fn mixture_transport(a: &MixtureSource, b: &MixtureSource) -> Result<TransportPlan> {
    if a.n() != b.n() {
        return Err(invalid("mixtures live on different domains"));
    }
    let cost = Matrix::from_fn(a.k(), b.k(), |i, j| {
        0.5 * a.constituent(i).iter().zip(b.constituent(j)).map(|(x, y)| (x - y).abs()).sum::<f64>()
    });
    transport_distance(a.weights(), b.weights(), &cost)
}

/// Transportation distance between spike distributions under `|x - y|`.
pub fn spike_transport(a: &KSpikeDistribution, b: &KSpikeDistribution) -> Result<TransportPlan> {
    let cost = Matrix::from_fn(a.k(), b.k(), |i, j| (a.locations()[i] - b.locations()[j]).abs());
    transport_distance(a.weights(), b.weights(), &cost)
}

/// Total variation distance `1/2 ||p - q||_1`.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Largest weight error and largest constituent l1 error under the
/// best-matching permutation between two equal-size mixtures.
pub fn matched_errors(truth: &MixtureSource, learned: &MixtureSource) -> (f64, f64) {
    let k = truth.k();
    assert_eq!(k, learned.k());
    let mut best = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
    for perm in permutations(k) {
        let l1 = (0..k)
            .map(|t| {
                let d: Vec<f64> = truth.constituent(t).iter().zip(learned.constituent(perm[t])).map(|(a, b)| a - b).collect();
                norm1(&d)
            })
            .fold(0.0, f64::max);
        let w = (0..k).map(|t| (truth.weights()[t] - learned.weights()[perm[t]]).abs()).fold(0.0, f64::max);
        let score: f64 = l1 + w;
        if score < best.0 {
            best = (score, w, l1);
        }
    }
    (best.1, best.2)
}

/// All permutations of `0..k` in lexicographic order.
pub fn permutations(k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    loop {
        out.push(cur.clone());
        // next lexicographic permutation
        let Some(i) = (1..k).rev().find(|&i| cur[i - 1] < cur[i]) else { break };
        let j = (i..k).rev().find(|&j| cur[j] > cur[i - 1]).expect("pivot exists");
        cur.swap(i - 1, j);
        cur[i..].reverse();
    }
    out
}
