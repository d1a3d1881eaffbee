//! The end-to-end learner: spectral dimension reduction, one-dimensional
//! learning along an orthonormal basis of the estimated span, and matching of
//! the per-direction spikes into full constituents.

use std::f64::consts::{PI, SQRT_2};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::isotropize::estimate_r;
use crate::kspike1d::{learn_kspike_from_nbm, nbm_from_histogram, nbm_of_order, suggested_xi, KSpikeConfig, KSpikeReport};
use crate::linalg::{dot, norm2, norm_inf, LinearProgram, Matrix, Relation};
use crate::model::{KSpikeDistribution, MixtureSource};
use crate::sampling::{poisson_count, projected_ones_histogram, RngStream, SnapshotBatch};
use crate::spectral::{empirical_m, estimate_a_with_threshold, random_basis, rank_threshold, SpectralSubspace};

/// Constants derived from `(omega, delta, zeta, k, n, w_min)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnerConstants {
    pub n: usize,
    pub k: usize,
    pub omega: f64,
    pub delta: f64,
    pub zeta: f64,
    pub w_min: f64,
    /// `3 omega k^4`
    pub t: f64,
    /// `4 / (w_min^2 zeta sqrt(n))`
    pub h: f64,
    /// `zeta / (64 omega^1.5 k^4 sqrt(n))`
    pub l: f64,
    /// `(sqrt 2 + 1) L / (2 + 5 T)`
    pub match_tol: f64,
    /// `w_min^3 zeta^4 / (2^29 omega^5 k^16)`
    pub delta_bound: f64,
    pub delta_too_large: bool,
}

impl LearnerConstants {
    pub fn new(n: usize, k: usize, omega: f64, delta: f64, zeta: f64, w_min: f64) -> Result<Self> {
        if n == 0 || k == 0 {
            return Err(invalid("n and k must be positive"));
        }
        if !(omega > 1.0) {
            return Err(invalid(format!("omega must exceed 1, got {omega}")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(invalid(format!("delta must lie in (0, 1), got {delta}")));
        }
        if !(zeta > 0.0 && zeta.is_finite()) {
            return Err(invalid(format!("zeta must be positive, got {zeta}")));
        }
        if !(w_min > 0.0 && w_min <= 1.0) {
            return Err(invalid(format!("w_min must lie in (0, 1], got {w_min}")));
        }
        let (nf, kf) = (n as f64, k as f64);
        let k4 = kf.powi(4);
        let t = 3.0 * omega * k4;
        let h = 4.0 / (w_min * w_min * zeta * nf.sqrt());
        let l = zeta / (64.0 * omega.powf(1.5) * k4 * nf.sqrt());
        let match_tol = (SQRT_2 + 1.0) * l / (2.0 + 5.0 * t);
        let delta_bound = w_min.powi(3) * zeta.powi(4) / (2f64.powi(29) * omega.powi(5) * kf.powi(16));
        Ok(Self { n, k, omega, delta, zeta, w_min, t, h, l, match_tol, delta_bound, delta_too_large: delta > delta_bound })
    }

    /// Right-hand side `1 - 4 delta / zeta^2` of the direction program.
    pub fn direction_target(&self) -> f64 {
        1.0 - 4.0 * self.delta / (self.zeta * self.zeta)
    }
}

/// How projections are scaled into `[-1/2, 1/2]` before binarization.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionScale {
    /// Divide by `2 ||a||_inf`, which never exceeds `2H` on wide isotropic
    /// sources and uses the whole unit interval.
    MaxAbs,
    /// Divide by `2H`.
    Literal,
}

/// Moment accuracy handed to the one-dimensional learner.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XiPolicy {
    /// The tightest feasible budget for the root-finding LP.
    Tight,
    /// A `z`-sigma statistical bound for the sample size at hand.
    Statistical { z: f64 },
    Fixed { xi: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub k: usize,
    pub zeta: f64,
    pub omega: f64,
    pub delta: f64,
    /// Lower bound on the mixture weights; unknown in blind use and
    /// therefore an input.
    pub w_min: f64,
    /// The 1-D sample parameter of the direction learner (defaults to delta).
    pub varsigma: Option<f64>,
    pub scale: ProjectionScale,
    pub xi: XiPolicy,
    /// Overrides the matching tolerance `(sqrt 2 + 1) L / (2 + 5T)`.
    pub match_tol: Option<f64>,
    pub match_retries: usize,
    /// Overrides the rank threshold `zeta^2 / 2n`.
    pub rank_threshold: Option<f64>,
}

impl LearnerConfig {
    pub fn new(k: usize, zeta: f64, omega: f64, delta: f64, w_min: f64) -> Self {
        Self {
            k,
            zeta,
            omega,
            delta,
            w_min,
            varsigma: None,
            scale: ProjectionScale::MaxAbs,
            xi: XiPolicy::Tight,
            match_tol: None,
            match_retries: 8,
            rank_threshold: None,
        }
    }

    pub fn constants(&self, n: usize) -> Result<LearnerConstants> {
        LearnerConstants::new(n, self.k, self.omega, self.delta, self.zeta, self.w_min)
    }
}

/// Largest `v^T x` over `||x||_inf <= cap`, `||x||_2 <= 1`, and its maximizer.
fn capped_alignment(v: &[f64], cap: f64) -> (f64, Vec<f64>) {
    let mut mags: Vec<f64> = v.iter().map(|x| x.abs()).filter(|&x| x > 0.0).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let nnz = mags.len();
    let mut suffix = vec![0.0; nnz + 1];
    for i in (0..nnz).rev() {
        suffix[i] = suffix[i + 1] + mags[i] * mags[i];
    }
    // coordinates follow sign(v_i) min(cap, s |v_i|) with s set by the l2 ball
    let mut scale = f64::INFINITY;
    for m in 0..=nnz {
        let left = 1.0 - m as f64 * cap * cap;
        if left < 0.0 {
            break;
        }
        if suffix[m] == 0.0 {
            break;
        }
        let s = (left / suffix[m]).sqrt();
        let capped_ok = m == 0 || s * mags[m - 1] >= cap;
        if capped_ok && s * mags[m] <= cap {
            scale = s;
            break;
        }
    }
    let x: Vec<f64> = v.iter().map(|&vi| if vi == 0.0 { 0.0 } else { vi.signum() * (scale * vi.abs()).min(cap) }).collect();
    (dot(v, &x), x)
}

const BISECTION_STEPS: usize = 40;

/// Approximately minimizes `||x||_inf` subject to `v^T x >= target`,
/// `||x||_2 <= 1` by bisection on the cap. Returns `x*` (not normalized).
pub fn direction_program(v: &[f64], target: f64) -> Result<Vec<f64>> {
    let nv = norm2(v);
    if (nv - 1.0).abs() > 1e-8 {
        return Err(invalid(format!("direction must be a unit vector, norm is {nv}")));
    }
    if target <= 0.0 {
        return Ok(vec![0.0; v.len()]);
    }
    if target > 1.0 + 1e-12 {
        return Err(Error::Infeasible);
    }
    let (mut lo, mut hi) = (0.0, norm_inf(v));
    let mut best = v.to_vec();
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        let (val, x) = capped_alignment(v, mid);
        if val >= target {
            hi = mid;
            best = x;
        } else {
            lo = mid;
        }
    }
    Ok(best)
}

/// Unit vector `a = x* / ||x*||_2` from the direction program. When the
/// target is nonpositive the program is solved by `x = 0` and `a = v`.
pub fn solve_direction_program(v: &[f64], delta: f64, zeta: f64) -> Result<Vec<f64>> {
    let x = direction_program(v, 1.0 - 4.0 * delta / (zeta * zeta))?;
    let nx = norm2(&x);
    if nx == 0.0 {
        return Ok(v.to_vec());
    }
    Ok(x.iter().map(|xi| xi / nx).collect())
}

/// The one-dimensional statistics available to a direction learner.
#[derive(Clone, Copy)]
pub enum DirectionData<'a> {
    /// Exact NBMs computed from the source.
    Oracle(&'a MixtureSource),
    /// (2k-1)-snapshots and a stream for binarization.
    Sampled(&'a SnapshotBatch, RngStream),
}

/// Spikes learned along one direction.
#[derive(Clone, Debug, Serialize)]
pub struct DirectionResult {
    pub v: Vec<f64>,
    pub a: Vec<f64>,
    /// The scale `h` with projections `a_i / 2h` in `[-1/2, 1/2]`.
    pub half_width: f64,
    /// Locations learned on `[0, 1]` before rescaling.
    pub beta: Vec<f64>,
    /// Weights and rescaled locations `gamma_t = 2h (beta_t - 1/2)(a^T v)`.
    pub spikes: KSpikeDistribution,
    pub report: KSpikeReport,
}

/// Learns `(w, E[pi_v(P)])` for a unit direction `v`.
pub fn learn_direction(
    v: &[f64],
    data: DirectionData<'_>,
    consts: &LearnerConstants,
    cfg: &LearnerConfig,
) -> Result<DirectionResult> {
    let k = consts.k;
    let a = solve_direction_program(v, consts.delta, consts.zeta)?;
    let amax = norm_inf(&a);
    let h = match cfg.scale {
        ProjectionScale::MaxAbs => amax,
        ProjectionScale::Literal => consts.h,
    };
    if amax > h * (1.0 + 1e-12) || h == 0.0 {
        return Err(invalid(format!("||a||_inf = {amax} exceeds the projection scale {h}")));
    }
    let x: Vec<f64> = a.iter().map(|ai| (ai / (2.0 * h) + 0.5).clamp(0.0, 1.0)).collect();
    let (nu, samples) = match data {
        DirectionData::Oracle(src) => {
            let locs: Vec<f64> = src.constituents().iter().map(|p| dot(&x, p).clamp(0.0, 1.0)).collect();
            let d = KSpikeDistribution::new(src.weights().to_vec(), locs)?;
            (nbm_of_order(&d, k), None)
        }
        DirectionData::Sampled(batch, rng) => {
            if batch.aperture() != 2 * k - 1 {
                return Err(invalid(format!("direction learner needs {}-snapshots", 2 * k - 1)));
            }
            if batch.is_empty() {
                return Err(Error::Empty("(2k-1)-snapshot batch"));
            }
            let hist = projected_ones_histogram(batch, &x, rng)?;
            (nbm_from_histogram(&hist)?, Some(batch.len() as u64))
        }
    };
    let xi = match (cfg.xi, samples) {
        (XiPolicy::Tight, _) | (XiPolicy::Statistical { .. }, None) => 0.0,
        (XiPolicy::Statistical { z }, Some(s)) => suggested_xi(k, s, z),
        (XiPolicy::Fixed { xi }, _) => xi,
    };
    let tau = (consts.l / (4.0 * h)).clamp(f64::MIN_POSITIVE, 1.0);
    let kcfg = KSpikeConfig::new(k, tau, xi)?;
    let (d, report) = learn_kspike_from_nbm(&nu, &kcfg)?;
    let av = dot(&a, v);
    let gamma: Vec<f64> = d.locations().iter().map(|b| 2.0 * h * (b - 0.5) * av).collect();
    Ok(DirectionResult {
        v: v.to_vec(),
        a,
        half_width: h,
        beta: d.locations().to_vec(),
        spikes: KSpikeDistribution::on_line(d.weights().to_vec(), gamma)?,
        report,
    })
}

/// Correspondences between the spikes of each basis direction and those of
/// the last basis direction: `maps[j][t] = rho^j(t)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Matching {
    pub maps: Vec<Vec<usize>>,
}

/// Matches spikes of directions `b_1..b_{k'-1}` to those of `b_{k'}` using
/// learned spikes `zhat[j]` along `z_j = b_j cos(theta) + b_{k'} sin(theta)`.
/// `alphas` holds the spike locations of all `k'` basis directions.
pub fn match_spikes(alphas: &[Vec<f64>], zhat: &[Vec<f64>], theta: f64, tol: f64) -> Result<Matching> {
    let kp = alphas.len();
    if kp == 0 {
        return Err(Error::DegenerateSubspace);
    }
    if zhat.len() + 1 != kp {
        return Err(invalid(format!("{} test directions for {kp} basis directions", zhat.len())));
    }
    let last = &alphas[kp - 1];
    let k = last.len();
    let (c, s) = (theta.cos(), theta.sin());
    let mut maps = Vec::with_capacity(kp);
    for (j, z) in zhat.iter().enumerate() {
        let mut rho = vec![usize::MAX; k];
        let mut used = vec![false; k];
        for t2 in 0..k {
            for t1 in 0..alphas[j].len() {
                let grid = alphas[j][t1] * c + last[t2] * s;
                if z.iter().any(|&zt| (grid - zt).abs() <= tol) {
                    if rho[t2] != usize::MAX {
                        return Err(Error::MatchingFailed { direction: j, attempts: 1 });
                    }
                    rho[t2] = t1;
                }
            }
            if rho[t2] == usize::MAX || used[rho[t2]] {
                return Err(Error::MatchingFailed { direction: j, attempts: 1 });
            }
            used[rho[t2]] = true;
        }
        maps.push(rho);
    }
    maps.push((0..k).collect());
    Ok(Matching { maps })
}

/// `argmin ||x - phat||_1` over the simplex: clip negative entries and
/// rescale to unit mass (uniform if nothing positive remains).
pub fn simplex_project_l1(phat: &[f64]) -> Vec<f64> {
    let n = phat.len();
    let q: Vec<f64> = phat.iter().map(|v| v.max(0.0)).collect();
    let total: f64 = q.iter().sum();
    if total > 0.0 {
        q.iter().map(|v| v / total).collect()
    } else {
        vec![1.0 / n as f64; n]
    }
}

/// The same projection as a dense LP; returns the minimizer and its cost.
pub fn simplex_project_l1_lp(phat: &[f64]) -> Result<(Vec<f64>, f64)> {
    let n = phat.len();
    // variables x (n) and e (n) with e_i >= |x_i - phat_i|
    let mut obj = vec![0.0; 2 * n];
    obj[n..].iter_mut().for_each(|c| *c = 1.0);
    let mut lp = LinearProgram::minimize(obj);
    for i in 0..n {
        let mut up = vec![0.0; 2 * n];
        up[i] = 1.0;
        up[n + i] = -1.0;
        lp.constrain(up, Relation::Le, phat[i]);
        let mut down = vec![0.0; 2 * n];
        down[i] = -1.0;
        down[n + i] = -1.0;
        lp.constrain(down, Relation::Le, -phat[i]);
    }
    let mut mass = vec![0.0; 2 * n];
    mass[..n].iter_mut().for_each(|c| *c = 1.0);
    lp.constrain(mass, Relation::Eq, 1.0);
    let sol = lp.solve()?;
    Ok((sol.x[..n].to_vec(), sol.objective))
}

/// Inputs of [`learn_mixture`].
#[derive(Clone, Copy)]
pub enum Observations<'a> {
    /// Exact `r`, `M` and one-dimensional statistics of a known source.
    Oracle(&'a MixtureSource),
    Sampled {
        ones: &'a SnapshotBatch,
        twos: &'a SnapshotBatch,
        highs: &'a SnapshotBatch,
        n: usize,
    },
}

/// Everything needed to reproduce or audit a run.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub constants: LearnerConstants,
    pub config: LearnerConfig,
    pub seed: u64,
    pub stream: u64,
    pub rank_threshold: f64,
    pub kprime: usize,
    pub top_eigenvalues: Vec<f64>,
    pub degenerate: bool,
    pub match_tol: f64,
    pub match_attempts: usize,
    pub theta: Option<f64>,
    pub highs_per_direction: usize,
    pub directions: Vec<DirectionSummary>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DirectionSummary {
    pub role: String,
    pub a_max_abs: f64,
    pub half_width: f64,
    pub xi_used: f64,
    pub escalations: usize,
    pub fit_residual: f64,
}

impl DirectionSummary {
    fn of(role: String, d: &DirectionResult) -> Self {
        Self {
            role,
            a_max_abs: norm_inf(&d.a),
            half_width: d.half_width,
            xi_used: d.report.xi_used,
            escalations: d.report.escalations,
            fit_residual: d.report.fit_residual,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LearnOutcome {
    pub source: MixtureSource,
    pub subspace: SpectralSubspace,
    pub manifest: RunManifest,
}

/// Second-moment statistics of the oracle or the sample.
fn spectral_inputs(obs: &Observations<'_>) -> Result<(Vec<f64>, Matrix)> {
    match obs {
        Observations::Oracle(src) => Ok((src.mean(), src.second_moment())),
        Observations::Sampled { ones, twos, n, .. } => Ok((estimate_r(ones, *n)?, empirical_m(twos, *n)?)),
    }
}

const ROLE_BASIS: u64 = 1;
const ROLE_TEST: u64 = 2;
const ROLE_THETA: u64 = 3;
const ROLE_SUBSPACE: u64 = 4;

/// Runs the full pipeline on an isotropic source.
pub fn learn_mixture(obs: Observations<'_>, cfg: &LearnerConfig, rng: RngStream) -> Result<LearnOutcome> {
    let (rtilde, m) = spectral_inputs(&obs)?;
    let n = rtilde.len();
    let k = cfg.k;
    let consts = cfg.constants(n)?;
    if let Observations::Oracle(src) = obs {
        if src.k() != k {
            return Err(invalid(format!("oracle source has k = {}, config has k = {k}", src.k())));
        }
    }
    let threshold = cfg.rank_threshold.unwrap_or_else(|| rank_threshold(cfg.zeta, n));
    let sub = estimate_a_with_threshold(&m, &rtilde, threshold)?;
    let kp = sub.kprime.min(k.saturating_sub(1));
    let match_tol = cfg.match_tol.unwrap_or(consts.match_tol);
    let mut manifest = RunManifest {
        constants: consts.clone(),
        config: cfg.clone(),
        seed: rng.seed,
        stream: rng.stream,
        rank_threshold: threshold,
        kprime: kp,
        top_eigenvalues: sub.eigenvalues.iter().take(k + 1).copied().collect(),
        degenerate: kp == 0,
        match_tol,
        match_attempts: 0,
        theta: None,
        highs_per_direction: 0,
        directions: Vec::new(),
    };
    if kp == 0 {
        let source = MixtureSource::uniform_weights(vec![rtilde.clone(); k])?;
        return Ok(LearnOutcome { source, subspace: sub, manifest });
    }
    let mut sub_k = sub.clone();
    sub_k.kprime = kp;
    let basis = random_basis(&sub_k, rng.derive(ROLE_SUBSPACE))?;

    // (2k-1)-snapshots are split evenly over k' basis and k'-1 test directions
    let chunks: Vec<SnapshotBatch> = match obs {
        Observations::Sampled { highs, .. } => {
            let parts = 2 * kp - 1;
            let per = highs.len() / parts;
            manifest.highs_per_direction = per;
            (0..parts).map(|i| highs.slice(i * per..(i + 1) * per)).collect()
        }
        Observations::Oracle(_) => Vec::new(),
    };
    let data_for = |slot: usize, stream: RngStream| -> DirectionData<'_> {
        match obs {
            Observations::Oracle(src) => DirectionData::Oracle(src),
            Observations::Sampled { .. } => DirectionData::Sampled(&chunks[slot], stream),
        }
    };

    let basis_results: Vec<DirectionResult> = (0..kp)
        .into_par_iter()
        .map(|j| learn_direction(&basis[j], data_for(j, rng.derive(ROLE_BASIS).derive(j as u64)), &consts, cfg))
        .collect::<Result<_>>()?;
    for (j, d) in basis_results.iter().enumerate() {
        manifest.directions.push(DirectionSummary::of(format!("basis {j}"), d));
    }
    let alphas: Vec<Vec<f64>> = basis_results.iter().map(|d| d.spikes.locations().to_vec()).collect();

    let mut theta_rng = rng.derive(ROLE_THETA).generator();
    let mut attempt = 0;
    let (matching, test_results) = loop {
        attempt += 1;
        let theta = theta_rng.gen_range(0.0..2.0 * PI);
        manifest.theta = Some(theta);
        let tests: Vec<DirectionResult> = (0..kp - 1)
            .into_par_iter()
            .map(|j| {
                let z: Vec<f64> =
                    basis[j].iter().zip(&basis[kp - 1]).map(|(b, c)| b * theta.cos() + c * theta.sin()).collect();
                let stream = rng.derive(ROLE_TEST).derive(attempt as u64).derive(j as u64);
                learn_direction(&z, data_for(kp + j, stream), &consts, cfg)
            })
            .collect::<Result<_>>()?;
        let zhat: Vec<Vec<f64>> = tests.iter().map(|d| d.spikes.locations().to_vec()).collect();
        match match_spikes(&alphas, &zhat, theta, match_tol) {
            Ok(mt) => break (mt, tests),
            Err(Error::MatchingFailed { direction, .. }) => {
                if attempt > cfg.match_retries {
                    manifest.match_attempts = attempt;
                    return Err(Error::MatchingFailed { direction, attempts: attempt });
                }
            }
            Err(e) => return Err(e),
        }
    };
    manifest.match_attempts = attempt;
    for (j, d) in test_results.iter().enumerate() {
        manifest.directions.push(DirectionSummary::of(format!("test {j}"), d));
    }

    let offsets: Vec<f64> = basis.iter().map(|b| dot(b, &rtilde)).collect();
    let mut weights = vec![0.0; k];
    let mut constituents = Vec::with_capacity(k);
    for t in 0..k {
        let mut phat = rtilde.clone();
        for j in 0..kp {
            let s = matching.maps[j][t];
            weights[t] += basis_results[j].spikes.weights()[s] / kp as f64;
            let coef = alphas[j][s] - offsets[j];
            phat.iter_mut().zip(&basis[j]).for_each(|(p, b)| *p += coef * b);
        }
        constituents.push(simplex_project_l1(&phat));
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    let source = MixtureSource::new(weights, constituents)?;
    Ok(LearnOutcome { source, subspace: sub, manifest })
}

/// Sample counts for the sampled pipeline; `poisson_twos` draws the number
/// of 2-snapshots from a Poisson distribution with the given mean.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleCounts {
    pub ones: usize,
    pub twos: usize,
    pub highs: usize,
    pub poisson_twos: bool,
}

/// Draws the three batches from `src` with independent streams.
pub fn draw_observations(
    src: &MixtureSource,
    counts: SampleCounts,
    rng: RngStream,
) -> Result<(SnapshotBatch, SnapshotBatch, SnapshotBatch)> {
    let sampler = crate::sampling::MixtureSampler::new(src)?;
    let twos = if counts.poisson_twos { poisson_count(counts.twos as f64, rng.derive(20))? } else { counts.twos };
    let k = src.k();
    Ok((
        crate::sampling::draw_with(&sampler, 1, counts.ones, rng.derive(11)),
        crate::sampling::draw_with(&sampler, 2, twos, rng.derive(12)),
        crate::sampling::draw_with(&sampler, 2 * k - 1, counts.highs, rng.derive(13)),
    ))
}
