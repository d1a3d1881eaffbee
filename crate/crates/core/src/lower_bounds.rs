//! Moment-matched pairs of k-spike distributions whose low-aperture snapshot
//! distributions coincide, and the total variation between their
//! higher-aperture snapshot distributions.

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::kspike1d::{binomial, moments_of, pascal_pair};
use crate::linalg::{LinearProgram, Relation};
use crate::model::{spike_transport, KSpikeDistribution};

/// Tolerance for certifying equal low-order moments.
pub const MOMENT_TOL: f64 = 1e-8;
/// Largest aperture enumerated by the brute-force routines.
pub const MAX_ENUMERATION: usize = 20;

#[derive(Clone, Debug, Serialize)]
pub struct HardPair {
    pub k: usize,
    pub b: usize,
    pub rho: f64,
    pub first: KSpikeDistribution,
    pub second: KSpikeDistribution,
    /// Optimal value of the moment-gap LP.
    pub lp_value: f64,
    /// `4 * 3^b / rho^(2k-1)`.
    pub lp_bound: f64,
    /// Largest gap among raw moments `0..=2k-2`, re-evaluated from the weights.
    pub low_moment_gap: f64,
}

/// Solves the LP that places weights on the interleaved grids
/// `alpha_i = 2(i-1) / ((2k-1) rho)` and `beta_i = (2i-1) / ((2k-1) rho)` so
/// that the first `2k-1` raw moments agree and the weighted gap
/// `sum_{l=2k-1}^{b} C(b,l) 2^l |g_l(y) - g_l(z)|` is minimal.
pub fn hard_pair(k: usize, b: usize, rho: f64) -> Result<HardPair> {
    if k == 0 {
        return Err(invalid("k must be positive"));
    }
    if b < 2 * k - 1 {
        return Err(invalid(format!("aperture b = {b} must be at least 2k-1 = {}", 2 * k - 1)));
    }
    if !(rho >= 2.0 && rho.is_finite()) {
        return Err(invalid(format!("rho must be at least 2, got {rho}")));
    }
    let eps = 1.0 / rho;
    let denom = (2 * k - 1) as f64;
    let alpha: Vec<f64> = (0..k).map(|i| eps * 2.0 * i as f64 / denom).collect();
    let beta: Vec<f64> = (0..k).map(|i| eps * (2 * i + 1) as f64 / denom).collect();
    let nl = b + 2 - 2 * k;
    // variables: y (k), z (k), lambda_l for l = 2k-1..=b
    let nv = 2 * k + nl;
    let mut obj = vec![0.0; nv];
    for (idx, l) in (2 * k - 1..=b).enumerate() {
        obj[2 * k + idx] = binomial(b, l).ok_or(Error::Overflow(b))? as f64 * 2f64.powi(l as i32);
    }
    let mut lp = LinearProgram::minimize(obj);
    let gap_row = |l: usize| -> Vec<f64> {
        let mut row = vec![0.0; nv];
        for i in 0..k {
            row[i] = -alpha[i].powi(l as i32);
            row[k + i] = beta[i].powi(l as i32);
        }
        row
    };
    for l in 0..=2 * k - 2 {
        lp.constrain(gap_row(l), Relation::Eq, 0.0);
    }
    for (idx, l) in (2 * k - 1..=b).enumerate() {
        let mut up = gap_row(l);
        up[2 * k + idx] = -1.0;
        lp.constrain(up, Relation::Le, 0.0);
        let mut down: Vec<f64> = gap_row(l).iter().map(|c| -c).collect();
        down[2 * k + idx] = -1.0;
        lp.constrain(down, Relation::Le, 0.0);
    }
    let mut mass = vec![0.0; nv];
    mass[..k].iter_mut().for_each(|c| *c = 1.0);
    lp.constrain(mass, Relation::Eq, 1.0);
    let sol = lp.solve()?;

    let normalize = |w: &[f64]| -> Vec<f64> {
        let w: Vec<f64> = w.iter().map(|v| v.max(0.0)).collect();
        let s: f64 = w.iter().sum();
        w.iter().map(|v| v / s).collect()
    };
    let first = KSpikeDistribution::new(normalize(&sol.x[..k]), alpha)?;
    let second = KSpikeDistribution::new(normalize(&sol.x[k..2 * k]), beta)?;
    let gy = moments_of(&first, 2 * k - 1);
    let gz = moments_of(&second, 2 * k - 1);
    let low_moment_gap = gy.values.iter().zip(&gz.values).map(|(a, c)| (a - c).abs()).fold(0.0, f64::max);
    Ok(HardPair {
        k,
        b,
        rho,
        lp_value: sol.objective,
        lp_bound: 4.0 * 3f64.powi(b as i32) / rho.powi((2 * k - 1) as i32),
        low_moment_gap,
        first,
        second,
    })
}

impl HardPair {
    /// Minimum gap between neighbouring grid points, `2 / ((2k-1) rho)`.
    pub fn separation(&self) -> f64 {
        self.first.separation().min(self.second.separation())
    }

    pub fn transport(&self) -> Result<f64> {
        Ok(spike_transport(&self.first, &self.second)?.cost)
    }

    /// `1 / ((2k-1) rho)`.
    pub fn transport_floor(&self) -> f64 {
        1.0 / ((2 * self.k - 1) as f64 * self.rho)
    }
}

/// Three evaluations of the total variation between b-snapshot distributions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TvReport {
    /// `1/2 sum_{l=2k-1}^{b} C(b,l) 2^l |g_l(d1) - g_l(d2)|`.
    pub closed_form: f64,
    /// `1/2 || dg Pas^{-1} B ||_1` with `B = diag(C(b,i))`, exact given the
    /// moment gap.
    pub pascal: f64,
    /// `1/2 sum_s |P1(s) - P2(s)|` over all `s` in `{0,1}^b`, when `b` is
    /// small enough to enumerate.
    pub brute_force: Option<f64>,
}

/// Total variation between the b-snapshot distributions of two spike
/// distributions on `[0, 1]` with `k = max(k1, k2)` spikes whose first
/// `2k-1` raw moments agree.
pub fn tv_snapshot_distance(d1: &KSpikeDistribution, d2: &KSpikeDistribution, b: usize) -> Result<TvReport> {
    let k = d1.k().max(d2.k());
    if b < 2 * k - 1 {
        return Err(invalid(format!("aperture b = {b} is below 2k-1 = {}", 2 * k - 1)));
    }
    if !d1.on_unit_interval() || !d2.on_unit_interval() {
        return Err(invalid("spike locations must lie in [0, 1]"));
    }
    let g1 = moments_of(d1, b + 1).values;
    let g2 = moments_of(d2, b + 1).values;
    let dg: Vec<f64> = g1.iter().zip(&g2).map(|(a, c)| a - c).collect();
    if dg[..2 * k - 1].iter().any(|v| v.abs() > MOMENT_TOL) {
        return Err(invalid("the first 2k-1 raw moments differ; the closed form does not apply"));
    }
    let mut closed = 0.0;
    for l in 2 * k - 1..=b {
        closed += binomial(b, l).ok_or(Error::Overflow(b))? as f64 * 2f64.powi(l as i32) * dg[l].abs();
    }
    Ok(TvReport { closed_form: 0.5 * closed, pascal: tv_via_pascal(&dg)?, brute_force: brute_force_tv(d1, d2, b).ok() })
}

/// `1/2 || dg Pas_{b+1}^{-1} B ||_1` for a moment gap `dg` of length `b+1`.
pub fn tv_via_pascal(dg: &[f64]) -> Result<f64> {
    let size = dg.len();
    let b = size - 1;
    let pair = pascal_pair(size)?;
    let mut total = 0.0;
    for j in 0..size {
        let entry: f64 = (j..size).map(|i| dg[i] * pair.inv[i][j] as f64).sum();
        total += (entry * binomial(b, j).ok_or(Error::Overflow(b))? as f64).abs();
    }
    Ok(0.5 * total)
}

/// Probability of the bit string `s` (lowest `b` bits) under the spike
/// distribution.
fn string_probability(d: &KSpikeDistribution, s: u64, b: usize) -> f64 {
    let ones = (s & ((1u64 << b) - 1)).count_ones() as i32;
    d.weights().iter().zip(d.locations()).map(|(w, a)| w * a.powi(ones) * (1.0 - a).powi(b as i32 - ones)).sum()
}

/// `1/2 sum over {0,1}^b of |P1(s) - P2(s)|`, enumerating every string.
pub fn brute_force_tv(d1: &KSpikeDistribution, d2: &KSpikeDistribution, b: usize) -> Result<f64> {
    if b > MAX_ENUMERATION {
        return Err(invalid(format!("aperture {b} too large to enumerate")));
    }
    if b == 0 {
        return Ok(0.0);
    }
    let total: f64 = (0..1u64 << b).map(|s| (string_probability(d1, s, b) - string_probability(d2, s, b)).abs()).sum();
    Ok(0.5 * total)
}

/// Total variation between the m-snapshot distributions of the pair.
pub fn aperture_indistinguishability(pair: &HardPair, m: usize) -> Result<f64> {
    brute_force_tv(&pair.first, &pair.second, m)
}

/// Sample-size lower bounds for telling the pair apart with error at most
/// `psi` from b-snapshots.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SampleSizeReport {
    pub psi: f64,
    /// `rho^(2k-1) / (8 3^b) ln(1 / 4 psi)`.
    pub from_bound: f64,
    /// `1 / (4 TV) ln(1 / (1 - (1 - 2 psi)^2))` with the measured TV.
    pub from_tv: f64,
}

pub fn implied_sample_size(pair: &HardPair, tv: f64, psi: f64) -> Result<SampleSizeReport> {
    if !(psi > 0.0 && psi < 0.25) {
        return Err(invalid(format!("psi must lie in (0, 1/4), got {psi}")));
    }
    let from_bound = pair.rho.powi((2 * pair.k - 1) as i32) / (8.0 * 3f64.powi(pair.b as i32)) * (1.0 / (4.0 * psi)).ln();
    let from_tv = 1.0 / (4.0 * tv) * (1.0 / (1.0 - (1.0 - 2.0 * psi).powi(2))).ln();
    Ok(SampleSizeReport { psi, from_bound, from_tv })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_spike_pair() {
        let p = hard_pair(1, 1, 2.0).unwrap();
        assert_eq!(p.first.locations(), &[0.0]);
        assert_eq!(p.second.locations(), &[0.5]);
        assert!((p.lp_value - 1.0).abs() < 1e-12 && p.lp_value <= p.lp_bound);
        assert_eq!(p.lp_bound, 6.0);
    }

    #[test]
    fn two_spike_pair() {
        let p = hard_pair(2, 3, 2.0).unwrap();
        assert!(p.lp_value <= 13.5);
        assert!(p.low_moment_gap <= MOMENT_TOL);
        let sy: f64 = p.first.weights().iter().sum();
        let sz: f64 = p.second.weights().iter().sum();
        assert!((sy - 1.0).abs() < 1e-10 && (sz - 1.0).abs() < 1e-10);
        assert!((p.separation() - 2.0 / 6.0).abs() < 1e-15);
        assert!(p.transport().unwrap() >= p.transport_floor() - 1e-12);
    }

    #[test]
    fn tv_examples() {
        let a = KSpikeDistribution::new(vec![1.0], vec![0.0]).unwrap();
        let b = KSpikeDistribution::new(vec![1.0], vec![0.5]).unwrap();
        let r = tv_snapshot_distance(&a, &b, 1).unwrap();
        assert!((r.closed_form - 0.5).abs() < 1e-15);
        assert!((r.brute_force.unwrap() - 0.5).abs() < 1e-15);
        assert!((r.pascal - 0.5).abs() < 1e-15);
        let same = tv_snapshot_distance(&b, &b, 4).unwrap();
        assert_eq!((same.closed_form, same.brute_force), (0.0, Some(0.0)));
        let p = hard_pair(2, 3, 2.0).unwrap();
        let r = tv_snapshot_distance(&p.first, &p.second, 3).unwrap();
        assert!((r.closed_form - r.brute_force.unwrap()).abs() < 1e-10);
    }

    #[test]
    fn mismatched_moments_rejected() {
        let a = KSpikeDistribution::new(vec![0.5, 0.5], vec![0.0, 1.0]).unwrap();
        let b = KSpikeDistribution::new(vec![0.5, 0.5], vec![0.1, 0.9]).unwrap();
        assert!(tv_snapshot_distance(&a, &b, 3).is_err());
    }

    #[test]
    fn low_aperture_is_blind() {
        let p = hard_pair(2, 3, 2.0).unwrap();
        assert!(aperture_indistinguishability(&p, 2).unwrap() <= 1e-6);
        assert_eq!(aperture_indistinguishability(&p, 0).unwrap(), 0.0);
        let p = hard_pair(1, 1, 2.0).unwrap();
        assert_eq!(aperture_indistinguishability(&p, 0).unwrap(), 0.0);
        assert!((aperture_indistinguishability(&p, 1).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn parameter_checks() {
        assert!(hard_pair(2, 2, 2.0).is_err());
        assert!(hard_pair(2, 3, 1.5).is_err());
        assert!(hard_pair(0, 3, 2.0).is_err());
    }
}
