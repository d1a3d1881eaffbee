//! Reduction to isotropic sources: items that are rare under the estimated
//! mean are eliminated and the rest are split into near-uniform copies.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::MixtureSource;
use crate::sampling::{RngStream, SnapshotBatch};

/// Frequencies of items in a batch of 1-snapshots.
pub fn estimate_r(batch: &SnapshotBatch, n: usize) -> Result<Vec<f64>> {
    if batch.aperture() != 1 {
        return Err(invalid(format!("1-snapshots required, got aperture {}", batch.aperture())));
    }
    if batch.is_empty() {
        return Err(Error::Empty("1-snapshot batch"));
    }
    batch.check_domain(n)?;
    let mut counts = vec![0u64; n];
    for row in batch.rows() {
        counts[row[0]] += 1;
    }
    let total = batch.len() as f64;
    Ok(counts.into_iter().map(|c| c as f64 / total).collect())
}

/// Assignment of original items to copies in the refined domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ItemMap {
    pub n: usize,
    pub sigma: f64,
    pub eliminated: Vec<usize>,
    /// Copy count per original item; 0 for eliminated items.
    pub splits: Vec<usize>,
    pub nprime: usize,
    /// Item `i` owns copies `offsets[i]..offsets[i] + splits[i]`.
    pub offsets: Vec<usize>,
}

/// Eliminates items with `r_i < 2 sigma / n` and splits each kept item into
/// `floor(n r_i / sigma)` copies.
pub fn build_refinement(rtilde: &[f64], sigma: f64) -> Result<ItemMap> {
    if !(sigma > 0.0 && sigma < 1.0) {
        return Err(invalid(format!("sigma must lie in (0, 1), got {sigma}")));
    }
    let n = rtilde.len();
    if n == 0 {
        return Err(Error::Empty("mean vector"));
    }
    let nf = n as f64;
    let mut eliminated = Vec::new();
    let mut splits = vec![0usize; n];
    let mut offsets = vec![0usize; n];
    let mut next = 0usize;
    for (i, &r) in rtilde.iter().enumerate() {
        offsets[i] = next;
        if r < 2.0 * sigma / nf {
            eliminated.push(i);
        } else {
            splits[i] = (nf * r / sigma).floor() as usize;
            next += splits[i];
        }
    }
    if next == 0 {
        return Err(Error::DegenerateRefinement { sigma });
    }
    Ok(ItemMap { n, sigma, eliminated, splits, nprime: next, offsets })
}

impl ItemMap {
    pub fn is_eliminated(&self, item: usize) -> bool {
        self.splits[item] == 0
    }

    /// The original item owning copy `j`.
    pub fn owner(&self, j: usize) -> usize {
        // offsets are nondecreasing; the owner is the last item starting at or before j with copies
        let mut lo = self.offsets.partition_point(|&o| o <= j) - 1;
        while self.splits[lo] == 0 {
            lo -= 1;
        }
        lo
    }

    /// Replaces every item of `row` by a uniformly chosen copy; `None` when
    /// the row contains an eliminated item.
    pub fn map_snapshot<R: Rng + ?Sized>(&self, row: &[usize], rng: &mut R) -> Option<Vec<usize>> {
        row.iter()
            .map(|&i| match self.splits[i] {
                0 => None,
                1 => Some(self.offsets[i]),
                s => Some(self.offsets[i] + rng.gen_range(0..s)),
            })
            .collect()
    }

    /// Maps a whole batch; row `i` uses the window of `rng` reserved for it.
    pub fn map_batch(&self, batch: &SnapshotBatch, rng: RngStream) -> Result<(SnapshotBatch, SurvivalStats)> {
        batch.check_domain(self.n)?;
        let mapped: Vec<Option<Vec<usize>>> = (0..batch.len())
            .into_par_iter()
            .map(|i| self.map_snapshot(batch.row(i), &mut rng.row_generator(i as u64)))
            .collect();
        let mut out = SnapshotBatch::new(batch.aperture());
        for row in mapped.iter().flatten() {
            out.push(row)?;
        }
        let stats = SurvivalStats { drawn: batch.len(), survived: out.len(), aperture: batch.aperture(), sigma: self.sigma };
        Ok((out, stats))
    }

    /// Aggregates copies back onto original items, zeroes eliminated items,
    /// and renormalizes each constituent.
    pub fn pull_back(&self, learned: &MixtureSource) -> Result<MixtureSource> {
        if learned.n() != self.nprime {
            return Err(invalid(format!("learned source has n = {}, refinement has {}", learned.n(), self.nprime)));
        }
        let constituents = learned
            .constituents()
            .iter()
            .map(|p| {
                let mut q: Vec<f64> =
                    (0..self.n).map(|i| p[self.offsets[i]..self.offsets[i] + self.splits[i]].iter().sum()).collect();
                let total: f64 = q.iter().sum();
                if total > 0.0 {
                    q.iter_mut().for_each(|v| *v /= total);
                } else {
                    let kept = (self.n - self.eliminated.len()) as f64;
                    (0..self.n).filter(|&i| !self.is_eliminated(i)).for_each(|i| q[i] = 1.0 / kept);
                }
                q
            })
            .collect();
        MixtureSource::new(learned.weights().to_vec(), constituents)
    }

    /// The refined source: each kept item's mass is divided evenly among its
    /// copies and each constituent is renormalized over kept items.
    pub fn refine_source(&self, src: &MixtureSource) -> Result<MixtureSource> {
        if src.n() != self.n {
            return Err(invalid(format!("source has n = {}, refinement has {}", src.n(), self.n)));
        }
        let constituents = src
            .constituents()
            .iter()
            .map(|p| {
                let kept: f64 = (0..self.n).filter(|&i| !self.is_eliminated(i)).map(|i| p[i]).sum();
                if kept <= 0.0 {
                    return Err(Error::DegenerateRefinement { sigma: self.sigma });
                }
                let mut q = vec![0.0; self.nprime];
                for i in 0..self.n {
                    let s = self.splits[i];
                    for j in 0..s {
                        q[self.offsets[i] + j] = p[i] / (s as f64 * kept);
                    }
                }
                Ok(q)
            })
            .collect::<Result<Vec<_>>>()?;
        MixtureSource::new(src.weights().to_vec(), constituents)
    }

    /// Mass of eliminated items under `p`.
    pub fn eliminated_mass(&self, p: &[f64]) -> f64 {
        self.eliminated.iter().map(|&i| p[i]).sum()
    }
}

/// How many snapshots survived the mapping.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurvivalStats {
    pub drawn: usize,
    pub survived: usize,
    pub aperture: usize,
    pub sigma: f64,
}

impl SurvivalStats {
    pub fn rate(&self) -> f64 {
        if self.drawn == 0 {
            1.0
        } else {
            self.survived as f64 / self.drawn as f64
        }
    }

    /// `(1 - 4 sigma)^m`, the survival rate guaranteed when the mean estimate
    /// is accurate.
    pub fn guaranteed_rate(&self) -> f64 {
        (1.0 - 4.0 * self.sigma).max(0.0).powi(self.aperture as i32)
    }
}

/// Default split granularity `eps zeta^2 / (32 k w_min)`.
pub fn default_sigma(eps: f64, zeta: f64, k: usize, w_min: f64) -> f64 {
    eps * zeta * zeta / (32.0 * k as f64 * w_min)
}

/// Sample count `ceil(8 (mu + 2) / sigma^3 * n ln n)` for estimating the mean.
pub fn mean_sample_count(n: usize, mu: f64, sigma: f64) -> f64 {
    let nf = n as f64;
    (8.0 * (mu + 2.0) / sigma.powi(3) * nf * nf.ln()).ceil()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn estimate_r_examples() {
        let b = SnapshotBatch::from_rows(1, &vec![vec![0]; 4]).unwrap();
        assert_eq!(estimate_r(&b, 3).unwrap(), vec![1.0, 0.0, 0.0]);
        let rows: Vec<Vec<usize>> = (0..10).map(|i| vec![usize::from(i >= 3)]).collect();
        let b = SnapshotBatch::from_rows(1, &rows).unwrap();
        assert_eq!(estimate_r(&b, 2).unwrap(), vec![0.3, 0.7]);
        assert!(estimate_r(&SnapshotBatch::new(1), 2).is_err());
    }

    #[test]
    fn refinement_examples() {
        let m = build_refinement(&[0.5, 0.5], 0.5).unwrap();
        assert_eq!((m.splits.clone(), m.nprime), (vec![2, 2], 4));
        let m = build_refinement(&[0.0, 0.5, 0.5], 0.1).unwrap();
        assert_eq!(m.eliminated, vec![0]);
        let m = build_refinement(&[0.25; 4], 0.01).unwrap();
        assert!(m.eliminated.is_empty() && m.nprime >= 4);
        assert!(matches!(build_refinement(&[0.0, 0.0], 0.5), Err(Error::DegenerateRefinement { .. })));
        assert!(build_refinement(&[1.0], 1.5).is_err());
    }

    #[test]
    fn owners() {
        let m = build_refinement(&[0.0, 0.3, 0.7], 0.2).unwrap();
        for i in 0..3 {
            for j in m.offsets[i]..m.offsets[i] + m.splits[i] {
                assert_eq!(m.owner(j), i);
            }
        }
    }

    #[test]
    fn map_snapshot_examples() {
        let m = build_refinement(&[0.0, 0.5, 0.5], 0.4).unwrap();
        let mut g = RngStream::new(0, 0).generator();
        assert_eq!(m.map_snapshot(&[1, 0], &mut g), None);
        // one copy per kept item: deterministic relabel
        let m = ItemMap { n: 3, sigma: 0.1, eliminated: vec![], splits: vec![1, 1, 1], nprime: 3, offsets: vec![0, 1, 2] };
        assert_eq!(m.map_snapshot(&[2, 0, 2], &mut g), Some(vec![2, 0, 2]));
    }

    #[test]
    fn pull_back_examples() {
        let m = ItemMap { n: 2, sigma: 0.1, eliminated: vec![], splits: vec![1, 1], nprime: 2, offsets: vec![0, 1] };
        let src = MixtureSource::new(vec![1.0], vec![vec![0.3, 0.7]]).unwrap();
        assert_eq!(m.pull_back(&src).unwrap(), src);
        let m = ItemMap { n: 1, sigma: 0.5, eliminated: vec![], splits: vec![2], nprime: 2, offsets: vec![0] };
        let one = MixtureSource::new(vec![1.0], vec![vec![1.0]]).unwrap();
        let split = m.refine_source(&one).unwrap();
        assert_eq!(split.constituent(0), &[0.5, 0.5]);
        assert_eq!(m.pull_back(&split).unwrap(), one);
    }
}
