//! Seeded snapshot generation, projections onto directions, and randomized
//! rounding of `[0, 1]`-valued snapshots to bits.
//!
//! Every random stream is a ChaCha8 keystream selected by `(seed, stream)`.
//! Row `i` of a batch reads from its own fixed window of that keystream, so
//! batch contents depend only on `(seed, stream, i)` and not on how rows are
//! scheduled across threads.

use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, WeightedAliasIndex};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{KSpikeDistribution, MixtureSource};

/// Address of a deterministic random stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

// 2^32 keystream words per row.
const ROW_WINDOW_SHIFT: u32 = 32;

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    /// A child stream, deterministically derived from this one and `tag`.
    pub fn derive(&self, tag: u64) -> Self {
        Self { seed: self.seed, stream: splitmix(self.stream ^ splitmix(tag.wrapping_add(0x5851_f42d_4c95_7f2d))) }
    }

    /// Sequential generator over the whole stream.
    pub fn generator(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }

    /// Generator positioned at the window reserved for `row`.
    pub fn row_generator(&self, row: u64) -> ChaCha8Rng {
        let mut rng = self.generator();
        rng.set_word_pos((row as u128) << ROW_WINDOW_SHIFT);
        rng
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A multiset of m-snapshots: each row holds `aperture` item indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SnapshotBatch {
    aperture: usize,
    items: Vec<usize>,
}

impl SnapshotBatch {
    pub fn new(aperture: usize) -> Self {
        Self { aperture, items: Vec::new() }
    }

    pub fn from_rows(aperture: usize, rows: &[Vec<usize>]) -> Result<Self> {
        let mut b = Self::new(aperture);
        for r in rows {
            b.push(r)?;
        }
        Ok(b)
    }

    pub fn push(&mut self, row: &[usize]) -> Result<()> {
        if row.len() != self.aperture {
            return Err(invalid(format!("row of length {} in a batch of aperture {}", row.len(), self.aperture)));
        }
        self.items.extend_from_slice(row);
        Ok(())
    }

    pub fn aperture(&self) -> usize {
        self.aperture
    }

    pub fn len(&self) -> usize {
        if self.aperture == 0 {
            0
        } else {
            self.items.len() / self.aperture
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.items[i * self.aperture..(i + 1) * self.aperture]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[usize]> + '_ {
        self.items.chunks_exact(self.aperture.max(1)).take(self.len())
    }

    /// Rows `range` as a new batch.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Self {
        let m = self.aperture;
        Self { aperture: m, items: self.items[range.start * m..range.end * m].to_vec() }
    }

    /// Checks every item against the domain size.
    pub fn check_domain(&self, n: usize) -> Result<()> {
        match self.items.iter().find(|&&i| i >= n) {
            Some(i) => Err(invalid(format!("item {i} outside domain of size {n}"))),
            None => Ok(()),
        }
    }

    /// CSV with a leading `aperture=m` line and one snapshot per line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "aperture={}", self.aperture)?;
        for row in self.rows() {
            let line: Vec<String> = row.iter().map(ToString::to_string).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines.next().ok_or(Error::Empty("snapshot file"))??;
        let aperture: usize = header
            .trim()
            .strip_prefix("aperture=")
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse(format!("bad header line {header:?}")))?;
        let mut batch = Self::new(aperture);
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() && aperture > 0 {
                continue;
            }
            let row = if line.is_empty() {
                vec![]
            } else {
                line.split(',')
                    .map(|t| t.trim().parse::<usize>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 2)))?
            };
            batch.push(&row)?;
        }
        Ok(batch)
    }
}

/// Alias-table sampler for a mixture source.
pub struct MixtureSampler {
    n: usize,
    component: WeightedAliasIndex<f64>,
    items: Vec<WeightedAliasIndex<f64>>,
}

impl MixtureSampler {
    pub fn new(src: &MixtureSource) -> Result<Self> {
        let table = |w: &[f64]| WeightedAliasIndex::new(w.to_vec()).map_err(|e| invalid(format!("alias table: {e}")));
        Ok(Self {
            n: src.n(),
            component: table(src.weights())?,
            items: src.constituents().iter().map(|p| table(p)).collect::<Result<_>>()?,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Draws one m-snapshot into `out`; returns the constituent used.
    pub fn draw_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [usize]) -> usize {
        let t = self.component.sample(rng);
        for slot in out.iter_mut() {
            *slot = self.items[t].sample(rng);
        }
        t
    }
}

/// `count` independent m-snapshots from `src`.
pub fn draw_snapshots(src: &MixtureSource, m: usize, count: usize, rng: RngStream) -> Result<SnapshotBatch> {
    let sampler = MixtureSampler::new(src)?;
    Ok(draw_with(&sampler, m, count, rng))
}

pub fn draw_with(sampler: &MixtureSampler, m: usize, count: usize, rng: RngStream) -> SnapshotBatch {
    let mut items = vec![0usize; m * count];
    if m > 0 {
        items.par_chunks_mut(m).enumerate().for_each(|(i, row)| {
            let mut g = rng.row_generator(i as u64);
            sampler.draw_into(&mut g, row);
        });
    }
    SnapshotBatch { aperture: m, items }
}

/// A Poisson-distributed sample count with the given mean.
pub fn poisson_count(mean: f64, rng: RngStream) -> Result<usize> {
    if mean <= 0.0 {
        return Ok(0);
    }
    let d = Poisson::new(mean).map_err(|e| invalid(format!("poisson mean {mean}: {e}")))?;
    Ok(d.sample(&mut rng.generator()) as usize)
}

/// The distribution of `x_i` under `i ~ p`: mass `sum_{i: x_i = beta} p_i` at
/// each distinct value `beta`, values ascending.
pub fn project_distribution(p: &[f64], x: &[f64]) -> Result<KSpikeDistribution> {
    if p.len() != x.len() || p.is_empty() {
        return Err(invalid("distribution and direction must have equal nonzero length"));
    }
    let mut pairs: Vec<(f64, f64)> = x.iter().copied().zip(p.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut values: Vec<f64> = Vec::new();
    let mut masses: Vec<f64> = Vec::new();
    for (v, m) in pairs {
        if values.last() == Some(&v) {
            *masses.last_mut().expect("nonempty") += m;
        } else {
            values.push(v);
            masses.push(m);
        }
    }
    KSpikeDistribution::on_line(masses, values)
}

/// Replaces each item `i` of a snapshot by `x_i`.
pub fn project_snapshot(row: &[usize], x: &[f64]) -> Vec<f64> {
    row.iter().map(|&i| x[i]).collect()
}

/// Randomized rounding: bit `i` is 1 with probability `values[i]`.
pub fn binarize<R: Rng + ?Sized>(values: &[f64], rng: &mut R) -> Result<Vec<bool>> {
    if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(invalid(format!("value {v} outside [0, 1]")));
    }
    // threshold drawn from (0, 1] so that 0 never rounds up and 1 always does
    Ok(values.iter().map(|&z| 1.0 - rng.gen::<f64>() <= z).collect())
}

/// Projects every snapshot of `batch` onto `x` (entries in `[0, 1]`),
/// binarizes it, and returns the histogram of the number of ones per row
/// (length `aperture + 1`).
pub fn projected_ones_histogram(batch: &SnapshotBatch, x: &[f64], rng: RngStream) -> Result<Vec<u64>> {
    if let Some(v) = x.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(invalid(format!("projection value {v} outside [0, 1]")));
    }
    batch.check_domain(x.len())?;
    let m = batch.aperture();
    let hist = (0..batch.len())
        .into_par_iter()
        .fold(
            || vec![0u64; m + 1],
            |mut h, i| {
                let mut g = rng.row_generator(i as u64);
                let ones = batch.row(i).iter().filter(|&&item| 1.0 - g.gen::<f64>() <= x[item]).count();
                h[ones] += 1;
                h
            },
        )
        .reduce(|| vec![0u64; m + 1], |mut a, b| {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
            a
        });
    Ok(hist)
}

/// Histogram of the number of ones in `count` binarized `aperture`-snapshots
/// of a spike distribution on `[0, 1]`: each row picks a spike by weight and
/// then draws `aperture` independent Bernoulli bits with that spike's mean.
pub fn spike_ones_histogram(d: &KSpikeDistribution, aperture: usize, count: usize, rng: RngStream) -> Result<Vec<u64>> {
    if !d.on_unit_interval() {
        return Err(invalid("spike locations must lie in [0, 1]"));
    }
    let pick = WeightedAliasIndex::new(d.weights().to_vec()).map_err(|e| invalid(format!("alias table: {e}")))?;
    let m = aperture;
    let hist = (0..count)
        .into_par_iter()
        .fold(
            || vec![0u64; m + 1],
            |mut h, i| {
                let mut g = rng.row_generator(i as u64);
                let a = d.locations()[pick.sample(&mut g)];
                let ones = (0..m).filter(|_| 1.0 - g.gen::<f64>() <= a).count();
                h[ones] += 1;
                h
            },
        )
        .reduce(|| vec![0u64; m + 1], |mut a, b| {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
            a
        });
    Ok(hist)
}
