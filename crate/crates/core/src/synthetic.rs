//! Random wide isotropic sources for experiments.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{width_report, MixtureSource, WidthReport};
use crate::sampling::RngStream;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub n: usize,
    pub k: usize,
    /// Relative perturbation of each constituent around the uniform
    /// distribution, in `(0, 1)`.
    pub contrast: f64,
    /// Required width.
    pub zeta: f64,
    /// Weights are drawn uniformly from `[1, weight_spread]` and normalized.
    pub weight_spread: f64,
    pub max_tries: usize,
}

impl GeneratorConfig {
    pub fn new(n: usize, k: usize, zeta: f64) -> Self {
        Self { n, k, contrast: 0.45, zeta, weight_spread: 2.0, max_tries: 1000 }
    }
}

/// Draws `p^t_i` proportional to `1 +- contrast` with independent fair
/// signs, and rejects until the source is isotropic and `zeta`-wide.
pub fn random_wide_source(cfg: &GeneratorConfig, rng: RngStream) -> Result<(MixtureSource, WidthReport)> {
    if cfg.n == 0 || cfg.k == 0 {
        return Err(invalid("n and k must be positive"));
    }
    if !(cfg.contrast > 0.0 && cfg.contrast < 1.0) {
        return Err(invalid("contrast must lie in (0, 1)"));
    }
    if !(cfg.weight_spread >= 1.0) {
        return Err(invalid("weight spread must be at least 1"));
    }
    let mut g = rng.generator();
    for _ in 0..cfg.max_tries {
        let raw_w: Vec<f64> = (0..cfg.k).map(|_| g.gen_range(1.0..=cfg.weight_spread)).collect();
        let wsum: f64 = raw_w.iter().sum();
        let weights = raw_w.iter().map(|w| w / wsum).collect();
        let constituents = (0..cfg.k)
            .map(|_| {
                let p: Vec<f64> = (0..cfg.n).map(|_| if g.gen::<bool>() { 1.0 + cfg.contrast } else { 1.0 - cfg.contrast }).collect();
                let s: f64 = p.iter().sum();
                p.into_iter().map(|x| x / s).collect()
            })
            .collect();
        let src = MixtureSource::new(weights, constituents)?;
        let report = width_report(&src)?;
        if report.isotropic && (cfg.k == 1 || report.zeta >= cfg.zeta) {
            return Ok((src, report));
        }
    }
    Err(Error::NoConvergence {
        iterations: cfg.max_tries,
        detail: format!("no isotropic {}-wide source found; lower zeta or raise the contrast", cfg.zeta),
    })
}

/// Constituent `t` is uniform on the `t`-th of `k` equal blocks of `[n]`;
/// equal weights. Isotropic; for `k = 2` the width is exactly 1.
pub fn block_source(n: usize, k: usize) -> Result<MixtureSource> {
    if k == 0 || n % k != 0 {
        return Err(invalid("n must be a positive multiple of k"));
    }
    let b = n / k;
    let constituents = (0..k)
        .map(|t| (0..n).map(|i| if i / b == t { 1.0 / b as f64 } else { 0.0 }).collect())
        .collect();
    MixtureSource::uniform_weights(constituents)
}
