use serde::{Deserialize, Serialize};

use super::extremes::{top_k_filtered, ExtremeRecord};
use super::normal::{std_normal_cdf, std_normal_quantile};
use super::oracle::{EnergyOracle, EnvHook, Landscape};
use crate::error::{Error, Result};

/// Maximum energy in a bin, or the empty-bin sentinel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinMax {
    Empty,
    Value { value: f64, sigma: u64 },
}

impl BinMax {
    pub fn value(&self) -> Option<f64> {
        match *self {
            BinMax::Empty => None,
            BinMax::Value { value, .. } => Some(value),
        }
    }

    fn absorb(&mut self, value: f64, sigma: u64) {
        let better = match *self {
            BinMax::Empty => true,
            BinMax::Value { value: v, sigma: s } => value > v || (value == v && sigma < s),
        };
        if better {
            *self = BinMax::Value { value, sigma };
        }
    }
}

/// Counts and maximum for one first-level interval `I_N^j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinStats {
    pub j: i64,
    pub lower: f64,
    pub upper: f64,
    pub count: u64,
    /// `2^{N1} P[X ∈ I_N^j]` for a standard Gaussian `X`.
    pub expected_count: f64,
    pub bin_max: BinMax,
    pub delta: f64,
    pub eps: f64,
}

impl BinStats {
    /// Binomial standard deviation of the count.
    pub fn count_sd(&self, level1_states: u64) -> f64 {
        let n = level1_states as f64;
        let p = self.expected_count / n;
        (n * p * (1.0 - p)).sqrt()
    }
}

/// Geometry of the first-level bins around `√(aN) β_*`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinGrid {
    pub center: f64,
    pub width: f64,
    pub j_max: i64,
    pub delta: f64,
    pub eps: f64,
}

impl BinGrid {
    pub fn new<L: Landscape + ?Sized>(env: &L, delta: f64, eps: f64) -> Result<Self> {
        if delta.is_nan() || delta <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "delta must be positive, got {delta}"
            )));
        }
        if !(eps > 0.0 && eps < 0.5) {
            return Err(Error::InvalidParams(format!(
                "eps must lie in (0, 1/2), got {eps}"
            )));
        }
        let d = env.derived();
        let n = d.n() as f64;
        Ok(BinGrid {
            center: (d.params.a * n).sqrt() * d.beta_star,
            width: n.powf(-(0.5 + delta)),
            j_max: n.powf(0.5 + delta + eps).floor() as i64,
            delta,
            eps,
        })
    }

    /// Bin index of a first-level field, if it lies inside the scanned range.
    pub fn bin_of(&self, xi1: f64) -> Option<i64> {
        let j = ((xi1 - self.center) / self.width).floor();
        if j.abs() <= self.j_max as f64 {
            Some(j as i64)
        } else {
            None
        }
    }

    pub fn bounds(&self, j: i64) -> (f64, f64) {
        (
            self.center + j as f64 * self.width,
            self.center + (j + 1) as f64 * self.width,
        )
    }

    pub fn bin_count(&self) -> usize {
        (2 * self.j_max + 1) as usize
    }
}

/// Per-bin counts `C(I_N^j)` and maxima `M_N^j` for `|j| ≤ N^{1/2+δ+ε}`.
pub fn bin_scan(oracle: &EnergyOracle, delta: f64, eps: f64) -> Result<Vec<BinStats>> {
    let grid = BinGrid::new(oracle, delta, eps)?;
    let d = oracle.derived();
    let n1_states = d.level1_states();
    let (wa, wb) = oracle.level_weights();
    let mut bins: Vec<BinStats> = (-grid.j_max..=grid.j_max)
        .map(|j| {
            let (lower, upper) = grid.bounds(j);
            BinStats {
                j,
                lower,
                upper,
                count: 0,
                expected_count: n1_states as f64 * (std_normal_cdf(upper) - std_normal_cdf(lower)),
                bin_max: BinMax::Empty,
                delta,
                eps,
            }
        })
        .collect();
    for sigma1 in 0..n1_states {
        let xi1 = oracle.xi1(sigma1);
        let Some(j) = grid.bin_of(xi1) else { continue };
        let bin = &mut bins[(j + grid.j_max) as usize];
        bin.count += 1;
        let base = sigma1 << d.n2;
        if oracle.hook() == EnvHook::None {
            // the quantile is monotone, so the largest uniform gives the largest field
            let (mut best_u, mut best_s2) = (f64::NEG_INFINITY, 0);
            for s2 in 0..d.level2_states() {
                let u = oracle.uniform2(base | s2);
                if u > best_u {
                    best_u = u;
                    best_s2 = s2;
                }
            }
            bin.bin_max
                .absorb(wa * xi1 + wb * std_normal_quantile(best_u), base | best_s2);
        } else {
            for s2 in 0..d.level2_states() {
                let sigma = base | s2;
                bin.bin_max.absorb(wa * xi1 + wb * oracle.xi2(sigma), sigma);
            }
        }
    }
    Ok(bins)
}

/// Top `k` configurations restricted to first-level fields inside the scanned bins.
pub fn binned_top_k(
    oracle: &EnergyOracle,
    delta: f64,
    eps: f64,
    k: usize,
) -> Result<Vec<ExtremeRecord>> {
    let grid = BinGrid::new(oracle, delta, eps)?;
    top_k_filtered(oracle, k, |xi1| grid.bin_of(xi1).is_some())
}

/// The `k` largest bin maxima, decreasing.
pub fn largest_bin_maxima(bins: &[BinStats], k: usize) -> Vec<f64> {
    let mut v: Vec<f64> = bins.iter().filter_map(|b| b.bin_max.value()).collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v.truncate(k);
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::extremes::top_k;
    use crate::env::params::ModelParams;

    #[test]
    fn counts_and_empty_sentinels() {
        let o = EnergyOracle::new(ModelParams::new(16, 0.5, 0.2, 1.5, 4)).unwrap();
        let bins = bin_scan(&o, 0.1, 0.25).unwrap();
        let grid = BinGrid::new(&o, 0.1, 0.25).unwrap();
        assert_eq!(bins.len(), grid.bin_count());
        let total: u64 = bins.iter().map(|b| b.count).sum();
        assert!(total <= 256);
        for b in &bins {
            assert_eq!(b.count == 0, b.bin_max == BinMax::Empty);
            assert!(b.j.abs() <= grid.j_max);
        }
    }

    #[test]
    fn bin_maxima_match_brute_force() {
        let o = EnergyOracle::new(ModelParams::new(12, 0.5, 0.2, 1.5, 8)).unwrap();
        let bins = bin_scan(&o, 0.1, 0.4).unwrap();
        let grid = BinGrid::new(&o, 0.1, 0.4).unwrap();
        for b in &bins {
            let mut want = BinMax::Empty;
            for sigma in 0..4096u64 {
                if grid.bin_of(o.xi1(o.sigma1_of(sigma))) == Some(b.j) {
                    want.absorb(o.xi(sigma), sigma);
                }
            }
            assert_eq!(b.bin_max, want, "bin {}", b.j);
        }
    }

    #[test]
    fn binned_top_k_equals_global_when_all_inside() {
        let mut agreed = 0;
        for seed in 0..10 {
            let o = EnergyOracle::new(ModelParams::new(14, 0.5, 0.2, 1.5, seed)).unwrap();
            let grid = BinGrid::new(&o, 0.1, 0.25).unwrap();
            let global = top_k(&o, 5).unwrap();
            let binned = binned_top_k(&o, 0.1, 0.25, 5).unwrap();
            if global.iter().all(|r| grid.bin_of(r.xi1).is_some()) {
                agreed += 1;
                assert_eq!(global, binned);
            }
        }
        assert!(agreed > 0);
    }

    #[test]
    fn rejects_bad_resolution() {
        let o = EnergyOracle::new(ModelParams::new(10, 0.5, 0.2, 1.5, 0)).unwrap();
        assert!(bin_scan(&o, 0.0, 0.25).is_err());
        assert!(bin_scan(&o, 0.1, 0.5).is_err());
    }
}
