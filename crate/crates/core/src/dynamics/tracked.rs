use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::env::{log_level_sum, ExtremeRecord, Landscape};
use crate::error::{Error, Result};

/// A first-level configuration from the low-lying list.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackedClass {
    /// 1-based rank after removing repeated first-level configurations.
    pub rank: usize,
    pub sigma1: u64,
    /// Second-level configuration of the record, the "matched" one.
    pub sigma2: u64,
    pub xi1: f64,
    pub w: f64,
}

/// Ranked first-level classes split by their `W` statistic around `L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackedSet {
    pub classes: Vec<TrackedClass>,
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "M")]
    pub m: usize,
    /// Ranks of the `M` best classes with `W > L`.
    pub i_m: Vec<usize>,
    /// Ranks of the `M` best classes with `W < L`.
    pub j_m: Vec<usize>,
}

impl TrackedSet {
    pub fn new(records: &[ExtremeRecord], l: f64, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParams("M must be positive".into()));
        }
        let mut seen = HashSet::new();
        let classes: Vec<TrackedClass> = records
            .iter()
            .filter(|r| seen.insert(r.sigma1))
            .enumerate()
            .map(|(i, r)| TrackedClass {
                rank: i + 1,
                sigma1: r.sigma1,
                sigma2: r.sigma2,
                xi1: r.xi1,
                w: r.w,
            })
            .collect();
        let i_m = classes
            .iter()
            .filter(|c| c.w > l)
            .take(m)
            .map(|c| c.rank)
            .collect();
        let j_m = classes
            .iter()
            .filter(|c| c.w < l)
            .take(m)
            .map(|c| c.rank)
            .collect();
        Ok(TrackedSet {
            classes,
            l,
            m,
            i_m,
            j_m,
        })
    }

    pub fn class(&self, rank: usize) -> Option<&TrackedClass> {
        rank.checked_sub(1).and_then(|i| self.classes.get(i))
    }

    /// Rank of the class containing `sigma1`, or `None` for "other".
    pub fn phi(&self, sigma1: u64) -> Option<usize> {
        self.classes
            .iter()
            .find(|c| c.sigma1 == sigma1)
            .map(|c| c.rank)
    }

    /// Renewal reference `i₁`: the member of `I_M` with the smallest `W`.
    pub fn reference(&self) -> Option<usize> {
        self.i_m
            .iter()
            .copied()
            .min_by(|&a, &b| self.classes[a - 1].w.total_cmp(&self.classes[b - 1].w))
    }

    /// Occupation shares `Σγ(ℓ) / Σ_{i∈ranks} Σγ(i)` predicted from level sums.
    pub fn predicted_shares<L: Landscape + ?Sized>(
        &self,
        env: &L,
        ranks: &[usize],
    ) -> Result<Vec<f64>> {
        let logs: Vec<f64> = ranks
            .iter()
            .map(|&r| {
                self.class(r)
                    .map(|c| log_level_sum(env, c.sigma1))
                    .ok_or_else(|| Error::InvalidParams(format!("rank {r} is not tracked")))
            })
            .collect::<Result<_>>()?;
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = logs.iter().map(|l| (l - max).exp()).sum();
        Ok(logs.iter().map(|l| (l - max).exp() / total).collect())
    }
}
