use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::normal::{std_normal_cdf, std_normal_quantile};
use super::oracle::{EnergyOracle, EnvHook, Landscape};
use super::params::{beta_star, kappa, DerivedParams};
use crate::error::{Error, Result};

/// Extreme-value scaling `u_N(x)` for the maximum of `2^N` standard Gaussians.
pub fn u_scale(d: &DerivedParams, x: f64) -> f64 {
    u_scale_at(d.n(), x)
}

/// `u_N(x)` for an arbitrary system size, without building a model.
pub fn u_scale_at(n: u32, x: f64) -> f64 {
    let bsn = beta_star() * (n as f64).sqrt();
    x / bsn + bsn - ((n as f64).ln() + kappa()) / (2.0 * bsn)
}

/// Inverse of [`u_scale`].
pub fn u_unscale(d: &DerivedParams, y: f64) -> f64 {
    let bsn = d.beta_star * d.sqrt_n();
    bsn * (y - bsn) + ((d.n() as f64).ln() + d.kappa) / 2.0
}

/// `γ = exp((β/β_*) u)` together with its logarithm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaWeight {
    pub log_value: f64,
    pub value: f64,
}

pub fn gamma_weight(d: &DerivedParams, u_inv: f64) -> GammaWeight {
    let log_value = d.beta() / d.beta_star * u_inv;
    GammaWeight {
        log_value,
        value: log_value.exp(),
    }
}

/// Fluctuation of the first-level field around its leading order, `Ξ⁽¹⁾ − √(aN) β_*`.
pub fn w_statistic(d: &DerivedParams, xi1: f64) -> f64 {
    xi1 - (d.params.a * d.n() as f64).sqrt() * d.beta_star
}

/// One low-lying configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtremeRecord {
    pub rank: usize,
    pub sigma1: u64,
    pub sigma2: u64,
    pub xi_total: f64,
    pub xi1: f64,
    pub xi2: f64,
    pub u_inv: f64,
    pub w: f64,
}

impl ExtremeRecord {
    pub fn sigma<L: Landscape + ?Sized>(&self, env: &L) -> u64 {
        env.compose(self.sigma1, self.sigma2)
    }

    fn build<L: Landscape + ?Sized>(env: &L, rank: usize, sigma: u64) -> Self {
        let d = env.derived();
        let (wa, wb) = env.level_weights();
        let sigma1 = env.sigma1_of(sigma);
        let xi1 = env.xi1(sigma1);
        let xi2 = env.xi2(sigma);
        let xi_total = wa * xi1 + wb * xi2;
        ExtremeRecord {
            rank,
            sigma1,
            sigma2: env.sigma2_of(sigma),
            xi_total,
            xi1,
            xi2,
            u_inv: u_unscale(d, xi_total),
            w: w_statistic(d, xi1),
        }
    }
}

/// Candidate ordered by rank: larger energy first, smaller index on ties.
#[derive(Debug, Clone, Copy)]
struct Candidate {
    value: f64,
    sigma: u64,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    /// `Greater` means better ranked.
    fn cmp(&self, other: &Self) -> Ordering {
        self.value
            .total_cmp(&other.value)
            .then_with(|| other.sigma.cmp(&self.sigma))
    }
}

/// Bounded min-heap holding the best `k` candidates seen so far.
struct TopHeap {
    k: usize,
    heap: BinaryHeap<Reverse<Candidate>>,
}

impl TopHeap {
    fn new(k: usize) -> Self {
        TopHeap {
            k,
            heap: BinaryHeap::with_capacity(k + 1),
        }
    }

    fn worst(&self) -> Option<Candidate> {
        if self.heap.len() < self.k {
            None
        } else {
            self.heap.peek().map(|r| r.0)
        }
    }

    fn offer(&mut self, c: Candidate) -> bool {
        if self.heap.len() < self.k {
            self.heap.push(Reverse(c));
            return true;
        }
        match self.heap.peek() {
            Some(Reverse(w)) if c > *w => {
                self.heap.pop();
                self.heap.push(Reverse(c));
                true
            }
            _ => false,
        }
    }

    fn merge(mut self, other: TopHeap) -> TopHeap {
        for Reverse(c) in other.heap {
            self.offer(c);
        }
        self
    }

    fn into_sorted(self) -> Vec<Candidate> {
        let mut v: Vec<Candidate> = self.heap.into_iter().map(|r| r.0).collect();
        v.sort_unstable_by(|a, b| b.cmp(a));
        v
    }
}

/// Second-level uniforms below this cut cannot beat `worst` at this `σ₁`.
///
/// The margin keeps the skip test conservative against rounding in the
/// normal CDF and quantile; borderline values are always evaluated exactly.
fn uniform_cut(worst: Option<Candidate>, xi1_part: f64, wb: f64) -> f64 {
    match worst {
        None => 0.0,
        Some(c) => std_normal_cdf((c.value - xi1_part) / wb) - 1e-12,
    }
}

fn scan_sigma1(oracle: &EnergyOracle, heap: &mut TopHeap, sigma1: u64) {
    let d = oracle.derived();
    let (wa, wb) = oracle.level_weights();
    let xi1 = oracle.xi1(sigma1);
    let xi1_part = wa * xi1;
    let base = sigma1 << d.n2;
    let m2 = d.level2_states();
    if oracle.hook() != EnvHook::None {
        for s2 in 0..m2 {
            let sigma = base | s2;
            heap.offer(Candidate {
                value: xi1_part + wb * oracle.xi2(sigma),
                sigma,
            });
        }
        return;
    }
    let mut cut = uniform_cut(heap.worst(), xi1_part, wb);
    for s2 in 0..m2 {
        let sigma = base | s2;
        let u = oracle.uniform2(sigma);
        if u < cut {
            continue;
        }
        let value = xi1_part + wb * std_normal_quantile(u);
        if heap.offer(Candidate { value, sigma }) {
            cut = uniform_cut(heap.worst(), xi1_part, wb);
        }
    }
}

/// The `k` largest energies among configurations whose first-level field
/// passes `keep`, in decreasing order.
pub fn top_k_filtered<F>(oracle: &EnergyOracle, k: usize, keep: F) -> Result<Vec<ExtremeRecord>>
where
    F: Fn(f64) -> bool + Sync,
{
    let d = oracle.derived();
    if k == 0 {
        return Err(Error::InvalidParams("k must be positive".into()));
    }
    if k as u64 > d.states() {
        return Err(Error::TooManyRecords {
            k: k as u64,
            states: d.states(),
        });
    }
    let heap = (0..d.level1_states())
        .into_par_iter()
        .fold(
            || TopHeap::new(k),
            |mut heap, sigma1| {
                if keep(oracle.xi1(sigma1)) {
                    scan_sigma1(oracle, &mut heap, sigma1);
                }
                heap
            },
        )
        .reduce(|| TopHeap::new(k), TopHeap::merge);
    Ok(heap
        .into_sorted()
        .into_iter()
        .enumerate()
        .map(|(i, c)| ExtremeRecord::build(oracle, i + 1, c.sigma))
        .collect())
}

/// The `k` largest energies over all `2^N` configurations, streamed.
pub fn top_k(oracle: &EnergyOracle, k: usize) -> Result<Vec<ExtremeRecord>> {
    top_k_filtered(oracle, k, |_| true)
}

/// `ln Σ_{σ₂} γ^N(σ₁σ₂)`, accumulated in fixed `σ₂` order.
pub fn log_level_sum<L: Landscape + ?Sized>(env: &L, sigma1: u64) -> f64 {
    let d = env.derived();
    let ratio = d.beta() / d.beta_star;
    let (wa, wb) = env.level_weights();
    let xi1_part = wa * env.xi1(sigma1);
    let base = sigma1 << d.n2;
    let mut acc = LogSumExp::default();
    for s2 in 0..d.level2_states() {
        let xi = xi1_part + wb * env.xi2(base | s2);
        acc.add(ratio * u_unscale(d, xi));
    }
    acc.value()
}

/// `ln Σ_{σ₂} γ^N(σ₁σ₂)` for each record's first-level configuration.
pub fn log_level_sums<L: Landscape + ?Sized>(env: &L, records: &[ExtremeRecord]) -> Vec<f64> {
    records
        .iter()
        .map(|r| log_level_sum(env, r.sigma1))
        .collect()
}

/// `Σ_{σ₂} γ^N(σ₁σ₂)` for each record's first-level configuration.
pub fn level_sums<L: Landscape + ?Sized>(env: &L, records: &[ExtremeRecord]) -> Vec<f64> {
    log_level_sums(env, records)
        .into_iter()
        .map(f64::exp)
        .collect()
}

/// Streaming log-sum-exp accumulator.
#[derive(Debug, Clone, Copy)]
pub struct LogSumExp {
    max: f64,
    scaled: f64,
}

impl Default for LogSumExp {
    fn default() -> Self {
        LogSumExp {
            max: f64::NEG_INFINITY,
            scaled: 0.0,
        }
    }
}

impl LogSumExp {
    pub fn add(&mut self, log_term: f64) {
        if log_term <= self.max {
            self.scaled += (log_term - self.max).exp();
        } else {
            self.scaled = self.scaled * (self.max - log_term).exp() + 1.0;
            self.max = log_term;
        }
    }

    pub fn value(&self) -> f64 {
        if self.scaled == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.max + self.scaled.ln()
        }
    }
}

impl FromIterator<f64> for LogSumExp {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = LogSumExp::default();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}
