use rand::Rng;
use serde::{Deserialize, Serialize};

use super::engine::{simulate, SimConfig};
use super::scales::TimeScales;
use super::tracked::TrackedSet;
use super::visits::log_mean_visit;
use crate::env::Landscape;
use crate::error::{Error, Result};
use crate::stats::{RatioEstimate, Summary};

/// Excursion statistics for one member of `I_M` or `J_M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenewalTerm {
    pub rank: usize,
    pub in_i: bool,
    /// Mean time per excursion in scale units.
    pub mean: Summary,
    /// Closed-form mean time per excursion in scale units.
    pub predicted_mean: f64,
    /// Time share relative to `R` and its level-sum prediction.
    pub share: RatioEstimate,
    pub predicted_share: f64,
    /// Mean number of entries per excursion (members of `I_M` only).
    pub entries: Option<Summary>,
}

impl RenewalTerm {
    pub fn share_z(&self) -> f64 {
        (self.share.ratio - self.predicted_share) / self.share.se
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenewalReport {
    pub reference: usize,
    pub excursions: usize,
    pub r: Summary,
    pub terms: Vec<RenewalTerm>,
    /// Largest `|R_k - Σ_m (F_{m,k} + Q_{m,k})|` over excursions.
    pub max_accounting_err: f64,
    pub event_count: u64,
    pub incomplete: bool,
}

/// Runs one long trajectory with renewal tracking and compares excursion
/// means with their closed forms.
pub fn renewal_experiment<L: Landscape + ?Sized, R: Rng + ?Sized>(
    env: &L,
    tracked: &TrackedSet,
    scales: &TimeScales,
    config: &SimConfig,
    rng: &mut R,
) -> Result<RenewalReport> {
    if tracked.m < 2 {
        return Err(Error::InvalidParams(format!(
            "renewal experiment needs M >= 2, got {}",
            tracked.m
        )));
    }
    if tracked.i_m.is_empty() || tracked.j_m.is_empty() {
        return Err(Error::InvalidParams(
            "renewal experiment needs I_M and J_M nonempty".into(),
        ));
    }
    let cfg = SimConfig {
        renewal: true,
        ..*config
    };
    let report = simulate(env, tracked, scales, &cfg, rng)?;
    let trace = report.renewal.as_ref().ok_or(Error::NoRenewal)?;
    if trace.r.len() < 2 {
        return Err(Error::NoRenewal);
    }
    let ranks: Vec<usize> = trace
        .i_ranks
        .iter()
        .chain(&trace.j_ranks)
        .copied()
        .collect();
    let shares = tracked.predicted_shares(env, &ranks)?;
    let mut terms = Vec::with_capacity(ranks.len());
    for (idx, &rank) in ranks.iter().enumerate() {
        let in_i = idx < trace.i_ranks.len();
        let times: Vec<f64> = if in_i {
            trace.f.iter().map(|f| f[idx]).collect()
        } else {
            trace
                .q
                .iter()
                .map(|q| q[idx - trace.i_ranks.len()])
                .collect()
        };
        let sigma1 = tracked
            .class(rank)
            .map(|c| c.sigma1)
            .ok_or(Error::NoRenewal)?;
        let entries = in_i.then(|| {
            let e: Vec<f64> = trace.entries.iter().map(|e| e[idx] as f64).collect();
            Summary::of(&e)
        });
        terms.push(RenewalTerm {
            rank,
            in_i,
            mean: Summary::of(&times),
            predicted_mean: (log_mean_visit(env, sigma1) - report.scale_log).exp(),
            share: RatioEstimate::of(&times, &trace.r),
            predicted_share: shares[idx],
            entries,
        });
    }
    let max_accounting_err = trace
        .f
        .iter()
        .zip(&trace.q)
        .zip(&trace.r)
        .map(|((f, q), r)| (r - f.iter().sum::<f64>() - q.iter().sum::<f64>()).abs())
        .fold(0.0, f64::max);
    Ok(RenewalReport {
        reference: trace.reference,
        excursions: trace.r.len(),
        r: Summary::of(&trace.r),
        terms,
        max_accounting_err,
        event_count: report.event_count,
        incomplete: report.incomplete,
    })
}
