use rand::Rng;
use serde::{Deserialize, Serialize};

use super::engine::{SojournSampler, Visit};
use super::scales::{ScaleSelector, TimeScales};
use super::tracked::TrackedSet;
use crate::env::{log_level_sum, Landscape};
use crate::error::{Error, Result};
use crate::hitting::no_hit;
use crate::pointproc::{exponential_fit, FitReport};
use crate::stats::Summary;

pub const MIN_VISITS: usize = 100;

/// Empirical law of the rescaled visit durations to one tracked class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisitReport {
    pub rank: usize,
    pub sigma1: u64,
    pub w: f64,
    pub scale: ScaleSelector,
    pub scale_log: f64,
    pub visits: Vec<Visit>,
    pub psi: Summary,
    /// Exact finite-N mean `(N/N₁) 2^{-N₂} Σ_{σ₂} e^{β√N Ξ}` in scale units.
    pub predicted_mean: f64,
    pub exponential: FitReport,
    /// Fraction of visits that never reach the matched configuration.
    pub no_hit_fraction: f64,
    pub no_hit_se: f64,
    pub no_hit_predicted: f64,
    pub event_count: u64,
}

impl VisitReport {
    pub fn mean_rel_err(&self) -> f64 {
        (self.psi.mean - self.predicted_mean).abs() / self.predicted_mean
    }

    pub fn no_hit_z(&self) -> f64 {
        (self.no_hit_fraction - self.no_hit_predicted) / self.no_hit_se.max(f64::MIN_POSITIVE)
    }
}

/// `ln` of the mean visit duration to the class of `sigma1` when the second
/// level starts uniformly.
pub fn log_mean_visit<L: Landscape + ?Sized>(env: &L, sigma1: u64) -> f64 {
    let d = env.derived();
    let n = d.n() as f64;
    let beta = d.beta();
    let shift = beta * (d.beta_star * n - (n.ln() + d.kappa) / (2.0 * d.beta_star));
    (n / d.n1 as f64).ln() - d.n2 as f64 * std::f64::consts::LN_2
        + log_level_sum(env, sigma1)
        + shift
}

/// Samples independent visits to the class of `rank`, each starting from a
/// uniform second-level configuration, which is the stationary law of the
/// second-level walk.
pub fn visit_experiment<L: Landscape + ?Sized, R: Rng + ?Sized>(
    env: &L,
    tracked: &TrackedSet,
    rank: usize,
    scales: &TimeScales,
    scale: ScaleSelector,
    replicas: usize,
    rng: &mut R,
) -> Result<VisitReport> {
    if replicas < MIN_VISITS {
        return Err(Error::InsufficientSample {
            need: MIN_VISITS,
            got: replicas,
        });
    }
    let class = *tracked.class(rank).ok_or(Error::NoVisits { rank })?;
    let d = *env.derived();
    let scale_log = scales.log_of(scale);
    let inv_scale = (-scale_log).exp();
    let mut sampler = SojournSampler::new(d.n2)?;
    let mut events = 0u64;
    let visits: Vec<Visit> = (0..replicas)
        .map(|_| {
            let start = rng.random_range(0..d.level2_states());
            let jumps = SojournSampler::jumps(env, class.sigma1, rng);
            events += jumps;
            let s = sampler.finish(env, class.sigma1, start, Some(class.sigma2), jumps, rng);
            let ups = s.upsilon * inv_scale;
            Visit::new(ups, s.time * inv_scale - ups)
        })
        .collect();
    let psis: Vec<f64> = visits.iter().map(|v| v.psi).collect();
    let predicted_mean = (log_mean_visit(env, class.sigma1) - scale_log).exp();
    let misses = visits.iter().filter(|v| v.upsilon == 0.0).count() as f64;
    let frac = misses / replicas as f64;
    let predicted = no_hit(&d, class.xi1);
    Ok(VisitReport {
        rank,
        sigma1: class.sigma1,
        w: class.w,
        scale,
        scale_log,
        psi: Summary::of(&psis),
        exponential: exponential_fit(&psis, predicted_mean)?,
        visits,
        predicted_mean,
        no_hit_fraction: frac,
        no_hit_se: (predicted * (1.0 - predicted) / replicas as f64).sqrt(),
        no_hit_predicted: predicted,
        event_count: events,
    })
}
