use std::io::Write;
use std::time::Instant;

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use super::rates::{level1_prob, log_mean_holding, step, DynState};
use super::scales::{ScaleSelector, TimeScales};
use super::tracked::TrackedSet;
use crate::env::Landscape;
use crate::error::{Error, Result};
use crate::stats::{exponential, geometric};

pub const DEFAULT_BUDGET: u64 = 1_000_000_000;
/// Largest second level the sojourn sampler keeps a dense visit table for.
const MAX_DENSE_LEVEL: u32 = 26;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    /// Every jump is simulated.
    Naive,
    /// Whole first-level sojourns are sampled at once.
    #[default]
    Aggregated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub engine: Engine,
    /// Horizon in units of the selected scale.
    pub horizon: f64,
    pub scale: ScaleSelector,
    pub budget: u64,
    pub renewal: bool,
    /// Also record the occupation of every first-level class.
    pub class_occupation: bool,
}

impl SimConfig {
    pub fn new(horizon: f64, scale: ScaleSelector) -> Self {
        SimConfig {
            engine: Engine::Aggregated,
            horizon,
            scale,
            budget: DEFAULT_BUDGET,
            renewal: false,
            class_occupation: false,
        }
    }
}

/// One visit to a tracked class, split into time at the matched
/// configuration (`upsilon`) and the rest (`gamma_vis`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Visit {
    pub psi: f64,
    pub upsilon: f64,
    pub gamma_vis: f64,
}

impl Visit {
    pub fn new(upsilon: f64, gamma_vis: f64) -> Self {
        Visit {
            psi: upsilon + gamma_vis,
            upsilon,
            gamma_vis,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankOccupation {
    pub rank: usize,
    pub sigma1: u64,
    pub time: f64,
    pub visits: Vec<Visit>,
}

/// Per-excursion times between successive entries into the reference class.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RenewalTrace {
    pub reference: usize,
    pub i_ranks: Vec<usize>,
    pub j_ranks: Vec<usize>,
    /// `f[k][m]`: time in the `m`-th member of `I_M` during excursion `k`.
    pub f: Vec<Vec<f64>>,
    /// `q[k][m]`: time in the `m`-th member of `J_M` during excursion `k`.
    pub q: Vec<Vec<f64>>,
    /// `r[k] = Σ_m f[k][m] + q[k][m]`.
    pub r: Vec<f64>,
    /// Entries into the `m`-th member of `I_M` during excursion `k`.
    pub entries: Vec<Vec<u32>>,
}

/// Everything accumulated along one trajectory. Times are in units of the
/// selected scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryReport {
    pub engine: Engine,
    pub scale: ScaleSelector,
    pub scale_log: f64,
    pub horizon: f64,
    pub total_time: f64,
    pub occupation: Vec<RankOccupation>,
    pub other: f64,
    pub class_occupation: Option<Vec<f64>>,
    pub renewal: Option<RenewalTrace>,
    pub event_count: u64,
    /// True when the event budget ran out before the horizon.
    pub incomplete: bool,
    #[serde(skip)]
    pub wall_time: f64,
}

impl TrajectoryReport {
    pub fn occupation_of(&self, rank: usize) -> Option<f64> {
        self.occupation
            .iter()
            .find(|o| o.rank == rank)
            .map(|o| o.time)
    }

    pub fn tracked_time(&self) -> f64 {
        self.occupation.iter().map(|o| o.time).sum()
    }
}

/// Scratch space for sampling sojourns on a fixed second level.
pub(crate) struct SojournSampler {
    counts: Vec<u32>,
    touched: Vec<u64>,
}

/// Outcome of one first-level sojourn, in physical time.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Sojourn {
    pub time: f64,
    pub upsilon: f64,
    pub end_sigma2: u64,
}

impl SojournSampler {
    pub fn new(n2: u32) -> Result<Self> {
        if n2 > MAX_DENSE_LEVEL {
            return Err(Error::TooLarge {
                states: 1 << n2,
                max: 1 << MAX_DENSE_LEVEL,
            });
        }
        Ok(SojournSampler {
            counts: vec![0; 1 << n2],
            touched: Vec::new(),
        })
    }

    /// Number of jumps in the sojourn; the caller checks it against a budget
    /// before calling [`Self::finish`].
    pub fn jumps<L: Landscape + ?Sized, R: Rng + ?Sized>(env: &L, sigma1: u64, rng: &mut R) -> u64 {
        geometric(rng, level1_prob(env, env.xi1(sigma1)))
    }

    /// Walks `jumps - 1` second-level steps from `start` and sums the holdings
    /// grouped by configuration.
    pub fn finish<L: Landscape + ?Sized, R: Rng + ?Sized>(
        &mut self,
        env: &L,
        sigma1: u64,
        start: u64,
        matched: Option<u64>,
        jumps: u64,
        rng: &mut R,
    ) -> Sojourn {
        let n2 = env.derived().n2;
        let mut s2 = start;
        self.visit(s2);
        for _ in 1..jumps {
            s2 ^= 1 << rng.random_range(0..n2);
            self.visit(s2);
        }
        let (mut time, mut upsilon) = (0.0, 0.0);
        for &v in &self.touched {
            let count = std::mem::take(&mut self.counts[v as usize]);
            let mean = log_mean_holding(env, env.compose(sigma1, v)).exp();
            let dt = if count == 1 {
                exponential(rng, mean)
            } else {
                mean * Gamma::new(count as f64, 1.0)
                    .expect("positive shape")
                    .sample(rng)
            };
            if Some(v) == matched {
                upsilon = dt;
            }
            time += dt;
        }
        self.touched.clear();
        Sojourn {
            time,
            upsilon,
            end_sigma2: s2,
        }
    }

    fn visit(&mut self, s2: u64) {
        let c = &mut self.counts[s2 as usize];
        if *c == 0 {
            self.touched.push(s2);
        }
        *c += 1;
    }
}

struct Accounts<'a> {
    tracked: &'a TrackedSet,
    occupation: Vec<RankOccupation>,
    other: f64,
    classes: Option<Vec<f64>>,
    renewal: Option<RenewalTrace>,
    open: Option<(Vec<f64>, Vec<f64>, Vec<u32>)>,
}

impl<'a> Accounts<'a> {
    fn new(tracked: &'a TrackedSet, config: &SimConfig, level1_states: u64) -> Result<Self> {
        let renewal = if config.renewal {
            let reference = tracked.reference().ok_or(Error::NoRenewal)?;
            if tracked.j_m.is_empty() {
                return Err(Error::InvalidParams(
                    "renewal tracking needs J_M nonempty".into(),
                ));
            }
            Some(RenewalTrace {
                reference,
                i_ranks: tracked.i_m.clone(),
                j_ranks: tracked.j_m.clone(),
                ..Default::default()
            })
        } else {
            None
        };
        Ok(Accounts {
            tracked,
            occupation: tracked
                .classes
                .iter()
                .map(|c| RankOccupation {
                    rank: c.rank,
                    sigma1: c.sigma1,
                    time: 0.0,
                    visits: Vec::new(),
                })
                .collect(),
            other: 0.0,
            classes: config
                .class_occupation
                .then(|| vec![0.0; level1_states as usize]),
            renewal,
            open: None,
        })
    }

    fn enter(&mut self, rank: Option<usize>) {
        let Some(trace) = self.renewal.as_mut() else {
            return;
        };
        if rank == Some(trace.reference) {
            if let Some((f, q, e)) = self.open.take() {
                trace.r.push(f.iter().sum::<f64>() + q.iter().sum::<f64>());
                trace.f.push(f);
                trace.q.push(q);
                trace.entries.push(e);
            }
            self.open = Some((
                vec![0.0; trace.i_ranks.len()],
                vec![0.0; trace.j_ranks.len()],
                vec![0; trace.i_ranks.len()],
            ));
        }
        if let (Some(r), Some((_, _, e))) = (rank, self.open.as_mut()) {
            if let Some(m) = trace.i_ranks.iter().position(|&x| x == r) {
                e[m] += 1;
            }
        }
    }

    fn add(&mut self, sigma1: u64, rank: Option<usize>, dt: f64) {
        match rank {
            Some(r) => self.occupation[r - 1].time += dt,
            None => self.other += dt,
        }
        if let Some(c) = self.classes.as_mut() {
            c[sigma1 as usize] += dt;
        }
        if let (Some(trace), Some(r), Some((f, q, _))) =
            (self.renewal.as_ref(), rank, self.open.as_mut())
        {
            if let Some(m) = trace.i_ranks.iter().position(|&x| x == r) {
                f[m] += dt;
            } else if let Some(m) = trace.j_ranks.iter().position(|&x| x == r) {
                q[m] += dt;
            }
        }
    }

    fn close_visit(&mut self, rank: Option<usize>, visit: Visit) {
        if let Some(r) = rank {
            self.occupation[r - 1].visits.push(visit);
        }
    }

    fn rank_of(&self, sigma1: u64) -> Option<usize> {
        self.tracked.phi(sigma1)
    }
}

/// Runs the dynamics from a uniform initial configuration up to `horizon`
/// in the selected scale, or until the event budget is spent.
pub fn simulate<L: Landscape + ?Sized, R: Rng + ?Sized>(
    env: &L,
    tracked: &TrackedSet,
    scales: &TimeScales,
    config: &SimConfig,
    rng: &mut R,
) -> Result<TrajectoryReport> {
    if !(config.horizon > 0.0 && config.horizon.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "horizon must be positive, got {}",
            config.horizon
        )));
    }
    let started = Instant::now();
    let d = *env.derived();
    if d.n1 > MAX_DENSE_LEVEL {
        return Err(Error::TooLarge {
            states: d.states(),
            max: 1 << MAX_DENSE_LEVEL,
        });
    }
    let scale_log = scales.log_of(config.scale);
    let inv_scale = (-scale_log).exp();
    let horizon = config.horizon;
    let mut acc = Accounts::new(tracked, config, d.level1_states())?;
    let rank_table: Vec<Option<usize>> = (0..d.level1_states()).map(|s| acc.rank_of(s)).collect();
    let matched = |rank: Option<usize>| rank.and_then(|r| tracked.class(r)).map(|c| c.sigma2);

    let mut sigma = rng.random_range(0..d.states());
    let mut t = 0.0;
    let mut events = 0u64;
    let mut incomplete = false;

    match config.engine {
        Engine::Naive => {
            let mut sigma1 = env.sigma1_of(sigma);
            let mut rank = rank_table[sigma1 as usize];
            let mut target = matched(rank);
            acc.enter(rank);
            let (mut ups, mut gam) = (0.0, 0.0);
            loop {
                if events >= config.budget {
                    incomplete = true;
                    break;
                }
                let (next, hold) = step(env, DynState { sigma, t: 0.0 }, rng);
                events += 1;
                let dt = hold * inv_scale;
                if t + dt >= horizon {
                    acc.add(sigma1, rank, horizon - t);
                    t = horizon;
                    break;
                }
                t += dt;
                acc.add(sigma1, rank, dt);
                if Some(env.sigma2_of(sigma)) == target {
                    ups += dt;
                } else {
                    gam += dt;
                }
                sigma = next.sigma;
                let next1 = env.sigma1_of(sigma);
                if next1 != sigma1 {
                    acc.close_visit(rank, Visit::new(ups, gam));
                    (ups, gam) = (0.0, 0.0);
                    sigma1 = next1;
                    rank = rank_table[sigma1 as usize];
                    target = matched(rank);
                    acc.enter(rank);
                }
            }
        }
        Engine::Aggregated => {
            let mut sampler = SojournSampler::new(d.n2)?;
            let mut sigma1 = env.sigma1_of(sigma);
            let mut sigma2 = env.sigma2_of(sigma);
            loop {
                let rank = rank_table[sigma1 as usize];
                acc.enter(rank);
                let jumps = SojournSampler::jumps(env, sigma1, rng);
                if events.saturating_add(jumps) > config.budget {
                    incomplete = true;
                    break;
                }
                events += jumps;
                let s = sampler.finish(env, sigma1, sigma2, matched(rank), jumps, rng);
                let dt = s.time * inv_scale;
                if t + dt >= horizon {
                    acc.add(sigma1, rank, horizon - t);
                    t = horizon;
                    break;
                }
                t += dt;
                acc.add(sigma1, rank, dt);
                let ups = s.upsilon * inv_scale;
                acc.close_visit(rank, Visit::new(ups, dt - ups));
                sigma2 = s.end_sigma2;
                sigma1 ^= 1 << rng.random_range(0..d.n1);
            }
        }
    }

    Ok(TrajectoryReport {
        engine: config.engine,
        scale: config.scale,
        scale_log,
        horizon,
        total_time: t,
        occupation: acc.occupation,
        other: acc.other,
        class_occupation: acc.classes,
        renewal: acc.renewal,
        event_count: events,
        incomplete,
        wall_time: started.elapsed().as_secs_f64(),
    })
}

/// Writes visits as `rank,visit_index,psi,upsilon,gamma_vis`.
pub fn write_visits_csv<W: Write>(out: W, occupation: &[RankOccupation]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["rank", "visit_index", "psi", "upsilon", "gamma_vis"])?;
    for o in occupation {
        for (i, v) in o.visits.iter().enumerate() {
            w.write_record([
                o.rank.to_string(),
                i.to_string(),
                v.psi.to_string(),
                v.upsilon.to_string(),
                v.gamma_vis.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
