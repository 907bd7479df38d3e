//! Finite truncations of the K-process and comparison with rescaled dynamics.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::TrajectoryReport;
use crate::error::{Error, Result};
use crate::pointproc::{
    chi_square, ks_two_sample, sample_ppp, to_gamma_alpha, FitReport, DEFAULT_XMIN,
};
use crate::stats::exponential;

/// Mean holding times of a truncated K-process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KParams {
    pub gamma: Vec<f64>,
    #[serde(rename = "M")]
    pub m: usize,
    pub total: f64,
}

impl KParams {
    pub fn new(gamma: Vec<f64>) -> Result<Self> {
        if gamma.is_empty() {
            return Err(Error::InvalidParams(
                "K-process needs at least one state".into(),
            ));
        }
        if let Some(g) = gamma.iter().find(|g| !(**g > 0.0 && g.is_finite())) {
            return Err(Error::InvalidParams(format!(
                "holding means must be positive and finite, got {g}"
            )));
        }
        let total = gamma.iter().sum();
        Ok(KParams {
            m: gamma.len(),
            total,
            gamma,
        })
    }

    pub fn from_spec(spec: &KSpec) -> Result<Self> {
        match spec {
            KSpec::Weights { gamma } => KParams::new(gamma.clone()),
            KSpec::Ppp { ppp } => {
                if !(ppp.alpha > 0.0 && ppp.alpha < 1.0) {
                    return Err(Error::InvalidParams(format!(
                        "alpha must lie in (0, 1), got {}",
                        ppp.alpha
                    )));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(ppp.seed);
                let sample = sample_ppp(ppp.k, ppp.xmin, &mut rng)?;
                let mut gamma = to_gamma_alpha(&sample, ppp.alpha).values;
                if gamma.len() < ppp.m {
                    return Err(Error::InsufficientSample {
                        need: ppp.m,
                        got: gamma.len(),
                    });
                }
                gamma.truncate(ppp.m);
                KParams::new(gamma)
            }
        }
    }

    /// `γ_x / Σγ`.
    pub fn stationary(&self) -> Vec<f64> {
        self.gamma.iter().map(|g| g / self.total).collect()
    }
}

/// How the holding means are given in a configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KSpec {
    Weights { gamma: Vec<f64> },
    Ppp { ppp: PppSpec },
}

/// The `M` largest points of `Γ`, sampled from the extremal process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PppSpec {
    #[serde(rename = "K", default = "one")]
    pub k: f64,
    pub alpha: f64,
    #[serde(rename = "M")]
    pub m: usize,
    pub seed: u64,
    #[serde(default = "default_xmin")]
    pub xmin: f64,
}

fn one() -> f64 {
    1.0
}

fn default_xmin() -> f64 {
    DEFAULT_XMIN
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KInit {
    #[default]
    Uniform,
    /// 1-based state.
    State(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KTrajectoryReport {
    pub horizon: f64,
    /// Time per state, 1-based state `x` at index `x - 1`.
    pub occupation: Vec<f64>,
    /// Entries into each state by the jump chain, self-jumps included.
    pub transitions: Vec<u64>,
    /// Completed holding times per state.
    pub holdings: Vec<Vec<f64>>,
    pub jumps: u64,
}

impl KTrajectoryReport {
    pub fn fractions(&self) -> Vec<f64> {
        let total: f64 = self.occupation.iter().sum();
        self.occupation.iter().map(|o| o / total).collect()
    }

    /// Chi-square test that the jump chain lands uniformly.
    pub fn jump_uniformity(&self) -> Result<FitReport> {
        let observed: Vec<f64> = self.transitions.iter().map(|&c| c as f64).collect();
        let total: f64 = observed.iter().sum();
        let expected = vec![total / observed.len() as f64; observed.len()];
        chi_square(&observed, &expected, 0, "uniform jump chain")
    }
}

/// Uniform jump chain on `{1..M}` with self-jumps and exponential holdings.
pub fn simulate_k<R: Rng + ?Sized>(
    params: &KParams,
    horizon: f64,
    init: KInit,
    rng: &mut R,
) -> Result<KTrajectoryReport> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    let m = params.m;
    let mut x = match init {
        KInit::Uniform => rng.random_range(0..m),
        KInit::State(s) if (1..=m).contains(&s) => s - 1,
        KInit::State(s) => {
            return Err(Error::InvalidParams(format!(
                "initial state {s} outside 1..={m}"
            )))
        }
    };
    let mut occupation = vec![0.0; m];
    let mut transitions = vec![0u64; m];
    let mut holdings = vec![Vec::new(); m];
    let mut t = 0.0;
    let mut jumps = 0u64;
    loop {
        let h = exponential(rng, params.gamma[x]);
        if t + h >= horizon {
            occupation[x] += horizon - t;
            break;
        }
        t += h;
        occupation[x] += h;
        holdings[x].push(h);
        x = rng.random_range(0..m);
        transitions[x] += 1;
        jumps += 1;
    }
    Ok(KTrajectoryReport {
        horizon,
        occupation,
        transitions,
        holdings,
        jumps,
    })
}

/// Stationary law of the truncated chain from a dense linear solve.
pub fn exact_stationary(params: &KParams) -> Result<Vec<f64>> {
    let m = params.m;
    if m == 1 {
        return Ok(vec![1.0]);
    }
    // rows of Qᵀ with the last equation replaced by normalization
    let mut a = DMatrix::<f64>::zeros(m, m);
    for x in 0..m {
        let rate = 1.0 / (params.gamma[x] * m as f64);
        for y in 0..m {
            if y != x {
                a[(y, x)] += rate;
                a[(x, x)] -= rate;
            }
        }
    }
    for x in 0..m {
        a[(m - 1, x)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(m);
    b[m - 1] = 1.0;
    let pi = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Numerical("singular K-process generator".into()))?;
    Ok(pi.iter().copied().collect())
}

/// Observable tracked across truncation levels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KObservable {
    /// Stationary occupation of a 1-based state.
    Occupation(usize),
    /// Stationary occupation of states `1..=k`.
    TopShare(usize),
}

impl KObservable {
    fn eval(&self, pi: &[f64]) -> f64 {
        match *self {
            KObservable::Occupation(s) => pi[s - 1],
            KObservable::TopShare(k) => pi[..k.min(pi.len())].iter().sum(),
        }
    }

    fn min_states(&self) -> usize {
        match *self {
            KObservable::Occupation(s) | KObservable::TopShare(s) => s,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationRow {
    #[serde(rename = "M")]
    pub m: usize,
    pub value: f64,
    /// Change from the previous level (zero on the first row).
    pub drift: f64,
    /// `Σ_{i>M} γ_i` within the supplied weights.
    pub tail_mass: f64,
    /// `tail_mass / Σ_{i≤M} γ_i`.
    pub tail_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationReport {
    pub observable: KObservable,
    pub rows: Vec<TruncationRow>,
    /// Every drift is at most twice the previous level's tail ratio.
    pub bounded: bool,
}

pub fn truncation_diagnostic(
    gamma_full: &[f64],
    observable: KObservable,
    levels: &[usize],
) -> Result<TruncationReport> {
    if levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParams(
            "truncation levels must be increasing".into(),
        ));
    }
    if levels
        .first()
        .is_some_and(|&m| m < observable.min_states().max(1))
        || levels.last().is_some_and(|&m| m > gamma_full.len())
    {
        return Err(Error::InvalidParams(
            "truncation levels out of range".into(),
        ));
    }
    let full: f64 = gamma_full.iter().sum();
    let mut rows: Vec<TruncationRow> = Vec::with_capacity(levels.len());
    for &m in levels {
        let params = KParams::new(gamma_full[..m].to_vec())?;
        let value = observable.eval(&exact_stationary(&params)?);
        let tail_mass = full - params.total;
        rows.push(TruncationRow {
            m,
            value,
            drift: rows.last().map_or(0.0, |r| value - r.value),
            tail_mass,
            tail_ratio: tail_mass / params.total,
        });
    }
    let bounded = rows
        .windows(2)
        .all(|w| w[1].drift.abs() <= 2.0 * w[0].tail_ratio);
    Ok(TruncationReport {
        observable,
        rows,
        bounded,
    })
}

/// Occupation fractions, visit durations and entry counts keyed by label.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LimitObservables {
    pub fractions: BTreeMap<usize, f64>,
    pub durations: BTreeMap<usize, Vec<f64>>,
    pub entries: BTreeMap<usize, u64>,
}

impl From<&TrajectoryReport> for LimitObservables {
    fn from(r: &TrajectoryReport) -> Self {
        let mut out = LimitObservables::default();
        for o in &r.occupation {
            out.fractions.insert(o.rank, o.time / r.total_time);
            out.durations
                .insert(o.rank, o.visits.iter().map(|v| v.psi).collect());
            out.entries.insert(o.rank, o.visits.len() as u64);
        }
        out
    }
}

impl From<&KTrajectoryReport> for LimitObservables {
    fn from(r: &KTrajectoryReport) -> Self {
        let mut out = LimitObservables::default();
        for (i, f) in r.fractions().into_iter().enumerate() {
            out.fractions.insert(i + 1, f);
            out.durations.insert(i + 1, r.holdings[i].clone());
            out.entries.insert(i + 1, r.transitions[i]);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateComparison {
    pub rank: usize,
    pub state: usize,
    pub dyn_fraction: f64,
    pub k_fraction: f64,
    pub rel_diff: f64,
    pub durations_ks: Option<FitReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitComparison {
    pub states: Vec<StateComparison>,
    pub dyn_uniformity: Option<FitReport>,
    pub k_uniformity: Option<FitReport>,
}

impl LimitComparison {
    pub fn max_rel_diff(&self) -> f64 {
        self.states.iter().map(|s| s.rel_diff).fold(0.0, f64::max)
    }
}

fn uniformity(obs: &LimitObservables, labels: &[usize]) -> Option<FitReport> {
    let counts: Vec<f64> = labels.iter().map(|l| obs.entries[l] as f64).collect();
    let total: f64 = counts.iter().sum();
    if labels.len() < 2 || total == 0.0 {
        return None;
    }
    chi_square(
        &counts,
        &vec![total / labels.len() as f64; labels.len()],
        0,
        "uniform entries",
    )
    .ok()
}

/// Side-by-side comparison over `mapping = [(rank, state)]`. Fractions are
/// renormalized within the mapped labels on both sides.
pub fn compare_limit(
    dynamics: &LimitObservables,
    k: &LimitObservables,
    mapping: &[(usize, usize)],
) -> Result<LimitComparison> {
    for &(rank, state) in mapping {
        if !dynamics.fractions.contains_key(&rank) {
            return Err(Error::Mapping(format!(
                "rank {rank} missing from the dynamics report"
            )));
        }
        if !k.fractions.contains_key(&state) {
            return Err(Error::Mapping(format!(
                "state {state} missing from the K-process report"
            )));
        }
    }
    let dyn_total: f64 = mapping.iter().map(|(r, _)| dynamics.fractions[r]).sum();
    let k_total: f64 = mapping.iter().map(|(_, s)| k.fractions[s]).sum();
    let states = mapping
        .iter()
        .map(|&(rank, state)| {
            let dyn_fraction = dynamics.fractions[&rank] / dyn_total;
            let k_fraction = k.fractions[&state] / k_total;
            let (a, b) = (&dynamics.durations[&rank], &k.durations[&state]);
            StateComparison {
                rank,
                state,
                dyn_fraction,
                k_fraction,
                rel_diff: (dyn_fraction - k_fraction).abs() / k_fraction,
                durations_ks: (!a.is_empty() && !b.is_empty())
                    .then(|| ks_two_sample(a, b).ok())
                    .flatten(),
            }
        })
        .collect();
    let ranks: Vec<usize> = mapping.iter().map(|m| m.0).collect();
    let labels: Vec<usize> = mapping.iter().map(|m| m.1).collect();
    Ok(LimitComparison {
        states,
        dyn_uniformity: uniformity(dynamics, &ranks),
        k_uniformity: uniformity(k, &labels),
    })
}
