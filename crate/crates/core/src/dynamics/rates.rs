use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::Landscape;
use crate::stats::exponential;

/// Per-neighbor jump rates, stored as logarithms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub log_r1: f64,
    pub log_r2: f64,
}

impl Rates {
    pub fn r1(&self) -> f64 {
        self.log_r1.exp()
    }

    pub fn r2(&self) -> f64 {
        self.log_r2.exp()
    }
}

/// `r1 = e^{-β√N Ξ_σ}/N` towards each first-level neighbor and
/// `r2 = e^{-β√((1-a)N) Ξ⁽²⁾_σ}/N` towards each second-level neighbor.
pub fn rates<L: Landscape + ?Sized>(env: &L, sigma: u64) -> Rates {
    let d = env.derived();
    let n = d.n() as f64;
    let beta = d.beta();
    Rates {
        log_r1: -beta * n.sqrt() * env.xi(sigma) - n.ln(),
        log_r2: -beta * ((1.0 - d.params.a) * n).sqrt() * env.xi2(sigma) - n.ln(),
    }
}

/// `ln(μ_N(σ₁) - 1) = ln(N₂/N₁) + β√(aN) Ξ⁽¹⁾`.
pub fn log_mu_excess<L: Landscape + ?Sized>(env: &L, xi1: f64) -> f64 {
    let d = env.derived();
    (d.n2 as f64 / d.n1 as f64).ln() + d.beta() * (d.params.a * d.n() as f64).sqrt() * xi1
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `ln μ_N(σ₁)`, the log of the mean number of jumps per first-level sojourn.
pub fn log_mu<L: Landscape + ?Sized>(env: &L, xi1: f64) -> f64 {
    softplus(log_mu_excess(env, xi1))
}

/// Probability `1/μ_N(σ₁)` that a jump flips a first-level spin.
pub fn level1_prob<L: Landscape + ?Sized>(env: &L, xi1: f64) -> f64 {
    1.0 / (1.0 + log_mu_excess(env, xi1).exp())
}

/// `ln` of the mean holding time `(N/N₁) e^{β√N Ξ_σ} / μ_N(σ₁)`.
pub fn log_mean_holding<L: Landscape + ?Sized>(env: &L, sigma: u64) -> f64 {
    let d = env.derived();
    let n = d.n() as f64;
    let xi1 = env.xi1(env.sigma1_of(sigma));
    (n / d.n1 as f64).ln() + d.beta() * n.sqrt() * env.xi(sigma) - log_mu(env, xi1)
}

/// Configuration and clock of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynState {
    pub sigma: u64,
    pub t: f64,
}

/// One jump of the naive engine: exponential holding at the total exit
/// rate, then a level chosen in proportion to `N₁r1 : N₂r2` and a uniform
/// spin flip inside it.
pub fn step<L: Landscape + ?Sized, R: Rng + ?Sized>(
    env: &L,
    state: DynState,
    rng: &mut R,
) -> (DynState, f64) {
    let d = env.derived();
    let r = rates(env, state.sigma);
    let out1 = d.n1 as f64 * r.r1();
    let out2 = d.n2 as f64 * r.r2();
    let total = out1 + out2;
    let holding = exponential(rng, 1.0 / total);
    let sigma = if rng.random::<f64>() * total < out1 {
        state.sigma ^ (1u64 << (d.n2 + rng.random_range(0..d.n1)))
    } else {
        state.sigma ^ (1u64 << rng.random_range(0..d.n2))
    };
    (
        DynState {
            sigma,
            t: state.t + holding,
        },
        holding,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{DenseLandscape, EnergyOracle, EnvHook, ModelParams};
    use crate::stats::Summary;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dense(n: u32, beta: f64, seed: u64, hook: EnvHook) -> DenseLandscape {
        let o = EnergyOracle::new(ModelParams::new(n, 0.5, 0.2, beta, seed))
            .unwrap()
            .with_hook(hook);
        DenseLandscape::from_oracle(&o).unwrap()
    }

    #[test]
    fn flat_rates() {
        let env = dense(10, 1.5, 0, EnvHook::ZeroAll);
        let r = rates(&env, 123);
        assert_relative_eq!(r.r1(), 0.1, epsilon = 1e-15);
        assert_relative_eq!(r.r2(), 0.1, epsilon = 1e-15);
        assert_relative_eq!(log_mean_holding(&env, 123), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn exit_rate_and_level_choice_identities() {
        let env = dense(12, 1.4, 5, EnvHook::None);
        let d = *env.derived();
        for sigma in (0..4096).step_by(37) {
            let r = rates(&env, sigma);
            let xi1 = env.xi1(env.sigma1_of(sigma));
            let mu = log_mu(&env, xi1).exp();
            let total = d.n1 as f64 * r.r1() + d.n2 as f64 * r.r2();
            let want = d.n1 as f64 / 12.0 * (-1.4 * 12f64.sqrt() * env.xi(sigma)).exp() * mu;
            assert_relative_eq!(total, want, max_relative = 1e-12);
            assert_relative_eq!(
                d.n1 as f64 * r.r1() / total,
                level1_prob(&env, xi1),
                max_relative = 1e-12
            );
            assert_relative_eq!(log_mean_holding(&env, sigma), -total.ln(), epsilon = 1e-10);
        }
    }

    #[test]
    fn holding_and_level_frequencies() {
        let env = dense(8, 1.2, 3, EnvHook::None);
        let d = *env.derived();
        let sigma = 77;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 100_000;
        let mut holds = Vec::with_capacity(n);
        let mut level1 = 0usize;
        for _ in 0..n {
            let (next, h) = step(&env, DynState { sigma, t: 0.0 }, &mut rng);
            holds.push(h);
            assert_eq!((next.sigma ^ sigma).count_ones(), 1);
            if env.sigma1_of(next.sigma) != env.sigma1_of(sigma) {
                level1 += 1;
            }
        }
        let s = Summary::of(&holds);
        assert!((s.mean - log_mean_holding(&env, sigma).exp()).abs() < 3.0 * s.se);
        let q = level1_prob(&env, env.xi1(env.sigma1_of(sigma)));
        let freq = level1 as f64 / n as f64;
        assert!(
            (freq - q).abs() < 3.0 * (q * (1.0 - q) / n as f64).sqrt(),
            "{freq} vs {q}"
        );
        let _ = d;
    }
}
