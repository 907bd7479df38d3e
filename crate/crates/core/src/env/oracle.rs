use serde::{Deserialize, Serialize};

use super::normal::{open_unit, std_normal_quantile, stream_bits, stream_key};
use super::params::{derive, DerivedParams, ModelParams};
use crate::error::{Error, Result};

/// Test hooks that replace parts of the random environment by zeros.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum EnvHook {
    #[default]
    None,
    /// All second-level Gaussians are 0.
    ZeroLevel2,
    /// Every Gaussian is 0 (flat landscape).
    ZeroAll,
}

/// Read access to a 2-GREM environment.
///
/// Configurations are `u64` indices whose high `N1` bits hold the first-level
/// spins and whose low `N2` bits hold the second-level spins.
pub trait Landscape: Sync {
    fn derived(&self) -> &DerivedParams;

    /// First-level Gaussian `Ξ⁽¹⁾_{σ₁}`.
    fn xi1(&self, sigma1: u64) -> f64;

    /// Second-level Gaussian `Ξ⁽²⁾_{σ₁σ₂}` keyed by the full configuration.
    fn xi2(&self, sigma: u64) -> f64;

    /// `(√a, √(1-a))`.
    fn level_weights(&self) -> (f64, f64);

    fn xi(&self, sigma: u64) -> f64 {
        let (wa, wb) = self.level_weights();
        wa * self.xi1(self.sigma1_of(sigma)) + wb * self.xi2(sigma)
    }

    fn sigma1_of(&self, sigma: u64) -> u64 {
        sigma >> self.derived().n2
    }

    fn sigma2_of(&self, sigma: u64) -> u64 {
        sigma & (self.derived().level2_states() - 1)
    }

    fn compose(&self, sigma1: u64, sigma2: u64) -> u64 {
        (sigma1 << self.derived().n2) | sigma2
    }
}

const LEVEL1_TAG: u64 = 1;
const LEVEL2_TAG: u64 = 2;

/// Lazy, stateless 2-GREM environment.
///
/// Each Gaussian is recomputed on demand from `(seed, level, index)`; the
/// `2^N` energies are never stored. Cloning is cheap and instances are freely
/// shared between threads.
#[derive(Debug, Clone)]
pub struct EnergyOracle {
    derived: DerivedParams,
    hook: EnvHook,
    key1: u64,
    key2: u64,
    sqrt_a: f64,
    sqrt_1ma: f64,
}

impl EnergyOracle {
    pub fn new(params: ModelParams) -> Result<Self> {
        let derived = derive(params)?;
        Ok(Self::from_derived(derived))
    }

    pub fn from_derived(derived: DerivedParams) -> Self {
        let seed = derived.params.seed;
        EnergyOracle {
            derived,
            hook: EnvHook::None,
            key1: stream_key(seed, LEVEL1_TAG),
            key2: stream_key(seed, LEVEL2_TAG),
            sqrt_a: derived.params.a.sqrt(),
            sqrt_1ma: (1.0 - derived.params.a).sqrt(),
        }
    }

    pub fn with_hook(mut self, hook: EnvHook) -> Self {
        self.hook = hook;
        self
    }

    pub fn hook(&self) -> EnvHook {
        self.hook
    }

    pub fn params(&self) -> &ModelParams {
        &self.derived.params
    }

    /// The standard Gaussian at `(level, index)`; level 1 is indexed by `σ₁`,
    /// level 2 by the full configuration `σ₁σ₂`.
    pub fn gaussian(&self, level: u8, index: u64) -> Result<f64> {
        match level {
            1 if index < self.derived.level1_states() => Ok(self.xi1(index)),
            2 if index < self.derived.states() => Ok(self.xi2(index)),
            _ => Err(Error::IndexOutOfRange { level, index }),
        }
    }

    /// Raw uniform behind `Ξ⁽¹⁾_{σ₁}` (ignores hooks).
    #[inline(always)]
    pub(crate) fn uniform1(&self, sigma1: u64) -> f64 {
        open_unit(stream_bits(self.key1, sigma1))
    }

    /// Raw uniform behind `Ξ⁽²⁾_σ` (ignores hooks).
    #[inline(always)]
    pub(crate) fn uniform2(&self, sigma: u64) -> f64 {
        open_unit(stream_bits(self.key2, sigma))
    }
}

impl Landscape for EnergyOracle {
    fn derived(&self) -> &DerivedParams {
        &self.derived
    }

    #[inline]
    fn xi1(&self, sigma1: u64) -> f64 {
        match self.hook {
            EnvHook::ZeroAll => 0.0,
            _ => std_normal_quantile(self.uniform1(sigma1)),
        }
    }

    #[inline]
    fn xi2(&self, sigma: u64) -> f64 {
        match self.hook {
            EnvHook::None => std_normal_quantile(self.uniform2(sigma)),
            _ => 0.0,
        }
    }

    fn level_weights(&self) -> (f64, f64) {
        (self.sqrt_a, self.sqrt_1ma)
    }
}

/// Materialized copy of an oracle's energies, for small systems where the
/// dynamics revisits the same configurations many times.
#[derive(Debug, Clone)]
pub struct DenseLandscape {
    derived: DerivedParams,
    weights: (f64, f64),
    xi1: Vec<f64>,
    xi2: Vec<f64>,
}

impl DenseLandscape {
    pub const MAX_N: u32 = 24;

    pub fn from_oracle(oracle: &EnergyOracle) -> Result<Self> {
        let d = *oracle.derived();
        if d.n() > Self::MAX_N {
            return Err(Error::TooLarge {
                states: d.states(),
                max: 1 << Self::MAX_N,
            });
        }
        Ok(DenseLandscape {
            derived: d,
            weights: oracle.level_weights(),
            xi1: (0..d.level1_states()).map(|s| oracle.xi1(s)).collect(),
            xi2: (0..d.states()).map(|s| oracle.xi2(s)).collect(),
        })
    }
}

impl Landscape for DenseLandscape {
    fn derived(&self) -> &DerivedParams {
        &self.derived
    }

    #[inline(always)]
    fn xi1(&self, sigma1: u64) -> f64 {
        self.xi1[sigma1 as usize]
    }

    #[inline(always)]
    fn xi2(&self, sigma: u64) -> f64 {
        self.xi2[sigma as usize]
    }

    fn level_weights(&self) -> (f64, f64) {
        self.weights
    }
}
