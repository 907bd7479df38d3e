use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported system size. Configurations are addressed by `u64`
/// indices with the first-level spins in the high bits.
pub const MAX_N: u32 = 40;

/// `sqrt(2 ln 2)`, the critical inverse temperature of the REM.
pub fn beta_star() -> f64 {
    (2.0 * std::f64::consts::LN_2).sqrt()
}

/// `ln ln 2 + ln 4π`, the constant in the extreme-value centering.
pub fn kappa() -> f64 {
    std::f64::consts::LN_2.ln() + (4.0 * std::f64::consts::PI).ln()
}

/// Model parameterization of the 2-GREM and its dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    #[serde(rename = "N")]
    pub n: u32,
    pub p: f64,
    pub a: f64,
    pub beta: f64,
    pub seed: u64,
}

impl ModelParams {
    pub fn new(n: u32, p: f64, a: f64, beta: f64, seed: u64) -> Self {
        ModelParams {
            n,
            p,
            a,
            beta,
            seed,
        }
    }

    /// Same landscape, different inverse temperature.
    pub fn with_beta(self, beta: f64) -> Self {
        ModelParams { beta, ..self }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        ModelParams { seed, ..self }
    }

    /// Number of first-level spins, `floor(pN)`.
    ///
    /// A relative slack of `1e-9` absorbs representation error in `p` (so that
    /// `p = 0.29, N = 100` gives 29 rather than 28).
    pub fn n1(&self) -> u32 {
        let raw = self.p * self.n as f64;
        (raw + 1e-9 * raw.abs().max(1.0)).floor() as u32
    }

    pub fn n2(&self) -> u32 {
        self.n.saturating_sub(self.n1())
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n > MAX_N {
            return Err(Error::InvalidParams(format!(
                "N must lie in 1..={MAX_N}, got {}",
                self.n
            )));
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(Error::InvalidParams(format!(
                "p must lie in (0,1), got {}",
                self.p
            )));
        }
        if !(self.a > 0.0 && self.a <= 1.0) {
            return Err(Error::InvalidParams(format!(
                "a must lie in (0,1], got {}",
                self.a
            )));
        }
        if self.a > self.p {
            return Err(Error::Cascading {
                a: self.a,
                p: self.p,
            });
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "beta must be positive, got {}",
                self.beta
            )));
        }
        let n1 = self.n1();
        if n1 == 0 || n1 >= self.n {
            return Err(Error::InvalidParams(format!(
                "N1 = floor(pN) = {n1} leaves an empty level (N = {})",
                self.n
            )));
        }
        Ok(())
    }

    /// True when the first-level weight equals the first-level fraction.
    pub fn is_critical(&self) -> bool {
        self.a == self.p
    }
}

/// Quantities derived once from [`ModelParams`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedParams {
    pub params: ModelParams,
    pub n1: u32,
    pub n2: u32,
    pub beta_star: f64,
    pub kappa: f64,
    /// `(1 - p) beta_* / (2a)`.
    pub bar_beta_ft: f64,
    /// `beta_* / beta`.
    pub alpha: f64,
    pub low_temp: bool,
    pub ft_visible: bool,
}

impl DerivedParams {
    pub fn n(&self) -> u32 {
        self.params.n
    }

    pub fn beta(&self) -> f64 {
        self.params.beta
    }

    pub fn sqrt_n(&self) -> f64 {
        (self.params.n as f64).sqrt()
    }

    /// Number of configurations `2^N`.
    pub fn states(&self) -> u64 {
        1u64 << self.params.n
    }

    pub fn level1_states(&self) -> u64 {
        1u64 << self.n1
    }

    pub fn level2_states(&self) -> u64 {
        1u64 << self.n2
    }
}

/// Validates `params` and computes the derived constants.
pub fn derive(params: ModelParams) -> Result<DerivedParams> {
    params.validate()?;
    let beta_star = beta_star();
    let bar_beta_ft = (1.0 - params.p) * beta_star / (2.0 * params.a);
    Ok(DerivedParams {
        params,
        n1: params.n1(),
        n2: params.n2(),
        beta_star,
        kappa: kappa(),
        bar_beta_ft,
        alpha: beta_star / params.beta,
        low_temp: params.beta > beta_star,
        ft_visible: bar_beta_ft > beta_star,
    })
}
