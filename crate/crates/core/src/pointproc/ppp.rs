use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::DerivedParams;
use crate::error::{Error, Result};
use crate::stats::exponential;

/// Default truncation floor for `K ≤ 1`.
pub const DEFAULT_XMIN: f64 = -10.0;

/// Realization of the Poisson process with intensity `K e^{-x} dx` on `(xmin, ∞)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PppSample {
    /// Strictly decreasing.
    pub points: Vec<f64>,
    #[serde(rename = "K")]
    pub k: f64,
    pub xmin: f64,
}

impl PppSample {
    pub fn max(&self) -> Option<f64> {
        self.points.first().copied()
    }

    pub fn count_above(&self, x: f64) -> usize {
        self.points.partition_point(|&p| p > x)
    }

    /// `e^{-ξ_1}, e^{-ξ_2} - e^{-ξ_1}, ...`: iid exponentials of rate `K`.
    pub fn transformed_gaps(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.points
            .iter()
            .map(|&x| {
                let y = (-x).exp();
                let gap = y - prev;
                prev = y;
                gap
            })
            .collect()
    }
}

/// Samples the points above `xmin` as `ξ_i = -ln(T_i / K)` for unit-rate
/// Poisson arrival times `T_i`.
pub fn sample_ppp<R: Rng + ?Sized>(k: f64, xmin: f64, rng: &mut R) -> Result<PppSample> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::InvalidParams(format!("K must be positive, got {k}")));
    }
    if !xmin.is_finite() {
        return Err(Error::InvalidParams(format!(
            "xmin must be finite, got {xmin}"
        )));
    }
    let ln_k = k.ln();
    let mut points = Vec::new();
    let mut t = 0.0;
    loop {
        t += exponential(rng, 1.0);
        let x = ln_k - t.ln();
        if x <= xmin {
            break;
        }
        // arrival times are strictly increasing except for a zero exponential draw
        if points.last().is_some_and(|&last| x >= last) {
            continue;
        }
        points.push(x);
    }
    Ok(PppSample { points, k, xmin })
}

/// Image of a sample under `x ↦ e^{(β/β_*) x}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaPoints {
    /// Decreasing.
    pub values: Vec<f64>,
    pub alpha: f64,
    /// `α < 1`, i.e. the full sum is almost surely finite.
    pub summable: bool,
}

impl GammaPoints {
    /// `tails[m] = Σ_{i>m} γ_i` for `m = 0..=len`.
    pub fn tail_sums(&self) -> Result<Vec<f64>> {
        if !self.summable {
            return Err(Error::InvalidParams(format!(
                "tail sums need alpha < 1, got {}",
                self.alpha
            )));
        }
        let mut tails = vec![0.0; self.values.len() + 1];
        for m in (0..self.values.len()).rev() {
            tails[m] = tails[m + 1] + self.values[m];
        }
        Ok(tails)
    }

    pub fn count_above(&self, y: f64) -> usize {
        self.values.partition_point(|&g| g > y)
    }
}

/// Maps PPP points to `γ_i = e^{(β/β_*) ξ_i}`. The mapping itself is valid at
/// any temperature; `summable` is false when `β ≤ β_*`.
pub fn to_gamma(sample: &PppSample, d: &DerivedParams) -> GammaPoints {
    to_gamma_alpha(sample, d.beta_star / d.beta())
}

/// Maps PPP points to `γ_i = e^{ξ_i / α}`.
pub fn to_gamma_alpha(sample: &PppSample, alpha: f64) -> GammaPoints {
    GammaPoints {
        values: sample.points.iter().map(|&x| (x / alpha).exp()).collect(),
        alpha,
        summable: alpha < 1.0,
    }
}

/// Expected mass `E Σ_{ξ_i ≤ xmin} γ_i = K α/(1-α) e^{xmin (1/α - 1)}` lost by truncation.
pub fn truncation_bias(k: f64, xmin: f64, alpha: f64) -> f64 {
    if alpha >= 1.0 {
        return f64::INFINITY;
    }
    k * alpha / (1.0 - alpha) * (xmin * (1.0 / alpha - 1.0)).exp()
}
