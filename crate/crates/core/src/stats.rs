//! Small sample-statistics helpers shared by the verification suites.

use rand::Rng;
use serde::{Deserialize, Serialize};

/// Mean, unbiased variance and standard error of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub var: f64,
    pub se: f64,
}

impl Summary {
    pub fn of(xs: &[f64]) -> Summary {
        let n = xs.len();
        if n == 0 {
            return Summary {
                n,
                mean: f64::NAN,
                var: f64::NAN,
                se: f64::NAN,
            };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Summary {
            n,
            mean,
            var,
            se: (var / n as f64).sqrt(),
        }
    }

    pub fn sd(&self) -> f64 {
        self.var.sqrt()
    }
}

/// Pearson correlation.
pub fn correlation(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let (sx, sy) = (Summary::of(xs), Summary::of(ys));
    let cov = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (x - sx.mean) * (y - sy.mean))
        .sum::<f64>()
        / (xs.len() - 1) as f64;
    cov / (sx.sd() * sy.sd())
}

/// Ratio of means `Σf / Σr` with its delta-method standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioEstimate {
    pub ratio: f64,
    pub se: f64,
    pub n: usize,
}

impl RatioEstimate {
    pub fn of(num: &[f64], den: &[f64]) -> RatioEstimate {
        assert_eq!(num.len(), den.len());
        let n = num.len();
        let mean_den = den.iter().sum::<f64>() / n as f64;
        let ratio = num.iter().sum::<f64>() / den.iter().sum::<f64>();
        let resid: Vec<f64> = num.iter().zip(den).map(|(f, r)| f - ratio * r).collect();
        let s = Summary::of(&resid);
        RatioEstimate {
            ratio,
            se: s.se / mean_den,
            n,
        }
    }
}

/// Exponential variate with the given mean, by inversion.
#[inline]
pub fn exponential<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> f64 {
    -mean * (1.0 - rng.random::<f64>()).ln()
}

/// Geometric variate on `{1, 2, ...}` with success probability `q`, by inversion.
#[inline]
pub fn geometric<R: Rng + ?Sized>(rng: &mut R, q: f64) -> u64 {
    if q >= 1.0 {
        return 1;
    }
    let u = 1.0 - rng.random::<f64>();
    let g = 1.0 + (u.ln() / (-q).ln_1p()).floor();
    if g >= u64::MAX as f64 {
        u64::MAX
    } else {
        g as u64
    }
}
