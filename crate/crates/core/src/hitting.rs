//! Generating function of the time SRW on the hypercube needs to hit a
//! fixed vertex, with a birth-death oracle.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::env::DerivedParams;
use crate::error::{Error, Result};

/// Above this dimension the log-gamma sums are replaced by the reduced closed form.
pub const LOG_GAMMA_MAX_N: u32 = 60;
/// Largest dimension accepted by [`brute_force_gf`].
pub const BRUTE_FORCE_MAX_N: u32 = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KempermanInput {
    pub n: u32,
    pub q: f64,
    pub lambda: f64,
}

impl KempermanInput {
    pub fn new(n: u32, q: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParams(
                "hypercube dimension must be at least 1".into(),
            ));
        }
        if !(q > 0.0 && q <= 1.0) {
            return Err(Error::InvalidParams(format!(
                "q must lie in (0, 1], got {q}"
            )));
        }
        let lambda = if q == 1.0 {
            f64::INFINITY
        } else {
            0.5 * n as f64 * q / (1.0 - q)
        };
        Ok(KempermanInput { n, q, lambda })
    }
}

fn ln_binomial(n: u32, k: u32) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

fn log_sum_exp(terms: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = terms.collect();
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

/// `ln B_i(λ) = ln Σ_j C(n-i, j) Γ(i+1) Γ(λ+j) / Γ(λ+i+j+1)`.
fn ln_b(n: u32, i: u32, lambda: f64) -> f64 {
    let lg_i = ln_gamma(i as f64 + 1.0);
    log_sum_exp((0..=n - i).map(|j| {
        ln_binomial(n - i, j) + lg_i + ln_gamma(lambda + j as f64)
            - ln_gamma(lambda + (i + j) as f64 + 1.0)
    }))
}

/// `S = λ Σ_{i=1}^n C(n,i)/(i+λ)`, so that `λ B₀ = 1 + S`.
fn reduced_sum(n: u32, lambda: f64) -> f64 {
    (1..=n)
        .map(|i| (ln_binomial(n, i).exp()) / (1.0 + i as f64 / lambda))
        .sum()
}

/// `E[(1-q)^ϑ]` for a uniformly distributed start.
pub fn kemperman_gf(input: &KempermanInput) -> Result<f64> {
    let KempermanInput { n, q, lambda } = *input;
    if q >= 1.0 {
        return Ok((-(n as f64) * std::f64::consts::LN_2).exp());
    }
    if n > LOG_GAMMA_MAX_N {
        return Ok(1.0 / (1.0 + reduced_sum(n, lambda)));
    }
    let ln_num = log_sum_exp((0..=n).map(|i| ln_binomial(n, i) + ln_b(n, i, lambda)));
    let value = (ln_num - n as f64 * std::f64::consts::LN_2 - ln_b(n, 0, lambda)).exp();
    if !value.is_finite() {
        return Err(Error::Numerical(format!(
            "generating function overflow at n = {n}, q = {q}"
        )));
    }
    Ok(value.min(1.0))
}

/// Same quantity from the Hamming-distance birth-death chain.
pub fn brute_force_gf(n: u32, q: f64) -> Result<f64> {
    if n > BRUTE_FORCE_MAX_N {
        return Err(Error::TooLarge {
            states: 1 << n,
            max: 1 << BRUTE_FORCE_MAX_N,
        });
    }
    if n == 0 || !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidParams(format!(
            "need n >= 1 and q in (0, 1), got n = {n}, q = {q}"
        )));
    }
    let size = n as usize + 1;
    let nf = n as f64;
    let mut m = DMatrix::<f64>::zeros(size, size);
    let mut rhs = DVector::<f64>::zeros(size);
    m[(0, 0)] = 1.0;
    rhs[0] = 1.0;
    for d in 1..size {
        m[(d, d)] = 1.0;
        m[(d, d - 1)] = -(1.0 - q) * d as f64 / nf;
        if d + 1 < size {
            m[(d, d + 1)] = -(1.0 - q) * (nf - d as f64) / nf;
        }
    }
    let h = m
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical("singular distance-chain system".into()))?;
    Ok((0..size)
        .map(|d| (ln_binomial(n, d as u32) - nf * std::f64::consts::LN_2).exp() * h[d])
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DenominatorReport {
    /// `1 + λ Σ_{i=1}^n C(n,i)/(i+λ)`.
    pub exact: f64,
    /// `1 + λ 2^{n+1}/n`.
    pub approx: f64,
    pub rel_gap: f64,
}

pub fn denominator_asymptotic(n: u32, lambda: f64) -> Result<DenominatorReport> {
    if n < 2 {
        return Err(Error::InvalidParams(format!("need n >= 2, got {n}")));
    }
    if lambda.is_nan() || lambda < 0.0 {
        return Err(Error::InvalidParams(format!(
            "lambda must be nonnegative, got {lambda}"
        )));
    }
    let exact = 1.0
        + if lambda == 0.0 {
            0.0
        } else {
            reduced_sum(n, lambda)
        };
    let approx = 1.0 + lambda * 2f64.powi(n as i32 + 1) / n as f64;
    Ok(DenominatorReport {
        exact,
        approx,
        rel_gap: (approx - exact).abs() / exact,
    })
}

/// Probability that a first-level sojourn at field `xi1` ends before the
/// walk on the second level hits its target.
pub fn no_hit(d: &DerivedParams, xi1: f64) -> f64 {
    let ln_lambda = (d.n1 as f64 / 2.0).ln() - d.beta() * (d.params.a * d.n() as f64).sqrt() * xi1;
    let lambda = ln_lambda.exp();
    let s = reduced_sum(d.n2, lambda);
    s / (1.0 + s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub n: u32,
    pub q: f64,
    pub lambda: f64,
    /// Distance-chain value for `n ≤ 12`, reduced closed form above.
    pub gf_exact: f64,
    pub gf_formula: f64,
    pub rel_err: f64,
}

pub fn kemperman_grid(ns: &[u32], qs: &[f64]) -> Result<Vec<GridRow>> {
    let mut rows = Vec::with_capacity(ns.len() * qs.len());
    for &n in ns {
        for &q in qs {
            let input = KempermanInput::new(n, q)?;
            let gf_formula = kemperman_gf(&input)?;
            let gf_exact = if n <= BRUTE_FORCE_MAX_N && q < 1.0 {
                brute_force_gf(n, q)?
            } else {
                1.0 / (1.0 + reduced_sum(n, input.lambda))
            };
            rows.push(GridRow {
                n,
                q,
                lambda: input.lambda,
                gf_exact,
                gf_formula,
                rel_err: (gf_formula - gf_exact).abs() / gf_exact,
            });
        }
    }
    Ok(rows)
}

/// Writes rows as `n,q,lambda,gf_exact,gf_formula,rel_err`.
pub fn write_grid_csv<W: Write>(out: W, rows: &[GridRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
