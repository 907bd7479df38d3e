use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

/// Outcome of a goodness-of-fit test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
    pub target: String,
}

impl FitReport {
    pub fn passes(&self, level: f64) -> bool {
        self.p_value > level
    }
}

/// Survival function of the Kolmogorov distribution, `P[K > λ]`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 0.2 {
        // the alternating series converges slowly here and the value is 1 to double precision
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Asymptotic p-value with Stephens' finite-sample correction.
fn ks_p_value(d: f64, effective_n: f64) -> f64 {
    let en = effective_n.sqrt();
    kolmogorov_sf((en + 0.12 + 0.11 / en) * d)
}

/// Sup distance between the empirical CDF of `samples` and `cdf`.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter().enumerate().fold(0.0f64, |acc, (i, &x)| {
        let f = cdf(x);
        acc.max(f - i as f64 / n).max((i + 1) as f64 / n - f)
    })
}

/// One-sample Kolmogorov-Smirnov test.
pub fn ks_one_sample<F: Fn(f64) -> f64>(
    samples: &[f64],
    cdf: F,
    target: impl Into<String>,
) -> Result<FitReport> {
    if samples.is_empty() {
        return Err(Error::InsufficientSample { need: 1, got: 0 });
    }
    let d = ks_statistic(samples, cdf);
    Ok(FitReport {
        statistic: d,
        p_value: ks_p_value(d, samples.len() as f64),
        n: samples.len(),
        target: target.into(),
    })
}

/// Two-sample Kolmogorov-Smirnov test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<FitReport> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InsufficientSample {
            need: 1,
            got: a.len().min(b.len()),
        });
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (n, m) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < xs.len() && j < ys.len() {
        let x = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] <= x {
            i += 1;
        }
        while j < ys.len() && ys[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    Ok(FitReport {
        statistic: d,
        p_value: ks_p_value(d, n * m / (n + m)),
        n: xs.len() + ys.len(),
        target: "two-sample".into(),
    })
}

/// Pearson chi-square test of observed counts against expected counts.
/// `constraints` is the number of fitted quantities subtracted from the
/// degrees of freedom in addition to the total.
pub fn chi_square(
    observed: &[f64],
    expected: &[f64],
    constraints: usize,
    target: impl Into<String>,
) -> Result<FitReport> {
    if observed.len() != expected.len() || observed.len() < 2 + constraints {
        return Err(Error::InsufficientSample {
            need: 2 + constraints,
            got: observed.len(),
        });
    }
    let stat: f64 = observed
        .iter()
        .zip(expected)
        .map(|(o, e)| (o - e) * (o - e) / e)
        .sum();
    let dof = (observed.len() - 1 - constraints) as f64;
    let dist = ChiSquared::new(dof).map_err(|e| Error::Numerical(e.to_string()))?;
    Ok(FitReport {
        statistic: stat,
        p_value: dist.sf(stat),
        n: observed.iter().sum::<f64>() as usize,
        target: target.into(),
    })
}

/// Gumbel CDF with intensity multiplier `k`: `exp(-k e^{-x})`.
pub fn gumbel_cdf(x: f64, k: f64) -> f64 {
    (-k * (-x).exp()).exp()
}

/// KS test of `samples` against `exp(-K e^{-x})`.
pub fn gumbel_fit(samples: &[f64], k: f64) -> Result<FitReport> {
    if samples.is_empty() {
        return Err(Error::InsufficientSample { need: 50, got: 0 });
    }
    if samples.len() < 50 {
        return Err(Error::InsufficientSample {
            need: 50,
            got: samples.len(),
        });
    }
    ks_one_sample(samples, |x| gumbel_cdf(x, k), format!("gumbel(K={k})"))
}

/// KS test against an exponential law with the given mean.
pub fn exponential_fit(samples: &[f64], mean: f64) -> Result<FitReport> {
    ks_one_sample(
        samples,
        |x| if x <= 0.0 { 0.0 } else { -(-x / mean).exp_m1() },
        format!("exponential(mean={mean})"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gumbel_draws(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n)
            .map(|_| -(-(1.0 - rng.random::<f64>()).ln()).ln())
            .collect()
    }

    #[test]
    fn kolmogorov_reference_values() {
        // classical critical values of the limiting distribution
        assert!((kolmogorov_sf(1.358) - 0.05).abs() < 5e-4);
        assert!((kolmogorov_sf(1.628) - 0.01).abs() < 2e-4);
        assert_eq!(kolmogorov_sf(0.0), 1.0);
        assert!(kolmogorov_sf(5.0) < 1e-20);
    }

    #[test]
    fn gumbel_fit_is_calibrated_under_the_null() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let ps: Vec<f64> = (0..200)
            .map(|_| {
                gumbel_fit(&gumbel_draws(&mut rng, 500), 1.0)
                    .unwrap()
                    .p_value
            })
            .collect();
        let uniform = ks_one_sample(&ps, |p| p.clamp(0.0, 1.0), "uniform").unwrap();
        assert!(uniform.passes(0.01), "{uniform:?}");
    }

    #[test]
    fn gumbel_fit_rejects_unit_shift() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let shifted: Vec<f64> = gumbel_draws(&mut rng, 10_000)
            .into_iter()
            .map(|x| x + 1.0)
            .collect();
        let r = gumbel_fit(&shifted, 1.0).unwrap();
        // sup_x |G(x) - G(x-1)| for the standard Gumbel law
        let analytic = (0..20_000)
            .map(|i| -10.0 + i as f64 * 1e-3)
            .map(|x| gumbel_cdf(x, 1.0) - gumbel_cdf(x - 1.0, 1.0))
            .fold(0.0f64, f64::max);
        assert!(analytic > 0.3);
        assert!((r.statistic - analytic).abs() < 0.03);
        assert!(r.statistic >= 0.3 && r.p_value < 1e-10);
    }

    #[test]
    fn gumbel_fit_is_permutation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let xs = gumbel_draws(&mut rng, 300);
        let mut rev = xs.clone();
        rev.reverse();
        assert_eq!(
            gumbel_fit(&xs, 1.0).unwrap(),
            gumbel_fit(&rev, 1.0).unwrap()
        );
    }

    #[test]
    fn gumbel_fit_needs_fifty() {
        assert!(gumbel_fit(&[], 1.0).is_err());
        assert!(gumbel_fit(&[0.0; 49], 1.0).is_err());
    }

    #[test]
    fn two_sample_identical_is_zero() {
        let xs = [0.3, 0.1, 0.7, 0.2];
        let r = ks_two_sample(&xs, &xs).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn chi_square_perfect_fit() {
        let r = chi_square(&[10.0, 20.0, 30.0], &[10.0, 20.0, 30.0], 0, "exact").unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!((r.p_value - 1.0).abs() < 1e-12);
    }
}
