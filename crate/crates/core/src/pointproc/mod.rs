//! Limiting point processes and goodness-of-fit tests.

pub mod fit;
mod ppp;
mod thm1;

pub use fit::{
    chi_square, exponential_fit, gumbel_cdf, gumbel_fit, kolmogorov_sf, ks_one_sample,
    ks_statistic, ks_two_sample, FitReport,
};
pub use ppp::{
    sample_ppp, to_gamma, to_gamma_alpha, truncation_bias, GammaPoints, PppSample, DEFAULT_XMIN,
};
pub use thm1::{thm1_suite, write_thm1_csv, Thm1Case, Thm1Report, MIN_REPLICAS};
